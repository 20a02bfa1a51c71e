use serde::{Deserialize, Serialize};

/// Fundamental constants (CODATA 2018 exact or recommended values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    hbar: f64,
    epsilon_0: f64,
    k_b: f64,
    c: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
        hbar: 1.054_571_817e-34,
        epsilon_0: 8.854_187_812_8e-12,
        k_b: 1.380_649e-23,
        c: 299_792_458.0,
    };

    /// Reduced Planck constant (J s).
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Vacuum permittivity (F/m).
    pub fn epsilon_0(&self) -> f64 {
        self.epsilon_0
    }

    /// Boltzmann constant (J/K).
    pub fn k_b(&self) -> f64 {
        self.k_b
    }

    /// Speed of light in vacuum (m/s).
    pub fn c(&self) -> f64 {
        self.c
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}
