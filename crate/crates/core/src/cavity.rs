//! Whispering-gallery cavity: evanescent coupling to the beam, intracavity
//! photon number and the static equilibrium of the driven beam.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{ensure, Result};
use crate::numerics::roots::bisect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    /// λ_c (m).
    pub wavelength: f64,
    /// n_c.
    pub refractive_index: f64,
    /// n_en.
    pub environment_index: f64,
    /// R_c (m).
    pub radius: f64,
    /// L_c (m).
    pub circumference: f64,
    /// V_c (m³).
    pub mode_volume: f64,
    /// κ_e (rad/s).
    pub kappa_e: f64,
    /// κ_i (rad/s).
    pub kappa_i: f64,
    /// Beam centre to cavity rim (m).
    pub gap: f64,
}

impl CavitySpec {
    pub fn validate(&self) -> Result<()> {
        ensure(self.wavelength > 0.0, || {
            format!("wavelength must be > 0, got {}", self.wavelength)
        })?;
        ensure(self.environment_index > 0.0, || {
            format!(
                "environment index must be > 0, got {}",
                self.environment_index
            )
        })?;
        ensure(self.refractive_index > self.environment_index, || {
            format!(
                "no evanescent confinement: n_c = {} must exceed n_en = {}",
                self.refractive_index, self.environment_index
            )
        })?;
        ensure(self.radius > 0.0, || {
            format!("cavity radius must be > 0, got {}", self.radius)
        })?;
        ensure(self.circumference > 0.0, || {
            format!("circumference must be > 0, got {}", self.circumference)
        })?;
        ensure(self.mode_volume > 0.0, || {
            format!("mode volume must be > 0, got {}", self.mode_volume)
        })?;
        ensure(self.kappa_e >= 0.0 && self.kappa_i >= 0.0, || {
            format!(
                "decay rates must be >= 0, got κ_e = {}, κ_i = {}",
                self.kappa_e, self.kappa_i
            )
        })?;
        ensure(self.kappa() > 0.0, || {
            "total decay rate κ must be > 0".into()
        })?;
        ensure(self.gap > 0.0, || {
            format!("gap must be > 0, got {}", self.gap)
        })?;
        Ok(())
    }

    /// κ = κ_e + κ_i.
    pub fn kappa(&self) -> f64 {
        self.kappa_e + self.kappa_i
    }

    /// ω_c = 2πc/λ_c.
    pub fn optical_frequency(&self, constants: &PhysicalConstants) -> f64 {
        2.0 * PI * constants.c() / self.wavelength
    }

    /// √(n_c² − n_en²).
    fn index_contrast(&self) -> f64 {
        (self.refractive_index.powi(2) - self.environment_index.powi(2)).sqrt()
    }
}

/// k⊥ = √(n_c² − n_en²)·2π/λ_c.
pub fn perpendicular_wavenumber(spec: &CavitySpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.index_contrast() * 2.0 * PI / spec.wavelength)
}

/// Evanescent decay length 1/k⊥ (m).
pub fn decay_length(spec: &CavitySpec) -> Result<f64> {
    Ok(1.0 / perpendicular_wavenumber(spec)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSource {
    Formula,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    pub k_perp: f64,
    /// Field-profile prefactor ζ = 0.42λ_c/(R_c√(n_c² − n_en²)).
    pub zeta_field: f64,
    /// Misalignment correction A_c = 0.17[k⊥(d + R_c)]^(−1/2).
    pub correction: f64,
    /// g₀ (rad/s per m).
    pub g0: f64,
    pub source: CouplingSource,
}

impl CouplingResult {
    /// Keeps the geometric factors of `spec` but replaces g₀.
    pub fn overridden(spec: &CavitySpec, g0: f64) -> Result<Self> {
        ensure(g0.is_finite() && g0 >= 0.0, || {
            format!("g0 override must be finite and >= 0, got {g0}")
        })?;
        let (k_perp, zeta_field, correction) = geometry(spec)?;
        Ok(Self {
            k_perp,
            zeta_field,
            correction,
            g0,
            source: CouplingSource::Override,
        })
    }
}

fn geometry(spec: &CavitySpec) -> Result<(f64, f64, f64)> {
    let k_perp = perpendicular_wavenumber(spec)?;
    let zeta_field = 0.42 * spec.wavelength / (spec.radius * spec.index_contrast());
    let correction = 0.17 / (k_perp * (spec.gap + spec.radius)).sqrt();
    Ok((k_perp, zeta_field, correction))
}

/// g₀ = ω_c α∥ k⊥ ζ² e^(−2k⊥d) A_c / (n_c² ε₀ V_c). The perpendicular
/// polarizability does not contribute.
pub fn coupling_rate(
    spec: &CavitySpec,
    alpha_parallel: f64,
    constants: &PhysicalConstants,
) -> Result<CouplingResult> {
    ensure(alpha_parallel > 0.0, || {
        format!("alpha_parallel must be > 0, got {alpha_parallel}")
    })?;
    let (k_perp, zeta_field, correction) = geometry(spec)?;
    let g0 = spec.optical_frequency(constants) * alpha_parallel * k_perp * zeta_field.powi(2)
        / (spec.refractive_index.powi(2) * constants.epsilon_0() * spec.mode_volume)
        * (-2.0 * k_perp * spec.gap).exp()
        * correction;
    Ok(CouplingResult {
        k_perp,
        zeta_field,
        correction,
        g0,
        source: CouplingSource::Formula,
    })
}

/// Input amplitude ε = √(P/ħω) in √(photons/s) for a beam of `power` (W) at
/// vacuum wavelength `wavelength` (m).
pub fn input_amplitude(power: f64, wavelength: f64, constants: &PhysicalConstants) -> Result<f64> {
    ensure(power >= 0.0, || format!("power must be >= 0, got {power}"))?;
    ensure(wavelength > 0.0, || {
        format!("wavelength must be > 0, got {wavelength}")
    })?;
    let omega = 2.0 * PI * constants.c() / wavelength;
    Ok((power / (constants.hbar() * omega)).sqrt())
}

/// Steady intracavity photon number n_d = 4κ_e ε_l²/(κ² + 4Δ²).
pub fn photon_number(spec: &CavitySpec, pump_amplitude: f64, detuning: f64) -> Result<f64> {
    ensure(spec.kappa() > 0.0, || {
        "total decay rate κ must be > 0".into()
    })?;
    photon_number_for_rates(spec.kappa_e, spec.kappa(), pump_amplitude, detuning)
}

/// [`photon_number`] from the decay rates alone.
pub fn photon_number_for_rates(
    kappa_e: f64,
    kappa: f64,
    pump_amplitude: f64,
    detuning: f64,
) -> Result<f64> {
    ensure(pump_amplitude >= 0.0, || {
        format!("pump amplitude must be >= 0, got {pump_amplitude}")
    })?;
    Ok(4.0 * kappa_e * pump_amplitude.powi(2) / (kappa * kappa + 4.0 * detuning * detuning))
}

/// Probe amplitude that places `photons` probe photons in a resonantly
/// driven cavity: inverts n_p = 4κ_e ε_p²/κ².
pub fn probe_amplitude_for_photons(spec: &CavitySpec, photons: f64) -> Result<f64> {
    ensure(photons >= 0.0, || {
        format!("probe photon number must be >= 0, got {photons}")
    })?;
    ensure(spec.kappa_e > 0.0, || {
        "κ_e must be > 0 to drive the cavity".into()
    })?;
    Ok((photons * spec.kappa().powi(2) / (4.0 * spec.kappa_e)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumShift {
    /// x₀ (m).
    pub x0: f64,
    /// Bare detuning Δ₀ = ω_l − ω_c (rad/s).
    pub bare_detuning: f64,
    /// Effective detuning Δ = Δ₀ − g₀x₀ (rad/s).
    pub effective_detuning: f64,
}

/// Static displacement under radiation pressure and the static force:
/// x₀ = (F̄₀ − ħg₀n_d)/(mΩ_m²).
pub fn equilibrium_displacement(
    hbar: f64,
    mass: f64,
    omega_m: f64,
    g0: f64,
    n_d: f64,
    static_force: f64,
) -> f64 {
    (static_force - hbar * g0 * n_d) / (mass * omega_m * omega_m)
}

/// Equilibrium for a known effective detuning; the bare detuning follows.
pub fn equilibrium_shift(
    hbar: f64,
    mass: f64,
    omega_m: f64,
    g0: f64,
    n_d: f64,
    static_force: f64,
    effective_detuning: f64,
) -> EquilibriumShift {
    let x0 = equilibrium_displacement(hbar, mass, omega_m, g0, n_d, static_force);
    EquilibriumShift {
        x0,
        bare_detuning: effective_detuning + g0 * x0,
        effective_detuning,
    }
}

/// Static mechanical parameters entering the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticLoad {
    pub hbar: f64,
    pub mass: f64,
    pub omega_m: f64,
    pub g0: f64,
    pub static_force: f64,
}

/// Self-consistent equilibrium for a given bare detuning: solves
/// Δ = Δ₀ − g₀x₀(n_d(Δ)). With optical bistability this returns one of the
/// coexisting branches.
pub fn solve_effective_detuning(
    spec: &CavitySpec,
    load: &StaticLoad,
    pump_amplitude: f64,
    bare_detuning: f64,
) -> Result<EquilibriumShift> {
    spec.validate()?;
    solve_effective_detuning_for_rates(
        spec.kappa_e,
        spec.kappa(),
        load,
        pump_amplitude,
        bare_detuning,
    )
}

/// [`solve_effective_detuning`] from the decay rates alone.
pub fn solve_effective_detuning_for_rates(
    kappa_e: f64,
    kappa: f64,
    load: &StaticLoad,
    pump_amplitude: f64,
    bare_detuning: f64,
) -> Result<EquilibriumShift> {
    let StaticLoad {
        hbar,
        mass,
        omega_m,
        g0,
        static_force,
    } = *load;
    ensure(mass > 0.0 && omega_m > 0.0, || {
        "mass and Ω_m must be > 0".into()
    })?;
    ensure(kappa > 0.0, || "total decay rate κ must be > 0".into())?;
    let stiffness = mass * omega_m * omega_m;
    let n_max = photon_number_for_rates(kappa_e, kappa, pump_amplitude, 0.0)?;
    let n_at =
        |delta: f64| 4.0 * kappa_e * pump_amplitude.powi(2) / (kappa * kappa + 4.0 * delta * delta);
    // Δ − Δ₀ + g₀x₀ is increasing at both ends of this bracket
    let lo = bare_detuning - g0 * static_force / stiffness;
    let hi = lo + hbar * g0 * g0 * n_max / stiffness;
    let residual = |delta: f64| {
        delta - bare_detuning
            + g0 * equilibrium_displacement(hbar, mass, omega_m, g0, n_at(delta), static_force)
    };
    let delta = if hi > lo {
        let tol = 1e-15 * lo.abs().max(hi.abs()).max(kappa);
        bisect(residual, lo, hi, tol)?
    } else {
        lo
    };
    let x0 = equilibrium_displacement(hbar, mass, omega_m, g0, n_at(delta), static_force);
    Ok(EquilibriumShift {
        x0,
        bare_detuning,
        effective_detuning: delta,
    })
}
