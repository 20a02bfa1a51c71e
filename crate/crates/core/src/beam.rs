//! Clamped-clamped Euler-Bernoulli beam modes of a microtubule.
//!
//! Mode shapes are normalised to unit peak deflection, so the modal
//! coordinate `X_n` is the largest transverse displacement along the beam and
//! `m_n = μ L ∫₀¹ ψ_n(u)² du`. With that convention the fundamental mode
//! carries `m_1 ≈ 0.3965 μL`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{ensure, invalid, Result};
use crate::numerics::quadrature::adaptive_simpson;
use crate::numerics::roots::{bisect, newton_polish};

/// Mechanical loss, given either as a rate or as a quality factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    /// Energy damping rate γ_M (rad/s).
    Rate(f64),
    /// Q_m = Ω_m / γ_M.
    QualityFactor(f64),
}

impl Damping {
    /// Damping rate at mechanical frequency `omega_m`.
    pub fn rate(&self, omega_m: f64) -> f64 {
        match *self {
            Damping::Rate(g) => g,
            Damping::QualityFactor(q) => omega_m / q,
        }
    }

    pub fn quality_factor(&self, omega_m: f64) -> f64 {
        match *self {
            Damping::Rate(g) => omega_m / g,
            Damping::QualityFactor(q) => q,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrotubuleSpec {
    pub length: f64,
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub young_modulus: f64,
    pub linear_mass_density: f64,
    pub damping: Damping,
    /// Bending-to-compression ratio σ; defaults to `outer_radius / √2`.
    pub gyration_radius: Option<f64>,
}

impl MicrotubuleSpec {
    pub fn new(
        length: f64,
        outer_radius: f64,
        inner_radius: f64,
        young_modulus: f64,
        linear_mass_density: f64,
        damping: Damping,
    ) -> Result<Self> {
        let spec = Self {
            length,
            outer_radius,
            inner_radius,
            young_modulus,
            linear_mass_density,
            damping,
            gyration_radius: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_gyration_radius(mut self, sigma: f64) -> Result<Self> {
        self.gyration_radius = Some(sigma);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.length > 0.0 && self.length.is_finite(), || {
            format!("microtubule length must be > 0, got {}", self.length)
        })?;
        ensure(
            self.inner_radius >= 0.0 && self.inner_radius < self.outer_radius,
            || {
                format!(
                    "radii must satisfy 0 <= inner < outer, got inner = {}, outer = {}",
                    self.inner_radius, self.outer_radius
                )
            },
        )?;
        ensure(self.young_modulus > 0.0, || {
            format!("Young modulus must be > 0, got {}", self.young_modulus)
        })?;
        ensure(self.linear_mass_density > 0.0, || {
            format!(
                "linear mass density must be > 0, got {}",
                self.linear_mass_density
            )
        })?;
        match self.damping {
            Damping::Rate(g) => ensure(g > 0.0, || format!("damping rate must be > 0, got {g}"))?,
            Damping::QualityFactor(q) => {
                ensure(q > 0.0, || format!("quality factor must be > 0, got {q}"))?
            }
        }
        if let Some(s) = self.gyration_radius {
            ensure(s > 0.0, || {
                format!("gyration radius override must be > 0, got {s}")
            })?;
        }
        Ok(())
    }

    /// Cross-section area π(r_o² − r_i²).
    pub fn area(&self) -> f64 {
        PI * (self.outer_radius.powi(2) - self.inner_radius.powi(2))
    }

    pub fn gyration_radius(&self) -> f64 {
        self.gyration_radius
            .unwrap_or(self.outer_radius / std::f64::consts::SQRT_2)
    }

    /// Angular frequency of the mode with eigenvalue `zeta` at this length.
    pub fn angular_frequency(&self, zeta: f64) -> f64 {
        self.angular_frequency_at_length(zeta, self.length)
    }

    fn angular_frequency_at_length(&self, zeta: f64, length: f64) -> f64 {
        self.gyration_radius()
            * (self.young_modulus * self.area() / self.linear_mass_density).sqrt()
            * (zeta / length).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeData {
    pub index: usize,
    pub eigenvalue: f64,
    /// Divisor turning the bracketed mode expression into a unit-peak shape.
    pub normalization: f64,
    pub effective_mass: f64,
    pub angular_frequency: f64,
    pub zero_point_amplitude: f64,
}

/// `cos ζ cosh ζ − 1`.
pub fn clamped_residual(zeta: f64) -> f64 {
    zeta.cos() * zeta.cosh() - 1.0
}

/// `cos ζ − sech ζ`: same roots as [`clamped_residual`], but O(1) in size,
/// so it stays well conditioned for large ζ.
pub fn scaled_residual(zeta: f64) -> f64 {
    zeta.cos() - 1.0 / zeta.cosh()
}

fn scaled_residual_derivative(zeta: f64) -> f64 {
    -zeta.sin() + zeta.tanh() / zeta.cosh()
}

/// First `count` positive roots of `cos ζ cosh ζ = 1`, ascending.
pub fn solve_eigenvalues(count: usize) -> Result<Vec<f64>> {
    ensure(count >= 1, || "eigenvalue count must be >= 1".to_string())?;
    (1..=count)
        .map(|n| {
            let lo = (n as f64 + 0.25) * PI;
            let hi = (n as f64 + 0.75) * PI;
            let root = bisect(scaled_residual, lo, hi, 1e-12)?;
            Ok(newton_polish(
                scaled_residual,
                scaled_residual_derivative,
                root,
                lo,
                hi,
            ))
        })
        .collect()
}

/// The un-normalised mode expression at `u = x/L`. Only the half nearer to
/// `u = 0` is evaluated directly; the other half follows from the mode's
/// parity, so the large hyperbolic terms never cancel against each other.
pub(crate) fn mode_bracket(zeta: f64, u: f64) -> f64 {
    if u > 0.5 {
        parity(zeta) * half_shape(zeta, 1.0 - u)
    } else {
        half_shape(zeta, u)
    }
}

/// +1 for modes symmetric about midspan (odd index), −1 otherwise.
fn parity(zeta: f64) -> f64 {
    if ((zeta / PI - 0.5).round() as i64) % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// cosh ζu − cos ζu − σ(sinh ζu − sin ζu) with σ = (cosh ζ − cos ζ)/(sinh ζ − sin ζ),
/// arranged so that the growing exponential carries the small factor 1 − σ.
fn half_shape(zeta: f64, u: f64) -> f64 {
    let em = (-zeta).exp();
    // (sinh ζ − sin ζ)·2e^(−ζ)
    let den = 1.0 - em * em - 2.0 * zeta.sin() * em;
    let one_minus_sigma = 2.0 * em * (zeta.cos() - zeta.sin() - em) / den;
    let sigma = 1.0 - one_minus_sigma;
    let x = zeta * u;
    0.5 * (one_minus_sigma * x.exp() + (1.0 + sigma) * (-x).exp()) - x.cos() + sigma * x.sin()
}

/// Signed peak of the bracketed expression; dividing by it gives
/// `max ψ_n = 1` with a positive peak.
pub fn mode_normalization(zeta: f64) -> f64 {
    const SAMPLES: usize = 4096;
    let (mut best_u, mut best) = (0.5, 0.0f64);
    for i in 0..=SAMPLES {
        let u = i as f64 / SAMPLES as f64;
        let v = mode_bracket(zeta, u);
        if v.abs() > best.abs() {
            best = v;
            best_u = u;
        }
    }
    // Golden-section refinement of |bracket| around the best sample.
    let h = 1.0 / SAMPLES as f64;
    let (mut a, mut b) = ((best_u - h).max(0.0), (best_u + h).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let obj = |u: f64| -mode_bracket(zeta, u).abs();
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if obj(c) < obj(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let refined = mode_bracket(zeta, 0.5 * (a + b));
    if refined.abs() >= best.abs() {
        refined
    } else {
        best
    }
}

/// Mode shape ψ_n at `x_over_l ∈ [0, 1]`.
pub fn mode_shape(zeta: f64, normalization: f64, x_over_l: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x_over_l) {
        return Err(invalid(format!("x/L must lie in [0, 1], got {x_over_l}")));
    }
    Ok(mode_bracket(zeta, x_over_l) / normalization)
}

/// `∫₀¹ ψ_m ψ_n du` for unit-peak modes with the given eigenvalues.
pub fn mode_overlap(zeta_m: f64, zeta_n: f64) -> f64 {
    let cm = mode_normalization(zeta_m);
    let cn = mode_normalization(zeta_n);
    adaptive_simpson(
        |u| mode_bracket(zeta_m, u) * mode_bracket(zeta_n, u) / (cm * cn),
        0.0,
        1.0,
        1e-12,
    )
}

/// `m_n / (μ L) = ∫₀¹ ψ_n² du`.
pub fn effective_mass_ratio(zeta: f64) -> f64 {
    mode_overlap(zeta, zeta)
}

pub fn zero_point_amplitude(hbar: f64, mass: f64, angular_frequency: f64) -> f64 {
    (hbar / (2.0 * mass * angular_frequency)).sqrt()
}

pub fn compute_mode(
    spec: &MicrotubuleSpec,
    constants: &PhysicalConstants,
    n: usize,
) -> Result<ModeData> {
    spec.validate()?;
    ensure(n >= 1, || "mode index must be >= 1".to_string())?;
    let zeta = *solve_eigenvalues(n)?.last().expect("n >= 1");
    let normalization = mode_normalization(zeta);
    let effective_mass = spec.linear_mass_density * spec.length * effective_mass_ratio(zeta);
    let angular_frequency = spec.angular_frequency(zeta);
    Ok(ModeData {
        index: n,
        eigenvalue: zeta,
        normalization,
        effective_mass,
        angular_frequency,
        zero_point_amplitude: zero_point_amplitude(
            constants.hbar(),
            effective_mass,
            angular_frequency,
        ),
    })
}

/// ω_n for each length in `lengths`, keeping everything else in `spec`.
pub fn frequency_scaling_check(
    spec: &MicrotubuleSpec,
    n: usize,
    lengths: &[f64],
) -> Result<Vec<f64>> {
    spec.validate()?;
    ensure(n >= 1, || "mode index must be >= 1".to_string())?;
    let zeta = *solve_eigenvalues(n)?.last().expect("n >= 1");
    lengths
        .iter()
        .map(|&l| {
            ensure(l > 0.0, || format!("lengths must be > 0, got {l}"))?;
            Ok(spec.angular_frequency_at_length(zeta, l))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_tube() -> MicrotubuleSpec {
        MicrotubuleSpec::new(
            1e-6,
            12.5e-9,
            7.5e-9,
            1.2e9,
            3.4e-13,
            Damping::QualityFactor(3.44),
        )
        .unwrap()
    }

    #[test]
    fn first_two_roots() {
        let z = solve_eigenvalues(2).unwrap();
        assert!((z[0] - 4.7300).abs() < 5e-5, "{}", z[0]);
        assert!((z[1] - 7.8532).abs() < 5e-5, "{}", z[1]);
        for &r in &z {
            assert!(clamped_residual(r).abs() < 1e-10);
        }
    }

    #[test]
    fn fifth_root_near_asymptote() {
        let z = solve_eigenvalues(5).unwrap();
        assert!((z[4] - 5.5 * PI).abs() < 1e-6);
        assert!(z.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_count_rejected() {
        assert!(solve_eigenvalues(0).is_err());
    }

    #[test]
    fn scaled_residual_small_for_many_roots() {
        for z in solve_eigenvalues(12).unwrap() {
            assert!(scaled_residual(z).abs() < 1e-10, "{z}");
        }
    }

    #[test]
    fn clamped_ends() {
        let z = solve_eigenvalues(3).unwrap();
        for &zeta in &z {
            let c = mode_normalization(zeta);
            assert!(mode_shape(zeta, c, 0.0).unwrap().abs() < 1e-12);
            assert!(mode_shape(zeta, c, 1.0).unwrap().abs() < 1e-10);
            // centred difference of the analytic continuation at both ends
            let h = 1e-5;
            let slope0 = (mode_bracket(zeta, h) - mode_bracket(zeta, -h)) / (2.0 * h) / c;
            let slope1 =
                (mode_bracket(zeta, 1.0 + h) - mode_bracket(zeta, 1.0 - h)) / (2.0 * h) / c;
            assert!(slope0.abs() < 1e-6, "{slope0}");
            assert!(slope1.abs() < 1e-6, "{slope1}");
        }
    }

    #[test]
    fn shape_outside_beam_rejected() {
        let z = solve_eigenvalues(1).unwrap()[0];
        assert!(mode_shape(z, 1.0, 1.5).is_err());
        assert!(mode_shape(z, 1.0, -0.1).is_err());
    }

    #[test]
    fn unit_peak_at_midspan_for_fundamental() {
        let z = solve_eigenvalues(1).unwrap()[0];
        let c = mode_normalization(z);
        assert!((mode_shape(z, c, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fundamental_mass_ratio() {
        let z = solve_eigenvalues(1).unwrap()[0];
        let r = effective_mass_ratio(z);
        assert!((r - 0.3965).abs() < 5e-4, "{r}");
    }

    #[test]
    fn modes_are_orthogonal() {
        let z = solve_eigenvalues(4).unwrap();
        for i in 0..z.len() {
            for j in (i + 1)..z.len() {
                assert!(mode_overlap(z[i], z[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn reference_mass_and_zero_point() {
        let mode = compute_mode(&reference_tube(), &PhysicalConstants::default(), 1).unwrap();
        assert!((mode.effective_mass / 1.348e-19 - 1.0).abs() < 1e-3);
        let hbar = PhysicalConstants::default().hbar();
        let x = zero_point_amplitude(hbar, 1.348e-19, 2.0 * PI * 20.68e6);
        assert!((x - 1.7e-12).abs() < 0.1e-12, "{x}");
        assert!(x > 0.01e-12 && x < 10e-12);
    }

    #[test]
    fn zero_point_identity() {
        let mode = compute_mode(&reference_tube(), &PhysicalConstants::default(), 2).unwrap();
        let lhs =
            mode.zero_point_amplitude.powi(2) * 2.0 * mode.effective_mass * mode.angular_frequency;
        assert!((lhs / PhysicalConstants::default().hbar() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn frequencies_increase_with_index() {
        let tube = reference_tube();
        let c = PhysicalConstants::default();
        let w: Vec<f64> = (1..=4)
            .map(|n| compute_mode(&tube, &c, n).unwrap().angular_frequency)
            .collect();
        assert!(w.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn doubling_length_quarters_frequency() {
        let w = frequency_scaling_check(&reference_tube(), 1, &[1e-6, 2e-6]).unwrap();
        assert!((w[0] / w[1] - 4.0).abs() < 1e-12);
        assert!(frequency_scaling_check(&reference_tube(), 1, &[0.0]).is_err());
    }

    #[test]
    fn solid_rod_allowed() {
        let rod =
            MicrotubuleSpec::new(1e-6, 12.5e-9, 0.0, 1.2e9, 3.4e-13, Damping::Rate(1e6)).unwrap();
        assert!((rod.area() - PI * 12.5e-9f64.powi(2)).abs() < 1e-30);
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(
            MicrotubuleSpec::new(1e-6, 5e-9, 7.5e-9, 1.2e9, 3.4e-13, Damping::Rate(1.0)).is_err()
        );
        assert!(
            MicrotubuleSpec::new(-1e-6, 12.5e-9, 7.5e-9, 1.2e9, 3.4e-13, Damping::Rate(1.0))
                .is_err()
        );
        assert!(MicrotubuleSpec::new(
            1e-6,
            12.5e-9,
            7.5e-9,
            1.2e9,
            3.4e-13,
            Damping::QualityFactor(0.0)
        )
        .is_err());
    }

    #[test]
    fn gyration_override() {
        let t = reference_tube().with_gyration_radius(5e-9).unwrap();
        assert_eq!(t.gyration_radius(), 5e-9);
        assert!((reference_tube().gyration_radius() - 12.5e-9 / 2f64.sqrt()).abs() < 1e-24);
    }
}
