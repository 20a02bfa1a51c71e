//! Electrostatic actuation of the beam by tip electrodes.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::beam::{mode_bracket, MicrotubuleSpec, ModeData};
use crate::error::{ensure, invalid, Error, Result};
use crate::numerics::quadrature::adaptive_simpson_segments;

/// A scalar function of the axial coordinate `x` (metres).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Profile {
    Zero,
    Uniform {
        value: f64,
    },
    Tabulated(Tabulated),
    /// Gaussian bump with total integral `area` and full width at half
    /// maximum `fwhm`.
    Gaussian {
        center: f64,
        fwhm: f64,
        area: f64,
    },
    /// δ-function of integral `weight` at `at`.
    Impulse {
        at: f64,
        weight: f64,
    },
}

/// Samples `(x, value)` joined by linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl Tabulated {
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        ensure(xs.len() == values.len() && xs.len() >= 2, || {
            format!(
                "tabulated profile needs >= 2 matching samples, got {} and {}",
                xs.len(),
                values.len()
            )
        })?;
        ensure(xs.windows(2).all(|w| w[0] < w[1]), || {
            "tabulated x must be strictly increasing".into()
        })?;
        ensure(xs.iter().chain(&values).all(|v| v.is_finite()), || {
            "tabulated samples must be finite".into()
        })?;
        Ok(Self { xs, values })
    }

    /// Reads a two-column CSV `x_meters,value`. A non-numeric first row is
    /// treated as a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(i as u64 + 1, |p| p.line());
            if rec.len() != 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 2 columns, found {}", rec.len()),
                });
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => {
                    xs.push(v[0]);
                    values.push(v[1]);
                }
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse {
                        line,
                        message: e.to_string(),
                    })
                }
            }
        }
        Self::new(xs, values)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("non-empty"))
    }

    pub fn value(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return None;
        }
        let i = self
            .xs
            .partition_point(|&p| p <= x)
            .clamp(1, self.xs.len() - 1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }
}

impl Profile {
    /// Smooth part of the profile at `x` (impulses excluded). `None` when a
    /// tabulated profile does not cover `x`.
    pub fn smooth_value(&self, x: f64) -> Option<f64> {
        match self {
            Profile::Zero | Profile::Impulse { .. } => Some(0.0),
            Profile::Uniform { value } => Some(*value),
            Profile::Tabulated(t) => t.value(x),
            Profile::Gaussian { center, fwhm, area } => {
                let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
                let z = (x - center) / sigma;
                Some(area / (sigma * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp())
            }
        }
    }

    fn impulse(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Impulse { at, weight } => Some((at, weight)),
            _ => None,
        }
    }

    fn covers(&self, lo: f64, hi: f64) -> bool {
        match self {
            Profile::Tabulated(t) => {
                let (a, b) = t.domain();
                a <= lo && b >= hi
            }
            _ => true,
        }
    }

    fn breakpoints(&self, length: f64, out: &mut Vec<f64>) {
        match self {
            Profile::Gaussian { center, fwhm, .. } => {
                for k in [-6.0, -2.0, 0.0, 2.0, 6.0] {
                    out.push(center + k * fwhm);
                }
            }
            Profile::Tabulated(t) => {
                out.extend(t.xs.iter().copied().filter(|&x| x > 0.0 && x < length))
            }
            _ => {}
        }
    }
}

/// Field components, their transverse intensity gradients at `y = 0`, and
/// the screened polarizabilities (per unit length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub e_parallel: Profile,
    pub e_perp: Profile,
    /// ∂(E∥²)/∂y at y = 0 (V²/m³).
    pub grad_parallel_sq: Profile,
    /// ∂(E⊥²)/∂y at y = 0 (V²/m³).
    pub grad_perp_sq: Profile,
    pub alpha_parallel: f64,
    pub alpha_perp: f64,
}

impl FieldProfile {
    pub fn new(
        e_parallel: Profile,
        e_perp: Profile,
        grad_parallel_sq: Profile,
        grad_perp_sq: Profile,
        alpha_parallel: f64,
        alpha_perp: f64,
    ) -> Result<Self> {
        ensure(alpha_parallel >= 0.0 && alpha_perp >= 0.0, || {
            format!("polarizabilities must be >= 0, got {alpha_parallel}, {alpha_perp}")
        })?;
        Ok(Self {
            e_parallel,
            e_perp,
            grad_parallel_sq,
            grad_perp_sq,
            alpha_parallel,
            alpha_perp,
        })
    }

    /// Tip electrodes at midspan approximated by a point gradient: the
    /// parallel intensity gradient is a δ-function at `L/2` whose weight is
    /// chosen so that `∫ ∂U_el/∂y dx = force_weight` (N).
    pub fn midspan_point(length: f64, alpha_parallel: f64, force_weight: f64) -> Result<Self> {
        ensure(alpha_parallel > 0.0, || {
            "midspan preset needs alpha_parallel > 0".into()
        })?;
        Self::new(
            Profile::Zero,
            Profile::Zero,
            Profile::Impulse {
                at: 0.5 * length,
                weight: -2.0 * force_weight / alpha_parallel,
            },
            Profile::Zero,
            alpha_parallel,
            0.0,
        )
    }

    /// ∂U_el/∂y at y = 0, smooth part only.
    fn energy_gradient(&self, x: f64) -> Option<f64> {
        let gp = self.grad_parallel_sq.smooth_value(x)?;
        let gq = self.grad_perp_sq.smooth_value(x)?;
        Some(-0.5 * (self.alpha_parallel * gp + self.alpha_perp * gq))
    }
}

/// U_el(x, 0) = −½(α∥E∥² + α⊥E⊥²) in J/m.
pub fn electrostatic_energy_density(profile: &FieldProfile, length: f64, x: f64) -> Result<f64> {
    ensure((0.0..=length).contains(&x), || {
        format!("x = {x} lies outside the beam [0, {length}]")
    })?;
    let ep = profile
        .e_parallel
        .smooth_value(x)
        .ok_or_else(|| invalid(format!("E_parallel undefined at x = {x}")))?;
    let eq = profile
        .e_perp
        .smooth_value(x)
        .ok_or_else(|| invalid(format!("E_perp undefined at x = {x}")))?;
    Ok(-0.5 * (profile.alpha_parallel * ep * ep + profile.alpha_perp * eq * eq))
}

/// F_n = ∫₀ᴸ ψ_n(x) ∂U_el/∂y|₀ dx. The displacement-independent part of
/// U_el does not enter.
pub fn modal_force(profile: &FieldProfile, mode: &ModeData, spec: &MicrotubuleSpec) -> Result<f64> {
    let length = spec.length;
    for (name, p) in [
        ("grad_parallel_sq", &profile.grad_parallel_sq),
        ("grad_perp_sq", &profile.grad_perp_sq),
    ] {
        ensure(p.covers(0.0, length), || {
            format!("{name} does not cover the beam [0, {length}]")
        })?;
    }
    let psi = |x: f64| mode_bracket(mode.eigenvalue, x / length) / mode.normalization;

    let mut breaks = vec![0.0, length];
    profile.grad_parallel_sq.breakpoints(length, &mut breaks);
    profile.grad_perp_sq.breakpoints(length, &mut breaks);
    breaks.retain(|&x| (0.0..=length).contains(&x));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let scale = breaks
        .iter()
        .chain([0.25 * length, 0.5 * length, 0.75 * length].iter())
        .filter_map(|&x| profile.energy_gradient(x))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let smooth = if scale == 0.0 {
        0.0
    } else {
        adaptive_simpson_segments(
            |x| psi(x) * profile.energy_gradient(x).unwrap_or(0.0),
            &breaks,
            1e-13 * scale * length,
        )
    };

    let mut point = 0.0;
    for (p, alpha) in [
        (&profile.grad_parallel_sq, profile.alpha_parallel),
        (&profile.grad_perp_sq, profile.alpha_perp),
    ] {
        if let Some((at, weight)) = p.impulse() {
            ensure((0.0..=length).contains(&at), || {
                format!("impulse at {at} lies outside the beam")
            })?;
            point += psi(at) * (-0.5 * alpha * weight);
        }
    }
    Ok(smooth + point)
}

/// External force split into a static part and one harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveForce {
    /// F̄₀ (N).
    pub static_force: f64,
    /// f_d (N).
    pub amplitude: f64,
    /// φ_d (rad).
    pub phase: f64,
    /// ω (rad/s).
    pub frequency: f64,
}

impl DriveForce {
    pub fn new(static_force: f64, amplitude: f64, phase: f64, frequency: f64) -> Result<Self> {
        ensure(amplitude >= 0.0, || {
            format!("force amplitude must be >= 0, got {amplitude}")
        })?;
        ensure(frequency >= 0.0, || {
            format!("force frequency must be >= 0, got {frequency}")
        })?;
        Ok(Self {
            static_force,
            amplitude,
            phase,
            frequency,
        })
    }

    /// F̄₀ + f_d cos(ωt + φ_d).
    pub fn force_at_time(&self, t: f64) -> f64 {
        self.static_force + self.amplitude * (self.frequency * t + self.phase).cos()
    }

    /// Largest amplitude keeping the driven displacement inside the
    /// evanescent decay length: (k⊥⁻¹ − d)·m·γ_m·Ω_m.
    pub fn amplitude_bound(k_perp: f64, gap: f64, mass: f64, damping: f64, omega_m: f64) -> f64 {
        (1.0 / k_perp - gap) * mass * damping * omega_m
    }

    pub fn is_feasible(
        &self,
        k_perp: f64,
        gap: f64,
        mass: f64,
        damping: f64,
        omega_m: f64,
    ) -> bool {
        self.amplitude < Self::amplitude_bound(k_perp, gap, mass, damping, omega_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{compute_mode, Damping};
    use crate::PhysicalConstants;

    fn tube() -> MicrotubuleSpec {
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

    fn zero_field() -> FieldProfile {
        FieldProfile::new(
            Profile::Zero,
            Profile::Zero,
            Profile::Zero,
            Profile::Zero,
            1e-33,
            1e-34,
        )
        .unwrap()
    }

    #[test]
    fn zero_field_has_no_energy_or_force() {
        let f = zero_field();
        assert_eq!(electrostatic_energy_density(&f, 1e-6, 0.3e-6).unwrap(), 0.0);
        let mode = compute_mode(&tube(), &PhysicalConstants::default(), 1).unwrap();
        assert_eq!(modal_force(&f, &mode, &tube()).unwrap(), 0.0);
    }

    #[test]
    fn uniform_parallel_field() {
        let mut f = zero_field();
        f.alpha_perp = 0.0;
        f.e_parallel = Profile::Uniform { value: 2.0e5 };
        let a = electrostatic_energy_density(&f, 1e-6, 0.1e-6).unwrap();
        let b = electrostatic_energy_density(&f, 1e-6, 0.9e-6).unwrap();
        assert_eq!(a, b);
        assert!((a + 0.5 * 1e-33 * 4e10).abs() < 1e-40);
    }

    #[test]
    fn polarizability_energy_scale() {
        let f = FieldProfile::new(
            Profile::Uniform { value: 1e6 },
            Profile::Zero,
            Profile::Zero,
            Profile::Zero,
            1.1e-33,
            0.0,
        )
        .unwrap();
        let u = electrostatic_energy_density(&f, 1e-6, 0.5e-6).unwrap();
        assert!((u / -5.5e-22 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_outside_beam_rejected() {
        assert!(electrostatic_energy_density(&zero_field(), 1e-6, 1.1e-6).is_err());
    }

    #[test]
    fn point_gradient_projects_on_midspan_value() {
        let spec = tube();
        let c = PhysicalConstants::default();
        let f = FieldProfile::midspan_point(spec.length, 1.1e-33, 2.5e-12).unwrap();
        let m1 = compute_mode(&spec, &c, 1).unwrap();
        let m2 = compute_mode(&spec, &c, 2).unwrap();
        let f1 = modal_force(&f, &m1, &spec).unwrap();
        let f2 = modal_force(&f, &m2, &spec).unwrap();
        // ψ₁(1/2) = 1 for unit-peak normalisation
        assert!((f1 - 2.5e-12).abs() < 1e-24);
        assert!(f2.abs() < 1e-10 * f1.abs());
    }

    #[test]
    fn narrow_gaussian_matches_point_gradient() {
        let spec = tube();
        let c = PhysicalConstants::default();
        let m1 = compute_mode(&spec, &c, 1).unwrap();
        let point = FieldProfile::midspan_point(spec.length, 1.1e-33, 1e-12).unwrap();
        let weight = -2.0 * 1e-12 / 1.1e-33;
        let mut wide = point.clone();
        wide.grad_parallel_sq = Profile::Gaussian {
            center: 0.5 * spec.length,
            fwhm: spec.length / 50.0,
            area: weight,
        };
        let fp = modal_force(&point, &m1, &spec).unwrap();
        let fg = modal_force(&wide, &m1, &spec).unwrap();
        assert!((fg / fp - 1.0).abs() < 1e-3, "{}", fg / fp);
    }

    #[test]
    fn symmetric_profile_does_not_drive_antisymmetric_modes() {
        let spec = tube();
        let c = PhysicalConstants::default();
        let mut f = zero_field();
        f.grad_parallel_sq = Profile::Gaussian {
            center: 0.5e-6,
            fwhm: 0.3e-6,
            area: 1e3,
        };
        f.grad_perp_sq = Profile::Uniform { value: 2e9 };
        let f1 = modal_force(&f, &compute_mode(&spec, &c, 1).unwrap(), &spec).unwrap();
        for n in [2, 4] {
            let fnn = modal_force(&f, &compute_mode(&spec, &c, n).unwrap(), &spec).unwrap();
            assert!(fnn.abs() < 1e-10 * f1.abs(), "n = {n}: {fnn:e} vs {f1:e}");
        }
    }

    #[test]
    fn uncovered_tabulated_gradient_rejected() {
        let spec = tube();
        let m1 = compute_mode(&spec, &PhysicalConstants::default(), 1).unwrap();
        let mut f = zero_field();
        f.grad_parallel_sq =
            Profile::Tabulated(Tabulated::new(vec![0.0, 0.5e-6], vec![1.0, 1.0]).unwrap());
        assert!(modal_force(&f, &m1, &spec).is_err());
    }

    #[test]
    fn tabulated_csv_interpolates() {
        let csv = "x_meters,value\n0.0,0.0\n1e-6,2.0\n";
        let t = Tabulated::from_csv(csv.as_bytes()).unwrap();
        assert!((t.value(0.25e-6).unwrap() - 0.5).abs() < 1e-15);
        assert!(t.value(2e-6).is_none());
        let bad = "0.0,0.0\n1e-6,abc\n";
        match Tabulated::from_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn force_time_dependence() {
        let d = DriveForce::new(1e-12, 0.0, 0.3, 1e8).unwrap();
        assert_eq!(d.force_at_time(0.0), 1e-12);
        assert_eq!(d.force_at_time(7.7e-7), 1e-12);
        let d = DriveForce::new(1e-12, 6e-11, 0.7, 2e8).unwrap();
        assert!((d.force_at_time(-0.7 / 2e8) - (1e-12 + 6e-11)).abs() < 1e-24);
        let d = DriveForce::new(0.0, 60e-12, 0.0, 1.3e8).unwrap();
        assert_eq!(d.force_at_time(0.0), 6.0e-11);
        assert!(DriveForce::new(0.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn force_bound_is_sub_nanonewton() {
        // decay length 0.56 µm, d = 0.1 µm, m = 1.348e-19 kg, Q = 3.44 at 20.68 MHz
        let om = 2.0 * std::f64::consts::PI * 20.68e6;
        let b = DriveForce::amplitude_bound(1.0 / 0.56e-6, 0.1e-6, 1.348e-19, om / 3.44, om);
        assert!((b - 0.3e-9).abs() < 0.02e-9, "{b}");
    }
}
