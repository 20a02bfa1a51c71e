//! Time-domain check of the analytic response.
//!
//! The nonlinear mean-field equations are integrated in the frame rotating at
//! the pump frequency,
//!
//! ```text
//! ȧ = (iΔ₀ − κ/2)a − ig₀Xa + √κ_e(ε_l e^(iθ_l) + ε_p e^(−iδt − iφ_p))
//! Ẋ = P/m
//! Ṗ = −mΩ_m²X − ħg₀|a|² − γ_mP + F̄₀ + f_d cos(ωt + φ_d)
//! ```
//!
//! until transients have died out, and the stationary orbit is projected onto
//! the tones e^(−iνt). The pump phase θ_l only fixes the phase reference; it is
//! chosen so that the pumped steady state is real, matching the analytic
//! convention. The state is stored as a scaled deviation from the static
//! equilibrium for resolution, but the right-hand side is the full nonlinear
//! one: nothing from the linearisation enters.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};
use crate::numerics::ode::{DormandPrince, StepControl};
use crate::response::{fmt, transmission, transmission_from_sidebands, SystemParams};

/// Where the integration starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialState {
    /// Static equilibrium: a = √n_d, X = x₀, P = 0.
    Equilibrium,
    /// Empty cavity, beam at rest at X = 0.
    Empty,
    Custom {
        re_a: f64,
        im_a: f64,
        x: f64,
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Settling time in units of the slowest decay time.
    pub settle_multiples: f64,
    /// Projection window in beat periods.
    pub window_periods: usize,
    pub samples_per_period: usize,
    pub initial: InitialState,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            settle_multiples: 40.0,
            window_periods: 8,
            samples_per_period: 64,
            initial: InitialState::Equilibrium,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.rtol > 0.0 && self.rtol <= 1e-3, || {
            format!("rtol must lie in (0, 1e-3], got {}", self.rtol)
        })?;
        ensure(self.atol > 0.0 && self.atol <= 1e-3, || {
            format!("atol must lie in (0, 1e-3], got {}", self.atol)
        })?;
        ensure(self.settle_multiples >= 10.0, || {
            format!(
                "settle time must be >= 10 decay times, got {}",
                self.settle_multiples
            )
        })?;
        ensure(self.window_periods >= 8, || {
            format!(
                "projection window must be >= 8 periods, got {}",
                self.window_periods
            )
        })?;
        ensure(self.samples_per_period >= 8, || {
            format!(
                "need >= 8 samples per period, got {}",
                self.samples_per_period
            )
        })
    }
}

/// Probe offset δ = ω_p − ω_l and force frequency ω (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tones {
    pub probe_offset: f64,
    pub force_frequency: f64,
}

impl Tones {
    pub fn synchronous(omega: f64) -> Self {
        Self {
            probe_offset: omega,
            force_frequency: omega,
        }
    }
}

/// Sampled trajectory in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub a: Vec<Complex64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
}

impl TimeSeries {
    /// CSV with columns `t_s,re_a,im_a,X_m,P_kgms`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| invalid(e.to_string());
        w.write_record(["t_s", "re_a", "im_a", "X_m", "P_kgms"])
            .map_err(io)?;
        for k in 0..self.t.len() {
            w.write_record([
                fmt(self.t[k]),
                fmt(self.a[k].re),
                fmt(self.a[k].im),
                fmt(self.x[k]),
                fmt(self.p[k]),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scales that bring the deviation state to order one.
struct Scales {
    amp: f64,
    disp: f64,
    mom: f64,
}

fn scales(p: &SystemParams) -> Scales {
    let kappa = p.kappa();
    let probe_side = p.kappa_e.sqrt() * p.probe_amplitude / kappa;
    let force_side = p.g0 * p.photon_number.sqrt() * p.displacement_amplitude() / kappa;
    let amp = probe_side
        .max(force_side)
        .max(1e-6 * p.photon_number.sqrt())
        .max(1e-12);
    let backaction =
        p.hbar * p.g0 * p.photon_number.sqrt() * amp / (p.mass * p.gamma_m * p.omega_m);
    let disp = p
        .displacement_amplitude()
        .max(backaction)
        .max(1e-9 * p.x0.abs())
        .max(1e-30);
    Scales {
        amp,
        disp,
        mom: p.mass * p.omega_m * disp,
    }
}

/// Integrates from t = 0 and samples the trajectory at `times` (seconds,
/// non-decreasing, non-negative).
pub fn integrate_mean_field(
    params: &SystemParams,
    config: &OracleConfig,
    tones: Tones,
    times: &[f64],
) -> Result<TimeSeries> {
    config.validate()?;
    ensure(params.gamma_m > 0.0 && params.kappa() > 0.0, || {
        "oracle needs γ_m > 0 and κ > 0".into()
    })?;
    ensure(
        times.windows(2).all(|w| w[0] <= w[1]) && times.first().is_none_or(|&t| t >= 0.0),
        || "sample times must be non-negative and non-decreasing".into(),
    )?;
    let p = params.clone();
    let s = scales(&p);
    let amp0 = p.photon_number.sqrt();
    let i = Complex64::i();
    let half_kappa = 0.5 * p.kappa();
    let sqrt_ke = p.kappa_e.sqrt();
    // real steady state a = √n_d requires ε_l e^(iθ_l) = √n_d (κ/2 − iΔ)/√κ_e
    let pump = if p.kappa_e > 0.0 {
        p.pump_amplitude
            * Complex64::new(half_kappa, -p.detuning)
                .unscale(Complex64::new(half_kappa, -p.detuning).norm())
    } else {
        Complex64::new(0.0, 0.0)
    };
    let probe = p.probe_amplitude * Complex64::from_polar(1.0, -p.probe_phase);

    let rhs = move |t: f64, y: &[f64; 4]| -> [f64; 4] {
        let dev = Complex64::new(y[0], y[1]) * s.amp;
        let a = amp0 + dev;
        let x = p.x0 + y[2] * s.disp;
        let mom = y[3] * s.mom;
        let drive = pump + probe * Complex64::from_polar(1.0, -tones.probe_offset * t);
        let da =
            Complex64::new(-half_kappa, p.bare_detuning) * a - i * p.g0 * x * a + sqrt_ke * drive;
        let force =
            p.static_force + p.force_amplitude * (tones.force_frequency * t + p.force_phase).cos();
        let dmom =
            -p.mass * p.omega_m * p.omega_m * x - p.hbar * p.g0 * a.norm_sqr() - p.gamma_m * mom
                + force;
        [
            da.re / s.amp,
            da.im / s.amp,
            mom / p.mass / s.disp,
            dmom / s.mom,
        ]
    };

    let (a_init, x_init, p_init) = match config.initial {
        InitialState::Equilibrium => (Complex64::new(amp0, 0.0), params.x0, 0.0),
        InitialState::Empty => (Complex64::new(0.0, 0.0), 0.0, 0.0),
        InitialState::Custom { re_a, im_a, x, p } => (Complex64::new(re_a, im_a), x, p),
    };
    let y0 = [
        (a_init.re - amp0) / s.amp,
        a_init.im / s.amp,
        (x_init - params.x0) / s.disp,
        p_init / s.mom,
    ];
    let fastest = params
        .omega_m
        .max(tones.probe_offset.abs())
        .max(tones.force_frequency.abs())
        .max(params.kappa());
    let control = StepControl {
        rtol: config.rtol,
        atol: config.atol,
        initial_step: 1e-3 / fastest,
        min_step: 1e-9 / fastest,
        max_step: 0.25 / fastest,
        max_steps: 50_000_000,
    };
    let mut solver = DormandPrince::new(rhs, 0.0, y0, control);
    let mut out = TimeSeries {
        t: Vec::with_capacity(times.len()),
        a: Vec::with_capacity(times.len()),
        x: Vec::with_capacity(times.len()),
        p: Vec::with_capacity(times.len()),
        steps_accepted: 0,
        steps_rejected: 0,
    };
    for &t in times {
        solver.advance_to(t)?;
        let y = solver.state();
        out.t.push(t);
        out.a.push(amp0 + Complex64::new(y[0], y[1]) * s.amp);
        out.x.push(params.x0 + y[2] * s.disp);
        out.p.push(y[3] * s.mom);
    }
    let stats = solver.stats();
    out.steps_accepted = stats.accepted;
    out.steps_rejected = stats.rejected;
    Ok(out)
}

/// Slowest linear decay time of the uncoupled cavity and oscillator.
pub fn slowest_decay_time(params: &SystemParams) -> f64 {
    let g = params.gamma_m;
    let om = params.omega_m;
    // an overdamped oscillator relaxes at the slow root of s² + γs + Ω² = 0
    let mech_rate = if g < 2.0 * om {
        0.5 * g
    } else {
        0.5 * (g - (g * g - 4.0 * om * om).sqrt())
    };
    (1.0 / (0.5 * params.kappa())).max(1.0 / mech_rate)
}

/// Common period of the beat tones, or an error when they are not
/// commensurate within 1e-9 using ratios with numerator and denominator
/// up to 64.
pub fn common_period(frequencies: &[f64]) -> Result<f64> {
    let nonzero: Vec<f64> = frequencies
        .iter()
        .map(|f| f.abs())
        .filter(|&f| f > 0.0)
        .collect();
    ensure(!nonzero.is_empty(), || {
        "no non-zero frequency to define a beat period".into()
    })?;
    let base = nonzero.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut denominator = 1u64;
    for &f in &nonzero {
        let ratio = f / base;
        let found = (1..=64u64).find(|&q| {
            let num = (ratio * q as f64).round();
            num >= 1.0 && (ratio * q as f64 - num).abs() <= 1e-9 * ratio * q as f64
        });
        let q = found.ok_or_else(|| {
            invalid(format!(
                "frequencies {f:e} and {base:e} are not commensurate"
            ))
        })?;
        denominator = lcm(denominator, q);
    }
    Ok(2.0 * PI / base * denominator as f64)
}

fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Sample times: settle, then `window_periods` whole periods sampled
/// uniformly (end point excluded).
pub fn sampling_times(
    params: &SystemParams,
    config: &OracleConfig,
    tones: Tones,
) -> Result<Vec<f64>> {
    config.validate()?;
    let period = common_period(&[tones.probe_offset, tones.force_frequency])?;
    let settle = (config.settle_multiples * slowest_decay_time(params) / period).ceil() * period;
    let n = config.window_periods * config.samples_per_period;
    let dt = period / config.samples_per_period as f64;
    Ok((0..n).map(|k| settle + k as f64 * dt).collect())
}

/// Coefficients c_ν of a(t) = Σ c_ν e^(−iνt) by discrete projection over the
/// whole series. The series must be uniformly sampled over an integer number
/// of periods of every requested ν.
pub fn extract_sidebands(
    t: &[f64],
    values: &[Complex64],
    frequencies: &[f64],
) -> Result<Vec<Complex64>> {
    ensure(t.len() == values.len() && t.len() >= 2, || {
        "series must hold >= 2 matching samples".into()
    })?;
    let dt = t[1] - t[0];
    ensure(dt > 0.0, || "series must be increasing".into())?;
    let uniform = t
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
    ensure(uniform, || "series must be uniformly sampled".into())?;
    let span = dt * t.len() as f64;
    for &nu in frequencies {
        let cycles = nu.abs() * span / (2.0 * PI);
        ensure((cycles - cycles.round()).abs() <= 1e-6, || {
            format!("window of {span:e} s holds {cycles:.6} periods of ν = {nu:e}, not an integer")
        })?;
    }
    let n = t.len() as f64;
    Ok(frequencies
        .iter()
        .map(|&nu| {
            // phases measured from the window start keep the arguments small
            let sum: Complex64 = t
                .iter()
                .zip(values)
                .map(|(&tk, &v)| v * Complex64::from_polar(1.0, nu * (tk - t[0])))
                .sum();
            sum / n * Complex64::from_polar(1.0, nu * t[0])
        })
        .collect())
}

/// Stationary tones of one run at the probe/force offset ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTones {
    /// Mean intracavity amplitude.
    pub dc: Complex64,
    /// Component at e^(−iωt).
    pub lower: Complex64,
    /// Component at e^(+iωt).
    pub upper: Complex64,
    /// Component at e^(−2iωt).
    pub second_harmonic: Complex64,
    /// Mean displacement.
    pub mean_displacement: f64,
    /// Displacement component at e^(−iωt).
    pub displacement: Complex64,
    /// κ|ā|² − 2√κ_e Re(ε_l* ā) relative to κ|ā|².
    pub flux_imbalance: f64,
    pub steps_accepted: u64,
}

/// One run with the synchronous drive (δ = ω) and projection of the orbit.
pub fn run_orbit(params: &SystemParams, config: &OracleConfig, omega: f64) -> Result<OrbitTones> {
    ensure(omega > 0.0, || {
        format!("oracle frequency must be > 0, got {omega}")
    })?;
    let tones = Tones::synchronous(omega);
    let times = sampling_times(params, config, tones)?;
    let series = integrate_mean_field(params, config, tones, &times)?;
    let c = extract_sidebands(&series.t, &series.a, &[0.0, omega, -omega, 2.0 * omega])?;
    let xs: Vec<Complex64> = series.x.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let cx = extract_sidebands(&series.t, &xs, &[0.0, omega])?;

    let half_kappa = 0.5 * params.kappa();
    let pump = params.pump_amplitude
        * Complex64::new(half_kappa, -params.detuning)
            .unscale(Complex64::new(half_kappa, -params.detuning).norm());
    let absorbed = 2.0 * params.kappa_e.sqrt() * (pump.conj() * c[0]).re;
    let stored = params.kappa() * c[0].norm_sqr();
    let flux_imbalance = if stored > 0.0 {
        (stored - absorbed) / stored
    } else {
        absorbed.abs()
    };
    Ok(OrbitTones {
        dc: c[0],
        lower: c[1],
        upper: c[2],
        second_harmonic: c[3],
        mean_displacement: cx[0].re,
        displacement: cx[1],
        flux_imbalance,
        steps_accepted: series.steps_accepted,
    })
}

/// Probe and force sidebands separated by two runs (probe only, force only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSidebands {
    pub alpha1_minus: Complex64,
    pub alpha2_minus: Complex64,
    pub x1: Complex64,
    pub x2: Complex64,
    /// |second harmonic| / |α₂⁻| of the force-only run (0 without force).
    pub harmonic_ratio: f64,
}

pub fn oracle_sidebands(
    params: &SystemParams,
    config: &OracleConfig,
    omega: f64,
) -> Result<OracleSidebands> {
    let probe_only = SystemParams {
        force_amplitude: 0.0,
        ..params.clone()
    };
    let force_only = SystemParams {
        probe_amplitude: 0.0,
        ..params.clone()
    };
    let a = run_orbit(&probe_only, config, omega)?;
    let (alpha2, x2, ratio) = if params.force_amplitude > 0.0 {
        let b = run_orbit(&force_only, config, omega)?;
        (
            b.lower,
            b.displacement,
            b.second_harmonic.norm() / b.lower.norm(),
        )
    } else {
        (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 0.0)
    };
    Ok(OracleSidebands {
        alpha1_minus: a.lower,
        alpha2_minus: alpha2,
        x1: a.displacement,
        x2,
        harmonic_ratio: ratio,
    })
}

/// T_p(ω) from a single run with probe and force on together.
pub fn oracle_transmission(
    params: &SystemParams,
    config: &OracleConfig,
    omega: f64,
) -> Result<Complex64> {
    ensure(params.probe_amplitude > 0.0, || {
        "transmission is undefined for a zero probe amplitude".into()
    })?;
    let tones = run_orbit(params, config, omega)?;
    Ok(transmission_from_sidebands(params, tones.lower))
}

/// Analytic versus time-domain transmission on a set of probe offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub omega: Vec<f64>,
    pub analytic: Vec<Complex64>,
    pub oracle: Vec<Complex64>,
    /// |T_oracle − T_analytic| / |T_analytic| per point.
    pub relative_deviation: Vec<f64>,
    pub max_relative_deviation: f64,
}

pub fn compare_with_oracle(
    params: &SystemParams,
    config: &OracleConfig,
    omega: &[f64],
) -> Result<OracleComparison> {
    ensure(!omega.is_empty(), || "oracle grid is empty".into())?;
    config.validate()?;
    let pairs = omega
        .par_iter()
        .map(|&w| {
            Ok((
                transmission(params, w)?,
                oracle_transmission(params, config, w)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (analytic, oracle): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let relative_deviation: Vec<f64> = analytic
        .iter()
        .zip(&oracle)
        .map(|(a, o)| (o - a).norm() / a.norm())
        .collect();
    let max_relative_deviation = relative_deviation.iter().copied().fold(0.0, f64::max);
    Ok(OracleComparison {
        omega: omega.to_vec(),
        analytic,
        oracle,
        relative_deviation,
        max_relative_deviation,
    })
}

/// `n` points of `grid` spread evenly by index, endpoints included.
pub fn decimate(grid: &[f64], n: usize) -> Vec<f64> {
    if n >= grid.len() || grid.len() < 2 {
        return grid.to_vec();
    }
    if n <= 1 {
        return vec![grid[(grid.len() - 1) / 2]];
    }
    (0..n)
        .map(|k| grid[(k * (grid.len() - 1) + (n - 1) / 2) / (n - 1)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::mech_susceptibility;
    use crate::response::tests::fig3;
    use crate::response::{sideband_amplitudes, transmission};

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn config_validation() {
        assert!(OracleConfig::default().validate().is_ok());
        for bad in [
            OracleConfig {
                rtol: 0.0,
                ..Default::default()
            },
            OracleConfig {
                rtol: 1e-2,
                ..Default::default()
            },
            OracleConfig {
                settle_multiples: 5.0,
                ..Default::default()
            },
            OracleConfig {
                window_periods: 4,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn projection_recovers_synthetic_tones() {
        let omega = 1.3e8;
        let dt = 2.0 * PI / omega / 64.0;
        let t: Vec<f64> = (0..512).map(|k| 7e-7 + k as f64 * dt).collect();
        let c1 = Complex64::new(0.3, -1.2);
        let c2 = Complex64::new(-0.05, 0.02);
        let v: Vec<Complex64> = t
            .iter()
            .map(|&tk| {
                4.0 + c1 * Complex64::from_polar(1.0, -omega * tk)
                    + c2 * Complex64::from_polar(1.0, omega * tk)
            })
            .collect();
        let c = extract_sidebands(&t, &v, &[0.0, omega, -omega]).unwrap();
        assert!((c[0] - 4.0).norm() < 1e-10);
        assert!((c[1] - c1).norm() < 1e-10);
        assert!((c[2] - c2).norm() < 1e-10);
        assert!(extract_sidebands(&t, &v, &[1.05 * omega]).is_err());
    }

    #[test]
    fn commensurate_periods() {
        let p = common_period(&[2.0, 3.0]).unwrap();
        assert!((p - 2.0 * PI).abs() < 1e-12);
        assert!(common_period(&[1.0, 2f64.sqrt()]).is_err());
        assert!(common_period(&[0.0]).is_err());
    }

    #[test]
    fn pumped_steady_state_matches_closed_forms() {
        let mut p = fig3(0.0);
        p.probe_amplitude = 0.0;
        let cfg = OracleConfig {
            initial: InitialState::Empty,
            ..Default::default()
        };
        let o = run_orbit(&p, &cfg, p.omega_m).unwrap();
        assert!((o.dc.norm_sqr() / p.photon_number - 1.0).abs() < 1e-6);
        assert!(o.dc.im.abs() < 1e-6 * o.dc.re);
        assert!((o.mean_displacement / p.x0 - 1.0).abs() < 1e-6);
        assert!(o.flux_imbalance.abs() < 1e-8);
    }

    #[test]
    fn undriven_system_decays_to_rest() {
        let mut p = fig3(0.0);
        p.pump_amplitude = 0.0;
        p.photon_number = 0.0;
        p.x0 = 0.0;
        p.probe_amplitude = 0.0;
        p.bare_detuning = p.detuning;
        let cfg = OracleConfig {
            initial: InitialState::Custom {
                re_a: 3.0,
                im_a: -1.0,
                x: 1e-12,
                p: 0.0,
            },
            ..Default::default()
        };
        let times = sampling_times(&p, &cfg, Tones::synchronous(p.omega_m)).unwrap();
        let s = integrate_mean_field(&p, &cfg, Tones::synchronous(p.omega_m), &times).unwrap();
        assert!(s.a.last().unwrap().norm() < 1e-12);
        assert!(s.x.last().unwrap().abs() < 1e-24);
    }

    #[test]
    fn uncoupled_beam_follows_susceptibility() {
        let mut p = fig3(6e-11);
        p.g0 = 0.0;
        p.x0 = 0.0;
        p.force_phase = 0.3;
        let omega = 0.95 * p.omega_m;
        let o = run_orbit(&p, &OracleConfig::default(), omega).unwrap();
        // f_d cos(ωt + φ_d) contributes ½f_d e^(−iφ_d) at e^(−iωt)
        let expected = mech_susceptibility(p.mass, p.omega_m, p.gamma_m, omega)
            * 0.5
            * 6e-11
            * Complex64::from_polar(1.0, -0.3);
        assert!(rel(o.displacement, expected) < 1e-7);
        let t = oracle_transmission(&p, &OracleConfig::default(), omega).unwrap();
        assert!(rel(t, transmission(&p, omega).unwrap()) < 1e-6);
    }

    #[test]
    fn fig3_sidebands_match_analytic() {
        let p = fig3(6e-11);
        let o = oracle_sidebands(&p, &OracleConfig::default(), p.omega_m).unwrap();
        let a = sideband_amplitudes(&p, p.omega_m);
        assert!(rel(o.alpha1_minus, a.alpha1_minus) < 1e-2);
        assert!(rel(o.alpha2_minus, a.alpha2_minus) < 1e-2);
        assert!(rel(o.x1, a.x1) < 1e-2);
        assert!(rel(o.x2, a.x2) < 1e-2);
        assert!(o.harmonic_ratio < 0.05);
    }

    #[test]
    fn initial_state_does_not_matter() {
        let p = fig3(4e-11);
        let w = 1.02 * p.omega_m;
        let a = oracle_transmission(&p, &OracleConfig::default(), w).unwrap();
        let cfg = OracleConfig {
            initial: InitialState::Empty,
            ..Default::default()
        };
        let b = oracle_transmission(&p, &cfg, w).unwrap();
        assert!(rel(a, b) < 1e-6);
    }

    #[test]
    fn time_series_csv_columns() {
        let p = fig3(0.0);
        let cfg = OracleConfig::default();
        let s =
            integrate_mean_field(&p, &cfg, Tones::synchronous(p.omega_m), &[0.0, 1e-9]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,re_a,im_a,X_m,P_kgms\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn decimation_keeps_endpoints() {
        let g: Vec<f64> = (0..2001).map(f64::from).collect();
        let d = decimate(&g, 21);
        assert_eq!(d.len(), 21);
        assert_eq!((d[0], d[10], d[20]), (0.0, 1000.0, 2000.0));
        assert_eq!(decimate(&g[..5], 21).len(), 5);
    }

    #[test]
    fn comparison_on_bare_cavity_is_exact() {
        let mut p = fig3(0.0);
        p.g0 = 0.0;
        let grid = decimate(
            &crate::response::relative_grid(p.omega_m, 0.9, 1.1, 101).unwrap(),
            5,
        );
        let c = compare_with_oracle(&p, &OracleConfig::default(), &grid).unwrap();
        assert!(
            c.max_relative_deviation < 1e-6,
            "{}",
            c.max_relative_deviation
        );
    }
}
