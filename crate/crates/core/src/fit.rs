//! Recovery of mechanical parameters from transmission spectra.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Error, Result};
use crate::response::{transmission, MeasuredSpectrum, SystemParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmOptions {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iterations: usize,
    /// Largest accepted cosine between the residual and any Jacobian column.
    pub gtol: f64,
    /// Relative step used for the central-difference Jacobian.
    pub diff_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            max_iterations: 200,
            gtol: 1e-6,
            diff_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Σr² after each accepted step, starting with the initial point.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_measure: f64,
    /// s²(JᵀJ)⁻¹ in the original parameter units.
    pub covariance: Vec<Vec<f64>>,
}

/// Levenberg–Marquardt minimisation of Σr(p)² with Marquardt's diagonal
/// damping. `scales` sets the typical size of each parameter; the Jacobian
/// is taken by central differences in the scaled coordinates.
pub fn levenberg_marquardt<F>(
    mut residual: F,
    initial: &[f64],
    scales: &[f64],
    names: &[String],
    opts: &LmOptions,
) -> Result<LmOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let k = initial.len();
    ensure(scales.len() == k && names.len() == k, || {
        "parameter, scale and name counts differ".into()
    })?;
    ensure(scales.iter().all(|s| *s > 0.0 && s.is_finite()), || {
        "parameter scales must be finite and > 0".into()
    })?;
    let to_params =
        |q: &DVector<f64>| -> Vec<f64> { q.iter().zip(scales).map(|(q, s)| q * s).collect() };
    let mut q = DVector::from_iterator(k, initial.iter().zip(scales).map(|(p, s)| p / s));
    let mut r = DVector::from_vec(residual(&to_params(&q))?);
    let n = r.len();
    ensure(n >= k, || {
        format!("{n} residuals cannot determine {k} parameters")
    })?;
    ensure(r.iter().all(|v| v.is_finite()), || {
        "model is not finite at the initial guess".into()
    })?;
    // residuals a millionth of the starting misfit count as a perfect fit
    let data_floor = 1e-6 * r.norm() + 1e-300;
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = opts.lambda0;
    let mut iterations = 0;
    let mut diag_max = DVector::<f64>::zeros(k);

    let mut jac = jacobian(&mut residual, &q, scales, opts.diff_step, n)?;
    loop {
        let measure = gradient_measure(&jac, &r, data_floor);
        if k == 0 || measure < opts.gtol || iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        for j in 0..k {
            diag_max[j] = diag_max[j].max(jtj[(j, j)]);
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for j in 0..k {
                a[(j, j)] += lambda * diag_max[j].max(1e-300);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&jtr)),
                None => match a.lu().solve(&(-&jtr)) {
                    Some(s) => s,
                    None => {
                        lambda *= opts.lambda_up;
                        continue;
                    }
                },
            };
            let trial = &q + &step;
            let r_trial = match residual(&to_params(&trial)) {
                Ok(v) => DVector::from_vec(v),
                Err(_) => {
                    lambda *= opts.lambda_up;
                    continue;
                }
            };
            let trial_cost = r_trial.norm_squared();
            if trial_cost.is_finite() && trial_cost <= cost {
                let small_step = step.norm() <= 1e-15 * (q.norm() + 1e-15);
                q = trial;
                r = r_trial;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / opts.lambda_down).max(1e-15);
                accepted = !small_step;
                break;
            }
            lambda *= opts.lambda_up;
        }
        if !accepted {
            break;
        }
        jac = jacobian(&mut residual, &q, scales, opts.diff_step, n)?;
    }

    let measure = gradient_measure(&jac, &r, data_floor);
    let covariance = covariance(&jac, &r, scales, names)?;
    Ok(LmOutcome {
        params: to_params(&q),
        residuals: r.as_slice().to_vec(),
        cost_history: history,
        iterations,
        converged: k == 0 || measure < opts.gtol,
        gradient_measure: measure,
        covariance,
    })
}

fn jacobian<F>(
    residual: &mut F,
    q: &DVector<f64>,
    scales: &[f64],
    rel: f64,
    n: usize,
) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let k = q.len();
    let mut jac = DMatrix::zeros(n, k);
    for j in 0..k {
        let h = rel * q[j].abs().max(1.0);
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[j] += h;
        minus[j] -= h;
        let to =
            |v: &DVector<f64>| -> Vec<f64> { v.iter().zip(scales).map(|(q, s)| q * s).collect() };
        let rp = residual(&to(&plus))?;
        let rm = residual(&to(&minus))?;
        ensure(rp.len() == n && rm.len() == n, || {
            "residual length changed between evaluations".into()
        })?;
        for i in 0..n {
            jac[(i, j)] = (rp[i] - rm[i]) / (plus[j] - minus[j]);
        }
    }
    Ok(jac)
}

/// max_j |J_jᵀr| / (‖J_j‖ max(‖r‖, floor)).
fn gradient_measure(jac: &DMatrix<f64>, r: &DVector<f64>, floor: f64) -> f64 {
    let rn = r.norm().max(floor);
    (0..jac.ncols())
        .map(|j| {
            let col = jac.column(j);
            let cn = col.norm();
            if cn == 0.0 {
                0.0
            } else {
                col.dot(r).abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

fn covariance(
    jac: &DMatrix<f64>,
    r: &DVector<f64>,
    scales: &[f64],
    names: &[String],
) -> Result<Vec<Vec<f64>>> {
    let k = jac.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let norms: Vec<f64> = (0..k).map(|j| jac.column(j).norm()).collect();
    let largest = norms.iter().cloned().fold(0.0, f64::max);
    let dead: Vec<String> = norms
        .iter()
        .zip(names)
        .filter(|(n, _)| **n <= 1e-12 * largest || **n == 0.0)
        .map(|(_, name)| name.clone())
        .collect();
    if !dead.is_empty() {
        return Err(Error::RankDeficient { parameters: dead });
    }
    let jtj = jac.transpose() * jac;
    let svd = jtj.clone().svd(false, false);
    let sv = svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 1e-14 * smax {
        return Err(Error::RankDeficient {
            parameters: names.to_vec(),
        });
    }
    let inv = jtj.try_inverse().ok_or_else(|| Error::RankDeficient {
        parameters: names.to_vec(),
    })?;
    let dof = (r.len() - k).max(1) as f64;
    let s2 = r.norm_squared() / dof;
    Ok((0..k)
        .map(|i| {
            (0..k)
                .map(|j| s2 * inv[(i, j)] * scales[i] * scales[j])
                .collect()
        })
        .collect())
}

/// baseline + height / (1 + 4((ω − centre)/fwhm)²); `height < 0` is a dip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian {
    pub center: f64,
    pub fwhm: f64,
    pub height: f64,
    pub baseline: f64,
}

impl Lorentzian {
    pub fn eval(&self, x: f64) -> f64 {
        let z = 2.0 * (x - self.center) / self.fwhm;
        self.baseline + self.height / (1.0 + z * z)
    }
}

/// Fits a single Lorentzian to |T_p|². The sign of the feature is taken from
/// the largest excursion away from the median of the outer tenths.
pub fn lorentzian_prefit(spectrum: &MeasuredSpectrum) -> Result<Lorentzian> {
    spectrum.validate()?;
    let x = &spectrum.omega;
    let y = &spectrum.power;
    let n = x.len();
    if n < 16 {
        return Err(Error::FitFailure {
            reason: format!("need >= 16 points for a prefit, got {n}"),
        });
    }
    let edge = (n / 10).max(2);
    let mut edges: Vec<f64> = y[..edge].iter().chain(&y[n - edge..]).copied().collect();
    edges.sort_by(f64::total_cmp);
    let baseline = 0.5 * (edges[(edges.len() - 1) / 2] + edges[edges.len() / 2]);

    let (imax, _) =
        y.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |b, (i, &v)| if v > b.1 { (i, v) } else { b },
        );
    let (imin, _) = y.iter().enumerate().fold(
        (0, f64::INFINITY),
        |b, (i, &v)| if v < b.1 { (i, v) } else { b },
    );
    let iext = if (y[imax] - baseline).abs() >= (y[imin] - baseline).abs() {
        imax
    } else {
        imin
    };
    let height = y[iext] - baseline;
    let spread = y.iter().map(|v| (v - baseline).abs()).fold(0.0, f64::max);
    let level = baseline.abs().max(spread);
    if height.abs() <= 1e-9 * level.max(1e-300) || iext == 0 || iext == n - 1 {
        return Err(Error::FitFailure {
            reason: format!(
                "no isolated extremum: excursion {height:e} from baseline {baseline:e} at point {iext} of {n}"
            ),
        });
    }
    // half-maximum crossings on either side
    let half = baseline + 0.5 * height;
    let beyond = |v: f64| if height > 0.0 { v < half } else { v > half };
    let left = (0..iext).rev().find(|&i| beyond(y[i])).unwrap_or(0);
    let right = (iext + 1..n).find(|&i| beyond(y[i])).unwrap_or(n - 1);
    let fwhm0 = (x[right] - x[left]).max(2.0 * (x[1] - x[0]));

    let start = [x[iext], fwhm0, height, baseline];
    let scales = [x[iext].abs().max(fwhm0), fwhm0, height.abs(), level];
    let names: Vec<String> = ["center", "fwhm", "height", "baseline"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let model = |p: &[f64]| -> Result<Vec<f64>> {
        let l = Lorentzian {
            center: p[0],
            fwhm: p[1],
            height: p[2],
            baseline: p[3],
        };
        Ok(x.iter().zip(y).map(|(&xi, &yi)| l.eval(xi) - yi).collect())
    };
    let out = levenberg_marquardt(model, &start, &scales, &names, &LmOptions::default())?;
    let p = &out.params;
    let fit = Lorentzian {
        center: p[0],
        fwhm: p[1].abs(),
        height: p[2],
        baseline: p[3],
    };
    if !(fit.center >= x[0] && fit.center <= x[n - 1]) {
        return Err(Error::FitFailure {
            reason: format!("fitted centre {:e} left the data window", fit.center),
        });
    }
    Ok(fit)
}

/// Parameters the full-model fit may adjust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FitParameter {
    #[serde(rename = "omega_m")]
    OmegaM,
    #[serde(rename = "gamma_m")]
    GammaM,
    #[serde(rename = "G")]
    Coupling,
    #[serde(rename = "phi")]
    Phase,
}

impl FitParameter {
    pub fn name(&self) -> &'static str {
        match self {
            FitParameter::OmegaM => "omega_m",
            FitParameter::GammaM => "gamma_m",
            FitParameter::Coupling => "G",
            FitParameter::Phase => "phi",
        }
    }
}

impl std::str::FromStr for FitParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega_m" => Ok(FitParameter::OmegaM),
            "gamma_m" => Ok(FitParameter::GammaM),
            "G" => Ok(FitParameter::Coupling),
            "phi" => Ok(FitParameter::Phase),
            other => Err(invalid(format!(
                "unknown fit parameter {other:?}; expected omega_m, gamma_m, G or phi"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub free: BTreeSet<FitParameter>,
    /// Fit Re/Im T_p instead of |T_p|² when the spectrum carries them.
    pub complex: bool,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            free: [
                FitParameter::OmegaM,
                FitParameter::GammaM,
                FitParameter::Coupling,
            ]
            .into_iter()
            .collect(),
            complex: false,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub omega_m_hat: f64,
    pub gamma_m_hat: f64,
    /// Estimate of G (rad/s).
    pub coupling_hat: f64,
    pub phi_hat: f64,
    /// Estimate of G/(√κ_e ε_p).
    pub peak_height_hat: f64,
    /// Drive amplitude implied by the fitted G and the known g₀, n_d, m.
    pub force_amplitude_hat: Option<f64>,
    pub residual_norm: f64,
    pub free: Vec<String>,
    /// Covariance of the free parameters, in the order of `free`.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_measure: f64,
    pub cost_history: Vec<f64>,
    pub prefit: Option<Lorentzian>,
}

/// f_d = G·mγ_mΩ_m/(g₀√n_d).
pub fn force_from_coupling(
    coupling: f64,
    g0: f64,
    photon_number: f64,
    mass: f64,
    gamma_m: f64,
    omega_m: f64,
) -> Result<f64> {
    ensure(g0 > 0.0 && photon_number > 0.0, || {
        "converting G to f_d needs g0 > 0 and n_d > 0".into()
    })?;
    Ok(coupling * mass * gamma_m * omega_m / (g0 * photon_number.sqrt()))
}

/// Parameter set of the forward model for given (Ω_m, γ_m, G, φ).
fn with_fit_values(
    known: &SystemParams,
    omega_m: f64,
    gamma_m: f64,
    coupling: f64,
    phi: f64,
) -> Result<SystemParams> {
    ensure(omega_m > 0.0 && gamma_m > 0.0, || {
        "Ω_m and γ_m must stay positive".into()
    })?;
    let force = if coupling == 0.0 {
        0.0
    } else {
        force_from_coupling(
            coupling,
            known.g0,
            known.photon_number,
            known.mass,
            gamma_m,
            omega_m,
        )?
    };
    let mut p = SystemParams {
        omega_m,
        gamma_m,
        ..known.clone()
    };
    // a negative G is a force with the opposite phase
    p.force_amplitude = force.abs();
    p.force_phase = known.force_phase
        + if force < 0.0 {
            std::f64::consts::PI
        } else {
            0.0
        };
    p.probe_phase = known.force_phase + phi;
    Ok(p)
}

/// Least-squares fit of the full transmission model. Parameters not in
/// `options.free` stay at their values in `known`, which also provides the
/// starting point for G and φ; Ω_m and γ_m start from a Lorentzian prefit.
pub fn full_model_fit(
    spectrum: &MeasuredSpectrum,
    known: &SystemParams,
    options: &FitOptions,
) -> Result<FitResult> {
    spectrum.validate()?;
    let complex_data = match (&spectrum.transmission, options.complex) {
        (Some(t), true) => Some(t.clone()),
        (None, true) => {
            return Err(invalid(
                "complex fit requested but the spectrum has no phase data",
            ))
        }
        _ => None,
    };
    let free: Vec<FitParameter> = options.free.iter().copied().collect();
    let needs_prefit = free
        .iter()
        .any(|f| matches!(f, FitParameter::OmegaM | FitParameter::GammaM));
    let prefit = if needs_prefit {
        Some(lorentzian_prefit(spectrum)?)
    } else {
        None
    };

    let coupling0 = known.effective_coupling();
    let phi0 = known.relative_phase();
    let start: Vec<f64> = free
        .iter()
        .map(|f| match f {
            FitParameter::OmegaM => prefit.map_or(known.omega_m, |l| l.center),
            FitParameter::GammaM => prefit.map_or(known.gamma_m, |l| l.fwhm),
            FitParameter::Coupling => coupling0,
            FitParameter::Phase => phi0,
        })
        .collect();
    let coupling_scale = coupling0
        .abs()
        .max(1e-3 * known.kappa_e.sqrt() * known.probe_amplitude)
        .max(1e-300);
    let scales: Vec<f64> = free
        .iter()
        .zip(&start)
        .map(|(f, s)| match f {
            FitParameter::OmegaM | FitParameter::GammaM => s.abs().max(1e-300),
            FitParameter::Coupling => coupling_scale,
            FitParameter::Phase => 1.0,
        })
        .collect();
    let names: Vec<String> = free.iter().map(|f| f.name().to_string()).collect();

    let unpack = |p: &[f64]| -> (f64, f64, f64, f64) {
        let mut v = (known.omega_m, known.gamma_m, coupling0, phi0);
        for (f, &x) in free.iter().zip(p) {
            match f {
                FitParameter::OmegaM => v.0 = x,
                FitParameter::GammaM => v.1 = x,
                FitParameter::Coupling => v.2 = x,
                FitParameter::Phase => v.3 = x,
            }
        }
        v
    };
    let omega = &spectrum.omega;
    let power = &spectrum.power;
    let residual = |p: &[f64]| -> Result<Vec<f64>> {
        let (om, g, c, phi) = unpack(p);
        let params = with_fit_values(known, om, g, c, phi)?;
        let mut out = Vec::with_capacity(omega.len() * if complex_data.is_some() { 2 } else { 1 });
        for (k, &w) in omega.iter().enumerate() {
            let t = transmission(&params, w)?;
            match &complex_data {
                Some(d) => {
                    let diff: Complex64 = t - d[k];
                    out.push(diff.re);
                    out.push(diff.im);
                }
                None => out.push(t.norm_sqr() - power[k]),
            }
        }
        Ok(out)
    };
    let lm = levenberg_marquardt(residual, &start, &scales, &names, &options.lm)?;
    let (om, g, c, phi) = unpack(&lm.params);
    let force = if known.g0 > 0.0 && known.photon_number > 0.0 {
        Some(force_from_coupling(
            c,
            known.g0,
            known.photon_number,
            known.mass,
            g,
            om,
        )?)
    } else {
        None
    };
    Ok(FitResult {
        omega_m_hat: om,
        gamma_m_hat: g,
        coupling_hat: c,
        phi_hat: phi,
        peak_height_hat: c / (known.kappa_e.sqrt() * known.probe_amplitude),
        force_amplitude_hat: force,
        residual_norm: lm.residuals.iter().map(|r| r * r).sum::<f64>().sqrt(),
        free: names,
        covariance: lm.covariance,
        iterations: lm.iterations,
        converged: lm.converged,
        gradient_measure: lm.gradient_measure,
        cost_history: lm.cost_history,
        prefit,
    })
}
