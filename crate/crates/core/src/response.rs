//! Analytic steady-state probe transmission.
//!
//! The cavity is pumped at ω_l and probed at ω_p = ω_l + ω while the beam is
//! driven at the same ω, so probe- and force-generated sidebands share the
//! frequency axis. Both sidebands are kept to first order around the pumped
//! steady state with a real intracavity amplitude √n_d.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::cavity::{
    equilibrium_displacement, photon_number_for_rates, solve_effective_detuning_for_rates,
    StaticLoad,
};
use crate::error::{ensure, invalid, Error, Result};

/// How the pump detuning is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detuning {
    /// Effective detuning Δ including the static shift.
    Effective(f64),
    /// Bare detuning Δ₀ = ω_l − ω_c; Δ is found self-consistently.
    Bare(f64),
}

/// Independent inputs of the single-mode model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemInputs {
    pub hbar: f64,
    pub mass: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    pub kappa_e: f64,
    pub kappa_i: f64,
    pub g0: f64,
    /// ε_l (√(photons/s)).
    pub pump_amplitude: f64,
    pub detuning: Detuning,
    pub static_force: f64,
    /// ε_p (√(photons/s)).
    pub probe_amplitude: f64,
    pub probe_phase: f64,
    pub force_amplitude: f64,
    pub force_phase: f64,
    /// Small-displacement bound on f_d, when the cavity geometry is known.
    pub force_bound: Option<f64>,
}

impl SystemInputs {
    pub fn resolve(&self) -> Result<SystemParams> {
        let finite = [
            self.hbar,
            self.mass,
            self.omega_m,
            self.gamma_m,
            self.kappa_e,
            self.kappa_i,
            self.g0,
            self.pump_amplitude,
            self.static_force,
            self.probe_amplitude,
            self.probe_phase,
            self.force_amplitude,
            self.force_phase,
        ];
        ensure(finite.iter().all(|v| v.is_finite()), || {
            "system parameters must be finite".into()
        })?;
        ensure(self.hbar > 0.0, || "ħ must be > 0".into())?;
        ensure(self.mass > 0.0, || {
            format!("mass must be > 0, got {}", self.mass)
        })?;
        ensure(self.omega_m > 0.0, || {
            format!("Ω_m must be > 0, got {}", self.omega_m)
        })?;
        ensure(self.gamma_m > 0.0, || {
            format!("γ_m must be > 0, got {}", self.gamma_m)
        })?;
        ensure(self.kappa_e >= 0.0 && self.kappa_i >= 0.0, || {
            "decay rates must be >= 0".into()
        })?;
        ensure(self.kappa_e + self.kappa_i > 0.0, || {
            "total decay rate κ must be > 0".into()
        })?;
        ensure(self.pump_amplitude >= 0.0, || {
            "pump amplitude must be >= 0".into()
        })?;
        ensure(self.probe_amplitude >= 0.0, || {
            "probe amplitude must be >= 0".into()
        })?;
        ensure(self.force_amplitude >= 0.0, || {
            format!("f_d must be >= 0, got {}", self.force_amplitude)
        })?;

        let kappa = self.kappa_e + self.kappa_i;
        let (detuning, bare_detuning, n_d, x0) = match self.detuning {
            Detuning::Effective(delta) => {
                let n = photon_number_for_rates(self.kappa_e, kappa, self.pump_amplitude, delta)?;
                let x0 = equilibrium_displacement(
                    self.hbar,
                    self.mass,
                    self.omega_m,
                    self.g0,
                    n,
                    self.static_force,
                );
                (delta, delta + self.g0 * x0, n, x0)
            }
            Detuning::Bare(delta0) => {
                let load = StaticLoad {
                    hbar: self.hbar,
                    mass: self.mass,
                    omega_m: self.omega_m,
                    g0: self.g0,
                    static_force: self.static_force,
                };
                let eq = solve_effective_detuning_for_rates(
                    self.kappa_e,
                    kappa,
                    &load,
                    self.pump_amplitude,
                    delta0,
                )?;
                let n = photon_number_for_rates(
                    self.kappa_e,
                    kappa,
                    self.pump_amplitude,
                    eq.effective_detuning,
                )?;
                (eq.effective_detuning, delta0, n, eq.x0)
            }
        };
        Ok(SystemParams {
            hbar: self.hbar,
            mass: self.mass,
            omega_m: self.omega_m,
            gamma_m: self.gamma_m,
            kappa_e: self.kappa_e,
            kappa_i: self.kappa_i,
            detuning,
            bare_detuning,
            g0: self.g0,
            pump_amplitude: self.pump_amplitude,
            photon_number: n_d,
            x0,
            static_force: self.static_force,
            probe_amplitude: self.probe_amplitude,
            probe_phase: self.probe_phase,
            force_amplitude: self.force_amplitude,
            force_phase: self.force_phase,
            force_bound: self.force_bound,
        })
    }
}

/// Fully resolved parameter set; every derived quantity is stored or
/// available through a method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub hbar: f64,
    pub mass: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    pub kappa_e: f64,
    pub kappa_i: f64,
    /// Effective detuning Δ.
    pub detuning: f64,
    /// Bare detuning Δ₀ = Δ + g₀x₀.
    pub bare_detuning: f64,
    pub g0: f64,
    pub pump_amplitude: f64,
    /// n_d.
    pub photon_number: f64,
    pub x0: f64,
    pub static_force: f64,
    pub probe_amplitude: f64,
    pub probe_phase: f64,
    pub force_amplitude: f64,
    pub force_phase: f64,
    pub force_bound: Option<f64>,
}

impl SystemParams {
    pub fn kappa(&self) -> f64 {
        self.kappa_e + self.kappa_i
    }

    /// φ = φ_p − φ_d.
    pub fn relative_phase(&self) -> f64 {
        self.probe_phase - self.force_phase
    }

    /// X_d = f_d/(mγ_mΩ_m).
    pub fn displacement_amplitude(&self) -> f64 {
        self.force_amplitude / (self.mass * self.gamma_m * self.omega_m)
    }

    /// G = g₀√n_d X_d.
    pub fn effective_coupling(&self) -> f64 {
        self.g0 * self.photon_number.sqrt() * self.displacement_amplitude()
    }

    pub fn quality_factor(&self) -> f64 {
        self.omega_m / self.gamma_m
    }

    pub fn is_resolved_sideband(&self) -> bool {
        self.omega_m > self.kappa()
    }

    /// Optomechanical cooperativity 2ħg₀²n_d/(mγ_mΩ_mκ).
    pub fn cooperativity(&self) -> f64 {
        2.0 * self.hbar * self.g0 * self.g0 * self.photon_number
            / (self.mass * self.gamma_m * self.omega_m * self.kappa())
    }

    /// Transparency peak height G/(√κ_e ε_p).
    pub fn peak_height(&self) -> f64 {
        self.effective_coupling() / (self.kappa_e.sqrt() * self.probe_amplitude)
    }

    /// Conditions under which the first-order model is questionable.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.pump_amplitude > 0.0 && self.probe_amplitude / self.pump_amplitude > 1e-2 {
            out.push(format!(
                "probe is not weak: ε_p/ε_l = {:.3e} > 1e-2",
                self.probe_amplitude / self.pump_amplitude
            ));
        }
        if let Some(bound) = self.force_bound {
            if self.force_amplitude >= bound {
                out.push(format!(
                    "f_d = {:.3e} N exceeds the small-displacement bound {:.3e} N",
                    self.force_amplitude, bound
                ));
            }
        }
        out
    }

    pub fn with_force_amplitude(&self, f_d: f64) -> Result<Self> {
        ensure(f_d >= 0.0 && f_d.is_finite(), || {
            format!("f_d must be finite and >= 0, got {f_d}")
        })?;
        Ok(Self {
            force_amplitude: f_d,
            ..self.clone()
        })
    }

    /// Sets φ = φ_p − φ_d by moving the probe phase.
    pub fn with_relative_phase(&self, phi: f64) -> Self {
        Self {
            probe_phase: self.force_phase + phi,
            ..self.clone()
        }
    }

    /// Changes γ_m so that Ω_m/γ_m = `q`.
    pub fn with_quality_factor(&self, q: f64) -> Result<Self> {
        ensure(q > 0.0 && q.is_finite(), || {
            format!("quality factor must be > 0, got {q}")
        })?;
        Ok(Self {
            gamma_m: self.omega_m / q,
            ..self.clone()
        })
    }
}

/// χ_m(ω) = 1/(m(Ω_m² − ω² − iγ_Mω)).
pub fn mech_susceptibility(mass: f64, omega_m: f64, gamma_m: f64, omega: f64) -> Complex64 {
    Complex64::new(
        mass * (omega_m * omega_m - omega * omega),
        -mass * gamma_m * omega,
    )
    .inv()
}

/// First-order amplitudes at the probe/force offset ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandAmplitudes {
    /// Probe-generated sideband α₁⁻.
    pub alpha1_minus: Complex64,
    /// Force-generated sideband α₂⁻.
    pub alpha2_minus: Complex64,
    /// Displacement at e^(−iωt) driven by the probe beat.
    pub x1: Complex64,
    /// Displacement at e^(−iωt) driven by the external force.
    pub x2: Complex64,
}

pub fn sideband_amplitudes(p: &SystemParams, omega: f64) -> SidebandAmplitudes {
    let i = Complex64::i();
    let chi = mech_susceptibility(p.mass, p.omega_m, p.gamma_m, omega);
    let amp = p.photon_number.sqrt();
    let half_kappa = 0.5 * p.kappa();
    let lower = Complex64::new(half_kappa, p.detuning - omega);
    let backaction = p.hbar * p.g0 * p.g0 * p.photon_number * chi;
    let b = 1.0 + i * backaction / lower;
    let denominator =
        2.0 * backaction * p.detuning / lower + Complex64::new(half_kappa, -(p.detuning + omega));

    let probe = p.kappa_e.sqrt() * p.probe_amplitude * Complex64::from_polar(1.0, -p.probe_phase);
    let force = 0.5 * p.force_amplitude * Complex64::from_polar(1.0, -p.force_phase);

    let alpha1_minus = b * probe / denominator;
    let alpha2_minus = -i * p.g0 * amp * chi * force / denominator;
    let x1 = -chi * p.hbar * p.g0 * amp * alpha1_minus / b;
    let x2 = chi * (force - p.hbar * p.g0 * amp * alpha2_minus) / b;
    SidebandAmplitudes {
        alpha1_minus,
        alpha2_minus,
        x1,
        x2,
    }
}

/// T_p(ω) = 1 − √κ_e(α₁⁻ + α₂⁻)/(ε_p e^(−iφ_p)).
pub fn transmission(p: &SystemParams, omega: f64) -> Result<Complex64> {
    ensure(p.probe_amplitude > 0.0, || {
        "transmission is undefined for a zero probe amplitude".into()
    })?;
    let s = sideband_amplitudes(p, omega);
    Ok(transmission_from_sidebands(
        p,
        s.alpha1_minus + s.alpha2_minus,
    ))
}

pub(crate) fn transmission_from_sidebands(p: &SystemParams, sideband: Complex64) -> Complex64 {
    let probe = p.probe_amplitude * Complex64::from_polar(1.0, -p.probe_phase);
    1.0 - p.kappa_e.sqrt() * sideband / probe
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSideband {
    /// Approximate T_p(Ω_m).
    pub value: Complex64,
    /// G/(√κ_e ε_p).
    pub peak_height: f64,
    pub cooperativity: f64,
    pub warning: Option<String>,
}

/// Leading order of T_p(Ω_m) for Δ = −Ω_m and Ω_m ≫ κ:
/// T_p ≈ 1 − (2κ_e/κ)(1 + G e^(iφ)/(2√κ_e ε_p))/(1 + C).
pub fn transmission_resolved_sideband(p: &SystemParams) -> Result<ResolvedSideband> {
    ensure(p.probe_amplitude > 0.0, || {
        "transmission is undefined for a zero probe amplitude".into()
    })?;
    let c = p.cooperativity();
    let height = p.peak_height();
    let drive = 1.0 + 0.5 * height * Complex64::from_polar(1.0, p.relative_phase());
    let value = 1.0 - 2.0 * p.kappa_e / p.kappa() * drive / (1.0 + c);
    let warning = (!p.is_resolved_sideband()).then(|| {
        format!(
            "not resolved-sideband: Ω_m/κ = {:.3}",
            p.omega_m / p.kappa()
        )
    });
    Ok(ResolvedSideband {
        value,
        peak_height: height,
        cooperativity: c,
        warning,
    })
}

/// Provenance attached to every emitted spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub params: SystemParams,
    pub code_version: String,
    /// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` when set.
    pub timestamp_unix: Option<i64>,
    pub warnings: Vec<String>,
}

impl SpectrumMetadata {
    pub fn new(params: &SystemParams) -> Self {
        Self {
            params: params.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: std::env::var("SOURCE_DATE_EPOCH")
                .ok()
                .and_then(|s| s.trim().parse().ok()),
            warnings: params.warnings(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Probe offset ω (rad/s), strictly increasing.
    pub omega: Vec<f64>,
    pub transmission: Vec<Complex64>,
    pub metadata: SpectrumMetadata,
}

impl Spectrum {
    pub fn omega_m(&self) -> f64 {
        self.metadata.params.omega_m
    }

    /// |T_p|² per point.
    pub fn power(&self) -> Vec<f64> {
        self.transmission.iter().map(|t| t.norm_sqr()).collect()
    }

    pub fn to_measured(&self) -> MeasuredSpectrum {
        MeasuredSpectrum {
            omega: self.omega.clone(),
            omega_m: Some(self.omega_m()),
            transmission: Some(self.transmission.clone()),
            power: self.power(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_io)?;
        let om = self.omega_m();
        for (&omega, t) in self.omega.iter().zip(&self.transmission) {
            w.write_record([
                fmt(omega),
                fmt(omega / om),
                fmt(t.re),
                fmt(t.im),
                fmt(t.norm_sqr()),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_files(&self, csv_path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(csv_path)?))?;
        write_json(&csv_path.with_extension("json"), &self.metadata)
    }
}

pub const CSV_HEADER: [&str; 5] = [
    "omega_rad_s",
    "omega_over_Omega_m",
    "re_Tp",
    "im_Tp",
    "abs_Tp_sq",
];

/// 17 significant digits, round-trip exact.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Spectrum as read back from disk: |T_p|² always, complex T_p when both
/// `re_Tp` and `im_Tp` are present on every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSpectrum {
    pub omega: Vec<f64>,
    /// Ω_m implied by the `omega_over_Omega_m` column.
    pub omega_m: Option<f64>,
    pub transmission: Option<Vec<Complex64>>,
    pub power: Vec<f64>,
}

impl MeasuredSpectrum {
    pub fn from_power(omega: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        let s = Self {
            omega,
            omega_m: None,
            transmission: None,
            power,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.omega.is_empty(), || "spectrum is empty".into())?;
        ensure(self.omega.len() == self.power.len(), || {
            "omega and power lengths differ".into()
        })?;
        if let Some(t) = &self.transmission {
            ensure(t.len() == self.omega.len(), || {
                "omega and transmission lengths differ".into()
            })?;
        }
        ensure(self.omega.windows(2).all(|w| w[0] < w[1]), || {
            "frequency grid must be strictly increasing".into()
        })?;
        ensure(
            self.omega.iter().chain(&self.power).all(|v| v.is_finite()),
            || "spectrum values must be finite".into(),
        )
    }

    /// Reads the five-column spectrum CSV. Every error carries the 1-based
    /// line number of the offending record.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        Self::read_csv_member(input, None)
    }

    /// Reads either a single spectrum or one member of a family CSV (label
    /// column first). `member` indexes the distinct labels in file order and
    /// defaults to the last one.
    pub fn read_csv_member<R: Read>(input: R, member: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(input);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let names: Vec<&str> = header.iter().collect();
        let offset = if names == CSV_HEADER {
            0
        } else if names.len() == CSV_HEADER.len() + 1 && names[1..] == CSV_HEADER {
            1
        } else {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header [label,]{}, found {}",
                    CSV_HEADER.join(","),
                    names.join(",")
                ),
            });
        };
        if offset == 0 && member.is_some_and(|m| m > 0) {
            return Err(invalid("a single-spectrum file has only member 0"));
        }
        let width = CSV_HEADER.len() + offset;
        let mut rows: Vec<(f64, [f64; 4], Option<Complex64>, usize)> = Vec::new();
        let mut labels: Vec<f64> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line()) as usize;
            if rec.len() != width {
                return Err(Error::Parse {
                    line: line as u64,
                    message: format!("expected {width} fields, found {}", rec.len()),
                });
            }
            let num = |k: usize| -> Result<f64> {
                rec[k].parse::<f64>().map_err(|e| Error::Parse {
                    line: line as u64,
                    message: format!("column {}: {e} ({:?})", names[k], &rec[k]),
                })
            };
            let label = if offset == 1 { num(0)? } else { 0.0 };
            let om = num(offset)?;
            let r = num(offset + 1)?;
            let p = num(offset + 4)?;
            if !(label.is_finite() && om.is_finite() && r.is_finite() && p.is_finite()) {
                return Err(Error::Parse {
                    line: line as u64,
                    message: "non-finite value".into(),
                });
            }
            let t = if rec[offset + 2].is_empty() || rec[offset + 3].is_empty() {
                None
            } else {
                Some(Complex64::new(num(offset + 2)?, num(offset + 3)?))
            };
            if labels.last() != Some(&label) {
                if labels.contains(&label) {
                    return Err(Error::Parse {
                        line: line as u64,
                        message: format!("rows for label {label} are not contiguous"),
                    });
                }
                labels.push(label);
            }
            rows.push((label, [om, r, p, 0.0], t, line));
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "spectrum has no data rows".into(),
            });
        }
        let k = member.unwrap_or(labels.len() - 1);
        ensure(k < labels.len(), || {
            format!("member {k} requested but the file holds {}", labels.len())
        })?;
        let chosen = labels[k];

        let mut omega: Vec<f64> = Vec::new();
        let mut ratio = Vec::new();
        let mut complex = Some(Vec::new());
        let mut power = Vec::new();
        for (label, [om, r, p, _], t, line) in rows {
            if label != chosen {
                continue;
            }
            if let Some(last) = omega.last() {
                if om <= *last {
                    return Err(Error::Parse {
                        line: line as u64,
                        message: "frequency grid must be strictly increasing".into(),
                    });
                }
            }
            match (t, complex.as_mut()) {
                (Some(t), Some(c)) => c.push(t),
                _ => complex = None,
            }
            omega.push(om);
            ratio.push(r);
            power.push(p);
        }
        let omega_m = omega
            .iter()
            .zip(&ratio)
            .find(|(_, &r)| r != 0.0)
            .map(|(o, r)| o / r)
            .filter(|v| v.is_finite() && *v > 0.0);
        let s = Self {
            omega,
            omega_m,
            transmission: complex,
            power,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Spectrum of `params` on `omega` (rad/s), evaluated in parallel.
pub fn spectrum(params: &SystemParams, omega: &[f64]) -> Result<Spectrum> {
    ensure(!omega.is_empty(), || "frequency grid is empty".into())?;
    ensure(omega.windows(2).all(|w| w[0] < w[1]), || {
        "frequency grid must be strictly increasing".into()
    })?;
    ensure(omega.iter().all(|w| w.is_finite()), || {
        "frequency grid must be finite".into()
    })?;
    let transmission = omega
        .par_iter()
        .map(|&w| transmission(params, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        omega: omega.to_vec(),
        transmission,
        metadata: SpectrumMetadata::new(params),
    })
}

/// `n` evenly spaced points of ω/Ω_m on `[lo, hi]`, returned in rad/s.
pub fn relative_grid(omega_m: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    ensure(n >= 2, || format!("grid needs >= 2 points, got {n}"))?;
    ensure(lo < hi, || {
        format!("grid bounds must satisfy lo < hi, got [{lo}, {hi}]")
    })?;
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
        .map(|r| r * omega_m)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Force amplitude f_d (N).
    ForceAmplitude,
    /// Relative phase φ (rad).
    Phase,
    /// Quality factor Q_m.
    QualityFactor,
}

impl SweepAxis {
    pub fn column(&self) -> &'static str {
        match self {
            SweepAxis::ForceAmplitude => "f_d_N",
            SweepAxis::Phase => "phi_rad",
            SweepAxis::QualityFactor => "Q_m",
        }
    }

    pub fn apply(&self, p: &SystemParams, value: f64) -> Result<SystemParams> {
        match self {
            SweepAxis::ForceAmplitude => p.with_force_amplitude(value),
            SweepAxis::Phase => Ok(p.with_relative_phase(value)),
            SweepAxis::QualityFactor => p.with_quality_factor(value),
        }
    }
}

/// A set of spectra sharing one frequency grid, labelled by the swept value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFamily {
    pub label: String,
    pub values: Vec<f64>,
    pub spectra: Vec<Spectrum>,
}

impl SpectrumFamily {
    /// One CSV with the label column followed by the spectrum columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.label.as_str()];
        header.extend(CSV_HEADER);
        w.write_record(&header).map_err(csv_io)?;
        for (&v, s) in self.values.iter().zip(&self.spectra) {
            let om = s.omega_m();
            for (&omega, t) in s.omega.iter().zip(&s.transmission) {
                w.write_record([
                    fmt(v),
                    fmt(omega),
                    fmt(omega / om),
                    fmt(t.re),
                    fmt(t.im),
                    fmt(t.norm_sqr()),
                ])
                .map_err(csv_io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Spectra for each `values[k]` applied along `axis`.
pub fn sweep(
    params: &SystemParams,
    axis: SweepAxis,
    values: &[f64],
    omega: &[f64],
) -> Result<SpectrumFamily> {
    ensure(!values.is_empty(), || "sweep values are empty".into())?;
    let variants = values
        .iter()
        .map(|&v| axis.apply(params, v))
        .collect::<Result<Vec<_>>>()?;
    sweep_variants(axis.column(), values, &variants, omega)
}

/// Spectra for explicitly constructed parameter sets.
pub fn sweep_variants(
    label: &str,
    values: &[f64],
    variants: &[SystemParams],
    omega: &[f64],
) -> Result<SpectrumFamily> {
    ensure(!variants.is_empty(), || "sweep has no members".into())?;
    ensure(values.len() == variants.len(), || {
        "sweep labels and members differ in length".into()
    })?;
    let spectra = variants
        .iter()
        .map(|p| spectrum(p, omega))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumFamily {
        label: label.to_string(),
        values: values.to_vec(),
        spectra,
    })
}

/// Human-readable dump of the derived quantities.
pub fn describe(p: &SystemParams) -> String {
    let mut s = String::new();
    let two_pi = 2.0 * std::f64::consts::PI;
    let _ = writeln!(s, "Omega_m/2pi   = {:.6e} Hz", p.omega_m / two_pi);
    let _ = writeln!(
        s,
        "gamma_m/2pi   = {:.6e} Hz (Q = {:.4})",
        p.gamma_m / two_pi,
        p.quality_factor()
    );
    let _ = writeln!(s, "kappa/2pi     = {:.6e} Hz", p.kappa() / two_pi);
    let _ = writeln!(s, "Delta/2pi     = {:.6e} Hz", p.detuning / two_pi);
    let _ = writeln!(s, "n_d           = {:.6e}", p.photon_number);
    let _ = writeln!(s, "x0            = {:.6e} m", p.x0);
    let _ = writeln!(s, "X_d           = {:.6e} m", p.displacement_amplitude());
    let _ = writeln!(s, "G             = {:.6e} rad/s", p.effective_coupling());
    let _ = writeln!(s, "cooperativity = {:.6e}", p.cooperativity());
    s
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f_d" | "force_amplitude" => Ok(SweepAxis::ForceAmplitude),
            "phi" | "phase" => Ok(SweepAxis::Phase),
            "q" | "Q" | "quality_factor" => Ok(SweepAxis::QualityFactor),
            other => Err(invalid(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::f64::consts::PI;

    const TWO_PI: f64 = 2.0 * PI;

    /// fig3a operating point with g₀/2π = 0.165 GHz/m.
    pub(crate) fn fig3(force: f64) -> SystemParams {
        let omega_m = TWO_PI * 20.68e6;
        let kappa_e = TWO_PI * 20e6;
        let kappa_i = TWO_PI * 10e3;
        let hbar = 1.054571817e-34;
        let pump = (500e-6 / (hbar * TWO_PI * 299792458.0 / 1.55e-6)).sqrt();
        let kappa = kappa_e + kappa_i;
        let probe = (2.37 * kappa * kappa / (4.0 * kappa_e)).sqrt();
        SystemInputs {
            hbar,
            mass: 1.348e-19,
            omega_m,
            gamma_m: omega_m / 3.44,
            kappa_e,
            kappa_i,
            g0: TWO_PI * 0.165e9,
            pump_amplitude: pump,
            detuning: Detuning::Effective(-omega_m),
            static_force: 0.0,
            probe_amplitude: probe,
            probe_phase: 0.0,
            force_amplitude: force,
            force_phase: 0.0,
            force_bound: None,
        }
        .resolve()
        .unwrap()
    }

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1e-300)
    }

    #[test]
    fn susceptibility_limits() {
        let (m, om, g) = (1.3e-19, 1.3e8, 3.8e7);
        let static_c = mech_susceptibility(m, om, g, 0.0);
        assert!((static_c.re * m * om * om - 1.0).abs() < 1e-14 && static_c.im == 0.0);
        let res = mech_susceptibility(m, om, g, om);
        assert!(close(res, Complex64::new(0.0, 1.0 / (m * g * om)), 1e-14));
        assert!((res.norm() * 6e-11 - 6e-11 / (m * g * om)).abs() < 1e-25);
        assert!(mech_susceptibility(m, om, 1e30, om).norm() < 1e-20 * res.norm());
    }

    #[test]
    fn no_force_no_force_sideband() {
        let p = fig3(0.0);
        for w in [0.9, 1.0, 1.1] {
            let s = sideband_amplitudes(&p, w * p.omega_m);
            assert_eq!(s.alpha2_minus, Complex64::new(0.0, 0.0));
            assert_eq!(s.x2, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn zero_coupling_is_bare_lorentzian() {
        let mut p = fig3(6e-11);
        p.g0 = 0.0;
        p.probe_phase = 0.4;
        for w in [0.5, 0.97, 1.0, 1.3] {
            let omega = w * p.omega_m;
            let s = sideband_amplitudes(&p, omega);
            let bare = p.kappa_e.sqrt() * p.probe_amplitude * Complex64::from_polar(1.0, -0.4)
                / Complex64::new(0.5 * p.kappa(), -(p.detuning + omega));
            assert!(close(s.alpha1_minus, bare, 1e-14));
            let t = transmission(&p, omega).unwrap();
            let expected = 1.0 - p.kappa_e / Complex64::new(0.5 * p.kappa(), -(p.detuning + omega));
            assert!(close(t, expected, 1e-13));
        }
    }

    #[test]
    fn zero_probe_rejected() {
        let mut p = fig3(0.0);
        p.probe_amplitude = 0.0;
        assert!(transmission(&p, p.omega_m).is_err());
        assert!(transmission_resolved_sideband(&p).is_err());
    }

    #[test]
    fn fig3_dip_then_peak() {
        let grid = relative_grid(TWO_PI * 20.68e6, 0.96, 1.04, 401).unwrap();
        let s0 = spectrum(&fig3(0.0), &grid).unwrap().power();
        let centre = 200;
        let min = s0.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(s0[centre], min);
        assert!(s0[centre] < s0[0] && s0[centre] < s0[400]);

        let mut last = s0[centre];
        for f in [20e-12, 40e-12, 60e-12] {
            let v = transmission(&fig3(f), TWO_PI * 20.68e6).unwrap().norm_sqr();
            assert!(v > last);
            last = v;
        }
        let s60 = spectrum(&fig3(60e-12), &grid).unwrap().power();
        assert!(s60[centre] > s60[0] && s60[centre] > s60[400]);
    }

    #[test]
    fn phase_covariance() {
        let p = fig3(4e-11);
        let theta = 0.83;
        let mut q = p.clone();
        q.force_phase += theta;
        let a = sideband_amplitudes(&p, 1.02 * p.omega_m);
        let b = sideband_amplitudes(&q, 1.02 * p.omega_m);
        assert!(close(
            b.alpha2_minus,
            a.alpha2_minus * Complex64::from_polar(1.0, -theta),
            1e-13
        ));
        q.probe_phase += theta;
        let ta = transmission(&p, 1.02 * p.omega_m).unwrap().norm_sqr();
        let tb = transmission(&q, 1.02 * p.omega_m).unwrap().norm_sqr();
        assert!((ta - tb).abs() < 1e-12);
    }

    #[test]
    fn resolved_sideband_limits() {
        let mut p = fig3(0.0);
        p.kappa_i = 0.0;
        p.g0 = 0.0;
        let r = transmission_resolved_sideband(&p).unwrap();
        assert!(close(r.value, Complex64::new(-1.0, 0.0), 1e-15));
        assert!((r.value.norm_sqr() - 1.0).abs() < 1e-15);

        let p = fig3(0.0);
        let t0 = transmission_resolved_sideband(&p).unwrap().value;
        let t1 = transmission_resolved_sideband(&p.with_force_amplitude(3e-11).unwrap())
            .unwrap()
            .value;
        let t2 = transmission_resolved_sideband(&p.with_force_amplitude(6e-11).unwrap())
            .unwrap()
            .value;
        assert!(close(t2 - t0, 2.0 * (t1 - t0), 1e-12));
        // Ω_m barely exceeds κ here
        assert!(r.warning.is_none());
    }

    #[test]
    fn bare_detuning_round_trip() {
        let p = fig3(0.0);
        let mut inputs = SystemInputs {
            hbar: p.hbar,
            mass: p.mass,
            omega_m: p.omega_m,
            gamma_m: p.gamma_m,
            kappa_e: p.kappa_e,
            kappa_i: p.kappa_i,
            g0: 3e15,
            pump_amplitude: p.pump_amplitude,
            detuning: Detuning::Effective(-p.omega_m),
            static_force: 0.0,
            probe_amplitude: p.probe_amplitude,
            probe_phase: 0.0,
            force_amplitude: 0.0,
            force_phase: 0.0,
            force_bound: None,
        };
        let eff = inputs.resolve().unwrap();
        inputs.detuning = Detuning::Bare(eff.bare_detuning);
        let bare = inputs.resolve().unwrap();
        assert!((bare.detuning - eff.detuning).abs() < 1e-9 * p.omega_m);
        assert!((bare.photon_number / eff.photon_number - 1.0).abs() < 1e-8);
    }

    #[test]
    fn warnings_flag_strong_probe_and_force() {
        let mut p = fig3(1e-8);
        assert!(p.warnings().is_empty());
        p.force_bound = Some(2.3e-10);
        p.probe_amplitude = 0.1 * p.pump_amplitude;
        assert_eq!(p.warnings().len(), 2);
    }

    #[test]
    fn grid_validation() {
        let p = fig3(0.0);
        assert!(spectrum(&p, &[]).is_err());
        assert!(spectrum(&p, &[2.0, 1.0]).is_err());
        let g = relative_grid(2.0, 0.9, 1.1, 2001).unwrap();
        assert_eq!(g.len(), 2001);
        assert_eq!(*g.last().unwrap(), 2.2);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = fig3(6e-11);
        let s = spectrum(&p, &relative_grid(p.omega_m, 0.9, 1.1, 41).unwrap()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = MeasuredSpectrum::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.omega, s.omega);
        assert_eq!(back.transmission.as_ref().unwrap(), &s.transmission);
        assert_eq!(back.power, s.power());
        assert!((back.omega_m.unwrap() / p.omega_m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let good =
            "omega_rad_s,omega_over_Omega_m,re_Tp,im_Tp,abs_Tp_sq\n1,0.5,0,0,1\n2,1.0,0,0,1\n";
        assert!(MeasuredSpectrum::read_csv(good.as_bytes()).is_ok());
        let bad =
            "omega_rad_s,omega_over_Omega_m,re_Tp,im_Tp,abs_Tp_sq\n1,0.5,0,0,1\n2,1.0,0,0,x\n";
        match MeasuredSpectrum::read_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let truncated =
            "omega_rad_s,omega_over_Omega_m,re_Tp,im_Tp,abs_Tp_sq\n1,0.5,0,0,1\n2,1.0,0\n";
        match MeasuredSpectrum::read_csv(truncated.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(MeasuredSpectrum::read_csv("a,b\n".as_bytes()).is_err());
        let power_only = "omega_rad_s,omega_over_Omega_m,re_Tp,im_Tp,abs_Tp_sq\n1,0.5,,,1\n";
        assert!(MeasuredSpectrum::read_csv(power_only.as_bytes())
            .unwrap()
            .transmission
            .is_none());
    }

    #[test]
    fn family_member_selection() {
        let p = fig3(0.0);
        let grid = relative_grid(p.omega_m, 0.9, 1.1, 11).unwrap();
        let fam = sweep(&p, SweepAxis::ForceAmplitude, &[0.0, 3e-11, 6e-11], &grid).unwrap();
        let mut buf = Vec::new();
        fam.write_csv(&mut buf).unwrap();
        let last = MeasuredSpectrum::read_csv(buf.as_slice()).unwrap();
        assert_eq!(last, fam.spectra[2].to_measured());
        let first = MeasuredSpectrum::read_csv_member(buf.as_slice(), Some(0)).unwrap();
        assert_eq!(first, fam.spectra[0].to_measured());
        assert!(MeasuredSpectrum::read_csv_member(buf.as_slice(), Some(3)).is_err());
    }
}
