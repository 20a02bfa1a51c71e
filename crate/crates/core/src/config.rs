//! JSON run configuration, bundled presets and parameter resolution.
//!
//! Inputs are SI. Keys ending in `_hz` are ordinary frequencies and are
//! multiplied by 2π on resolution; `g0_hz_per_m` is g₀/2π.

use std::f64::consts::PI;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::beam::{compute_mode, Damping, MicrotubuleSpec, ModeData};
use crate::cavity::{
    coupling_rate, input_amplitude, probe_amplitude_for_photons, CavitySpec, CouplingResult,
};
use crate::constants::PhysicalConstants;
use crate::drive::DriveForce;
use crate::error::{ensure, invalid, Result};
use crate::oracle::OracleConfig;
use crate::response::{relative_grid, Detuning, SweepAxis, SystemInputs, SystemParams};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub microtubule: MicrotubuleConfig,
    pub cavity: CavityConfig,
    pub drive: DriveConfig,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MicrotubuleConfig {
    /// L (m).
    pub length: f64,
    /// r_o (m).
    pub outer_radius: f64,
    /// r_i (m).
    pub inner_radius: f64,
    /// Y (N/m²).
    pub young_modulus: f64,
    /// μ (kg/m).
    pub linear_mass_density: f64,
    /// γ_M/2π (Hz); give this or `quality_factor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_rate_hz: Option<f64>,
    /// Q_m = Ω_m/γ_M; give this or `damping_rate_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
    /// σ (m); defaults to outer_radius/√2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gyration_radius: Option<f64>,
    #[serde(default = "one")]
    pub mode_index: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    /// λ_c (m).
    pub wavelength: f64,
    pub refractive_index: f64,
    pub environment_index: f64,
    /// L_c (m).
    pub circumference: f64,
    /// R_c (m); defaults to circumference/2π.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// V_c (m³).
    pub mode_volume: f64,
    pub kappa_e_hz: f64,
    pub kappa_i_hz: f64,
    /// Beam centre to cavity rim (m).
    pub gap: f64,
    /// α∥ (C·m²/V).
    pub alpha_parallel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetuningConfig {
    /// Δ = −Ω_m after Ω_m is resolved.
    #[default]
    RedSideband,
    /// Effective detuning Δ/2π (Hz).
    EffectiveHz(f64),
    /// Bare detuning Δ₀/2π (Hz); Δ follows self-consistently.
    BareHz(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// P_l (W).
    pub pump_power: f64,
    /// P_p (W); takes precedence over `probe_photons`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_power: Option<f64>,
    /// Resonant probe photon number used when `probe_power` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_photons: Option<f64>,
    #[serde(default)]
    pub probe_phase: f64,
    /// f_d (N).
    #[serde(default)]
    pub force_amplitude: f64,
    #[serde(default)]
    pub force_phase: f64,
    /// F̄₀ (N).
    #[serde(default)]
    pub static_force: f64,
    #[serde(default)]
    pub detuning: DetuningConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// g₀/2π (Hz/m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0_hz_per_m: Option<f64>,
    /// Ω_m/2π (Hz).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m_hz: Option<f64>,
    /// Effective mass (kg).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// ε_p (√(photons/s)).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Lowest ω/Ω_m.
    pub lo: f64,
    /// Highest ω/Ω_m.
    pub hi: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lo: 0.9,
            hi: 1.1,
            points: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// One parameter stepped through `values`.
    Axis { axis: SweepAxis, values: Vec<f64> },
    /// Explicit parameter combinations.
    Members { members: Vec<MemberConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default)]
    pub enabled: bool,
    /// Grid points compared against the oracle.
    #[serde(default = "default_oracle_points")]
    pub points: usize,
    #[serde(default)]
    pub settings: OracleConfig,
}

fn default_oracle_points() -> usize {
    21
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            enabled: false,
            points: default_oracle_points(),
            settings: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// File name stem for emitted files.
    #[serde(default = "default_stem")]
    pub stem: String,
}

fn default_stem() -> String {
    "spectrum".to_string()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            stem: default_stem(),
        }
    }
}

/// Everything derived from a [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub config: RunConfig,
    pub mode: ModeData,
    /// g₀ from the evanescent-field formula, whether or not it is used.
    pub coupling_formula: CouplingResult,
    pub coupling: CouplingResult,
    pub decay_length: f64,
    pub pump_amplitude: f64,
    pub probe_amplitude: f64,
    pub force_bound: f64,
    pub params: SystemParams,
    pub grid: Vec<f64>,
    pub family: Option<ResolvedFamily>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedFamily {
    pub label: String,
    pub values: Vec<f64>,
    pub members: Vec<SystemParams>,
}

impl RunConfig {
    pub fn from_json(
        text: &str,
    ) -> std::result::Result<Self, serde_path_to_error::Error<serde_json::Error>> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
    }

    pub fn microtubule_spec(&self) -> Result<MicrotubuleSpec> {
        let m = &self.microtubule;
        let damping = match (m.damping_rate_hz, m.quality_factor) {
            (Some(g), None) => Damping::Rate(TWO_PI * g),
            (None, Some(q)) => Damping::QualityFactor(q),
            _ => {
                return Err(invalid(
                    "microtubule: give exactly one of damping_rate_hz and quality_factor",
                ))
            }
        };
        let spec = MicrotubuleSpec::new(
            m.length,
            m.outer_radius,
            m.inner_radius,
            m.young_modulus,
            m.linear_mass_density,
            damping,
        )?;
        match m.gyration_radius {
            Some(s) => spec.with_gyration_radius(s),
            None => Ok(spec),
        }
    }

    pub fn cavity_spec(&self) -> Result<CavitySpec> {
        let c = &self.cavity;
        let spec = CavitySpec {
            wavelength: c.wavelength,
            refractive_index: c.refractive_index,
            environment_index: c.environment_index,
            radius: c.radius.unwrap_or(c.circumference / TWO_PI),
            circumference: c.circumference,
            mode_volume: c.mode_volume,
            kappa_e: TWO_PI * c.kappa_e_hz,
            kappa_i: TWO_PI * c.kappa_i_hz,
            gap: c.gap,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn resolve(&self, constants: &PhysicalConstants) -> Result<Resolved> {
        let beam = self.microtubule_spec()?;
        let cavity = self.cavity_spec()?;
        let mode = compute_mode(&beam, constants, self.microtubule.mode_index)?;
        let coupling_formula = coupling_rate(&cavity, self.cavity.alpha_parallel, constants)?;
        let coupling = match self.overrides.g0_hz_per_m {
            Some(g) => CouplingResult::overridden(&cavity, TWO_PI * g)?,
            None => coupling_formula.clone(),
        };
        let omega_m = match self.overrides.omega_m_hz {
            Some(f) => {
                ensure(f > 0.0, || {
                    format!("overrides.omega_m_hz must be > 0, got {f}")
                })?;
                TWO_PI * f
            }
            None => mode.angular_frequency,
        };
        let mass = match self.overrides.mass {
            Some(m) => {
                ensure(m > 0.0, || format!("overrides.mass must be > 0, got {m}"))?;
                m
            }
            None => mode.effective_mass,
        };
        let gamma_m = beam.damping.rate(omega_m);
        ensure(gamma_m > 0.0, || "mechanical damping must be > 0".into())?;

        let d = &self.drive;
        let pump_amplitude = input_amplitude(d.pump_power, cavity.wavelength, constants)?;
        let probe_amplitude = match (
            self.overrides.probe_amplitude,
            d.probe_power,
            d.probe_photons,
        ) {
            (Some(e), _, _) => e,
            (None, Some(p), _) => input_amplitude(p, cavity.wavelength, constants)?,
            (None, None, n) => probe_amplitude_for_photons(&cavity, n.unwrap_or(2.37))?,
        };
        ensure(probe_amplitude > 0.0, || {
            "probe amplitude must be > 0".into()
        })?;
        let detuning = match d.detuning {
            DetuningConfig::RedSideband => Detuning::Effective(-omega_m),
            DetuningConfig::EffectiveHz(f) => Detuning::Effective(TWO_PI * f),
            DetuningConfig::BareHz(f) => Detuning::Bare(TWO_PI * f),
        };
        let force_bound =
            DriveForce::amplitude_bound(coupling.k_perp, cavity.gap, mass, gamma_m, omega_m);
        DriveForce::new(d.static_force, d.force_amplitude, d.force_phase, omega_m)?;
        let params = SystemInputs {
            hbar: constants.hbar(),
            mass,
            omega_m,
            gamma_m,
            kappa_e: cavity.kappa_e,
            kappa_i: cavity.kappa_i,
            g0: coupling.g0,
            pump_amplitude,
            detuning,
            static_force: d.static_force,
            probe_amplitude,
            probe_phase: d.probe_phase,
            force_amplitude: d.force_amplitude,
            force_phase: d.force_phase,
            force_bound: Some(force_bound),
        }
        .resolve()?;

        let g = &self.sweep.grid;
        let grid = relative_grid(omega_m, g.lo, g.hi, g.points)?;
        let family = match &self.sweep.family {
            None => None,
            Some(FamilyConfig::Axis { axis, values }) => {
                ensure(!values.is_empty(), || "sweep.family.values is empty".into())?;
                let members = values
                    .iter()
                    .map(|&v| axis.apply(&params, v))
                    .collect::<Result<Vec<_>>>()?;
                Some(ResolvedFamily {
                    label: axis.column().to_string(),
                    values: values.clone(),
                    members,
                })
            }
            Some(FamilyConfig::Members { members }) => {
                ensure(!members.is_empty(), || {
                    "sweep.family.members is empty".into()
                })?;
                let mut out = Vec::with_capacity(members.len());
                for m in members {
                    let mut p = params.clone();
                    if let Some(q) = m.quality_factor {
                        p = p.with_quality_factor(q)?;
                        p.force_bound = Some(DriveForce::amplitude_bound(
                            coupling.k_perp,
                            cavity.gap,
                            mass,
                            p.gamma_m,
                            omega_m,
                        ));
                    }
                    if let Some(f) = m.force_amplitude {
                        p = p.with_force_amplitude(f)?;
                    }
                    if let Some(phi) = m.phase {
                        p = p.with_relative_phase(phi);
                    }
                    out.push(p);
                }
                let values = (0..out.len()).map(|k| k as f64).collect();
                Some(ResolvedFamily {
                    label: "member".to_string(),
                    values,
                    members: out,
                })
            }
        };

        let mut warnings = params.warnings();
        if let Some(f) = &family {
            for (k, p) in f.members.iter().enumerate() {
                warnings.extend(
                    p.warnings()
                        .into_iter()
                        .map(|w| format!("{} {}: {w}", f.label, f.values[k])),
                );
            }
        }
        if self.overrides.omega_m_hz.is_some() {
            warnings.push(format!(
                "Omega_m overridden: {:.4e} Hz used, beam formula gives {:.4e} Hz",
                omega_m / TWO_PI,
                mode.angular_frequency / TWO_PI
            ));
        }
        if self.overrides.g0_hz_per_m.is_some() {
            warnings.push(format!(
                "g0 overridden: {:.4e} rad/s/m used, evanescent formula gives {:.4e} rad/s/m",
                coupling.g0, coupling_formula.g0
            ));
        }
        if self.oracle.enabled {
            self.oracle.settings.validate()?;
            ensure(self.oracle.points >= 2, || {
                "oracle.points must be >= 2".into()
            })?;
        }
        Ok(Resolved {
            config: self.clone(),
            decay_length: 1.0 / coupling.k_perp,
            mode,
            coupling_formula,
            coupling,
            pump_amplitude,
            probe_amplitude,
            force_bound,
            params,
            grid,
            family,
            warnings,
        })
    }
}

/// JSON schema of [`RunConfig`].
pub fn schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serialises")
}

pub const PRESET_NAMES: [&str; 4] = ["fig3a", "fig3b", "fig4", "fig5"];

/// Operating point shared by the presets: 1 µm microtubule next to a silica
/// microtoroid, red-sideband pump at 500 µW, 2.37 probe photons.
pub fn base_config() -> RunConfig {
    RunConfig {
        name: None,
        microtubule: MicrotubuleConfig {
            length: 1e-6,
            outer_radius: 12.5e-9,
            inner_radius: 7.5e-9,
            young_modulus: 1.2e9,
            linear_mass_density: 3.4e-13,
            damping_rate_hz: None,
            quality_factor: Some(3.44),
            gyration_radius: None,
            mode_index: 1,
        },
        cavity: CavityConfig {
            wavelength: 1.55e-6,
            refractive_index: 1.44,
            environment_index: 1.33,
            circumference: 0.1e-3,
            radius: None,
            mode_volume: 1.57e-16,
            kappa_e_hz: 20e6,
            kappa_i_hz: 10e3,
            gap: 0.1e-6,
            alpha_parallel: 1.1e-33,
        },
        drive: DriveConfig {
            pump_power: 500e-6,
            probe_power: None,
            probe_photons: Some(2.37),
            probe_phase: 0.0,
            force_amplitude: 60e-12,
            force_phase: 0.0,
            static_force: 0.0,
            detuning: DetuningConfig::RedSideband,
        },
        overrides: Overrides {
            g0_hz_per_m: Some(0.165e9),
            omega_m_hz: Some(20.68e6),
            mass: None,
            probe_amplitude: None,
        },
        sweep: SweepConfig::default(),
        oracle: OracleSection::default(),
        output: OutputConfig::default(),
    }
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let mut c = base_config();
    c.name = Some(name.to_string());
    c.output.stem = name.to_string();
    match name {
        "fig3a" | "fig3b" => {
            if name == "fig3b" {
                c.drive.probe_phase = PI / 2.0;
            }
            c.sweep.family = Some(FamilyConfig::Axis {
                axis: SweepAxis::ForceAmplitude,
                values: vec![0.0, 20e-12, 40e-12, 60e-12],
            });
        }
        "fig4" => {
            let n = 121;
            let values = (0..n)
                .map(|k| -PI + TWO_PI * k as f64 / (n - 1) as f64)
                .collect();
            c.sweep.grid.points = 401;
            c.sweep.family = Some(FamilyConfig::Axis {
                axis: SweepAxis::Phase,
                values,
            });
        }
        "fig5" => {
            c.cavity.kappa_e_hz = 10e6;
            c.cavity.kappa_i_hz = 1e3;
            c.sweep.grid = GridConfig {
                lo: 0.5,
                hi: 1.5,
                points: 2001,
            };
            let member = |q: f64, f: f64| MemberConfig {
                force_amplitude: Some(f),
                phase: None,
                quality_factor: Some(q),
            };
            c.sweep.family = Some(FamilyConfig::Members {
                members: vec![
                    member(1.03, 0.2e-9),
                    member(0.51, 0.4e-9),
                    member(0.02, 10e-9),
                ],
            });
        }
        other => {
            return Err(invalid(format!(
                "unknown preset {other:?}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        let c = PhysicalConstants::default();
        for name in PRESET_NAMES {
            let r = preset(name).unwrap().resolve(&c).unwrap();
            assert!((r.params.omega_m / (TWO_PI * 20.68e6) - 1.0).abs() < 1e-15);
            assert!((r.params.detuning + r.params.omega_m).abs() < 1e-6);
            assert!(r.family.is_some());
        }
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn preset_derived_quantities() {
        let r = preset("fig3a")
            .unwrap()
            .resolve(&PhysicalConstants::default())
            .unwrap();
        assert!((r.mode.effective_mass / 1.348e-19 - 1.0).abs() < 2e-3);
        assert!((r.params.photon_number / 2.25e7 - 1.0).abs() < 0.05);
        assert!((r.decay_length - 0.4468e-6).abs() < 1e-9);
        assert!(r.force_bound > 0.2e-9 && r.force_bound < 0.3e-9);
        assert_eq!(r.grid.len(), 2001);
        let f = r.family.unwrap();
        assert_eq!(f.values, vec![0.0, 20e-12, 40e-12, 60e-12]);
        assert_eq!(f.members[2].force_amplitude, 40e-12);
    }

    #[test]
    fn fig5_members_carry_quality_and_force() {
        let r = preset("fig5")
            .unwrap()
            .resolve(&PhysicalConstants::default())
            .unwrap();
        let f = r.family.unwrap();
        assert_eq!(f.members.len(), 3);
        assert!((f.members[2].quality_factor() - 0.02).abs() < 1e-12);
        assert_eq!(f.members[2].force_amplitude, 10e-9);
        assert!((f.members[0].kappa_e - TWO_PI * 10e6).abs() < 1e-6);
        let b0 = f.members[0].force_bound.unwrap();
        let b2 = f.members[2].force_bound.unwrap();
        assert!((b2 / b0 - 1.03 / 0.02).abs() < 1e-6 * b2 / b0);
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let c = preset("fig4").unwrap();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);

        let mut v: serde_json::Value = serde_json::to_value(&c).unwrap();
        v["cavity"]["kappa_hz"] = serde_json::json!(1.0);
        let err = RunConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.path().to_string(), "cavity.kappa_hz");
    }

    #[test]
    fn invalid_physics_is_reported() {
        let c = PhysicalConstants::default();
        let mut cfg = base_config();
        cfg.cavity.environment_index = 1.5;
        let e = cfg.resolve(&c).unwrap_err().to_string();
        assert!(e.contains("n_c"), "{e}");

        let mut cfg = base_config();
        cfg.microtubule.damping_rate_hz = Some(1e6);
        assert!(cfg.resolve(&c).is_err());
    }

    #[test]
    fn schema_rejects_extra_properties() {
        let s = schema();
        assert_eq!(s["additionalProperties"], serde_json::json!(false));
        assert!(s["properties"]["microtubule"].is_object());
    }
}
