use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mtomit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtomit"))
        .args(args)
        .current_dir(dir)
        .env_remove("SOURCE_DATE_EPOCH")
        .env("OMIT_SIM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn preset_json(name: &str, dir: &Path) -> serde_json::Value {
    let o = mtomit(&["presets", "--show", name], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_config(dir: &Path, value: &serde_json::Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn presets_are_listed() {
    let tmp = TempDir::new().unwrap();
    let o = mtomit(&["presets"], tmp.path());
    assert!(o.status.success());
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        "fig3a\nfig3b\nfig4\nfig5\n"
    );
}

#[test]
fn published_schema_is_current() {
    let tmp = TempDir::new().unwrap();
    let o = mtomit(&["presets", "--schema"], tmp.path());
    assert!(o.status.success());
    let published = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/run_config.schema.json"),
    )
    .unwrap();
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        published,
        "regenerate with `mtomit presets --schema`"
    );
}

#[test]
fn run_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    for out in ["a", "b"] {
        let o = mtomit(
            &["run", "--preset", "fig3a", "--out", out, "--grid", "201"],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["fig3a.csv", "fig3a.json"] {
        let a = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let csv = std::fs::read_to_string(tmp.path().join("a/fig3a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 201);
    assert!(csv.starts_with("f_d_N,omega_rad_s,omega_over_Omega_m,re_Tp,im_Tp,abs_Tp_sq\n"));
}

#[test]
fn metadata_carries_resolved_parameters() {
    let tmp = TempDir::new().unwrap();
    let o = mtomit(&["run", "--preset", "fig5", "--grid", "101"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("fig5.json")).unwrap()).unwrap();
    let r = &meta["resolved"];
    assert_eq!(
        r["config"],
        preset_json("fig5", tmp.path())
            .as_object()
            .map(|m| {
                let mut m = m.clone();
                m["sweep"]["grid"]["points"] = 101.into();
                serde_json::Value::Object(m)
            })
            .unwrap()
    );
    assert!(r["params"]["photon_number"].as_f64().unwrap() > 1e6);
    assert_eq!(r["family"]["members"].as_array().unwrap().len(), 3);
    assert!(meta["timestamp_unix"].is_null());
}

#[test]
fn fig4_surface_has_phase_rows() {
    let tmp = TempDir::new().unwrap();
    let o = mtomit(&["run", "--preset", "fig4", "--grid", "11"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("fig4.csv")).unwrap();
    assert!(csv.starts_with("phi_rad,"));
    assert_eq!(csv.lines().count(), 1 + 121 * 11);
}

#[test]
fn unknown_key_reports_field_path() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = preset_json("fig3a", tmp.path());
    cfg["drive"]["pump_power_mw"] = 0.5.into();
    let path = write_config(tmp.path(), &cfg);
    let o = mtomit(&["run", "--config", &path], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("drive.pump_power_mw"), "{}", stderr(&o));
}

#[test]
fn wrong_type_reports_field_path() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = preset_json("fig3a", tmp.path());
    cfg["cavity"]["gap"] = "100 nm".into();
    let path = write_config(tmp.path(), &cfg);
    let o = mtomit(&["run", "--config", &path], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cavity.gap"), "{}", stderr(&o));
}

#[test]
fn infeasible_physics_cites_invariant() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = preset_json("fig3a", tmp.path());
    cfg["cavity"]["environment_index"] = 1.5.into();
    let path = write_config(tmp.path(), &cfg);
    let o = mtomit(&["run", "--config", &path], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("n_c"), "{}", stderr(&o));
}

#[test]
fn verify_passes_on_fig3a() {
    let tmp = TempDir::new().unwrap();
    let o = mtomit(
        &["verify", "--preset", "fig3a", "--grid", "5", "--out", "v"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("PASS").count(), 4, "{stdout}");
    assert!(tmp.path().join("v/fig3a_oracle.csv").exists());
}

#[test]
fn verify_without_coupling_matches_bare_cavity() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = preset_json("fig3a", tmp.path());
    cfg["overrides"]["g0_hz_per_m"] = 0.0.into();
    cfg["sweep"]["family"] = serde_json::Value::Null;
    let path = write_config(tmp.path(), &cfg);
    let o = mtomit(
        &["verify", "--config", &path, "--grid", "5", "--out", "."],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("fig3a_oracle.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let dev: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(dev < 1e-6, "{line}");
    }
}

#[test]
fn fit_round_trip_from_run_output() {
    let tmp = TempDir::new().unwrap();
    let o = mtomit(&["run", "--preset", "fig3a", "--grid", "401"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mtomit(
        &["fit", "fig3a.csv", "--preset", "fig3a", "--out", "fit.json"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("fit.json")).unwrap()).unwrap();
    let omega_m = 2.0 * std::f64::consts::PI * 20.68e6;
    assert!((fit["omega_m_hat"].as_f64().unwrap() / omega_m - 1.0).abs() < 5e-3);
    assert!(fit["converged"].as_bool().unwrap());
}

#[test]
fn truncated_spectrum_is_a_parse_error() {
    let tmp = TempDir::new().unwrap();
    let o = mtomit(&["run", "--preset", "fig3a", "--grid", "101"], tmp.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(tmp.path().join("fig3a.csv")).unwrap();
    let cut = &csv[..csv.len() - 40];
    std::fs::write(tmp.path().join("cut.csv"), cut).unwrap();
    let o = mtomit(&["fit", "cut.csv", "--preset", "fig3a"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 405"), "{}", stderr(&o));
}

#[test]
fn flat_spectrum_is_a_fit_failure() {
    let tmp = TempDir::new().unwrap();
    let mut csv = String::from("omega_rad_s,omega_over_Omega_m,re_Tp,im_Tp,abs_Tp_sq\n");
    let omega_m = 2.0 * std::f64::consts::PI * 20.68e6;
    for k in 0..101 {
        let r = 0.9 + 0.002 * k as f64;
        csv.push_str(&format!("{:e},{:e},,,0.5\n", r * omega_m, r));
    }
    std::fs::write(tmp.path().join("flat.csv"), csv).unwrap();
    let o = mtomit(&["fit", "flat.csv", "--preset", "fig3a"], tmp.path());
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mtomit"))
        .args(["presets"])
        .current_dir(tmp.path())
        .env("OMIT_SIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
