use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mtomit_core::config::{preset, schema, Resolved, RunConfig, PRESET_NAMES};
use mtomit_core::fit::{full_model_fit, FitOptions, FitParameter, FitResult};
use mtomit_core::oracle::{compare_with_oracle, decimate, OracleComparison};
use mtomit_core::response::{
    describe, fmt as fmt_f64, spectrum, sweep_variants, write_json, MeasuredSpectrum,
};
use mtomit_core::{Error, PhysicalConstants};

const EXIT_CONFIG: u8 = 2;
const EXIT_PHYSICS: u8 = 3;
const EXIT_VERIFY: u8 = 4;
const EXIT_FIT: u8 = 5;
const EXIT_IO: u8 = 1;

/// Relative oracle deviation tolerated inside the small-displacement regime.
const VERIFY_TOLERANCE: f64 = 0.01;

#[derive(Parser)]
#[command(
    name = "mtomit",
    version,
    about = "Optomechanically induced transparency spectra of a driven microtubule"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the configured spectrum or spectrum family and write CSV + JSON.
    Run(RunArgs),
    /// Compare the analytic transmission with the time-domain oracle.
    Verify(VerifyArgs),
    /// Fit the transmission model to a measured spectrum CSV.
    Fit(FitArgs),
    /// List bundled presets, print one, or print the config schema.
    Presets(PresetArgs),
}

#[derive(Args)]
struct Source {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset (fig3a, fig3b, fig4, fig5).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Number of frequency points, overriding sweep.grid.points.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    /// Also run the oracle comparison and write <stem>_oracle.csv.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: Source,
    /// Write the comparison to <DIR>/<stem>_oracle.csv and .json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of oracle points, overriding oracle.points.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Spectrum CSV as written by `run`.
    spectrum: PathBuf,
    /// Configuration supplying the known parameters (g0, n_d, kappa, ...).
    #[command(flatten)]
    source: Source,
    /// Family member to fit (0-based, in file order); defaults to the last.
    #[arg(long, value_name = "K")]
    member: Option<usize>,
    /// Free parameters, comma separated: omega_m, gamma_m, G, phi.
    #[arg(long, value_delimiter = ',', default_value = "omega_m,gamma_m,G")]
    free: Vec<FitParameter>,
    /// Fit Re/Im T_p instead of |T_p|^2.
    #[arg(long)]
    complex: bool,
    /// Write the FitResult JSON here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PresetArgs {
    /// Print the named preset as JSON.
    #[arg(long, value_name = "NAME", conflicts_with = "schema")]
    show: Option<String>,
    /// Print the JSON schema of the run configuration.
    #[arg(long)]
    schema: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::StepSizeCollapse { .. } => EXIT_PHYSICS,
            Error::FitFailure { .. } | Error::RankDeficient { .. } => EXIT_FIT,
            Error::Parse { .. } | Error::Json(_) => EXIT_CONFIG,
            Error::Io(_) => EXIT_IO,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(f) = configure_threads() {
        eprintln!("error: {f}");
        return ExitCode::from(f.code);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Fit(a) => fit(a),
        Command::Presets(a) => presets(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("OMIT_SIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::new(
            EXIT_CONFIG,
            format!("OMIT_SIM_THREADS must be a positive integer, got {v:?}"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))
}

fn load(source: &Source) -> CliResult<RunConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(|e| {
                let at = e.path().to_string();
                let inner = e.into_inner();
                Failure::new(
                    EXIT_CONFIG,
                    format!("{}: invalid config at `{at}`: {inner}", path.display()),
                )
            })
        }
        (None, Some(name)) => preset(name).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string())),
        (None, None) => Err(Failure::new(
            EXIT_CONFIG,
            "give --config PATH or --preset NAME",
        )),
    }
}

fn resolve(config: &RunConfig) -> CliResult<Resolved> {
    let r = config.resolve(&PhysicalConstants::default())?;
    for w in &r.warnings {
        log::warn!("{w}");
    }
    Ok(r)
}

/// Metadata sidecar: the full resolved parameter set plus provenance.
#[derive(Serialize)]
struct RunRecord<'a> {
    code_version: &'static str,
    timestamp_unix: Option<i64>,
    columns: Vec<String>,
    resolved: &'a Resolved,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<&'a [MemberComparison]>,
}

fn timestamp() -> Option<i64> {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", dir.display())))
}

fn io_failure(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Io(io) => Failure::new(EXIT_IO, format!("{}: {io}", path.display())),
        other => other.into(),
    }
}

fn run(args: RunArgs) -> CliResult<()> {
    let mut config = load(&args.source)?;
    if let Some(n) = args.grid {
        config.sweep.grid.points = n;
    }
    let resolved = resolve(&config)?;
    create_dir(&args.out)?;
    let stem = &config.output.stem;
    let csv_path = args.out.join(format!("{stem}.csv"));
    let file = std::fs::File::create(&csv_path)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", csv_path.display())))?;
    let writer = std::io::BufWriter::new(file);
    let mut columns: Vec<String> = mtomit_core::response::CSV_HEADER
        .iter()
        .map(|s| s.to_string())
        .collect();
    match &resolved.family {
        Some(f) => {
            let family = sweep_variants(&f.label, &f.values, &f.members, &resolved.grid)?;
            family.write_csv(writer).map_err(io_failure(&csv_path))?;
            columns.insert(0, f.label.clone());
        }
        None => spectrum(&resolved.params, &resolved.grid)?
            .write_csv(writer)
            .map_err(io_failure(&csv_path))?,
    }
    println!("wrote {}", csv_path.display());

    let comparisons = if args.oracle || config.oracle.enabled {
        let c = oracle_comparisons(&resolved, config.oracle.points)?;
        let path = args.out.join(format!("{stem}_oracle.csv"));
        write_comparisons(&path, &c)?;
        println!("wrote {}", path.display());
        Some(c)
    } else {
        None
    };
    let json_path = args.out.join(format!("{stem}.json"));
    let record = RunRecord {
        code_version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: timestamp(),
        columns,
        resolved: &resolved,
        oracle: comparisons.as_deref(),
    };
    write_json(&json_path, &record).map_err(io_failure(&json_path))?;
    println!("wrote {}", json_path.display());
    print!("{}", describe(&resolved.params));
    Ok(())
}

#[derive(Serialize)]
struct MemberComparison {
    label: String,
    value: f64,
    force_amplitude: f64,
    force_bound: Option<f64>,
    /// Inside the small-displacement regime, where the tolerance applies.
    feasible: bool,
    comparison: OracleComparison,
}

impl MemberComparison {
    fn passes(&self) -> bool {
        !self.feasible || self.comparison.max_relative_deviation <= VERIFY_TOLERANCE
    }
}

fn oracle_comparisons(resolved: &Resolved, points: usize) -> CliResult<Vec<MemberComparison>> {
    let settings = &resolved.config.oracle.settings;
    let grid = decimate(&resolved.grid, points);
    let members: Vec<(String, f64, &mtomit_core::response::SystemParams)> = match &resolved.family {
        Some(f) => f
            .values
            .iter()
            .zip(&f.members)
            .map(|(&v, p)| (f.label.clone(), v, p))
            .collect(),
        None => vec![("base".to_string(), 0.0, &resolved.params)],
    };
    members
        .into_iter()
        .map(|(label, value, p)| {
            let comparison = compare_with_oracle(p, settings, &grid)?;
            Ok(MemberComparison {
                label,
                value,
                force_amplitude: p.force_amplitude,
                force_bound: p.force_bound,
                feasible: p.force_bound.is_none_or(|b| p.force_amplitude <= b),
                comparison,
            })
        })
        .collect()
}

fn write_comparisons(path: &Path, comparisons: &[MemberComparison]) -> CliResult<()> {
    let mut out = String::from(
        "label,value,omega_rad_s,re_T_analytic,im_T_analytic,re_T_oracle,im_T_oracle,rel_dev\n",
    );
    for m in comparisons {
        let c = &m.comparison;
        for k in 0..c.omega.len() {
            let cells = [
                fmt_f64(m.value),
                fmt_f64(c.omega[k]),
                fmt_f64(c.analytic[k].re),
                fmt_f64(c.analytic[k].im),
                fmt_f64(c.oracle[k].re),
                fmt_f64(c.oracle[k].im),
                fmt_f64(c.relative_deviation[k]),
            ];
            out.push_str(&m.label);
            for cell in cells {
                out.push(',');
                out.push_str(&cell);
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn verify(args: VerifyArgs) -> CliResult<()> {
    let config = load(&args.source)?;
    let resolved = resolve(&config)?;
    let points = args.grid.unwrap_or(config.oracle.points);
    let comparisons = oracle_comparisons(&resolved, points)?;
    let mut failed = false;
    for m in &comparisons {
        let verdict = match (m.feasible, m.passes()) {
            (false, _) => "INFO (outside small-displacement bound)",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        failed |= !m.passes();
        println!(
            "{}={:e}: max relative deviation {:.3e} over {} points {}",
            m.label,
            m.value,
            m.comparison.max_relative_deviation,
            m.comparison.omega.len(),
            verdict
        );
    }
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let stem = &config.output.stem;
        write_comparisons(&dir.join(format!("{stem}_oracle.csv")), &comparisons)?;
        let json_path = dir.join(format!("{stem}_oracle.json"));
        let record = RunRecord {
            code_version: env!("CARGO_PKG_VERSION"),
            timestamp_unix: timestamp(),
            columns: Vec::new(),
            resolved: &resolved,
            oracle: Some(&comparisons),
        };
        write_json(&json_path, &record).map_err(io_failure(&json_path))?;
    }
    if failed {
        return Err(Failure::new(
            EXIT_VERIFY,
            format!("oracle deviation above {VERIFY_TOLERANCE} in the feasible regime"),
        ));
    }
    Ok(())
}

fn fit(args: FitArgs) -> CliResult<()> {
    let config = load(&args.source)?;
    let resolved = resolve(&config)?;
    let file = std::fs::File::open(&args.spectrum)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", args.spectrum.display())))?;
    let data = MeasuredSpectrum::read_csv_member(std::io::BufReader::new(file), args.member)
        .map_err(|e| {
            let f: Failure = e.into();
            Failure::new(
                f.code,
                format!("{}: {}", args.spectrum.display(), f.message),
            )
        })?;
    let options = FitOptions {
        free: args.free.iter().copied().collect::<BTreeSet<_>>(),
        complex: args.complex,
        ..Default::default()
    };
    let result: FitResult = full_model_fit(&data, &resolved.params, &options)?;
    let mut text =
        serde_json::to_string_pretty(&result).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    text.push('\n');
    match &args.out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    if !result.converged {
        return Err(Failure::new(
            EXIT_FIT,
            format!(
                "fit did not converge after {} iterations (gradient measure {:.3e})",
                result.iterations, result.gradient_measure
            ),
        ));
    }
    Ok(())
}

fn presets(args: PresetArgs) -> CliResult<()> {
    let value = if args.schema {
        schema()
    } else if let Some(name) = &args.show {
        serde_json::to_value(preset(name).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?)
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?
    } else {
        for name in PRESET_NAMES {
            println!("{name}");
        }
        return Ok(());
    };
    let text =
        serde_json::to_string_pretty(&value).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    println!("{text}");
    Ok(())
}
