mod io;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use dampwave::biorthogonal::{build_family, verify_family, BiorthogonalFamily, FamilyConfig};
use dampwave::moments::{build_moment_system, solve_min_norm, verify_moments, ControlShape, MomentSystem};
use dampwave::solver::{evolve_free, frame_transform, FrameDirection};
use dampwave::synthesis::{replay, run_pipeline, ControlPhase, ControlProblem, Method, SynthesisReport};
use dampwave::{EigenvalueTable, FourierState, SampledControl, SpectralClass};

use io::{read_json, read_json_stripped, to_value, write_csv, write_json, CliError, CliResult, Provenance};

#[derive(Parser, Debug)]
#[command(name = "dampwave", version, about = "Moving control of a structurally damped wave equation")]
struct Cli {
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomly generated initial data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalue table and the spectrum figure series.
    Spectrum {
        #[arg(long)]
        kmax: usize,
    },
    /// Free evolution of a state in the original frame.
    Solve {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long = "T")]
        horizon: f64,
    },
    #[command(subcommand)]
    Moments(MomentsCommand),
    #[command(subcommand)]
    Biortho(BiorthoCommand),
    /// Solve a control problem and simulate the closed loop.
    Synthesize {
        #[arg(long)]
        problem: PathBuf,
        /// Overrides the method stored in the problem file.
        #[arg(long)]
        method: Option<MethodArg>,
    },
    /// Re-simulate a run directory from its stored controls.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum MomentsCommand {
    /// Moment system for initial data in the original frame.
    Build {
        #[arg(long, value_enum)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
        #[arg(long, default_value_t = std::f64::consts::SQRT_2 - 1.0)]
        sigma: f64,
        #[command(flatten)]
        state: StateArgs,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        kmax: usize,
    },
    /// Minimal norm control of a stored system.
    Solve {
        #[arg(long)]
        sys: PathBuf,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
    },
}

#[derive(Subcommand, Debug)]
enum BiorthoCommand {
    /// Sample the biorthogonal family on a uniform grid.
    Build {
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        kmax: i64,
        #[arg(long, default_value_t = 16384)]
        grid: usize,
        #[arg(long, default_value_t = 2000)]
        truncation: usize,
        #[arg(long, default_value_t = 1e-4)]
        window_threshold: f64,
    },
    /// Cross-Gram matrix of a stored family.
    Verify {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 6)]
        k_test: i64,
    },
}

#[derive(Args, Debug)]
struct StateArgs {
    /// State file; random data on 3 <= |k| <= K with zero means when omitted.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Truncation of generated data.
    #[arg(long = "K", default_value_t = 6)]
    random_kmax: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ShapeArg {
    Dipole,
    Dirac,
    IndicatorDifference,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    MinNorm,
    Biorthogonal,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::MinNorm => Method::MinNorm,
            MethodArg::Biorthogonal => Method::Biorthogonal,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dampwave: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn out_path(cli: &Cli) -> CliResult<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| CliError::Validation("missing --out".into()))
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Spectrum { kmax } => cmd_spectrum(cli, *kmax),
        Command::Solve { state, horizon } => cmd_solve(cli, state, *horizon),
        Command::Moments(MomentsCommand::Build {
            shape,
            offset,
            sigma,
            state,
            horizon,
            kmax,
        }) => {
            let shape = match shape {
                ShapeArg::Dipole => ControlShape::Dipole,
                ShapeArg::Dirac => ControlShape::Dirac,
                ShapeArg::IndicatorDifference => ControlShape::IndicatorDifference {
                    offset: *offset,
                    sigma: *sigma,
                },
            };
            cmd_moments_build(cli, shape, state, *horizon, *kmax)
        }
        Command::Moments(MomentsCommand::Solve { sys, grid }) => cmd_moments_solve(cli, sys, *grid),
        Command::Biortho(BiorthoCommand::Build {
            horizon,
            kmax,
            grid,
            truncation,
            window_threshold,
        }) => {
            let config = FamilyConfig {
                truncation: *truncation,
                window_threshold: *window_threshold,
                ..FamilyConfig::new(*horizon, *kmax, *grid)
            };
            cmd_biortho_build(cli, &config)
        }
        Command::Biortho(BiorthoCommand::Verify { family, report, k_test }) => {
            cmd_biortho_verify(cli, family, report, *k_test)
        }
        Command::Synthesize { problem, method } => cmd_synthesize(cli, problem, *method),
        Command::Verify { run } => cmd_verify(cli, run),
    }
}

/// Shortest round-trip decimal, switching to exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Stdout may be closed early by a pager.
fn print_json(v: &Value) {
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads a state file, or draws real data on `3 <= |k| <= K` from the seed.
fn load_state(cli: &Cli, args: &StateArgs) -> CliResult<(FourierState, Value)> {
    if let Some(path) = &args.state {
        let s: FourierState = read_json(path)?;
        s.validate()?;
        let bytes = serde_json::to_vec(&s).map_err(|e| CliError::Numerical(e.to_string()))?;
        return Ok((s, json!({ "file": path.display().to_string(), "sha256": sha256_hex(&bytes) })));
    }
    let kmax = args.random_kmax;
    if kmax < 3 {
        return Err(dampwave::Error::InvalidTruncation { kmax, min: 3 }.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut s = FourierState::zeros(kmax);
    for k in 3..=kmax as i64 {
        let scale = 1.0 / (k * k) as f64;
        let mut draw = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
        let (p, v) = (draw(), draw());
        s.set(k, p, v);
        s.set(-k, p.conj(), v.conj());
    }
    Ok((s, json!({ "random": { "K": kmax, "modes": "3 <= |k| <= K" } })))
}

#[derive(Serialize)]
struct SpectrumRow {
    k: i64,
    branch: dampwave::Branch,
    re: f64,
    im: f64,
    class: SpectralClass,
}

fn figure_set(class: SpectralClass) -> &'static str {
    match class {
        SpectralClass::Hyperbolic => "lambda_plus",
        SpectralClass::Parabolic => "lambda_minus",
        SpectralClass::Double => "lambda_2",
    }
}

fn cmd_spectrum(cli: &Cli, kmax: usize) -> CliResult<()> {
    let out = out_path(cli)?;
    let table = EigenvalueTable::new(kmax)?;
    let prov = Provenance::new("spectrum", cli.seed, json!({ "kmax": kmax }));
    let rows: Vec<SpectrumRow> = table
        .entries()
        .iter()
        .map(|e| SpectrumRow {
            k: e.k,
            branch: e.branch,
            re: e.value.re,
            im: e.value.im,
            class: e.class,
        })
        .collect();
    let mut figure = serde_json::Map::new();
    for name in ["lambda_plus", "lambda_minus", "lambda_2"] {
        let pts: Vec<[f64; 2]> = rows
            .iter()
            .filter(|r| figure_set(r.class) == name)
            .map(|r| [r.re, r.im])
            .collect();
        figure.insert(name.into(), to_value(&pts)?);
    }
    let body = json!({
        "kmax": kmax,
        "max_relative_residual": table.max_relative_residual(),
        "entries": rows,
        "figure": figure,
    });
    write_json(out, &prov, &body)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                to_value(&r.branch).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default(),
                num(r.re),
                num(r.im),
                to_value(&r.class).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default(),
                figure_set(r.class).to_string(),
            ]
        })
        .collect();
    let csv_path = out.with_extension("csv");
    write_csv(&csv_path, &prov, &["k", "branch", "re", "im", "class", "set"], &csv_rows)?;
    info!("wrote {} rows to {}", csv_rows.len(), csv_path.display());
    Ok(())
}

fn cmd_solve(cli: &Cli, args: &StateArgs, horizon: f64) -> CliResult<()> {
    let out = out_path(cli)?;
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(CliError::Validation(format!("bad time {horizon}")));
    }
    let (y0, source) = load_state(cli, args)?;
    let v = evolve_free(&frame_transform(&y0, FrameDirection::ToMoving), horizon);
    let y = dampwave::solver::frame_transform_at(&v, FrameDirection::FromMoving, horizon);
    let prov = Provenance::new("solve", cli.seed, json!({ "T": horizon, "state": source }));
    write_json(out, &prov, &y)
}

fn cmd_moments_build(
    cli: &Cli,
    shape: ControlShape,
    args: &StateArgs,
    horizon: f64,
    kmax: usize,
) -> CliResult<()> {
    let out = out_path(cli)?;
    let (y0, source) = load_state(cli, args)?;
    let v0 = frame_transform(&y0, FrameDirection::ToMoving);
    let system = build_moment_system(&shape, &v0, horizon, kmax)?;
    let prov = Provenance::new(
        "moments build",
        cli.seed,
        json!({ "shape": shape, "T": horizon, "kmax": kmax, "state": source }),
    );
    write_json(out, &prov, &system)
}

#[derive(Serialize)]
struct SolvedControl<'a> {
    #[serde(flatten)]
    control: &'a SampledControl,
    gram_condition: f64,
    algebraic_residual: f64,
    imaginary_fraction: f64,
    moment_residual_max: f64,
    moment_residual_raw: f64,
}

fn cmd_moments_solve(cli: &Cli, sys: &Path, grid: usize) -> CliResult<()> {
    let out = out_path(cli)?;
    let system: MomentSystem = read_json(sys)?;
    let sol = solve_min_norm(&system, grid)?;
    let report = verify_moments(&sol.control, &system)?;
    let prov = Provenance::new(
        "moments solve",
        cli.seed,
        json!({ "T": system.horizon, "constraints": system.constraints.len(), "grid": grid,
                "system_sha256": sha256_hex(&serde_json::to_vec(&system).unwrap_or_default()) }),
    );
    let body = SolvedControl {
        control: &sol.control,
        gram_condition: sol.gram_condition,
        algebraic_residual: sol.algebraic_residual,
        imaginary_fraction: sol.imaginary_fraction,
        moment_residual_max: report.max_normalized,
        moment_residual_raw: report.max_raw,
    };
    write_json(out, &prov, &body)
}

fn cmd_biortho_build(cli: &Cli, config: &FamilyConfig) -> CliResult<()> {
    let out = out_path(cli)?;
    let family = build_family(config)?;
    let prov = Provenance::new("biortho build", cli.seed, to_value(config)?);
    write_json(out, &prov, &family)
}

fn cmd_biortho_verify(cli: &Cli, family: &Path, report: &Path, k_test: i64) -> CliResult<()> {
    let fam: BiorthogonalFamily = read_json(family)?;
    let gram = verify_family(&fam, k_test)?;
    let prov = Provenance::new(
        "biortho verify",
        cli.seed,
        json!({ "T": fam.horizon, "kmax": fam.kmax, "grid": fam.grid.samples, "k_test": k_test }),
    );
    let rows: Vec<Vec<String>> = gram
        .entries
        .iter()
        .map(|e| {
            vec![
                e.row.clone(),
                e.column.clone(),
                num(e.value.re),
                num(e.value.im),
                format!("{}", e.expected),
                num(e.deviation),
                num(e.amplification),
            ]
        })
        .collect();
    write_csv(
        report,
        &prov,
        &["row", "column", "re", "im", "expected", "deviation", "amplification"],
        &rows,
    )?;
    let summary = json!({
        "max_deviation": gram.max_deviation,
        "max_diagonal_deviation": gram.max_diagonal_deviation,
        "max_deviation_hyperbolic_columns": gram.max_deviation_hyperbolic_columns,
        "max_deviation_hyperbolic_block": gram.max_deviation_hyperbolic_block,
        "max_leakage": gram.max_leakage,
        "max_window_tail": gram.max_window_tail,
        "plus_norms": gram.plus_norms,
        "minus_norms": gram.minus_norms,
    });
    write_json(&report.with_extension("json"), &prov, &summary)?;
    print_json(&summary);
    Ok(())
}

fn problem_params(problem: &ControlProblem) -> CliResult<Value> {
    let mut v = to_value(problem)?;
    if let Value::Object(map) = &mut v {
        map.remove("initial");
        map.insert(
            "initial_sha256".into(),
            Value::String(sha256_hex(&serde_json::to_vec(&problem.initial).unwrap_or_default())),
        );
    }
    Ok(v)
}

#[derive(Serialize, serde::Deserialize)]
struct ControlFile {
    phases: Vec<ControlPhase>,
}

#[derive(serde::Deserialize)]
struct ReportFile {
    report: SynthesisReport,
}

fn cmd_synthesize(cli: &Cli, path: &Path, method: Option<MethodArg>) -> CliResult<()> {
    let dir = out_path(cli)?;
    let mut problem: ControlProblem = read_json(path)?;
    if let Some(m) = method {
        problem.method = m.into();
    }
    let output = run_pipeline(&problem)?;
    let params = problem_params(&problem)?;
    let prov = Provenance::new("synthesize", cli.seed, params);
    write_json(&dir.join("problem.json"), &prov, &problem)?;
    write_json(
        &dir.join("control.json"),
        &prov,
        &ControlFile {
            phases: output.phases.clone(),
        },
    )?;
    write_json(&dir.join("final_state.json"), &prov, &output.final_state)?;
    write_json(&dir.join("report.json"), &prov, &json!({ "report": output.report }))?;
    info!(
        "final ratio {:.3e}, moment residual {:.3e}",
        output.report.final_norm_ratio, output.report.moment_residual_max
    );
    Ok(())
}

/// Relative agreement used when comparing a replay with the stored report.
const AGREEMENT: f64 = 1e-12;

fn agrees(a: f64, b: f64) -> bool {
    (a - b).abs() <= AGREEMENT * a.abs().max(b.abs()).max(1.0)
}

fn cmd_verify(cli: &Cli, dir: &Path) -> CliResult<()> {
    let problem: ControlProblem = read_json_stripped(&dir.join("problem.json"))?;
    let controls: ControlFile = read_json(&dir.join("control.json"))?;
    let stored: ReportFile = read_json(&dir.join("report.json"))?;
    let again = replay(&problem, &controls.phases)?;
    let s = &stored.report;
    let checks = json!({
        "moment_residual_max": { "stored": s.moment_residual_max, "replayed": again.moment_residual_max },
        "moment_residual_raw": { "stored": s.moment_residual_raw, "replayed": again.moment_residual_raw },
        "final_norm_ratio": { "stored": s.final_norm_ratio, "replayed": again.final_norm_ratio },
        "final_norm": { "stored": s.final_norm, "replayed": again.final_norm },
    });
    let consistent = agrees(s.moment_residual_max, again.moment_residual_max)
        && agrees(s.moment_residual_raw, again.moment_residual_raw)
        && agrees(s.final_norm_ratio, again.final_norm_ratio)
        && agrees(s.final_norm, again.final_norm);
    let residual_growth = again.moment_residual_max / s.moment_residual_max.max(f64::MIN_POSITIVE);
    let prov = Provenance::new("verify", cli.seed, problem_params(&problem)?);
    let body = json!({
        "consistent": consistent,
        "residual_growth": residual_growth,
        "checks": checks,
        "replay": {
            "moment_residual_max": again.moment_residual_max,
            "moment_residual_raw": again.moment_residual_raw,
            "final_norm_ratio": again.final_norm_ratio,
            "initial_norm": again.initial_norm,
            "final_norm": again.final_norm,
            "presteer": again.presteer,
        },
    });
    let target = cli.out.clone().unwrap_or_else(|| dir.join("verify.json"));
    write_json(&target, &prov, &body)?;
    print_json(&body);
    if consistent {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "replayed residuals differ from the stored report (moment residual grew by {residual_growth:.3e})"
        )))
    }
}
