//! `parmono` command-line front end.
//!
//! Every command writes one JSON document (to `--out` or stdout) that embeds
//! a [`RunManifest`]. Exit codes: 0 success, 1 hard error, 2 partial failure.
//! Hard errors are reported on stderr as `{"error": CODE, "detail": …}`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use parmono_core::classify::{
    classification_options, classify_monodromy, fuchsian_split, integrability_report, projective_split_check,
    records_by_loop, IntegrableSystemSpec, Tolerances, DEFAULT_ISO_TOL, DEFAULT_PROJ_TOL, DEFAULT_ZC_TOL,
};
use parmono_core::expr::{parse_expr, ParameterPoint};
use parmono_core::halphen::{integrate_flow, scalar_factor, verify_evolution_law, Trajectory, Variant};
use parmono_core::io::{self, c2, IntegrableFile};
use parmono_core::local::{frobenius_solution, growth_probe, DEFAULT_ORDER};
use parmono_core::monodromy::{monodromy_grid, LoopSpec, LoopTarget, TGrid};
use parmono_core::ode::OdeOptions;
use parmono_core::sysmodel::{ParamRationalMatrix, DEFAULT_SEED};
use parmono_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "parmono", version, about = "Parameterized monodromy of linear ODE systems")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "PARMONO_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monodromy matrices over a parameter grid.
    Monodromy(MonodromyArgs),
    /// Isomonodromy classification over a parameter grid.
    Classify(ClassifyArgs),
    /// Zero-curvature test for a system with t-directions.
    Integrable(IntegrableArgs),
    /// Darboux–Halphen trajectory and monodromy evolution law.
    Halphen(HalphenArgs),
    /// Local Frobenius solution at a simple pole.
    Frobenius(FrobeniusArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Relative integration tolerance [default: 1e-10, classify 1e-12].
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute integration tolerance [default: 1e-12, classify 1e-14].
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Grid file with `points` or `segment`.
    #[arg(long, conflicts_with = "t")]
    pub grid: Option<PathBuf>,
    /// Inline grid point, comma-separated coordinates (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    pub t: Vec<String>,
    /// Base point x₀, e.g. `0.5` or `1+0.2i`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub base: Complex64,
    /// Pole index to loop around (repeatable); all poles when absent.
    #[arg(long)]
    pub pole: Vec<usize>,
    /// Add the loop around infinity.
    #[arg(long)]
    pub infinity: bool,
    /// Fixed loop radius instead of the automatic choice.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MonodromyArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_ISO_TOL)]
    pub tol_iso: f64,
    #[arg(long, default_value_t = DEFAULT_PROJ_TOL)]
    pub tol_proj: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct IntegrableArgs {
    /// File with `A_x` and the `A_t` list.
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_ZC_TOL)]
    pub tol_zc: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct HalphenArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Trajectory CSV; defaults to the `--out` path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FrobeniusArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub pole: usize,
    /// Parameter point, comma-separated coordinates.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub t: String,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    /// Also run the moderate-growth probe along this ray angle.
    #[arg(long)]
    pub growth: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

/// Failures that end a run with exit code 1.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    FileNotFound(PathBuf),
    Io(String),
    Usage(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::FileNotFound(_) => "FILE_NOT_FOUND",
            CliError::Io(_) => "IO_ERROR",
            CliError::Usage(_) => "USAGE",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::FileNotFound(p) => format!("no such file: {}", p.display()),
            CliError::Io(s) | CliError::Usage(s) => s.clone(),
        }
    }

    pub fn envelope(&self) -> Value {
        json!({ "error": self.code(), "detail": self.detail() })
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Provenance embedded in every result file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub output: Option<String>,
    pub version: String,
    /// Seconds; the only field that differs between identical runs.
    pub wall_clock: f64,
}

impl RunManifest {
    fn new(command: &str, common: &Common) -> Self {
        let opts = ode_options(command, common);
        let mut tolerances = BTreeMap::new();
        tolerances.insert("rtol".into(), opts.rtol);
        tolerances.insert("atol".into(), opts.atol);
        RunManifest {
            command: command.into(),
            inputs: BTreeMap::new(),
            tolerances,
            seed: common.seed,
            output: common.out.as_ref().map(|p| p.display().to_string()),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_clock: 0.0,
        }
    }

    fn input(mut self, key: &str, path: &Path) -> Self {
        self.inputs.insert(key.into(), path.display().to_string());
        self
    }

    fn tol(mut self, key: &str, v: f64) -> Self {
        self.tolerances.insert(key.into(), v);
        self
    }
}

/// Parse a complex constant such as `0.5`, `-2i` or `1 + 0.25*i`.
pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    // accept `2i` and `0.5i` as shorthand for `2*i`
    let mut src = String::with_capacity(s.len() + 4);
    let mut prev = ' ';
    for ch in s.chars() {
        if ch == 'i' && (prev.is_ascii_digit() || prev == '.') {
            src.push('*');
        }
        src.push(ch);
        prev = ch;
    }
    parse_expr(&src, 0).and_then(|e| e.eval(&ParameterPoint::empty())).map_err(|e| e.to_string())
}

pub fn parse_point(s: &str) -> CliResult<ParameterPoint> {
    if s.trim().is_empty() {
        return Ok(ParameterPoint::empty());
    }
    s.split(',')
        .map(|z| parse_complex(z.trim()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(ParameterPoint::new)
        .map_err(CliError::Usage)
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.to_path_buf()),
        _ => CliError::Io(format!("{}: {e}", path.display())),
    })
}

fn ode_options(command: &str, common: &Common) -> OdeOptions {
    let base = if command == "classify" { classification_options() } else { OdeOptions::default() };
    OdeOptions::new(common.rtol.unwrap_or(base.rtol), common.atol.unwrap_or(base.atol))
}

struct Outcome {
    body: Value,
    exit: i32,
}

fn emit(manifest: RunManifest, out: &Option<PathBuf>, body: Value) -> CliResult<()> {
    let mut doc = json!({ "manifest": manifest });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn load_grid_inputs(
    g: &GridArgs,
    manifest: RunManifest,
) -> CliResult<(ParamRationalMatrix, TGrid, Vec<LoopSpec>, RunManifest)> {
    let a = io::parse_system(&read_file(&g.system)?)?;
    let mut manifest = manifest.input("system", &g.system);
    let grid = match &g.grid {
        Some(p) => {
            manifest = manifest.input("grid", p);
            io::parse_grid(&read_file(p)?)?
        }
        None if g.t.is_empty() => return Err(CliError::Usage("either --grid or --t is required".into())),
        None => TGrid::Points(g.t.iter().map(|s| parse_point(s)).collect::<CliResult<_>>()?),
    };
    let poles: Vec<usize> = if g.pole.is_empty() { (0..a.poles().len()).collect() } else { g.pole.clone() };
    let mut loops: Vec<LoopSpec> = poles.into_iter().map(|i| LoopSpec::around(g.base, i)).collect();
    if g.infinity {
        loops.push(LoopSpec::around_infinity(g.base));
    }
    if loops.is_empty() {
        return Err(CliError::Usage("no loops requested".into()));
    }
    if let Some(r) = g.radius {
        loops =
            loops.into_iter().map(|l| if l.target == LoopTarget::Infinity { l } else { l.with_radius(r) }).collect();
    }
    Ok((a, grid, loops, manifest))
}

fn loops_json(loops: &[LoopSpec]) -> Value {
    Value::Array(
        loops
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let target = match l.target {
                    LoopTarget::Pole(i) => json!(i),
                    LoopTarget::Infinity => json!("infinity"),
                };
                json!({ "loop": k, "target": target, "base": c2(l.base) })
            })
            .collect(),
    )
}

fn cmd_monodromy(args: &MonodromyArgs) -> CliResult<(RunManifest, Outcome)> {
    let (a, grid, loops, manifest) = load_grid_inputs(&args.grid, RunManifest::new("monodromy", &args.common))?;
    let cells = monodromy_grid(&a, &loops, &grid, &ode_options("monodromy", &args.common))?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    let body = json!({ "loops": loops_json(&loops), "failed_cells": failed, "records": io::grid_json(&cells) });
    Ok((manifest, Outcome { body, exit: if failed > 0 { EXIT_PARTIAL } else { EXIT_OK } }))
}

fn cmd_classify(args: &ClassifyArgs) -> CliResult<(RunManifest, Outcome)> {
    let manifest = RunManifest::new("classify", &args.common).tol("iso", args.tol_iso).tol("proj", args.tol_proj);
    let (a, grid, loops, manifest) = load_grid_inputs(&args.grid, manifest)?;
    let opts = ode_options("classify", &args.common);
    let tol = Tolerances { iso: args.tol_iso, proj: args.tol_proj };
    let cells = monodromy_grid(&a, &loops, &grid, &opts)?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    if failed > 0 {
        let body = json!({ "loops": loops_json(&loops), "failed_cells": failed, "records": io::grid_json(&cells), "report": null });
        return Ok((manifest, Outcome { body, exit: EXIT_PARTIAL }));
    }
    let report = classify_monodromy(&records_by_loop(&cells)?, tol)?;
    let mut body = io::classification_json(&report);
    let projective = if fuchsian_split(&a).is_ok() {
        let t0 = grid.points()?.remove(0);
        let split = projective_split_check(&a, &loops, &grid, &opts, tol)?;
        io::projective_json(&split, &t0)?
    } else {
        Value::Null
    };
    if let Value::Object(m) = &mut body {
        m.insert("loop_targets".into(), loops_json(&loops));
        m.insert("projective_split".into(), projective);
    }
    Ok((manifest, Outcome { body, exit: EXIT_OK }))
}

fn cmd_integrable(args: &IntegrableArgs) -> CliResult<(RunManifest, Outcome)> {
    let manifest = RunManifest::new("integrable", &args.common).input("system", &args.system).tol("zc", args.tol_zc);
    let file: IntegrableFile = serde_json::from_str(&read_file(&args.system)?)
        .map_err(|e| Error::InvalidInput(format!("integrable system file: {e}")))?;
    let spec = IntegrableSystemSpec::new(
        file.a_x.to_system()?,
        file.a_t.iter().map(|s| s.to_system()).collect::<Result<_, _>>()?,
    )?;
    let report = integrability_report(&spec, args.samples, args.common.seed, args.tol_zc)?;
    Ok((manifest, Outcome { body: io::integrability_json(&report), exit: EXIT_OK }))
}

fn complex_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).flat_map(|i| [format!("{prefix}{i}_re"), format!("{prefix}{i}_im")]).collect()
}

fn push_complex(row: &mut Vec<String>, zs: &[Complex64]) {
    for z in zs {
        row.push(format!("{:e}", z.re));
        row.push(format!("{:e}", z.im));
    }
}

/// `(b, β, c)` at one checkpoint.
type ScalarColumns = (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>);

fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    extra: Option<&[ScalarColumns]>,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut header = vec!["t_re".to_string(), "t_im".to_string()];
    match traj.variant {
        Variant::HiiFlow => header.extend(complex_columns("x", 3)),
        Variant::Hi => header.extend(complex_columns("omega", 3)),
        Variant::Dhv => {
            header.extend(complex_columns("omega", 3));
            header.extend(["theta_re", "theta_im", "phi_re", "phi_im"].map(String::from));
        }
    }
    if extra.is_some() {
        for p in ["b", "beta", "c"] {
            header.extend(complex_columns(p, 3));
        }
    }
    let io_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&header).map_err(io_err)?;
    for (k, p) in traj.points.iter().enumerate() {
        let mut row = Vec::with_capacity(header.len());
        push_complex(&mut row, &[p.t]);
        push_complex(&mut row, &p.vars);
        if let Some(cols) = extra {
            let (b, beta, c) = &cols[k];
            push_complex(&mut row, b);
            push_complex(&mut row, beta);
            push_complex(&mut row, c);
        }
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_halphen(args: &HalphenArgs) -> CliResult<(RunManifest, Outcome)> {
    let mut manifest = RunManifest::new("halphen", &args.common).input("config", &args.config);
    let config = io::parse_halphen_config(&read_file(&args.config)?)?;
    let opts = ode_options("halphen", &args.common);
    let csv_path = args.csv.clone().or_else(|| args.common.out.as_ref().map(|p| p.with_extension("csv")));
    let (traj, body, extra) = if config.variant == Variant::HiiFlow {
        let (traj, report) = verify_evolution_law(&config, &opts)?;
        let extra: Vec<_> = report
            .rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                (r.b.to_vec(), r.beta.to_vec(), (0..3).map(|i| scalar_factor(&config, &traj, i, k)).collect())
            })
            .collect();
        (traj, json!({ "variant": config.variant.as_str(), "report": io::evolution_json(&report) }), Some(extra))
    } else {
        let traj = integrate_flow(&config, &opts)?;
        let points: Vec<Value> = traj
            .points
            .iter()
            .map(|p| json!({ "t": c2(p.t), "vars": p.vars.iter().map(|z| c2(*z)).collect::<Vec<_>>() }))
            .collect();
        (traj, json!({ "variant": config.variant.as_str(), "trajectory": points, "report": null }), None)
    };
    if let Some(p) = &csv_path {
        write_trajectory_csv(p, &traj, extra.as_deref())?;
        manifest.inputs.insert("csv".into(), p.display().to_string());
    }
    Ok((manifest, Outcome { body, exit: EXIT_OK }))
}

fn cmd_frobenius(args: &FrobeniusArgs) -> CliResult<(RunManifest, Outcome)> {
    let manifest = RunManifest::new("frobenius", &args.common).input("system", &args.system);
    let a = io::parse_system(&read_file(&args.system)?)?;
    let t = parse_point(&args.t)?;
    let sol = frobenius_solution(&a, args.pole, &t, args.order)?;
    let slope = sol.residual_slope(&a.freeze(&t)?)?;
    let mut body = json!({ "solution": io::local_json(&sol, slope) });
    if let Some(angle) = args.growth {
        let g = growth_probe(&a, args.pole, &t, angle, 12)?;
        body["growth"] = serde_json::to_value(g).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok((manifest, Outcome { body, exit: EXIT_OK }))
}

fn dispatch(cli: &Cli) -> CliResult<i32> {
    let start = Instant::now();
    let (mut manifest, outcome, out) = match &cli.command {
        Command::Monodromy(a) => with_out(cmd_monodromy(a)?, &a.common),
        Command::Classify(a) => with_out(cmd_classify(a)?, &a.common),
        Command::Integrable(a) => with_out(cmd_integrable(a)?, &a.common),
        Command::Halphen(a) => with_out(cmd_halphen(a)?, &a.common),
        Command::Frobenius(a) => with_out(cmd_frobenius(a)?, &a.common),
    };
    manifest.wall_clock = start.elapsed().as_secs_f64();
    emit(manifest, &out, outcome.body)?;
    Ok(outcome.exit)
}

fn with_out((m, o): (RunManifest, Outcome), common: &Common) -> (RunManifest, Outcome, Option<PathBuf>) {
    (m, o, common.out.clone())
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build();
    let result = match pool {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(CliError::Usage(format!("thread pool: {e}"))),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.envelope());
            EXIT_ERROR
        }
    }
}
