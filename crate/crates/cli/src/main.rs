//! `diffeoflow` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use diffeoflow::admm::{register, register_multiframe, RegistrationResult, SolverConfig, StoppingMode};
use diffeoflow::io::{self, ReadOptions, SweepRow};
use diffeoflow::synth::{self, SynthKind, SynthParams};
use diffeoflow::{strain_field, Shape};

#[derive(Debug, Parser)]
#[command(name = "diffeoflow", version, about = "Diffeomorphic matching of 3D point-cloud surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Register a template shape onto a target shape.
    Register(RegisterArgs),
    /// Run a fixed-iteration registration for every (tau_v, tau_s) pair.
    Sweep(SweepArgs),
    /// Generate a synthetic meshed shape.
    Synth(SynthArgs),
    /// Register a template through a sequence of frames.
    Multiframe(MultiframeArgs),
    /// Isotropic strain of a deformed mesh relative to its template.
    Strain(StrainArgs),
}

#[derive(Debug, Args)]
struct InputOptions {
    /// Split OBJ polygons into triangle fans instead of rejecting them.
    #[arg(long)]
    fan_polygons: bool,
}

impl InputOptions {
    fn read(&self, path: &Path) -> Result<Shape> {
        io::read_shape(
            path,
            ReadOptions {
                fan_triangulate: self.fan_polygons,
            },
        )
        .with_context(|| format!("reading {}", path.display()))
    }
}

#[derive(Debug, Args)]
struct SolverOverrides {
    /// Solver configuration: a JSON config object or a summary.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of time cells.
    #[arg(long)]
    n: Option<usize>,
    /// Weight of the distance term.
    #[arg(long)]
    alpha: Option<f64>,
    /// ADMM penalty parameter.
    #[arg(long)]
    rho: Option<f64>,
    /// Velocity bandwidth scale.
    #[arg(long)]
    tau_v: Option<f64>,
    /// Distance bandwidth scale.
    #[arg(long)]
    tau_s: Option<f64>,
    /// Explicit velocity bandwidth (skips the tau_v policy).
    #[arg(long)]
    sigma_v: Option<f64>,
    /// Explicit distance bandwidth (skips the tau_s policy).
    #[arg(long)]
    sigma_s: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seed recorded in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Fill the timing columns of convergence.csv (makes it run-dependent).
    #[arg(long)]
    record_timings: bool,
}

impl SolverOverrides {
    fn resolve(&self) -> Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(p) => io::read_config(p).with_context(|| format!("reading config {}", p.display()))?,
            None => SolverConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$target = v;
                }
            )*};
        }
        set!(n => n, alpha => alpha, rho => rho, tau_v => tau_v, tau_s => tau_s, max_iter => n_iter, seed => seed);
        // a new tau must not be shadowed by a bandwidth echoed from an earlier run
        if self.tau_v.is_some() {
            cfg.sigma_v = None;
        }
        if self.tau_s.is_some() {
            cfg.sigma_s = None;
        }
        if self.sigma_v.is_some() {
            cfg.sigma_v = self.sigma_v;
        }
        if self.sigma_s.is_some() {
            cfg.sigma_s = self.sigma_s;
        }
        if self.record_timings {
            cfg.record_timings = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct RegisterArgs {
    /// Template shape (.csv or .obj).
    #[arg(long)]
    template: PathBuf,
    /// Target shape (.csv or .obj).
    #[arg(long)]
    target: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverOverrides,
    #[command(flatten)]
    input: InputOptions,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Template shape (.csv or .obj).
    #[arg(long)]
    template: PathBuf,
    /// Target shape (.csv or .obj).
    #[arg(long)]
    target: PathBuf,
    /// Velocity bandwidth scales.
    #[arg(long, value_delimiter = ',', default_values_t = [3.0, 4.0, 6.0, 8.0])]
    tau_v_list: Vec<f64>,
    /// Distance bandwidth scales.
    #[arg(long, value_delimiter = ',', default_values_t = [0.75, 1.0, 2.0, 4.0, 6.0])]
    tau_s_list: Vec<f64>,
    /// Iterations per cell; all other stopping conditions are disabled.
    #[arg(long, default_value_t = 100)]
    iters_fixed: usize,
    /// Output directory for sweep.csv.
    #[arg(long)]
    out: PathBuf,
    /// Base solver configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    input: InputOptions,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShapeKind {
    Sphere,
    Ellipsoid,
    Sheet,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    shape: ShapeKind,
    /// Number of points (at least 4).
    #[arg(long)]
    m: usize,
    /// Shape parameters as key=value: radius, axes=a,b,c, extent, bend, jitter, translate=x,y,z.
    #[arg(long, num_args = 1..)]
    params: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (.csv or .obj).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MultiframeArgs {
    /// Directory of frame files (sorted by name) or a comma-separated list; the first frame is the template.
    #[arg(long)]
    frames: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverOverrides,
    #[command(flatten)]
    input: InputOptions,
}

#[derive(Debug, Args)]
struct StrainArgs {
    /// Triangulated template shape.
    #[arg(long)]
    template: PathBuf,
    /// Deformed points in the template's order (.csv or .obj).
    #[arg(long)]
    deformed: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    input: InputOptions,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Register(args) => cmd_register(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Multiframe(args) => cmd_multiframe(args),
        Command::Strain(args) => cmd_strain(args),
    }
}

fn finish(result: &RegistrationResult, out: &Path) -> Result<ExitCode> {
    io::write_result(result, out).with_context(|| format!("writing results to {}", out.display()))?;
    let t = &result.termination;
    println!(
        "termination {} after {} iterations; censored Hausdorff {} -> {}",
        t.condition,
        result.iterations(),
        result.initial_hausdorff,
        result.final_hausdorff
    );
    if let Some(detail) = &t.detail {
        eprintln!("error: {detail}");
    }
    Ok(match t.condition {
        c if c.is_convergence() => ExitCode::SUCCESS,
        diffeoflow::admm::Condition::C5 => ExitCode::from(2),
        _ => ExitCode::from(1),
    })
}

fn cmd_register(args: RegisterArgs) -> Result<ExitCode> {
    let cfg = args.solver.resolve()?;
    let template = args.input.read(&args.template)?;
    let target = args.input.read(&args.target)?;
    let result = register(&template, &target, &cfg)?;
    finish(&result, &args.out)
}

fn cmd_multiframe(args: MultiframeArgs) -> Result<ExitCode> {
    let cfg = args.solver.resolve()?;
    let paths = frame_paths(&args.frames)?;
    let frames = paths
        .iter()
        .map(|p| args.input.read(p))
        .collect::<Result<Vec<_>>>()?;
    let result = register_multiframe(&frames, &cfg)?;
    finish(&result, &args.out)
}

fn frame_paths(spec: &str) -> Result<Vec<PathBuf>> {
    let as_dir = Path::new(spec);
    let paths = if as_dir.is_dir() {
        let mut entries = std::fs::read_dir(as_dir)
            .with_context(|| format!("listing {}", as_dir.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<Vec<_>>>()
            .with_context(|| format!("listing {}", as_dir.display()))?;
        entries.retain(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                    Some("csv" | "obj")
                )
        });
        entries.sort();
        entries
    } else {
        spec.split(',').filter(|s| !s.trim().is_empty()).map(|s| PathBuf::from(s.trim())).collect()
    };
    if paths.len() < 2 {
        bail!("need at least two frames, found {} in {spec:?}", paths.len());
    }
    Ok(paths)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    if args.tau_v_list.is_empty() || args.tau_s_list.is_empty() {
        bail!("tau lists must be non-empty");
    }
    if args.iters_fixed == 0 {
        bail!("--iters-fixed must be at least 1");
    }
    let base = match &args.config {
        Some(p) => io::read_config(p).with_context(|| format!("reading config {}", p.display()))?,
        None => SolverConfig::default(),
    };
    let template = args.input.read(&args.template)?;
    let target = args.input.read(&args.target)?;
    let mut rows = Vec::new();
    for &tau_v in &args.tau_v_list {
        for &tau_s in &args.tau_s_list {
            let cfg = SolverConfig {
                tau_v,
                tau_s,
                sigma_v: None,
                sigma_s: None,
                n_iter: args.iters_fixed,
                stopping: StoppingMode::IterationCapOnly,
                ..base.clone()
            };
            let row = match register(&template, &target, &cfg) {
                Ok(r) => sweep_row(tau_v, tau_s, &r),
                Err(e) => {
                    log::warn!("sweep cell tau_v = {tau_v}, tau_s = {tau_s} failed: {e}");
                    SweepRow {
                        tau_v,
                        tau_s,
                        final_distance: f64::NAN,
                        final_distance_pct: f64::NAN,
                        primal_norm: f64::NAN,
                        primal_rel: f64::NAN,
                        dual_norm: f64::NAN,
                        dual_rel: f64::NAN,
                        runtime_s: f64::NAN,
                        status: format!("error: {e}"),
                    }
                }
            };
            println!(
                "tau_v {tau_v} tau_s {tau_s}: distance {} ({:.2}%) [{}]",
                row.final_distance, row.final_distance_pct, row.status
            );
            rows.push(row);
        }
    }
    io::write_sweep(&rows, &args.out).with_context(|| format!("writing sweep to {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn sweep_row(tau_v: f64, tau_s: f64, r: &RegistrationResult) -> SweepRow {
    let last = r.log.last();
    let pick = |f: fn(&diffeoflow::admm::IterationRecord) -> f64| last.map_or(f64::NAN, f);
    SweepRow {
        tau_v,
        tau_s,
        final_distance: r.final_hausdorff,
        final_distance_pct: if r.initial_hausdorff > 0.0 {
            100.0 * r.final_hausdorff / r.initial_hausdorff
        } else {
            0.0
        },
        primal_norm: pick(|l| l.primal_norm),
        primal_rel: pick(|l| l.primal_rel),
        dual_norm: pick(|l| l.dual_norm),
        dual_rel: pick(|l| l.dual_rel),
        runtime_s: r.runtime_s,
        status: r.termination.condition.to_string(),
    }
}

fn parse_triple(key: &str, value: &str) -> Result<[f64; 3]> {
    let parts = value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("invalid value for {key}: {value:?}"))?;
    match parts.as_slice() {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => bail!("{key} needs three comma-separated numbers, got {value:?}"),
    }
}

fn synth_params(pairs: &[String]) -> Result<SynthParams> {
    let mut p = SynthParams::default();
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("expected key=value, got {pair:?}"))?;
        let scalar = || {
            value
                .trim()
                .parse::<f64>()
                .with_context(|| format!("invalid value for {key}: {value:?}"))
        };
        match key.trim() {
            "radius" => p.radius = scalar()?,
            "extent" => p.extent = scalar()?,
            "bend" => p.bend = scalar()?,
            "jitter" => p.jitter = scalar()?,
            "axes" => p.axes = parse_triple(key, value)?,
            "translate" => p.translate = parse_triple(key, value)?,
            other => bail!("unknown shape parameter {other:?}"),
        }
    }
    Ok(p)
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let params = synth_params(&args.params)?;
    let kind = match args.shape {
        ShapeKind::Sphere => SynthKind::Sphere,
        ShapeKind::Ellipsoid => SynthKind::Ellipsoid,
        ShapeKind::Sheet => SynthKind::Sheet,
    };
    let shape = synth::generate(kind, args.m, &params, args.seed)?;
    io::write_shape(&shape, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_strain(args: StrainArgs) -> Result<ExitCode> {
    let template = args.input.read(&args.template)?;
    let deformed = args.input.read(&args.deformed)?;
    let field = strain_field(&template, deformed.points())?;
    io::write_strain(&field, &args.out).with_context(|| format!("writing strain to {}", args.out.display()))?;
    let max = field.per_vertex_p.iter().copied().fold(0.0, f64::max);
    println!("{} vertices, max p_iso {max}", field.per_vertex_p.len());
    Ok(ExitCode::SUCCESS)
}
