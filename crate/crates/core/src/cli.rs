//! Command-line front end. Every command writes its outputs atomically and
//! leaves a `<output>.manifest` next to each file it produced.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::capacity::{region_sweep, sweep_csv, verdict_csv_header, verdict_csv_row, CapacityModel};
use crate::error::Error;
use crate::eval::{
    geo_csv, geo_experiment, run_grid, scale_csv, scale_experiment, ExperimentConfig, GeoSpec,
    GridSpec, ScaleSpec,
};
use crate::model::{build_plan, DemandVector, ObjectId, Scheme, StoragePlan};
use crate::sim::{mm1_drop_experiment, simulate, Routing, SimConfig, SimResult};
use crate::workload::{
    demands_csv, generate_trace, parse_demands_csv, sample_demands, trace_to_demand, Behavior,
    Trace, TruncatedNormal, Window, WorkloadSpec,
};

#[derive(Debug, Parser)]
#[command(name = "edgecap", version, about = "Capacity-region model and edge storage simulator")]
struct Cli {
    /// File of `key=value` lines, each standing in for `--key value`.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for experiments (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a storage plan.
    GenPlan(GenPlanArgs),
    /// Generate a request trace against a plan.
    GenWorkload(GenWorkloadArgs),
    /// Draw random demand vectors.
    SampleDemands(SampleDemandsArgs),
    /// Evaluate the capacity model on demand vectors or a trace.
    Model(ModelArgs),
    /// Simulate a trace on a plan.
    Simulate(SimulateArgs),
    /// Finite-buffer single-queue drop experiment.
    Mm1(Mm1Args),
    /// Model-versus-system experiments.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Sweep the model over a grid of two object groups' rates.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Units {
    /// Rates are multiples of the per-node service rate.
    Mu,
    /// Rates are requests per second.
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoutingArg {
    Periodic,
    Oracle,
    Both,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct GenPlanArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    overhead: f64,
    /// `replication` or `xor`.
    #[arg(long)]
    scheme: Scheme,
    /// Per-node service rate in requests per second.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct GenWorkloadArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    alpha: f64,
    /// Trace length in seconds.
    #[arg(long)]
    duration: f64,
    #[arg(long, default_value = "baseline")]
    behavior: Behavior,
    #[arg(long, default_value_t = 1)]
    users_per_node: usize,
    /// Mean per-user request rate.
    #[arg(long, default_value_t = 0.8)]
    rate_mean: f64,
    #[arg(long, default_value_t = 0.2)]
    rate_std: f64,
    #[arg(long, value_enum, default_value_t = Units::Mu)]
    rates: Units,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SampleDemandsArgs {
    #[arg(long)]
    k: usize,
    /// Mean and standard deviation of the cumulative demand.
    #[arg(long)]
    lambda_mean: f64,
    #[arg(long)]
    lambda_std: f64,
    #[arg(long)]
    alpha_mean: f64,
    #[arg(long)]
    alpha_std: f64,
    #[arg(long)]
    count: usize,
    /// Service rate used to convert rates given in units of mu.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = Units::Mu)]
    rates: Units,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct ModelArgs {
    #[arg(long)]
    plan: PathBuf,
    /// CSV of demand vectors, one per row.
    #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
    demand: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Window length in seconds for trace demand (whole trace if absent).
    #[arg(long, requires = "trace")]
    window: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    gray_width: f64,
    #[arg(long, value_enum, default_value_t = Units::Mu)]
    rates: Units,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SimulateArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = RoutingArg::Periodic)]
    routing: RoutingArg,
    #[arg(long, default_value_t = 100.0)]
    sync_interval_ms: f64,
    #[arg(long, default_value_t = 1)]
    servers: usize,
    /// Per-node task limit including tasks in service (unbounded if absent).
    #[arg(long)]
    queue_capacity: Option<usize>,
    /// 0 disables the limit.
    #[arg(long, default_value_t = 100.0)]
    queue_timeout_ms: f64,
    /// 0 disables the limit.
    #[arg(long, default_value_t = 200.0)]
    rtt_limit_ms: f64,
    #[arg(long, default_value_t = 20)]
    collaborative_penalty: usize,
    /// Use bare snapshots in periodic mode.
    #[arg(long)]
    no_outstanding_tracking: bool,
    /// Summary CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-node statistics CSV.
    #[arg(long)]
    nodes_out: Option<PathBuf>,
    /// Per-event log CSV.
    #[arg(long)]
    event_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct Mm1Args {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    buffer: usize,
    #[arg(long, default_value_t = 10_000)]
    total: usize,
    #[arg(long, default_value_t = 16)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct ExperimentArgs {
    #[arg(long)]
    seed: u64,
    /// Per-node service rate in requests per second.
    #[arg(long, default_value_t = 500.0)]
    mu: f64,
    /// Trace length in seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long)]
    traces: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1")]
    gray_widths: Vec<f64>,
    #[arg(long, default_value_t = 0.02)]
    threshold: f64,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20)]
    collaborative_penalty: usize,
    /// Directory receiving every plan, trace, demand, verdict and result.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvaluateCommand {
    /// Schemes x overheads x skews.
    #[command(args_override_self = true)]
    Grid {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long, value_enum, default_value_t = RoutingArg::Both)]
        routing: RoutingArg,
    },
    /// Baseline, local and remote user behaviors.
    #[command(args_override_self = true)]
    Geo {
        #[command(flatten)]
        common: ExperimentArgs,
    },
    /// Large system against its aggregated small counterpart.
    #[command(args_override_self = true)]
    Scale {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long, default_value_t = 10)]
        group_size: usize,
    },
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SweepArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Objects whose rates form the first axis (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    group_a: Vec<u32>,
    #[arg(long, value_delimiter = ',', required = true)]
    group_b: Vec<u32>,
    #[arg(long, default_value_t = 2.2)]
    max_a: f64,
    #[arg(long, default_value_t = 2.2)]
    max_b: f64,
    /// Grid points per axis, endpoints included.
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 0.0)]
    gray_width: f64,
    #[arg(long, value_enum, default_value_t = Units::Mu)]
    rates: Units,
    #[arg(long)]
    out: PathBuf,
}

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

fn error_kind(e: &Error) -> (&'static str, i32) {
    match e {
        Error::Io(_) => ("io", EXIT_IO),
        Error::Solver(_) => ("solver", EXIT_OTHER),
        Error::InvalidArgument(_) => ("invalid_argument", EXIT_INPUT),
        Error::InfeasibleGeometry(_) => ("infeasible_geometry", EXIT_INPUT),
        Error::PlanInvariant(_) => ("plan_invariant", EXIT_INPUT),
        Error::DimensionMismatch { .. } => ("dimension_mismatch", EXIT_INPUT),
        Error::InvalidRate { .. } => ("invalid_rate", EXIT_INPUT),
        Error::OutsideRegion => ("outside_region", EXIT_INPUT),
        Error::EmptyPool { .. } => ("empty_pool", EXIT_INPUT),
        Error::Parse { .. } => ("parse", EXIT_INPUT),
        Error::Mismatch(_) => ("mismatch", EXIT_INPUT),
    }
}

fn report_error(kind: &str, msg: &str) {
    let msg = msg.lines().next().unwrap_or("").replace('"', "'");
    eprintln!("error kind={kind} msg=\"{msg}\"");
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let (kind, code) = error_kind(&e);
            report_error(kind, &e.to_string());
            return code;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            // Fold clap's multi-line message into one line, dropping the usage hint.
            let rendered = e.render().to_string();
            let line = rendered
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            report_error("usage", line.trim_start_matches("error:").trim());
            return EXIT_USAGE;
        }
    };
    let recorded: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let outcome = match cli.jobs {
        Some(0) => Err(Error::InvalidArgument("--jobs must be >= 1".into())),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(cli.command, &recorded))),
        None => dispatch(cli.command, &recorded),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let (kind, code) = error_kind(&e);
            report_error(kind, &e.to_string());
            code
        }
    }
}

const SUBCOMMANDS: &[&str] = &[
    "gen-plan",
    "gen-workload",
    "sample-demands",
    "model",
    "simulate",
    "mm1",
    "evaluate",
    "sweep",
];

/// Splices `--config` entries into the argument list right after the
/// subcommand, where later command-line flags override them.
fn expand_config(args: Vec<OsString>) -> crate::error::Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = iter.next();
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path)?;
    let mut extra = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(idx + 1, format!("expected key=value, got {line:?}")))?;
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        extra.push(OsString::from(format!("--{key}")));
        if value != "true" {
            extra.push(OsString::from(value));
        }
    }
    let mut pos = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(rest.len(), |p| p + 1);
    if rest.get(pos - 1).is_some_and(|a| a == "evaluate") && pos < rest.len() {
        pos += 1;
    }
    rest.splice(pos..pos, extra);
    Ok(rest)
}

fn read_text(path: &Path) -> crate::error::Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn read_plan(path: &Path) -> crate::error::Result<StoragePlan> {
    StoragePlan::from_text(&read_text(path)?)
}

fn read_trace(path: &Path) -> crate::error::Result<Trace> {
    Trace::from_text(&read_text(path)?)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output files of one command, written together with their manifests.
struct Outputs<'a> {
    command: &'a str,
    args: &'a [String],
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    files: Vec<(PathBuf, String)>,
}

impl<'a> Outputs<'a> {
    fn new(command: &'a str, args: &'a [String], seed: Option<u64>) -> Self {
        Outputs {
            command,
            args,
            seed,
            inputs: Vec::new(),
            files: Vec::new(),
        }
    }

    fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    fn add(&mut self, path: &Path, contents: String) {
        self.files.push((path.to_path_buf(), contents));
    }

    fn manifest(&self) -> crate::error::Result<String> {
        let mut m = String::new();
        let _ = writeln!(m, "command={}", self.command);
        let _ = writeln!(m, "args={}", self.args.join(" "));
        if let Some(seed) = self.seed {
            let _ = writeln!(m, "seed={seed}");
        }
        let _ = writeln!(m, "version={}", env!("CARGO_PKG_VERSION"));
        for input in &self.inputs {
            let digest = sha256_hex(&fs::read(input)?);
            let _ = writeln!(m, "input={} sha256={digest}", input.display());
        }
        for (path, contents) in &self.files {
            let _ = writeln!(m, "output={} sha256={}", path.display(), sha256_hex(contents.as_bytes()));
        }
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let _ = writeln!(m, "timestamp_unix={now}");
        Ok(m)
    }

    fn write(self) -> crate::error::Result<()> {
        let manifest = self.manifest()?;
        for (path, contents) in &self.files {
            write_atomic(path, contents.as_bytes())?;
            let mut name = path.as_os_str().to_owned();
            name.push(".manifest");
            write_atomic(Path::new(&name), manifest.as_bytes())?;
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> crate::error::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn to_rate(value: f64, units: Units, mu: f64) -> f64 {
    match units {
        Units::Mu => value * mu,
        Units::Abs => value,
    }
}

fn from_rates(d: &DemandVector, units: Units, mu: f64) -> crate::error::Result<DemandVector> {
    match units {
        Units::Mu => d.scaled(1.0 / mu),
        Units::Abs => Ok(d.clone()),
    }
}

fn millis(ms: f64) -> Option<f64> {
    (ms > 0.0).then_some(ms / 1e3)
}

fn routings(arg: RoutingArg, interval: f64) -> Vec<Routing> {
    let periodic = Routing::Periodic { interval };
    match arg {
        RoutingArg::Periodic => vec![periodic],
        RoutingArg::Oracle => vec![Routing::Oracle],
        RoutingArg::Both => vec![periodic, Routing::Oracle],
    }
}

fn experiment_config(a: &ExperimentArgs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(a.mu, a.duration, a.seed);
    cfg.gray_widths = a.gray_widths.clone();
    cfg.threshold = a.threshold;
    cfg.artifacts = a.artifacts.clone();
    cfg.sim.collaborative_penalty = a.collaborative_penalty;
    cfg
}

fn dispatch(command: Command, args: &[String]) -> crate::error::Result<()> {
    match command {
        Command::GenPlan(a) => {
            let plan = build_plan(a.n, a.k, a.mu, a.overhead, a.scheme, a.seed)?;
            let mut out = Outputs::new("gen-plan", args, Some(a.seed));
            out.add(&a.out, plan.to_text());
            out.write()
        }
        Command::GenWorkload(a) => {
            let plan = read_plan(&a.plan)?;
            let spec = WorkloadSpec {
                k: plan.k(),
                users_per_node: a.users_per_node,
                alpha: a.alpha,
                rate_mean: to_rate(a.rate_mean, a.rates, plan.mu()),
                rate_std: to_rate(a.rate_std, a.rates, plan.mu()),
                duration_s: a.duration,
                behavior: a.behavior,
                seed: a.seed,
            };
            let trace = generate_trace(&spec, &plan)?;
            let mut out = Outputs::new("gen-workload", args, Some(a.seed)).input(&a.plan);
            out.add(&a.out, trace.to_text());
            out.write()
        }
        Command::SampleDemands(a) => {
            let lambda = TruncatedNormal {
                mean: to_rate(a.lambda_mean, a.rates, a.mu),
                std: to_rate(a.lambda_std, a.rates, a.mu),
            };
            let alpha = TruncatedNormal {
                mean: a.alpha_mean,
                std: a.alpha_std,
            };
            let demands = sample_demands(a.k, lambda, alpha, a.count, a.seed)?
                .iter()
                .map(|d| from_rates(d, a.rates, a.mu))
                .collect::<crate::error::Result<Vec<_>>>()?;
            let mut out = Outputs::new("sample-demands", args, Some(a.seed));
            out.add(&a.out, demands_csv(&demands));
            out.write()
        }
        Command::Model(a) => {
            let plan = read_plan(&a.plan)?;
            let mu = plan.mu();
            let mut out = Outputs::new("model", args, None).input(&a.plan);
            // Demands as the user sees them, and in requests per second.
            let (shown, absolute): (Vec<DemandVector>, Vec<DemandVector>) = match (&a.demand, &a.trace) {
                (Some(path), _) => {
                    out = out.input(path);
                    let shown = parse_demands_csv(&read_text(path)?)?;
                    let absolute = match a.rates {
                        Units::Mu => shown.iter().map(|d| d.scaled(mu)).collect::<Result<_, _>>()?,
                        Units::Abs => shown.clone(),
                    };
                    (shown, absolute)
                }
                (None, Some(path)) => {
                    out = out.input(path);
                    let trace = read_trace(path)?;
                    let window = a.window.map_or(Window::Whole, Window::Seconds);
                    let absolute = trace_to_demand(&trace, plan.k(), window)?;
                    let shown = absolute
                        .iter()
                        .map(|d| from_rates(d, a.rates, mu))
                        .collect::<crate::error::Result<_>>()?;
                    (shown, absolute)
                }
                (None, None) => unreachable!("clap requires a demand source"),
            };
            let model = CapacityModel::new(&plan)?;
            let mut csv = verdict_csv_header(plan.k());
            csv.push('\n');
            for (s, d) in shown.iter().zip(&absolute) {
                let mut v = model.verdict(d, a.gray_width)?;
                if a.rates == Units::Mu {
                    v.service_cost = v.service_cost.map(|c| c / mu);
                }
                csv.push_str(&verdict_csv_row(s, &v));
                csv.push('\n');
            }
            out.add(&a.out, csv);
            out.write()
        }
        Command::Simulate(a) => {
            let plan = read_plan(&a.plan)?;
            let trace = read_trace(&a.trace)?;
            let config = SimConfig {
                servers_per_node: a.servers,
                queue_capacity: a.queue_capacity,
                queue_timeout: millis(a.queue_timeout_ms),
                rtt_limit: millis(a.rtt_limit_ms),
                routing: routings(a.routing, a.sync_interval_ms / 1e3)
                    .into_iter()
                    .next()
                    .ok_or_else(|| Error::InvalidArgument("simulate takes one routing mode".into()))?,
                collaborative_penalty: a.collaborative_penalty,
                track_outstanding: !a.no_outstanding_tracking,
                event_log: a.event_log.is_some(),
                ..SimConfig::new(a.seed)
            };
            if a.routing == RoutingArg::Both {
                return Err(Error::InvalidArgument("simulate takes one routing mode".into()));
            }
            let mut result = simulate(&trace, &plan, &config)?;
            print!("{}", result.summary());
            let mut out = Outputs::new("simulate", args, Some(a.seed))
                .input(&a.plan)
                .input(&a.trace);
            out.add(&a.out, format!("{}\n{}\n", SimResult::csv_header(), result.csv_row()));
            if let Some(path) = &a.nodes_out {
                out.add(path, result.nodes_csv());
            }
            if let (Some(path), Some(log)) = (&a.event_log, result.event_log.take()) {
                out.add(path, format!("time_us,event_kind,node,request_id\n{log}"));
            }
            out.write()
        }
        Command::Mm1(a) => {
            let s = mm1_drop_experiment(a.lambda, a.buffer, a.total, a.reps, a.seed)?;
            let mut csv = String::from("lambda,buffer,total,reps,mean_drop_pct,std_drop_pct\n");
            let _ = writeln!(
                csv,
                "{},{},{},{},{:.6},{:.6}",
                a.lambda, a.buffer, a.total, a.reps, s.mean_pct, s.std_pct
            );
            println!("mean drop {:.4}% (std {:.4}%)", s.mean_pct, s.std_pct);
            let mut out = Outputs::new("mm1", args, Some(a.seed));
            out.add(&a.out, csv);
            out.write()
        }
        Command::Evaluate(cmd) => evaluate(cmd, args),
        Command::Sweep(a) => {
            let plan = read_plan(&a.plan)?;
            if a.steps < 2 {
                return Err(Error::InvalidArgument("--steps must be >= 2".into()));
            }
            let axis = |max: f64| -> Vec<f64> {
                (0..a.steps)
                    .map(|i| to_rate(max * i as f64 / (a.steps - 1) as f64, a.rates, plan.mu()))
                    .collect()
            };
            let ids = |g: &[u32]| g.iter().copied().map(ObjectId).collect::<Vec<_>>();
            let mut points = region_sweep(
                &plan,
                &ids(&a.group_a),
                &ids(&a.group_b),
                &axis(a.max_a),
                &axis(a.max_b),
                a.gray_width,
            )?;
            if a.rates == Units::Mu {
                let mu = plan.mu();
                for p in &mut points {
                    p.lambda_a /= mu;
                    p.lambda_b /= mu;
                    p.verdict.service_cost = p.verdict.service_cost.map(|c| c / mu);
                }
            }
            let mut out = Outputs::new("sweep", args, None).input(&a.plan);
            out.add(&a.out, sweep_csv(&points));
            out.write()
        }
    }
}

fn evaluate(cmd: EvaluateCommand, args: &[String]) -> crate::error::Result<()> {
    match cmd {
        EvaluateCommand::Grid { common, routing } => {
            let cfg = experiment_config(&common);
            let mut spec = GridSpec::standard(routings(routing, cfg.sim_interval()));
            if let Some(t) = common.traces {
                spec.traces_per_cell = t;
            }
            if let Some(alphas) = &common.alphas {
                spec.alphas = alphas.clone();
            }
            let report = run_grid(&spec, &cfg)?;
            print!("{}", report.summary());
            let mut out = Outputs::new("evaluate grid", args, Some(common.seed));
            out.add(&common.out, report.to_csv());
            out.write()
        }
        EvaluateCommand::Geo { common } => {
            let cfg = experiment_config(&common);
            let mut spec = GeoSpec::standard(Routing::Periodic {
                interval: cfg.sim_interval(),
            });
            if let Some(t) = common.traces {
                spec.traces_per_behavior = t;
            }
            if let Some(alphas) = &common.alphas {
                spec.alphas = alphas.clone();
            }
            let (rows, _) = geo_experiment(&spec, &cfg)?;
            let csv = geo_csv(&rows);
            print!("{csv}");
            let mut out = Outputs::new("evaluate geo", args, Some(common.seed));
            out.add(&common.out, csv);
            out.write()
        }
        EvaluateCommand::Scale { common, group_size } => {
            let cfg = experiment_config(&common);
            let mut spec = ScaleSpec::standard(Routing::Periodic {
                interval: cfg.sim_interval(),
            });
            spec.group_size = group_size;
            if let Some(t) = common.traces {
                spec.traces_per_cell = t;
            }
            if let Some(alphas) = &common.alphas {
                spec.alphas = alphas.clone();
            }
            if let Some(&w) = cfg.gray_widths.iter().find(|&&w| w > 0.0) {
                spec.gray_width = w;
            }
            let cells = scale_experiment(&spec, &cfg)?;
            let csv = scale_csv(&cells);
            print!("{csv}");
            let mut out = Outputs::new("evaluate scale", args, Some(common.seed));
            out.add(&common.out, csv);
            out.write()
        }
    }
}

impl ExperimentConfig {
    fn sim_interval(&self) -> f64 {
        match self.sim.routing {
            Routing::Periodic { interval } => interval,
            Routing::Oracle => 0.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_entries_go_after_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg");
        fs::write(&path, "# comment\nbuffer = 10\nlambda=0.9\nseed=1\nout=o.csv\n").unwrap();
        let args = os(&["edgecap", "--config", path.to_str().unwrap(), "mm1", "--lambda", "0.5"]);
        let got = expand_config(args).unwrap();
        assert_eq!(got, os(&[
                "edgecap", "mm1", "--buffer", "10", "--lambda", "0.9", "--seed", "1", "--out", "o.csv",
                "--lambda", "0.5"
            ]));
        let cli = Cli::try_parse_from(&got).unwrap_or_else(|e| panic!("{e}"));
        let Command::Mm1(a) = cli.command else { panic!("wrong command") };
        assert_eq!((a.lambda, a.buffer), (0.5, 10));
    }

    #[test]
    fn nested_subcommand_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg");
        fs::write(&path, "traces=3\n").unwrap();
        let args = os(&["edgecap", "evaluate", "--config", path.to_str().unwrap(), "geo", "--seed", "1"]);
        assert_eq!(
            expand_config(args).unwrap(),
            os(&["edgecap", "evaluate", "geo", "--traces", "3", "--seed", "1"])
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["edgecap", "mm1", "--lambda", "0.5"]), EXIT_USAGE);
        assert_eq!(run(["edgecap", "model", "--plan", "/nonexistent/plan", "--demand", "x", "--out", "y"]), EXIT_IO);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("p.txt");
        let code = run([
            "edgecap", "gen-plan", "--n", "3", "--k", "2", "--overhead", "1.25", "--scheme", "xor",
            "--seed", "1", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_INPUT);
        assert!(!out.exists());
    }
}
