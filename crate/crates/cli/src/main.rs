//! `ksample`: grow random boundary configurations, pleat them, and run the property suites.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ksample_core::check::{Suite, SuiteReport};
use ksample_core::config::{FamilySpec, RunConfig};
use ksample_core::configdata::chain::{connect, validate_chain};
use ksample_core::configdata::Mode;
use ksample_core::cp1::{in_o3, CP1Point, SignConvention};
use ksample_core::dynamics::{birkhoff_compare, contraction_experiment, Observable};
use ksample_core::grow::{grow_ball, Configuration};
use ksample_core::pleat::{mesh, realize, HOROBALL_HEIGHT};
use ksample_core::rng::stream;
use ksample_core::stats::block_bootstrap_ci;
use ksample_core::tree::TreeIsometry;
use ksample_core::Error;

const TOOL: &str = "ksample";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = TOOL, version, about = "Random boundary configurations over the Farey tree")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a configuration on the ball of radius `--depth` around the root tribone.
    Grow(GrowArgs),
    /// Realize a configuration as a pleated surface and certify local convexity.
    Pleat(PleatArgs),
    /// Run property suites and write a JSON report.
    Check(CheckArgs),
    /// Build a chain of admissible quadruples between two triples.
    Connect(ConnectArgs),
    /// Orbit experiments along a hyperbolic element.
    Dynamics {
        #[command(subcommand)]
        command: DynamicsCommand,
    },
}

#[derive(Subcommand)]
enum DynamicsCommand {
    /// Distance between orbits of two fields agreeing on a vanishing set.
    Contract(ContractArgs),
    /// Running averages of an observable along the orbit, per seed.
    Birkhoff(BirkhoffArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat `key = value` file, or an earlier JSON artifact; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    convention: Option<SignConvention>,
    /// `visual` or `power:<s>`.
    #[arg(long)]
    family: Option<FamilySpec>,
    /// Any other run setting.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GrowArgs {
    #[command(flatten)]
    common: Common,
    /// Defaults to `KSAMPLE_SEED`, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Obj,
}

#[derive(Args)]
struct PleatArgs {
    #[command(flatten)]
    common: Common,
    /// Configuration JSON written by `grow`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Subdivisions per face edge in the OBJ mesh.
    #[arg(long, default_value_t = 48)]
    resolution: usize,
    /// Largest allowed chord error of the mesh.
    #[arg(long, default_value_t = 0.05)]
    chord_tolerance: f64,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    /// A suite name or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct ConnectArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    /// Three comma-separated points, e.g. `0,1,inf`.
    #[arg(long)]
    t1: String,
    #[arg(long)]
    t2: String,
}

#[derive(Args)]
struct ContractArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    /// Matrix entries `a,b,c,d`.
    #[arg(long, default_value = "2,1,1,1")]
    gamma: TreeIsometry,
    /// Index `n` of the vanishing set `U_n⁺` the two fields share.
    #[arg(long, default_value_t = 3)]
    agree: usize,
    #[arg(long, default_value_t = 30)]
    steps: u32,
    /// Ball radius `N` of the metric.
    #[arg(long, default_value_t = 10)]
    metric_depth: usize,
    /// Compare against an independent field instead.
    #[arg(long)]
    control: bool,
}

#[derive(Args)]
struct BirkhoffArgs {
    #[command(flatten)]
    common: Common,
    /// One or more comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long, default_value = "2,1,1,1")]
    gamma: TreeIsometry,
    /// `root-bend`, `root-im` or `const:<x>`.
    #[arg(long, default_value = "root-bend")]
    observable: Observable,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Bootstrap block length.
    #[arg(long, default_value_t = 50)]
    block: usize,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    /// Row spacing of the CSV.
    #[arg(long, default_value_t = 100)]
    every: usize,
}

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) | Error::InvalidElement { .. } | Error::BadDeterminant(_) | Error::NotATribone(..) => 2,
            Error::DegenerateTriple
            | Error::RejectionBudgetExceeded { .. }
            | Error::NonFiniteDensity(_)
            | Error::Glue { .. } => 3,
            Error::DegenerateEdge { .. } => 4,
            Error::SearchBudgetExceeded { .. } => 5,
            Error::NotHyperbolic(_) => 6,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type Outcome = Result<(), Failure>;

fn load_config(common: &Common, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Ok(s) = std::env::var("KSAMPLE_SEED") {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| usage(format!("KSAMPLE_SEED must be an unsigned integer, got {s:?}")))?;
    }
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            let v: Value = serde_json::from_str(&text)?;
            let embedded = v.get("run_config").cloned().unwrap_or(v);
            cfg = serde_json::from_value(embedded).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        } else {
            cfg.merge_text(&text)?;
        }
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(m) = common.mode {
        cfg.mode = m;
    }
    if let Some(c) = common.convention {
        cfg.convention = c;
    }
    if let Some(f) = common.family {
        cfg.family = f;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn finish(cfg: &RunConfig) -> Outcome {
    cfg.validate().map_err(Failure::from)
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_output(path: Option<&Path>, bytes: &[u8]) -> Outcome {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(p).map_err(|e| Failure::from(e.error))?;
        }
    }
    Ok(())
}

fn artifact(cfg: &RunConfig, command: Value, body: Value) -> Value {
    let mut v = json!({
        "tool": TOOL,
        "version": VERSION,
        "run_config": cfg,
        "command": command,
    });
    if let (Some(dst), Value::Object(src)) = (v.as_object_mut(), body) {
        dst.extend(src);
    }
    v
}

fn write_json(path: Option<&Path>, v: &Value) -> Outcome {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_output(path, s.as_bytes())
}

/// `#`-prefixed provenance lines for text formats.
fn header(cfg: &RunConfig, command: &str) -> String {
    let mut s = format!("# {TOOL} {VERSION}\n# command: {command}\n");
    for line in cfg.to_text().lines() {
        s.push_str(&format!("# {line}\n"));
    }
    s
}

fn cmd_grow(a: GrowArgs) -> Outcome {
    let mut cfg = load_config(&a.common, a.seed)?;
    if let Some(d) = a.depth {
        cfg.depth = d;
    }
    finish(&cfg)?;
    let md = cfg.measured_data()?;
    let conf = grow_ball(&md, cfg.seed, cfg.depth)?;
    let v = artifact(&cfg, json!({"name": "grow"}), json!({ "configuration": conf }));
    write_json(a.common.out.as_deref(), &v)?;
    eprintln!("grew {} assignments at depth {}", conf.len(), cfg.depth);
    Ok(())
}

fn read_configuration(path: &Path) -> Result<Configuration, Failure> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let body = v.get("configuration").cloned().unwrap_or(v);
    serde_json::from_value(body).map_err(|e| usage(format!("{}: not a configuration: {e}", path.display())))
}

fn cmd_pleat(a: PleatArgs) -> Outcome {
    let cfg = load_config(&a.common, None)?;
    finish(&cfg)?;
    let conf = read_configuration(&a.input)?;
    let p = realize(&conf)?;
    let violations: Vec<String> = p
        .bends
        .iter()
        .filter(|b| !b.locally_convex())
        .map(|b| b.quadribone.to_string())
        .collect();
    let edges: Vec<Value> = p
        .bends
        .iter()
        .map(|b| {
            json!({
                "quadribone": b.quadribone.to_string(),
                "dihedral": b.dihedral,
                "bending": b.bending,
                "im_cross_ratio": b.im_cross_ratio,
                "locally_convex": b.locally_convex(),
            })
        })
        .collect();
    let summary = p.summary();
    let report = artifact(
        &cfg,
        json!({"name": "pleat", "input": a.input.display().to_string()}),
        json!({
            "certificate": {
                "locally_convex": violations.is_empty(),
                "violations": violations,
                "faces": p.faces.len(),
            },
            "summary": summary,
            "edges": edges,
        }),
    );
    match a.format {
        Format::Json => write_json(a.common.out.as_deref(), &report)?,
        Format::Obj => {
            let m = mesh(&p, a.resolution, HOROBALL_HEIGHT, a.chord_tolerance)?;
            let mut s = header(&cfg, &format!("pleat --input {}", a.input.display()));
            s.push_str(&format!("# locally_convex: {}\n", violations.is_empty()));
            s.push_str(&m.to_obj());
            write_output(a.common.out.as_deref(), s.as_bytes())?;
            if a.common.out.is_some() {
                write_json(None, &report)?;
            }
        }
    }
    if let Some(first) = violations.first() {
        return Err(Failure {
            code: 1,
            message: format!("not locally convex at {} edge(s); first at quadribone {first}", violations.len()),
        });
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Outcome {
    let mut cfg = load_config(&a.common, a.seed)?;
    if let Some(n) = a.samples {
        cfg.samples = n;
    }
    finish(&cfg)?;
    let suites: Vec<Suite> = if a.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        a.suite
            .split(',')
            .map(|s| s.trim().parse::<Suite>())
            .collect::<Result<_, _>>()?
    };
    let mut reports: Vec<SuiteReport> = Vec::new();
    for s in suites {
        let r = s.run(&cfg)?;
        eprintln!("{:<14} {}  ({:.1} s)", r.name, if r.pass { "PASS" } else { "FAIL" }, r.seconds);
        for i in r.items.iter().filter(|i| !i.pass) {
            eprintln!("    {}{}: {:e} vs {:e}", i.name, if i.informational { " (informational)" } else { "" }, i.value, i.tolerance);
        }
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    let v = artifact(&cfg, json!({"name": "check", "suite": a.suite}), json!({"pass": pass, "suites": reports}));
    write_json(a.common.out.as_deref(), &v)?;
    if pass {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "one or more suites failed".into(),
        })
    }
}

fn parse_triple(s: &str) -> Result<[CP1Point; 3], Failure> {
    let pts: Vec<CP1Point> = s.split(',').map(str::parse).collect::<Result<_, _>>()?;
    let t: [CP1Point; 3] = pts.try_into().map_err(|_| usage(format!("expected three points, got {s:?}")))?;
    if !in_o3(&t[0], &t[1], &t[2]) {
        return Err(usage(format!("points of {s:?} are not distinct")));
    }
    Ok(t)
}

fn cmd_connect(a: ConnectArgs) -> Outcome {
    let cfg = load_config(&a.common, a.seed)?;
    finish(&cfg)?;
    let (t1, t2) = (parse_triple(&a.t1)?, parse_triple(&a.t2)?);
    let chain = connect(&t1, &t2, cfg.convention, &mut stream(cfg.seed, "connect"))?;
    let validation = validate_chain(&chain, cfg.convention);
    let v = artifact(
        &cfg,
        json!({"name": "connect", "t1": a.t1, "t2": a.t2}),
        json!({"length": chain.len(), "validation": validation, "chain": chain}),
    );
    if a.common.out.is_some() {
        write_json(a.common.out.as_deref(), &v)?;
    }
    println!("length {} valid {}", chain.len(), validation.valid);
    if !validation.valid {
        return Err(Failure {
            code: 1,
            message: format!("chain failed validation: {:?}", validation.first_violation),
        });
    }
    Ok(())
}

fn cmd_contract(a: ContractArgs) -> Outcome {
    let cfg = load_config(&a.common, a.seed)?;
    finish(&cfg)?;
    if !a.gamma.is_hyperbolic() {
        return Err(Error::NotHyperbolic(a.gamma.to_string()).into());
    }
    let md = cfg.measured_data()?;
    let rep = contraction_experiment(&md, &a.gamma, a.agree, a.steps, a.metric_depth, cfg.seed, a.control)?;
    let mut s = header(
        &cfg,
        &format!(
            "dynamics contract --gamma {} --agree {} --steps {} --metric-depth {}{}",
            a.gamma,
            a.agree,
            a.steps,
            a.metric_depth,
            if a.control { " --control" } else { "" }
        ),
    );
    if let Some(p) = rep.absorbed_at {
        s.push_str(&format!("# absorbed_at: {p}\n"));
    }
    if let Some(p) = rep.precision_limit {
        s.push_str(&format!("# precision_limit: {p}\n"));
    }
    s.push_str("p,d_value\n");
    for r in &rep.rows {
        s.push_str(&format!("{},{}\n", r.p, r.d_value));
    }
    write_output(a.common.out.as_deref(), s.as_bytes())
}

fn cmd_birkhoff(a: BirkhoffArgs) -> Outcome {
    let seeds = if a.seed.is_empty() {
        vec![load_config(&a.common, None)?.seed]
    } else {
        a.seed.clone()
    };
    let cfg = load_config(&a.common, Some(seeds[0]))?;
    finish(&cfg)?;
    if a.block == 0 || a.resamples == 0 || a.every == 0 || a.steps == 0 {
        return Err(usage("--steps, --block, --resamples and --every must be positive"));
    }
    let md = cfg.measured_data()?;
    let cmp = birkhoff_compare(&md, &a.gamma, a.observable, a.steps, &seeds, a.block, a.resamples)?;
    let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    let mut s = header(
        &cfg,
        &format!(
            "dynamics birkhoff --gamma {} --observable {} --steps {} --seed {} --block {} --resamples {} --every {}",
            a.gamma,
            a.observable,
            a.steps,
            seed_list.join(","),
            a.block,
            a.resamples,
            a.every
        ),
    );
    s.push_str(&format!("# overlap: {}\n", cmp.overlap));
    s.push_str("N,running_average,ci_low,ci_high,seed\n");
    for t in &cmp.traces {
        let mut ns: Vec<usize> = (a.every..=a.steps).step_by(a.every).collect();
        if ns.last() != Some(&a.steps) {
            ns.push(a.steps);
        }
        for n in ns {
            let (lo, hi) = block_bootstrap_ci(&t.values[..n], a.block, a.resamples, 0.95, &mut stream(t.seed, "bootstrap"));
            s.push_str(&format!("{n},{},{lo},{hi},{}\n", t.running[n - 1], t.seed));
        }
    }
    write_output(a.common.out.as_deref(), s.as_bytes())?;
    for (t, (lo, hi)) in cmp.traces.iter().zip(&cmp.intervals) {
        eprintln!("seed {}: average {:.6}, 95% interval [{lo:.6}, {hi:.6}]", t.seed, t.running[a.steps - 1]);
    }
    eprintln!("overlap {}", cmp.overlap);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Grow(a) => cmd_grow(a),
        Command::Pleat(a) => cmd_pleat(a),
        Command::Check(a) => cmd_check(a),
        Command::Connect(a) => cmd_connect(a),
        Command::Dynamics { command } => match command {
            DynamicsCommand::Contract(a) => cmd_contract(a),
            DynamicsCommand::Birkhoff(a) => cmd_birkhoff(a),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
