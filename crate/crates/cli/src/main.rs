mod output;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conehedge::geometry::Polyhedron;
use conehedge::input::{self, ParseError};
use conehedge::market::MarketTree;
use conehedge::payoffs::Claim;
use conehedge::shp::{scalar_price, shp_backward, ShpResult};
use conehedge::strategy::{self, Choice, StepContext, StrategyState};
use conehedge::vop::{benson_solve, VopProblem};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "conehedge", version, about = "Superhedging under proportional transaction costs")]
struct Cli {
    /// Worker threads for the per-level parallel steps.
    #[arg(long, global = true, env = "CONEHEDGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Inputs {
    /// Market as explicit nodes or as a lattice spec.
    #[arg(long)]
    market: PathBuf,
    /// Claim as per-terminal payoffs or as a named contract.
    #[arg(long)]
    claim: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    A,
    B,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    MaxCash,
    MinTrade,
    Script,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Superhedging sets at every node.
    Compute {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Scalar ask and bid prices in units of one asset.
    Price {
        #[arg(long, conflicts_with_all = ["market", "claim"])]
        shp: Option<PathBuf>,
        #[arg(long, requires = "claim")]
        market: Option<PathBuf>,
        #[arg(long, requires = "market")]
        claim: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        asset: usize,
        #[arg(long, value_enum, default_value = "both")]
        side: Side,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a strategy along one path of the tree.
    Strategy {
        #[command(flatten)]
        inputs: Inputs,
        /// Node ids from the root to a terminal node, comma separated.
        #[arg(long, conflicts_with = "coords")]
        path: Option<String>,
        /// Lattice coordinates per time step, e.g. "0,0;1,0;2,1".
        #[arg(long)]
        coords: Option<String>,
        #[arg(long, value_enum, default_value = "max-cash")]
        mode: Mode,
        /// JSON array of choices, one per time step.
        #[arg(long, required_if_eq("mode", "script"))]
        script: Option<PathBuf>,
        /// Initial portfolio, comma separated.
        #[arg(long, conflicts_with = "vertex", allow_hyphen_values = true)]
        x0: Option<String>,
        /// Index into the root vertices sorted lexicographically.
        #[arg(long, default_value_t = 0)]
        vertex: usize,
        /// Withdrawal bundle, comma separated; defaults to one unit of `asset`.
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
        #[arg(long)]
        asset: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve a linear vector optimization problem.
    Vop {
        #[arg(long)]
        problem: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Static SVG pictures.
    Plot {
        #[command(subcommand)]
        what: PlotCommand,
    },
    /// HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Append-only session journal, replayed at startup.
        #[arg(long)]
        journal: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PlotCommand {
    /// A node's superhedging set projected to two coordinates.
    Set {
        #[arg(long)]
        shp: PathBuf,
        #[arg(long)]
        node: Option<usize>,
        #[arg(long, default_value = "0,1")]
        axes: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// The frontier offered at one step of a strategy log.
    Frontier {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 0)]
        step: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: 1, message: message.into() }
    }
}

impl From<conehedge::Error> for Failure {
    fn from(e: conehedge::Error) -> Failure {
        let code = if matches!(e, conehedge::Error::Arbitrage) { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure::usage(e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn parse_file<T>(path: &Path, parse: impl FnOnce(Value) -> Result<T, ParseError>) -> Outcome<T> {
    let text = read(path)?;
    let v: Value = input::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    parse(v).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load(market: &Path, claim: &Path) -> Outcome<(MarketTree, Claim)> {
    let m = parse_file(market, input::parse_market)?;
    let c = parse_file(claim, input::parse_claim)?;
    let tree = m.tree()?;
    let claim = c.claim(&tree)?;
    Ok((tree, claim))
}

fn emit<T: Serialize>(v: &T, out: Option<&Path>) -> Outcome<()> {
    let text = output::to_string(v)?;
    write_text(&text, out)
}

fn write_text(text: &str, out: Option<&Path>) -> Outcome<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn numbers(s: &str, what: &str) -> Outcome<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| Failure::usage(format!("{what}: {e}")))).collect()
}

#[derive(Serialize, Deserialize)]
struct SetRecord {
    t: usize,
    hrep: Value,
    vrep: Value,
    efficient_points: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ShpFile {
    d: usize,
    horizon: usize,
    numeraire: usize,
    root: usize,
    root_mid: Vec<f64>,
    nodes: std::collections::BTreeMap<String, SetRecord>,
}

fn sorted_points(p: &Polyhedron) -> Vec<Vec<f64>> {
    let mut pts = p.points().clone();
    pts.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    pts
}

fn shp_file(tree: &MarketTree, shp: &ShpResult) -> Outcome<ShpFile> {
    let mut nodes = std::collections::BTreeMap::new();
    for (id, n) in &shp.nodes {
        let mut rays = n.set.rays().clone();
        rays.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        nodes.insert(
            id.to_string(),
            SetRecord {
                t: tree.node(*id).t,
                hrep: serde_json::to_value(n.set.hrep())?,
                vrep: json!({"points": sorted_points(&n.set), "rays": rays}),
                efficient_points: n.efficient_points.clone(),
            },
        );
    }
    let root = tree.root();
    Ok(ShpFile { d: tree.d, horizon: tree.horizon, numeraire: tree.numeraire, root: root.id, root_mid: root.quotes_or_implied(tree.numeraire).mid, nodes })
}

fn cmd_compute(inputs: &Inputs, out: Option<&Path>) -> Outcome<()> {
    let (tree, claim) = load(&inputs.market, &inputs.claim)?;
    let shp = shp_backward(&tree, &claim)?;
    emit(&shp_file(&tree, &shp)?, out)
}

#[derive(Serialize)]
struct PriceRow {
    side: &'static str,
    units: f64,
    cash: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_price(shp: Option<&Path>, market: Option<&Path>, claim: Option<&Path>, asset: usize, side: Side, format: Format, out: Option<&Path>) -> Outcome<()> {
    let mut rows = Vec::new();
    match (shp, market, claim) {
        (Some(path), _, _) => {
            if !matches!(side, Side::A) {
                return Err(Failure::usage("a stored result only gives the ask side; pass --market and --claim for the bid"));
            }
            let file: ShpFile = input::from_str(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            if asset >= file.d {
                return Err(Failure::usage(format!("asset {asset} out of range")));
            }
            let rec = file.nodes.get(&file.root.to_string()).ok_or_else(|| Failure::usage("root node missing"))?;
            let h: conehedge::geometry::HRep = serde_json::from_value(rec.hrep.clone())?;
            let set = Polyhedron::from_hrep_dim(file.d, h.a, h.b)?;
            let units = scalar_price(&set, asset)?;
            rows.push(PriceRow { side: "ask", units, cash: units * file.root_mid[asset] });
        }
        (None, Some(m), Some(c)) => {
            let (tree, claim) = load(m, c)?;
            if asset >= tree.d {
                return Err(Failure::usage(format!("asset {asset} out of range")));
            }
            let mid = tree.root().quotes_or_implied(tree.numeraire).mid[asset];
            if matches!(side, Side::A | Side::Both) {
                let units = scalar_price(shp_backward(&tree, &claim)?.root(&tree), asset)?;
                rows.push(PriceRow { side: "ask", units, cash: units * mid });
            }
            if matches!(side, Side::B | Side::Both) {
                let units = -scalar_price(shp_backward(&tree, &claim.negated())?.root(&tree), asset)?;
                rows.push(PriceRow { side: "bid", units, cash: units * mid });
            }
        }
        _ => return Err(Failure::usage("give --shp or both --market and --claim")),
    }
    match format {
        Format::Json => emit(&json!({"asset": asset, "prices": rows}), out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.write_record([r.side.to_string(), output::fmt_g(r.units), output::fmt_g(r.cash)]).map_err(|e| Failure::usage(e.to_string()))?;
            }
            let body = String::from_utf8(w.into_inner().map_err(|e| Failure::usage(e.to_string()))?).expect("csv is utf-8");
            write_text(&format!("side,units,cash\n{body}"), out)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StepLog {
    node: usize,
    t: usize,
    frontier: Vec<[f64; 2]>,
    chosen: usize,
    alpha: f64,
    trade_cost: f64,
    v: Vec<f64>,
    z: Vec<f64>,
    trade: Vec<f64>,
    next: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct StrategyLog {
    x0: Vec<f64>,
    y: Vec<f64>,
    path: Vec<usize>,
    steps: Vec<StepLog>,
    total_alpha: f64,
    withdrawals: Vec<f64>,
    final_v: Vec<f64>,
}

fn resolve_path(tree: &MarketTree, path: Option<&str>, coords: Option<&str>) -> Outcome<Vec<usize>> {
    match (path, coords) {
        (Some(p), _) => p.split(',').map(|x| x.trim().parse::<usize>().map_err(|e| Failure::usage(format!("path: {e}")))).collect(),
        (None, Some(c)) => c
            .split(';')
            .enumerate()
            .map(|(t, grp)| {
                let xs: Vec<usize> = grp.split(',').map(|x| x.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|e| Failure::usage(format!("coords: {e}")))?;
                tree.lattice_node(t, &xs).ok_or_else(|| Failure::usage(format!("no lattice node at t={t} with coordinates {xs:?}")))
            })
            .collect(),
        (None, None) => Err(Failure::usage("give --path or --coords")),
    }
}

struct StrategyArgs<'a> {
    inputs: &'a Inputs,
    path: Option<&'a str>,
    coords: Option<&'a str>,
    mode: Mode,
    script: Option<&'a Path>,
    x0: Option<&'a str>,
    vertex: usize,
    y: Option<&'a str>,
    asset: Option<usize>,
}

fn cmd_strategy(a: StrategyArgs, out: Option<&Path>) -> Outcome<()> {
    let (tree, claim) = load(&a.inputs.market, &a.inputs.claim)?;
    let shp = shp_backward(&tree, &claim)?;
    let ctx = StepContext { tree: &tree, claim: &claim, shp: &shp };
    let path = resolve_path(&tree, a.path, a.coords)?;
    if path.len() != tree.horizon + 1 || path[0] != tree.root().id {
        return Err(Failure::usage(format!("path must run from the root through {} steps", tree.horizon)));
    }
    let x0 = match a.x0 {
        Some(s) => numbers(s, "x0")?,
        None => sorted_points(shp.root(&tree)).get(a.vertex).cloned().ok_or_else(|| Failure::usage(format!("root set has no vertex {}", a.vertex)))?,
    };
    let y = match (a.y, a.asset) {
        (Some(s), _) => numbers(s, "y")?,
        (None, i) => {
            let i = i.unwrap_or(tree.numeraire);
            if i >= tree.d {
                return Err(Failure::usage(format!("asset {i} out of range")));
            }
            (0..tree.d).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
        }
    };
    if y.len() != tree.d {
        return Err(Failure::usage(format!("y needs {} entries", tree.d)));
    }
    let choices: Vec<Choice> = match a.mode {
        Mode::MaxCash => vec![Choice::MaxCash; path.len()],
        Mode::MinTrade => {
            let mut c = vec![Choice::MinTrade; path.len()];
            c[path.len() - 1] = Choice::MaxCash;
            c
        }
        Mode::Script => {
            let p = a.script.ok_or_else(|| Failure::usage("--mode script needs --script"))?;
            input::from_str(&read(p)?).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
        }
    };
    if choices.len() != path.len() {
        return Err(Failure::usage(format!("script needs {} choices", path.len())));
    }
    let mut state = StrategyState::new(ctx, &x0)?;
    let mut steps = Vec::new();
    for (t, choice) in choices.iter().enumerate() {
        let gamma = strategy::default_gamma(&tree, state.node);
        let f = strategy::bicriteria_frontier(ctx, &state, &y, &gamma)?;
        let k = strategy::pick(&f, *choice)?;
        let next = path.get(t + 1).copied();
        let after = strategy::advance(ctx, &state, &f, k, &y, next)?;
        let rec = after.history.last().expect("advance records the step");
        steps.push(StepLog {
            node: state.node,
            t,
            frontier: f.points.iter().map(|p| [p.alpha, p.trade_cost]).collect(),
            chosen: k,
            alpha: rec.chosen.alpha,
            trade_cost: rec.chosen.trade_cost,
            v: rec.chosen.v.clone(),
            z: rec.chosen.z.clone(),
            trade: rec.trade.clone(),
            next,
        });
        state = after;
    }
    let log = StrategyLog { x0, y, path, steps, total_alpha: state.total_alpha(), withdrawals: state.withdrawals.clone(), final_v: state.v.clone() };
    emit(&log, out)
}

fn cmd_vop(problem: &Path, out: Option<&Path>) -> Outcome<()> {
    let p: VopProblem = input::from_str(&read(problem)?).map_err(|e| Failure::usage(format!("{}: {e}", problem.display())))?;
    emit(&benson_solve(&p)?, out)
}

fn cmd_plot(what: &PlotCommand) -> Outcome<()> {
    match what {
        PlotCommand::Set { shp, node, axes, out } => {
            let file: ShpFile = input::from_str(&read(shp)?).map_err(|e| Failure::usage(format!("{}: {e}", shp.display())))?;
            let id = node.unwrap_or(file.root);
            let rec = file.nodes.get(&id.to_string()).ok_or_else(|| Failure::usage(format!("no node {id}")))?;
            let ax: Vec<usize> = axes.split(',').map(|x| x.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|e| Failure::usage(format!("axes: {e}")))?;
            if ax.len() != 2 || ax.iter().any(|k| *k >= file.d) || ax[0] == ax[1] {
                return Err(Failure::usage("axes must name two distinct coordinates"));
            }
            let v: conehedge::geometry::VRep = serde_json::from_value(rec.vrep.clone())?;
            let svg = plot::set_svg(&v.points, &v.rays, [ax[0], ax[1]], &format!("node {id}, t={}", rec.t));
            write_text(&svg, Some(out))
        }
        PlotCommand::Frontier { log, step, out } => {
            let l: StrategyLog = input::from_str(&read(log)?).map_err(|e| Failure::usage(format!("{}: {e}", log.display())))?;
            let s = l.steps.get(*step).ok_or_else(|| Failure::usage(format!("log has {} steps", l.steps.len())))?;
            let pts: Vec<(f64, f64)> = s.frontier.iter().map(|p| (p[0], p[1])).collect();
            let svg = plot::frontier_svg(&pts, &format!("node {}, t={}", s.node, s.t));
            write_text(&svg, Some(out))
        }
    }
}

fn cmd_serve(host: std::net::IpAddr, port: u16, journal: Option<PathBuf>) -> Outcome<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(conehedge_service::serve(std::net::SocketAddr::new(host, port), journal))?;
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::usage(e.to_string()))?;
    }
    match &cli.cmd {
        Command::Compute { inputs, out } => cmd_compute(inputs, out.as_deref()),
        Command::Price { shp, market, claim, asset, side, format, out } => cmd_price(shp.as_deref(), market.as_deref(), claim.as_deref(), *asset, *side, *format, out.as_deref()),
        Command::Strategy { inputs, path, coords, mode, script, x0, vertex, y, asset, out } => cmd_strategy(
            StrategyArgs { inputs, path: path.as_deref(), coords: coords.as_deref(), mode: *mode, script: script.as_deref(), x0: x0.as_deref(), vertex: *vertex, y: y.as_deref(), asset: *asset },
            out.as_deref(),
        ),
        Command::Vop { problem, out } => cmd_vop(problem, out.as_deref()),
        Command::Plot { what } => cmd_plot(what),
        Command::Serve { port, host, journal } => cmd_serve(*host, *port, journal.clone()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
