//! `peakstream` command-line driver: generate, initialize, run, evaluate.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use peakstream::io::{self as pio, SnapshotDir};
use peakstream::oracle::{self, LabeledAssignment};
use peakstream::*;

#[derive(Parser)]
#[command(name = "peakstream", version, about = "Density-peak clustering over data streams")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a planted synthetic stream as CSV.
    Gen {
        /// Built-in scenario (sds, hds) or a scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the initial state from the head of a stream.
    Init {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Initial separation threshold, read off the decision graph.
        #[arg(long)]
        tau0: f64,
        /// Where to write the `cell_id,rho,delta` decision graph.
        #[arg(long)]
        emit_decision_graph: Option<PathBuf>,
        #[arg(long, default_value = "state.json")]
        state: PathBuf,
        /// Points of the stream used for initialization.
        #[arg(long, default_value_t = 1000)]
        init_points: usize,
    },
    /// Stream points through the engine.
    Run {
        #[arg(long)]
        input: PathBuf,
        /// State written by `init`; the stream resumes after the points it
        /// has already consumed.
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        state: Option<PathBuf>,
        /// Initialize from the head of the input instead of a state file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's tau0 (with --config).
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        init_points: usize,
        /// Event log, one JSON object per line.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Directory for one snapshot CSV per sweep boundary.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[arg(long)]
        counters: Option<PathBuf>,
        /// Save the final state here.
        #[arg(long)]
        save_state: Option<PathBuf>,
        /// Keep tau at tau0 instead of reselecting it at each sweep.
        #[arg(long)]
        static_tau: bool,
        /// Bucket seeds in a grid for assignment (same output, less work in
        /// low dimensions).
        #[arg(long)]
        grid_index: bool,
        #[arg(long, value_enum)]
        filters: Option<Filters>,
        #[arg(long, value_enum)]
        recycle: Option<Switch>,
    },
    /// Freshness-weighted purity of each snapshot against the input labels.
    Eval {
        /// Directory written by `run --snapshots`.
        #[arg(long)]
        snapshots: PathBuf,
        /// Labeled stream the snapshots were computed from.
        #[arg(long)]
        input: PathBuf,
        /// Configuration of the run (decay parameters and radius).
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Filters {
    Both,
    DensityOnly,
    Off,
}

impl From<Filters> for FilterMode {
    fn from(f: Filters) -> Self {
        match f {
            Filters::Both => FilterMode::Both,
            Filters::DensityOnly => FilterMode::DensityOnly,
            Filters::Off => FilterMode::Off,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Error with its process exit code.
struct Fail {
    code: u8,
    msg: String,
}

const INIT_FAILED: u8 = 2;
const BAD_INPUT: u8 = 3;
const NO_LABELS: u8 = 4;

impl Fail {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Fail {
            code,
            msg: msg.into(),
        }
    }
}

/// Generic mapping: parse errors are bad input, everything else code 1.
impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => BAD_INPUT,
            _ => 1,
        };
        Fail::new(code, e.to_string())
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        Fail::new(1, e.to_string())
    }
}

fn with_path(path: &Path) -> impl Fn(Error) -> Fail + '_ {
    move |e| {
        let f = Fail::from(e);
        Fail::new(f.code, format!("{}: {}", path.display(), f.msg))
    }
}

fn read_input(path: &Path) -> Result<Vec<StreamPoint>, Fail> {
    pio::read_stream_path(path).map_err(with_path(path))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Fail> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Fail> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Fail::new(1, format!("{}: {e}", path.display())))
}

fn gen(scenario: &str, seed: u64, out: Option<&Path>) -> Result<(), Fail> {
    let s = match PlantedScenario::builtin(scenario) {
        Ok(s) => s,
        Err(_) if Path::new(scenario).is_file() => {
            let text = std::fs::read_to_string(scenario)?;
            serde_json::from_str(&text).map_err(|e| Fail::new(BAD_INPUT, format!("{scenario}: {e}")))?
        }
        Err(e) => return Err(e.into()),
    };
    let pts = s.generate(seed)?;
    pio::write_stream(output(out)?, &pts)?;
    Ok(())
}

/// Initialization failures all exit with code 2, whatever their cause.
fn initialize(
    config: &Path,
    tau0: Option<f64>,
    pts: &[StreamPoint],
    init_points: usize,
) -> Result<(Engine, Vec<DecisionGraphPoint>), Fail> {
    let init_err = |e: Error| Fail::new(INIT_FAILED, format!("initialization failed: {e}"));
    let mut cfg = EngineConfig::load(config).map_err(|e| init_err(Error::InvalidParam(format!("{}: {e}", config.display()))))?;
    if tau0.is_some() {
        cfg.tau0 = tau0;
    }
    let n = init_points.min(pts.len());
    Engine::initialize(cfg, &pts[..n]).map_err(init_err)
}

fn init(
    input: &Path,
    config: &Path,
    tau0: f64,
    graph: Option<&Path>,
    state: &Path,
    init_points: usize,
) -> Result<(), Fail> {
    let pts = read_input(input)?;
    let (engine, dg) = initialize(config, Some(tau0), &pts, init_points)?;
    if let Some(path) = graph {
        pio::write_decision_graph(create(path)?, &dg)?;
    }
    engine.save(state)?;
    let snap = engine.last_snapshot();
    eprintln!(
        "initialized on {} points: {} cells, {} active, {} clusters, alpha = {}",
        engine.store().points_seen(),
        engine.store().len(),
        engine.tree().len(),
        snap.clusters.len(),
        engine.alpha()
    );
    Ok(())
}

struct RunOpts<'a> {
    input: &'a Path,
    state: Option<&'a Path>,
    config: Option<&'a Path>,
    tau0: Option<f64>,
    init_points: usize,
    events: Option<&'a Path>,
    snapshots: Option<&'a Path>,
    counters: Option<&'a Path>,
    save_state: Option<&'a Path>,
    static_tau: bool,
    grid_index: bool,
    filters: Option<Filters>,
    recycle: Option<Switch>,
}

fn run(o: RunOpts) -> Result<(), Fail> {
    let pts = read_input(o.input)?;
    let mut engine = match (o.state, o.config) {
        (Some(s), _) => Engine::load(s).map_err(with_path(s))?,
        (None, Some(c)) => initialize(c, o.tau0, &pts, o.init_points)?.0,
        (None, None) => return Err(Fail::new(1, "one of --state or --config is required")),
    };
    if o.static_tau {
        engine.set_adaptive_tau(false);
    }
    if o.grid_index {
        engine.set_grid_index(true);
    }
    if let Some(f) = o.filters {
        engine.set_filters(f.into());
    }
    if let Some(r) = o.recycle {
        engine.set_recycle(matches!(r, Switch::On));
    }
    let mut snaps = o.snapshots.map(SnapshotDir::create).transpose()?;
    if let Some(dir) = snaps.as_mut() {
        dir.write(engine.last_snapshot(), engine.store())?;
    }
    let mut events = o.events.map(create).transpose()?;
    let skip = engine.store().points_seen() as usize;
    for (k, p) in pts.iter().enumerate().skip(skip) {
        let evs = engine
            .process_point(p)
            .map_err(|e| Fail::new(BAD_INPUT, format!("{}: line {}: {e}", o.input.display(), k + 2)))?;
        if let Some(w) = events.as_mut() {
            pio::write_events(w, &evs)?;
        }
        if engine.at_boundary() {
            if let Some(dir) = snaps.as_mut() {
                dir.write(engine.last_snapshot(), engine.store())?;
            }
        }
    }
    if let Some(dir) = snaps {
        dir.finish()?;
    }
    if let Some(mut w) = events {
        w.flush()?;
    }
    if let Some(path) = o.counters {
        pio::write_counters(create(path)?, &engine.counters())?;
    }
    if let Some(path) = o.save_state {
        engine.save(path)?;
    }
    let c = engine.counters();
    eprintln!(
        "processed {} points: {} events, {} clusters at t = {}, {} cells recycled",
        pts.len().saturating_sub(skip),
        engine.log().len(),
        engine.last_snapshot().clusters.len(),
        engine.now(),
        c.recycled
    );
    Ok(())
}

fn eval(snapshots: &Path, input: &Path, config: &Path, out: Option<&Path>) -> Result<(), Fail> {
    let pts = read_input(input)?;
    if pts.iter().all(|p| p.label.is_none()) {
        return Err(Fail::new(NO_LABELS, format!("{}: no label column", input.display())));
    }
    let cfg = EngineConfig::load(config).map_err(with_path(config))?;
    let mut rows = Vec::new();
    for entry in pio::read_snapshot_index(snapshots)? {
        let path = snapshots.join(&entry.file);
        let cells = pio::read_snapshot(File::open(&path)?).map_err(with_path(&path))?;
        let snap = to_snapshot(&cells, entry.time, entry.tau);
        let assigned = assign(&pts, &cells, entry.time, &cfg);
        rows.push((entry.time, "clusters".to_string(), snap.clusters.len() as f64));
        let purity = oracle::weighted_purity(&snap, &assigned, &cfg.decay, entry.time);
        if let Ok(p) = purity {
            rows.push((entry.time, "purity".to_string(), p));
        }
    }
    pio::write_metrics(output(out)?, &rows)?;
    Ok(())
}

fn to_snapshot(cells: &[pio::SnapshotRow], time: f64, tau: f64) -> ClusterSnapshot {
    let mut groups: std::collections::BTreeMap<CellId, Vec<CellId>> = Default::default();
    let mut outliers = Vec::new();
    for c in cells {
        match c.cluster {
            Some(k) => groups.entry(k).or_default().push(c.cell),
            None => outliers.push(c.cell),
        }
    }
    ClusterSnapshot {
        time,
        tau,
        clusters: groups
            .into_iter()
            .map(|(id, mut members)| {
                members.sort_unstable();
                Cluster { id, members }
            })
            .collect(),
        outlier_cells: outliers,
        engine_id: 0,
    }
}

/// Labeled points up to `t`, each attributed to the nearest listed seed
/// within the cell radius. Points whose weight has fallen under the
/// freshness floor are skipped.
fn assign(pts: &[StreamPoint], cells: &[pio::SnapshotRow], t: f64, cfg: &EngineConfig) -> Vec<LabeledAssignment> {
    let metric = cfg.metric;
    pts.iter()
        .filter(|p| p.t <= t && cfg.decay.freshness(p.t, t).is_ok_and(|w| w > 0.0))
        .filter_map(|p| {
            let label = p.label.clone()?;
            let (cell, d) = cells
                .iter()
                .map(|c| (c.cell, metric.distance(&p.coords, &c.seed)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))?;
            (d <= cfg.r).then_some(LabeledAssignment { cell, label, t: p.t })
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Gen { scenario, seed, out } => gen(scenario, *seed, out.as_deref()),
        Cmd::Init {
            input,
            config,
            tau0,
            emit_decision_graph,
            state,
            init_points,
        } => init(input, config, *tau0, emit_decision_graph.as_deref(), state, *init_points),
        Cmd::Run {
            input,
            state,
            config,
            tau0,
            init_points,
            events,
            snapshots,
            counters,
            save_state,
            static_tau,
            grid_index,
            filters,
            recycle,
        } => run(RunOpts {
            input,
            state: state.as_deref(),
            config: config.as_deref(),
            tau0: *tau0,
            init_points: *init_points,
            events: events.as_deref(),
            snapshots: snapshots.as_deref(),
            counters: counters.as_deref(),
            save_state: save_state.as_deref(),
            static_tau: *static_tau,
            grid_index: *grid_index,
            filters: *filters,
            recycle: *recycle,
        }),
        Cmd::Eval {
            snapshots,
            input,
            config,
            out,
        } => eval(snapshots, input, config, out.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
