#![allow(dead_code)]

use peakstream::scenario::sds;
use peakstream::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const SDS_CONF: &str = include_str!("../../../../configs/sds.conf");
pub const REFERENCE_CONF: &str = include_str!("../../../../configs/reference.conf");
pub const SDS_SEED: u64 = 7;
pub const INIT_POINTS: usize = 1000;

pub fn sds_config() -> EngineConfig {
    EngineConfig::parse(SDS_CONF).expect("sds.conf parses")
}

pub fn sds_points() -> Vec<StreamPoint> {
    sds().generate(SDS_SEED).expect("sds generates")
}

/// Everything a full run leaves behind.
pub struct Run {
    pub engine: Engine,
    pub snapshots: Vec<ClusterSnapshot>,
    /// Each snapshot as written to disk, densities and deltas included.
    pub snapshot_csv: Vec<String>,
    pub events: Vec<EvolutionEvent>,
}

impl Run {
    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).unwrap() + "\n")
            .collect()
    }

    pub fn snapshots_json(&self) -> String {
        serde_json::to_string(&self.snapshots).unwrap()
    }

    pub fn snapshots_csv(&self) -> String {
        self.snapshot_csv.concat()
    }

    pub fn cluster_counts(&self) -> Vec<(f64, usize)> {
        self.snapshots.iter().map(|s| (s.time, s.clusters.len())).collect()
    }

    /// Non-adjust event kinds with their times.
    pub fn structural(&self) -> Vec<(EventKind, f64)> {
        self.events
            .iter()
            .filter(|e| e.kind != EventKind::Adjust)
            .map(|e| (e.kind, e.time))
            .collect()
    }
}

/// Initializes on the first `init` points and streams the rest, keeping the
/// snapshot of every sweep boundary.
pub fn run_with(config: EngineConfig, pts: &[StreamPoint], init: usize) -> Run {
    let (engine, _) = Engine::initialize(config, &pts[..init]).expect("initialization");
    continue_run(engine, &pts[init..])
}

/// Streams `pts` through an engine that is already initialized.
pub fn continue_run(mut engine: Engine, pts: &[StreamPoint]) -> Run {
    let csv = |e: &Engine| {
        let mut buf = Vec::new();
        peakstream::io::write_snapshot(&mut buf, e.last_snapshot(), e.store()).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let mut snapshots = vec![engine.last_snapshot().clone()];
    // a resumed engine may be past its last boundary; densities can only be
    // rendered at the engine's current time
    let mut snapshot_csv = vec![if engine.now() == engine.last_snapshot().time {
        csv(&engine)
    } else {
        String::new()
    }];
    let mut events = Vec::new();
    for p in pts {
        events.extend(engine.process_point(p).expect("process"));
        if engine.at_boundary() {
            snapshots.push(engine.last_snapshot().clone());
            snapshot_csv.push(csv(&engine));
        }
    }
    Run {
        engine,
        snapshots,
        snapshot_csv,
        events,
    }
}

pub fn fmt_kinds(seq: &[(EventKind, f64)]) -> String {
    seq.iter()
        .map(|(k, t)| format!("{k}@{t:.1}"))
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------
// Randomized engine cases

#[derive(Debug, Clone)]
pub struct StreamCase {
    pub seed: u64,
    pub n: usize,
    pub blobs: usize,
    pub spread: f64,
    pub a: f64,
    /// Position of β inside its legal range.
    pub beta_frac: f64,
    pub r: f64,
    pub sweep: u64,
    pub recycle: bool,
    pub filters: FilterMode,
    pub tau: f64,
}

pub fn stream_case() -> impl Strategy<Value = StreamCase> {
    (
        any::<u64>(),
        60usize..220,
        1usize..5,
        0.2f64..2.0,
        0.3f64..0.99,
        0.0f64..0.3,
        0.3f64..2.0,
        prop_oneof![Just(7u64), Just(25), Just(60)],
        any::<bool>(),
        prop_oneof![Just(FilterMode::Both), Just(FilterMode::DensityOnly), Just(FilterMode::Off)],
        0.5f64..6.0,
    )
        .prop_map(
            |(seed, n, blobs, spread, a, beta_frac, r, sweep, recycle, filters, tau)| StreamCase {
                seed,
                n,
                blobs,
                spread,
                a,
                beta_frac,
                r,
                sweep,
                recycle,
                filters,
                tau,
            },
        )
}

impl StreamCase {
    /// Points around a few random centers in a 10×10 box, 100 points/s.
    pub fn points(&self) -> Vec<StreamPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let centers: Vec<[f64; 2]> = (0..self.blobs)
            .map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)])
            .collect();
        let g = Normal::new(0.0, self.spread).unwrap();
        (0..self.n)
            .map(|k| {
                let c = centers[rng.random_range(0..centers.len())];
                let coords = vec![c[0] + g.sample(&mut rng), c[1] + g.sample(&mut rng)];
                StreamPoint::new(coords, k as f64 / 100.0)
            })
            .collect()
    }

    pub fn config(&self) -> EngineConfig {
        let v = 100.0;
        let lo = (1.0 - self.a) / v;
        // keep the threshold low enough that cells do activate
        let beta = lo + (lo * 4.0 - lo) * self.beta_frac + 1e-9;
        EngineConfig {
            decay: DecayParams::new(self.a, 1.0, v, beta).unwrap(),
            r: self.r,
            tau0: Some(self.tau),
            alpha: Some(0.3),
            init_cell_count: 2,
            sweep_interval: self.sweep,
            recycle: self.recycle,
            filters: self.filters,
            ..EngineConfig::default()
        }
    }

    /// Engine over the first 10 points, or `None` when they form a single
    /// cell.
    pub fn engine(&self, config: EngineConfig) -> Option<(Engine, Vec<StreamPoint>)> {
        let pts = self.points();
        match Engine::initialize(config, &pts[..10]) {
            Ok((e, _)) => Some((e, pts[10..].to_vec())),
            Err(Error::Init(_)) => None,
            Err(e) => panic!("unexpected initialization error {e}"),
        }
    }
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

/// Forest, partition, and clusters equal a from-scratch recomputation.
pub fn check_against_oracle(e: &Engine) -> Result<(), String> {
    let store = e.store();
    let active: Vec<&ClusterCell> = store.iter().filter(|c| c.is_active()).collect();
    let forest = oracle::recompute_all(active.iter().copied(), store.metric());
    if forest.len() != e.tree().len() {
        return Err(format!("{} active cells, forest of {}", forest.len(), e.tree().len()));
    }
    for (id, (dep, delta)) in &forest {
        let c = store.get(*id).map_err(|e| e.to_string())?;
        if (c.dep, c.delta) != (*dep, *delta) {
            return Err(format!(
                "cell {id}: incremental ({:?}, {}) vs oracle ({dep:?}, {delta})",
                c.dep, c.delta
            ));
        }
    }
    Ok(())
}

/// Active/inactive split equals threshold re-evaluation, right after a sweep.
pub fn check_partition(e: &Engine) -> Result<(), String> {
    let store = e.store();
    let thr = store.params().active_threshold();
    for c in store.iter() {
        let rho = store.cell_density_at(c.id, e.now()).map_err(|e| e.to_string())?;
        if c.is_active() != (rho >= thr) {
            return Err(format!("cell {} active={} with density {rho} vs {thr}", c.id, c.is_active()));
        }
    }
    Ok(())
}

/// Snapshot equals the clusters of the recomputed forest under a recomputed
/// threshold.
pub fn check_snapshot(e: &Engine) -> Result<(), String> {
    let store = e.store();
    let active: Vec<&ClusterCell> = store.iter().filter(|c| c.is_active()).collect();
    let forest = oracle::recompute_all(active.iter().copied(), store.metric());
    let mut order: Vec<&ClusterCell> = active.clone();
    order.sort_by(|x, y| y.weight().total_cmp(&x.weight()).then(x.id.cmp(&y.id)));
    let order: Vec<CellId> = order.iter().map(|c| c.id).collect();
    let deltas: Vec<f64> = forest.values().map(|&(_, d)| d).filter(|d| d.is_finite()).collect();
    let ts = e.tau_state();
    let tau = if ts.adaptive {
        tauctl::select_tau(ts.alpha, &deltas).unwrap_or(e.last_snapshot().tau)
    } else {
        ts.tau0
    };
    if tau != e.tau() {
        return Err(format!("threshold {} vs recomputed {tau}", e.tau()));
    }
    let clusters = oracle::clusters_from_forest(&forest, &order, tau);
    if clusters != e.last_snapshot().clusters {
        return Err(format!(
            "snapshot clusters {:?} vs oracle {:?}",
            e.last_snapshot().clusters,
            clusters
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Property suites

pub const PROPERTIES: [&str; 5] = [
    "delta monotonicity under density increase",
    "nearest-denser dependency",
    "state-machine exclusivity",
    "diff count consistency",
    "objective scale invariance",
];

pub fn run_property(name: &str, cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let out = match name {
        "delta monotonicity under density increase" => runner.run(&stream_case(), delta_monotone).map_err(|e| e.to_string()),
        "nearest-denser dependency" => runner.run(&stream_case(), nearest_denser).map_err(|e| e.to_string()),
        "state-machine exclusivity" => runner.run(&stream_case(), exclusivity).map_err(|e| e.to_string()),
        "diff count consistency" => runner.run(&partition_pair(), count_consistency).map_err(|e| e.to_string()),
        "objective scale invariance" => runner.run(&scaled_deltas(), scale_invariance).map_err(|e| e.to_string()),
        _ => return Err(format!("unknown property {name}")),
    };
    out
}

/// Between sweeps, an absorption never lengthens another cell's dependency
/// and never shortens the absorbing cell's.
pub fn delta_monotone(case: StreamCase) -> Result<(), TestCaseError> {
    let mut cfg = case.config();
    cfg.sweep_interval = u64::MAX;
    let Some((mut e, rest)) = case.engine(cfg) else {
        return Ok(());
    };
    for p in &rest {
        let before: Vec<(CellId, f64, f64)> = e
            .store()
            .iter()
            .filter(|c| c.is_active())
            .map(|c| (c.id, c.delta, c.weight()))
            .collect();
        e.process_point(p).map_err(|err| fail(err.to_string()))?;
        for (id, delta, w) in before {
            let c = e.store().get(id).map_err(|err| fail(err.to_string()))?;
            if !c.is_active() {
                continue;
            }
            if c.weight() != w {
                prop_assert!(c.delta >= delta, "absorbing cell {id}: δ {delta} -> {}", c.delta);
            } else {
                prop_assert!(c.delta <= delta, "cell {id}: δ {delta} -> {}", c.delta);
            }
        }
    }
    Ok(())
}

/// After every point each active cell depends on its nearest strictly
/// denser active cell.
pub fn nearest_denser(case: StreamCase) -> Result<(), TestCaseError> {
    let Some((mut e, rest)) = case.engine(case.config()) else {
        return Ok(());
    };
    for p in &rest {
        e.process_point(p).map_err(|err| fail(err.to_string()))?;
        check_against_oracle(&e).map_err(fail)?;
    }
    Ok(())
}

/// Every cell is in exactly one of forest and reservoir, and each boundary's
/// events account for the change in cluster count.
pub fn exclusivity(case: StreamCase) -> Result<(), TestCaseError> {
    let Some((mut e, rest)) = case.engine(case.config()) else {
        return Ok(());
    };
    let mut count = e.last_snapshot().clusters.len() as i64;
    for p in &rest {
        let events = e.process_point(p).map_err(|err| fail(err.to_string()))?;
        e.check_invariants().map_err(|err| fail(err.to_string()))?;
        if e.at_boundary() {
            count += events.iter().map(|ev| ev.arity_delta()).sum::<i64>();
            prop_assert_eq!(count, e.last_snapshot().clusters.len() as i64);
        }
    }
    Ok(())
}

fn snapshot_from(labels: &[Option<u8>], time: f64) -> ClusterSnapshot {
    let mut groups: std::collections::BTreeMap<u8, Vec<CellId>> = Default::default();
    let mut outliers = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(g) => groups.entry(*g).or_default().push(CellId(i as u64)),
            None => outliers.push(CellId(i as u64)),
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .map(|members| Cluster {
            id: members[members.len() / 2],
            members,
        })
        .collect();
    clusters.sort_by_key(|c| c.id);
    ClusterSnapshot {
        time,
        tau: 1.0,
        clusters,
        outlier_cells: outliers,
        engine_id: 1,
    }
}

pub fn partition_pair() -> impl Strategy<Value = (Vec<Option<u8>>, Vec<Option<u8>>)> {
    (1usize..30).prop_flat_map(|n| {
        let label = proptest::option::weighted(0.8, 0u8..6);
        (
            proptest::collection::vec(label.clone(), n),
            proptest::collection::vec(label, n),
        )
    })
}

/// Applying each event's arity change to the old count gives the new count.
pub fn count_consistency(pair: (Vec<Option<u8>>, Vec<Option<u8>>)) -> Result<(), TestCaseError> {
    let prev = snapshot_from(&pair.0, 1.0);
    let next = snapshot_from(&pair.1, 2.0);
    let events = evolution::diff_snapshots(&prev, &next).map_err(|err| fail(err.to_string()))?;
    let delta: i64 = events.iter().map(|e| e.arity_delta()).sum();
    prop_assert_eq!(prev.clusters.len() as i64 + delta, next.clusters.len() as i64, "{:?}", events);
    for e in &events {
        match e.kind {
            EventKind::Split => prop_assert!(e.old_ids.len() == 1 && e.new_ids.len() >= 2),
            EventKind::Merge => prop_assert!(e.old_ids.len() >= 2 && e.new_ids.len() == 1),
            EventKind::Emerge => prop_assert!(e.old_ids.is_empty()),
            EventKind::Disappear => prop_assert!(e.new_ids.is_empty()),
            EventKind::Adjust => prop_assert!(e.adjust_kind.is_some()),
        }
    }
    Ok(())
}

pub fn scaled_deltas() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    (
        proptest::collection::vec(0.01f64..100.0, 3..30),
        0.01f64..0.99,
        0.01f64..100.0,
    )
}

/// Scaling every delta by `k` scales the objective's argument and leaves
/// its value and the chosen partition unchanged.
pub fn scale_invariance((deltas, alpha, k): (Vec<f64>, f64, f64)) -> Result<(), TestCaseError> {
    let scaled: Vec<f64> = deltas.iter().map(|d| d * k).collect();
    let cands = tauctl::candidates(&deltas);
    let mut scores = Vec::new();
    for &tau in &cands {
        let f = tauctl::objective(alpha, tau, &deltas).map_err(|err| fail(err.to_string()))?;
        let g = tauctl::objective(alpha, tau * k, &scaled).map_err(|err| fail(err.to_string()))?;
        prop_assert!((f - g).abs() <= 1e-9 * f.abs(), "F {f} vs scaled {g} at tau {tau}");
        scores.push(f);
    }
    let Some(tau) = tauctl::select_tau(alpha, &deltas) else {
        return Ok(());
    };
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let near_tie = scores.iter().filter(|&&f| f - best <= 1e-9 * best).count() > 1;
    if near_tie {
        return Ok(());
    }
    let chosen = tauctl::select_tau(alpha, &scaled).expect("same candidates");
    let side = |t: f64, ds: &[f64]| ds.iter().filter(|&&d| d <= t).count();
    prop_assert_eq!(side(tau, &deltas), side(chosen, &scaled));
    Ok(())
}
