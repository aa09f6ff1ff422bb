//! The streaming pipeline: assignment, dependency maintenance, activation and
//! decay transitions, recycling, threshold control, and evolution tracking.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cellspace::{AssignKind, CellId, CellStore, StreamPoint};
use crate::config::EngineConfig;
use crate::decay::Timestamp;
use crate::dptree::{ClusterSnapshot, DpTree, TreeStats};
use crate::error::{Error, Result};
use crate::evolution::{diff_snapshots, EventLog, EvolutionEvent};
use crate::oracle;
use crate::reservoir::{Activation, OutlierReservoir};
use crate::tauctl::{self, DecisionGraphPoint, TauState};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub points: u64,
    pub new_cells: u64,
    pub absorbed_active: u64,
    pub absorbed_inactive: u64,
    pub activations: u64,
    pub deactivations: u64,
    pub recycled: u64,
    pub sweeps: u64,
    pub tau_changes: u64,
    pub assignment_distance_evals: u64,
    pub dependency: TreeStats,
    pub max_active: u64,
    pub max_reservoir: u64,
}

impl Counters {
    /// `(name, value)` pairs in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, u64)> {
        let d = &self.dependency;
        vec![
            ("points", self.points),
            ("new_cells", self.new_cells),
            ("absorbed_active", self.absorbed_active),
            ("absorbed_inactive", self.absorbed_inactive),
            ("activations", self.activations),
            ("deactivations", self.deactivations),
            ("recycled", self.recycled),
            ("sweeps", self.sweeps),
            ("tau_changes", self.tau_changes),
            ("assignment_distance_evals", self.assignment_distance_evals),
            ("dependency_distance_evals", d.distance_evals),
            ("density_filter_skips", d.density_skips),
            ("triangle_filter_skips", d.triangle_skips),
            ("relinks", d.relinks),
            ("dependency_updates", d.updates),
            ("max_active", self.max_active),
            ("max_reservoir", self.max_reservoir),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Engine {
    config: EngineConfig,
    engine_id: u64,
    store: CellStore,
    #[serde(skip)]
    tree: DpTree,
    reservoir: OutlierReservoir,
    tau: TauState,
    log: EventLog,
    last_snapshot: ClusterSnapshot,
    counters: Counters,
    now: Timestamp,
    #[serde(skip)]
    boundary_hit: bool,
}

impl Engine {
    /// Builds the initial state from a buffer of points.
    ///
    /// Cells whose density reaches the activation threshold form the initial
    /// forest, the rest wait in the reservoir. `α` is learned from `τ⁰`
    /// unless the configuration fixes it. Returns the engine and the decision
    /// graph of the initial forest.
    pub fn initialize(
        config: EngineConfig,
        buffer: &[StreamPoint],
    ) -> Result<(Engine, Vec<DecisionGraphPoint>)> {
        config.validate()?;
        let tau0 = config
            .tau0
            .ok_or_else(|| Error::InvalidParam("tau0 is required".into()))?;
        let mut store = CellStore::new(config.decay, config.r)?
            .with_metric(config.metric)
            .with_time_order(config.time_order)
            .with_grid_index(config.grid_index)
            .with_random_ties(config.random_ties.then_some(config.seed));
        for p in buffer {
            store.assign_point(p)?;
        }
        if store.len() < config.init_cell_count {
            return Err(Error::Init(format!(
                "buffer of {} points yields {} cells, {} needed",
                buffer.len(),
                store.len(),
                config.init_cell_count
            )));
        }
        let now = store.last_time().unwrap_or(0.0);
        let threshold = config.decay.active_threshold();
        let mut reservoir = OutlierReservoir::new();
        let ids: Vec<(CellId, Timestamp)> = store.iter().map(|c| (c.id, c.t_last)).collect();
        for (id, t_last) in ids {
            if store.density(id, now) >= threshold {
                store.cell_mut(id).state = crate::cellspace::CellState::Active;
            } else {
                reservoir.put(id, t_last);
            }
        }
        let forest = oracle::recompute_all(store.iter().filter(|c| c.is_active()), config.metric);
        for (&id, &(dep, delta)) in &forest {
            let c = store.cell_mut(id);
            c.dep = dep;
            c.delta = delta;
        }
        let tree = DpTree::from_store(&store, config.filters);
        let graph = tauctl::decision_graph(&store, &tree, now);

        let engine_id = config.fingerprint();
        let mut engine = Engine {
            engine_id,
            store,
            tree,
            reservoir,
            tau: TauState::new(0.5, tau0, config.adaptive_tau)?,
            log: EventLog::new(),
            last_snapshot: ClusterSnapshot {
                time: now,
                tau: tau0,
                clusters: Vec::new(),
                outlier_cells: Vec::new(),
                engine_id,
            },
            counters: Counters::default(),
            now,
            boundary_hit: false,
            config,
        };
        let alpha = match engine.config.alpha {
            Some(a) => a,
            None => tauctl::learn_alpha(&engine.tau_deltas(), tau0)?,
        };
        engine.tau = TauState::new(alpha, tau0, engine.config.adaptive_tau)?;
        engine.last_snapshot = engine.extract(now)?;
        engine.counters.points = engine.store.points_seen();
        engine.counters.new_cells = engine.store.len() as u64;
        engine.track_sizes();
        Ok((engine, graph))
    }

    /// Ingests one point and returns the evolution events it completed.
    /// Events are only produced when the point closes a sweep interval.
    pub fn process_point(&mut self, p: &StreamPoint) -> Result<Vec<EvolutionEvent>> {
        self.boundary_hit = false;
        let t = self.store.admit_time(p.t)?;
        if let Some(factor) = self.store.rebase_if_needed(t) {
            self.tree.rescale(factor);
        }
        let res = self.store.assign_point(p)?;
        self.counters.points += 1;
        self.now = t;
        match res.kind {
            AssignKind::NewCellCreated(id) => {
                self.reservoir.put(id, t);
                self.counters.new_cells += 1;
            }
            AssignKind::AbsorbedByExisting(id) if self.tree.contains(id) => {
                self.tree.on_density_increase(&mut self.store, id, res.prior_weight)?;
                self.counters.absorbed_active += 1;
            }
            AssignKind::AbsorbedByExisting(id) => {
                self.counters.absorbed_inactive += 1;
                self.reservoir.touch(id, t)?;
                if let Activation::Activated(_) =
                    self.reservoir.try_activate(&mut self.store, &mut self.tree, id, t)?
                {
                    self.counters.activations += 1;
                }
            }
        }
        self.track_sizes();
        if self.store.points_seen().is_multiple_of(self.config.sweep_interval) {
            return self.boundary(t);
        }
        Ok(Vec::new())
    }

    /// Sweep, recycle, reselect `τ`, and diff against the previous boundary.
    fn boundary(&mut self, t: Timestamp) -> Result<Vec<EvolutionEvent>> {
        self.sweep(t)?;
        if self.config.recycle {
            let gone = self.reservoir.recycle(&mut self.store, t)?;
            self.counters.recycled += gone.len() as u64;
        }
        if self.tau.reselect(&self.tau_deltas()).is_some() {
            self.counters.tau_changes += 1;
        }
        let snap = self.extract(t)?;
        let events = diff_snapshots(&self.last_snapshot, &snap)?;
        self.log.extend(events.iter().cloned())?;
        self.last_snapshot = snap;
        self.boundary_hit = true;
        Ok(events)
    }

    fn sweep(&mut self, t: Timestamp) -> Result<()> {
        let moved = self
            .reservoir
            .deactivate_sweep(&mut self.store, &mut self.tree, t)?;
        self.counters.deactivations += moved.iter().map(|s| s.len() as u64).sum::<u64>();
        self.counters.sweeps += 1;
        Ok(())
    }

    fn extract(&self, t: Timestamp) -> Result<ClusterSnapshot> {
        let mut snap = self.tree.extract_clusters(&self.store, self.tau.tau, t)?;
        snap.engine_id = self.engine_id;
        Ok(snap)
    }

    fn track_sizes(&mut self) {
        self.counters.max_active = self.counters.max_active.max(self.tree.len() as u64);
        self.counters.max_reservoir = self.counters.max_reservoir.max(self.reservoir.len() as u64);
    }

    /// Current clustering: sweeps at the current time, then cuts the forest
    /// with the current `τ`. Does not touch the event log.
    pub fn snapshot(&mut self) -> Result<ClusterSnapshot> {
        let t = self.now;
        self.sweep(t)?;
        self.extract(t)
    }

    /// Finite dependent distances of active cells, fed to the threshold
    /// objective. The peak's sentinel is left out.
    pub fn tau_deltas(&self) -> Vec<f64> {
        self.tree
            .densest_first()
            .map(|id| self.store.cell(id).delta)
            .filter(|d| d.is_finite())
            .collect()
    }

    pub fn decision_graph(&self) -> Vec<DecisionGraphPoint> {
        tauctl::decision_graph(&self.store, &self.tree, self.now)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn engine_id(&self) -> u64 {
        self.engine_id
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn tau(&self) -> f64 {
        self.tau.tau
    }

    pub fn alpha(&self) -> f64 {
        self.tau.alpha
    }

    pub fn tau_state(&self) -> &TauState {
        &self.tau
    }

    pub fn store(&self) -> &CellStore {
        &self.store
    }

    pub fn tree(&self) -> &DpTree {
        &self.tree
    }

    pub fn reservoir(&self) -> &OutlierReservoir {
        &self.reservoir
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// Snapshot taken at the most recent sweep boundary (or initialization).
    pub fn last_snapshot(&self) -> &ClusterSnapshot {
        &self.last_snapshot
    }

    /// Whether the last processed point closed a sweep interval.
    pub fn at_boundary(&self) -> bool {
        self.boundary_hit
    }

    pub fn counters(&self) -> Counters {
        let mut c = self.counters;
        c.dependency = self.tree.stats;
        c.assignment_distance_evals = self.store.assignment_distance_evals;
        c
    }

    /// Switches filter mode for subsequent updates.
    pub fn set_filters(&mut self, filters: crate::dptree::FilterMode) {
        self.config.filters = filters;
        self.tree.set_filters(filters);
    }

    pub fn set_recycle(&mut self, on: bool) {
        self.config.recycle = on;
    }

    /// Switches between adaptive and fixed `τ`. This changes clustering
    /// output, so the engine id changes with it.
    pub fn set_adaptive_tau(&mut self, on: bool) {
        self.config.adaptive_tau = on;
        self.tau.adaptive = on;
        if !on {
            self.tau.tau = self.tau.tau0;
        }
        self.engine_id = self.config.fingerprint();
        self.last_snapshot.engine_id = self.engine_id;
        self.last_snapshot.tau = self.tau.tau;
    }

    pub fn set_grid_index(&mut self, on: bool) {
        self.config.grid_index = on;
        self.store.set_grid_index(on);
    }

    /// Checks that every cell sits in exactly one place and the forest is
    /// well formed.
    pub fn check_invariants(&self) -> Result<()> {
        self.tree.check_consistency(&self.store)?;
        for c in self.store.iter() {
            let in_tree = self.tree.contains(c.id);
            let in_res = self.reservoir.contains(c.id);
            if in_tree == in_res || in_tree != c.is_active() {
                return Err(Error::State(c.id, "cell is not in exactly one of forest and reservoir"));
            }
        }
        if self.reservoir.len() + self.tree.len() != self.store.len() {
            return Err(Error::Precondition("reservoir holds unknown cells".into()));
        }
        Ok(())
    }

    /// Full state as JSON. The forest is rebuilt on load, so its counters
    /// are folded into the saved ones.
    pub fn to_json(&self) -> Result<String> {
        let mut state = self.clone();
        state.counters = self.counters();
        Ok(serde_json::to_string(&state)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Engine> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Engine> {
        let mut e: Engine = serde_json::from_str(text)?;
        e.config.validate()?;
        e.store.rebuild_index();
        e.tree = DpTree::from_store(&e.store, e.config.filters);
        e.tree.stats = e.counters.dependency;
        e.check_invariants()?;
        Ok(e)
    }
}
