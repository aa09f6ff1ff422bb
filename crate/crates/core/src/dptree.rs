//! Dependency forest over active cells.
//!
//! Every active cell points at its nearest strictly denser active cell. Cutting
//! the links longer than `τ` leaves a set of subtrees; each one is a cluster
//! whose root is the cluster center.
//!
//! Densities are compared through landmark-relative weights (see
//! [`crate::decay::DecayClock`]), so the density order only changes when a
//! cell absorbs a point, enters the forest, or leaves it.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::ops::Bound::{Excluded, Unbounded};

use serde::{Deserialize, Serialize};

use crate::cellspace::{CellId, CellState, CellStore, Metric};
use crate::decay::Timestamp;
use crate::error::{Error, Result};

/// Position of a cell in the density order: denser first, then smaller id.
#[derive(Debug, Clone, Copy)]
pub struct OrderKey {
    pub weight: f64,
    pub id: CellId,
}

impl PartialEq for OrderKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OrderKey {}

impl PartialOrd for OrderKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderKey {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .weight
            .total_cmp(&self.weight)
            .then(self.id.cmp(&other.id))
    }
}

impl OrderKey {
    /// True when `self` ranks strictly denser than `other`.
    pub fn denser_than(&self, other: &OrderKey) -> bool {
        self < other
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Density band and triangle filter.
    #[default]
    Both,
    DensityOnly,
    /// Check every cell less dense than the updated one.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterVerdict {
    SkipUpdate,
    MustCheck,
}

/// Work counters for dependency maintenance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub distance_evals: u64,
    pub density_skips: u64,
    pub triangle_skips: u64,
    pub relinks: u64,
    pub updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelinkRecord {
    pub cell: CellId,
    pub old_dep: Option<CellId>,
    pub new_dep: Option<CellId>,
    pub old_delta: f64,
    pub new_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Root cell of the subtree.
    pub id: CellId,
    /// Sorted member ids, root included.
    pub members: Vec<CellId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    pub time: Timestamp,
    pub tau: f64,
    /// Sorted by root id.
    pub clusters: Vec<Cluster>,
    /// Sorted ids of inactive cells.
    pub outlier_cells: Vec<CellId>,
    /// Fingerprint of the engine configuration that produced the snapshot.
    #[serde(default)]
    pub engine_id: u64,
}

impl ClusterSnapshot {
    pub fn active_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    /// Cluster id for every active cell.
    pub fn membership(&self) -> HashMap<CellId, CellId> {
        self.clusters
            .iter()
            .flat_map(|c| c.members.iter().map(move |&m| (m, c.id)))
            .collect()
    }

    /// Clusters with at least `min_size` member cells.
    pub fn significant(&self, min_size: usize) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |c| c.members.len() >= min_size)
    }
}

/// Skip test from the density order alone.
///
/// `c` can only start depending on `c'` if it was at least as dense as `c'`
/// before the absorption and is strictly less dense after it.
pub fn density_filter(
    c_before: OrderKey,
    c_prime_before: OrderKey,
    c_after: OrderKey,
    c_prime_after: OrderKey,
) -> FilterVerdict {
    if c_prime_before.denser_than(&c_before) || c_after.denser_than(&c_prime_after) {
        FilterVerdict::SkipUpdate
    } else {
        FilterVerdict::MustCheck
    }
}

/// Skip test from the point distances measured during assignment.
///
/// If `||p,s_c| − |p,s_c'|| > δ_c` then `|s_c,s_c'| > δ_c` and `c'` cannot
/// become the nearer denser cell. A relative margin of `1e-12` guards against
/// rounding in the three distances.
pub fn triangle_filter(dist_p_c: f64, dist_p_c_prime: f64, delta_c: f64) -> FilterVerdict {
    let gap = (dist_p_c - dist_p_c_prime).abs();
    if gap > delta_c * (1.0 + 1e-12) + 1e-12 {
        FilterVerdict::SkipUpdate
    } else {
        FilterVerdict::MustCheck
    }
}

/// Returns true if a cell whose dependency is (`dep`, `delta`) should switch
/// to `cand` at distance `dist`. Equal distances go to the smaller id.
fn better(dist: f64, cand: CellId, dep: Option<CellId>, delta: f64) -> bool {
    match dep {
        None => true,
        Some(d) => dist < delta || (dist == delta && cand < d),
    }
}

#[derive(Debug, Clone, Default)]
pub struct DpTree {
    order: BTreeSet<OrderKey>,
    weights: HashMap<CellId, f64>,
    children: HashMap<CellId, BTreeSet<CellId>>,
    filters: FilterMode,
    pub stats: TreeStats,
}

impl DpTree {
    pub fn new(filters: FilterMode) -> Self {
        DpTree {
            filters,
            ..Default::default()
        }
    }

    /// Rebuilds the index from the `dep` links stored in the cells.
    pub fn from_store(store: &CellStore, filters: FilterMode) -> Self {
        let mut tree = DpTree::new(filters);
        for c in store.iter().filter(|c| c.is_active()) {
            tree.order.insert(OrderKey {
                weight: c.weight(),
                id: c.id,
            });
            tree.weights.insert(c.id, c.weight());
            if let Some(p) = c.dep {
                tree.children.entry(p).or_default().insert(c.id);
            }
        }
        tree
    }

    pub fn filters(&self) -> FilterMode {
        self.filters
    }

    pub fn set_filters(&mut self, filters: FilterMode) {
        self.filters = filters;
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: CellId) -> bool {
        self.weights.contains_key(&id)
    }

    pub fn key(&self, id: CellId) -> Option<OrderKey> {
        self.weights.get(&id).map(|&weight| OrderKey { weight, id })
    }

    /// Active cells from densest to least dense.
    pub fn densest_first(&self) -> impl DoubleEndedIterator<Item = CellId> + '_ {
        self.order.iter().map(|k| k.id)
    }

    pub fn children(&self, id: CellId) -> impl Iterator<Item = CellId> + '_ {
        self.children.get(&id).into_iter().flatten().copied()
    }

    /// The densest active cell.
    pub fn peak(&self) -> Option<CellId> {
        self.order.first().map(|k| k.id)
    }

    /// Multiplies every stored weight by `factor` (a power of two, so the
    /// order is preserved exactly).
    pub fn rescale(&mut self, factor: f64) {
        let keys: Vec<OrderKey> = std::mem::take(&mut self.order).into_iter().collect();
        for k in keys {
            let w = k.weight * factor;
            self.order.insert(OrderKey { weight: w, id: k.id });
            self.weights.insert(k.id, w);
        }
    }

    fn triangle_enabled(&self, store: &CellStore) -> bool {
        self.filters == FilterMode::Both && store.metric().is_metric()
    }

    fn nearest_in<I: Iterator<Item = CellId>>(
        &mut self,
        store: &CellStore,
        c: CellId,
        candidates: I,
    ) -> (Option<CellId>, f64) {
        let mut dep = None;
        let mut delta = f64::INFINITY;
        for e in candidates {
            let d = store.seed_distance(c, e);
            self.stats.distance_evals += 1;
            if better(d, e, dep, delta) {
                dep = Some(e);
                delta = d;
            }
        }
        (dep, delta)
    }

    /// Nearest strictly denser active cell of `c`, or `(None, +∞)` for the
    /// densest cell.
    pub fn compute_dependency(
        &mut self,
        store: &CellStore,
        c: CellId,
    ) -> Result<(Option<CellId>, f64)> {
        let key = self
            .key(c)
            .ok_or(Error::State(c, "compute_dependency on a cell outside the forest"))?;
        let denser: Vec<CellId> = self.order.range(..key).map(|k| k.id).collect();
        Ok(self.nearest_in(store, c, denser.into_iter()))
    }

    fn set_dep(
        &mut self,
        store: &mut CellStore,
        c: CellId,
        dep: Option<CellId>,
        delta: f64,
    ) -> Option<RelinkRecord> {
        let cell = store.cell_mut(c);
        let (old_dep, old_delta) = (cell.dep, cell.delta);
        if old_dep == dep && old_delta == delta {
            return None;
        }
        cell.dep = dep;
        cell.delta = delta;
        if old_dep != dep {
            if let Some(p) = old_dep {
                if let Some(set) = self.children.get_mut(&p) {
                    set.remove(&c);
                    if set.is_empty() {
                        self.children.remove(&p);
                    }
                }
            }
            if let Some(p) = dep {
                self.children.entry(p).or_default().insert(c);
            }
        }
        self.stats.relinks += 1;
        Some(RelinkRecord {
            cell: c,
            old_dep,
            new_dep: dep,
            old_delta,
            new_delta: delta,
        })
    }

    /// Lets each candidate cell switch to `c` when `c` is nearer than its
    /// current dependency. `c` must already rank denser than every candidate.
    fn offer(
        &mut self,
        store: &mut CellStore,
        c: CellId,
        candidates: Vec<CellId>,
        out: &mut Vec<RelinkRecord>,
    ) {
        let triangle = self.triangle_enabled(store);
        let p_c = if triangle {
            store.last_point_distance(c)
        } else {
            None
        };
        for d in candidates {
            let (dep, delta) = {
                let cell = store.cell(d);
                (cell.dep, cell.delta)
            };
            if dep == Some(c) {
                continue;
            }
            if let (Some(pc), Some(pd)) = (p_c, store.last_point_distance(d)) {
                if triangle_filter(pd, pc, delta) == FilterVerdict::SkipUpdate {
                    self.stats.triangle_skips += 1;
                    continue;
                }
            }
            let dist = store.seed_distance(d, c);
            self.stats.distance_evals += 1;
            if better(dist, c, dep, delta) {
                out.extend(self.set_dep(store, d, Some(c), dist));
            }
        }
    }

    /// Updates the forest after active cell `c_prime` absorbed a point.
    ///
    /// `prior_weight` is the cell's weight before the absorption; the store
    /// already holds the new weight.
    pub fn on_density_increase(
        &mut self,
        store: &mut CellStore,
        c_prime: CellId,
        prior_weight: f64,
    ) -> Result<Vec<RelinkRecord>> {
        let old_key = self
            .key(c_prime)
            .ok_or(Error::State(c_prime, "density update on a cell outside the forest"))?;
        debug_assert_eq!(old_key.weight, prior_weight);
        let new_key = OrderKey {
            weight: store.weight(c_prime),
            id: c_prime,
        };
        self.order.remove(&old_key);
        self.order.insert(new_key);
        self.weights.insert(c_prime, new_key.weight);
        self.stats.updates += 1;

        // cells that were denser than c' and no longer are
        let flipped: Vec<CellId> = self
            .order
            .range((Excluded(new_key), Excluded(old_key)))
            .map(|k| k.id)
            .collect();

        let candidates: Vec<CellId> = match self.filters {
            FilterMode::Off => self
                .order
                .range((Excluded(new_key), Unbounded))
                .map(|k| k.id)
                .collect(),
            _ => {
                let others = self.order.len() - 1 - flipped.len();
                self.stats.density_skips += others as u64;
                flipped.clone()
            }
        };

        let mut out = Vec::new();
        self.offer(store, c_prime, candidates, &mut out);

        let parent_flipped = match store.cell(c_prime).dep {
            Some(p) => flipped.contains(&p),
            None => false,
        };
        if parent_flipped || self.filters == FilterMode::Off {
            let (dep, delta) = self.compute_dependency(store, c_prime)?;
            out.extend(self.set_dep(store, c_prime, dep, delta));
        }
        Ok(out)
    }

    /// Adds an activated cell to the forest.
    pub fn insert_active(&mut self, store: &mut CellStore, c: CellId) -> Result<Vec<RelinkRecord>> {
        if self.contains(c) {
            return Err(Error::State(c, "cell is already in the forest"));
        }
        let key = OrderKey {
            weight: store.get(c)?.weight(),
            id: c,
        };
        {
            let cell = store.cell_mut(c);
            cell.state = CellState::Active;
            cell.dep = None;
            cell.delta = f64::INFINITY;
        }
        self.order.insert(key);
        self.weights.insert(c, key.weight);

        let mut out = Vec::new();
        let (dep, delta) = self.compute_dependency(store, c)?;
        if let Some(r) = self.set_dep(store, c, dep, delta) {
            out.push(r);
        } else {
            out.push(RelinkRecord {
                cell: c,
                old_dep: None,
                new_dep: None,
                old_delta: f64::INFINITY,
                new_delta: f64::INFINITY,
            });
        }
        let below: Vec<CellId> = self
            .order
            .range((Excluded(key), Unbounded))
            .map(|k| k.id)
            .collect();
        self.offer(store, c, below, &mut out);
        Ok(out)
    }

    /// Detaches `c` and all its descendants; returns them in BFS order.
    /// The links of the remaining cells are left as they are.
    pub fn remove_subtree(&mut self, store: &mut CellStore, c: CellId) -> Result<Vec<CellId>> {
        if !self.contains(c) {
            return Err(Error::State(c, "remove_subtree on a cell outside the forest"));
        }
        if let Some(p) = store.cell(c).dep {
            if let Some(set) = self.children.get_mut(&p) {
                set.remove(&c);
                if set.is_empty() {
                    self.children.remove(&p);
                }
            }
        }
        let mut removed = Vec::new();
        let mut queue = VecDeque::from([c]);
        while let Some(x) = queue.pop_front() {
            if let Some(kids) = self.children.remove(&x) {
                queue.extend(kids);
            }
            let w = self.weights.remove(&x).expect("forest member");
            self.order.remove(&OrderKey { weight: w, id: x });
            let cell = store.cell_mut(x);
            cell.state = CellState::Inactive;
            cell.dep = None;
            cell.delta = f64::INFINITY;
            removed.push(x);
        }
        Ok(removed)
    }

    /// Cuts every link longer than `tau` and returns the resulting subtrees.
    pub fn extract_clusters(
        &self,
        store: &CellStore,
        tau: f64,
        t: Timestamp,
    ) -> Result<ClusterSnapshot> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::InvalidParam(format!("tau {tau} must be > 0")));
        }
        let mut cluster_of: HashMap<CellId, CellId> = HashMap::with_capacity(self.len());
        let mut members: HashMap<CellId, Vec<CellId>> = HashMap::new();
        for id in self.densest_first() {
            let cell = store.cell(id);
            let root = match cell.dep {
                Some(p) if cell.delta <= tau => cluster_of[&p],
                _ => id,
            };
            cluster_of.insert(id, root);
            members.entry(root).or_default().push(id);
        }
        let mut clusters: Vec<Cluster> = members
            .into_iter()
            .map(|(id, mut members)| {
                members.sort_unstable();
                Cluster { id, members }
            })
            .collect();
        clusters.sort_unstable_by_key(|c| c.id);
        let mut outlier_cells: Vec<CellId> = store
            .iter()
            .filter(|c| !c.is_active())
            .map(|c| c.id)
            .collect();
        outlier_cells.sort_unstable();
        Ok(ClusterSnapshot {
            time: t,
            tau,
            clusters,
            outlier_cells,
            engine_id: 0,
        })
    }

    /// Checks the structural invariants; used by tests and debug assertions.
    pub fn check_consistency(&self, store: &CellStore) -> Result<()> {
        let fail = |m: String| Err(Error::Precondition(m));
        let active = store.iter().filter(|c| c.is_active()).count();
        if active != self.len() {
            return fail(format!("{active} active cells, {} in forest", self.len()));
        }
        let mut roots = 0;
        for id in self.densest_first() {
            let cell = store.cell(id);
            if cell.weight() != self.weights[&id] {
                return fail(format!("stale weight for {id}"));
            }
            match cell.dep {
                None => {
                    roots += 1;
                    if cell.delta != f64::INFINITY {
                        return fail(format!("root {id} has finite delta"));
                    }
                }
                Some(p) => {
                    let (Some(kc), Some(kp)) = (self.key(id), self.key(p)) else {
                        return fail(format!("{id} depends on {p} outside the forest"));
                    };
                    if !kp.denser_than(&kc) {
                        return fail(format!("{id} depends on less dense {p}"));
                    }
                    if !self.children.get(&p).is_some_and(|s| s.contains(&id)) {
                        return fail(format!("{id} missing from children of {p}"));
                    }
                }
            }
        }
        if !self.is_empty() && roots != 1 {
            return fail(format!("{roots} roots"));
        }
        Ok(())
    }
}
