//! Slow reference computations used to check the incremental engine.

use std::collections::{BTreeMap, HashMap};

use crate::cellspace::{CellId, ClusterCell, Distance, Metric};
use crate::decay::{DecayParams, Timestamp};
use crate::dptree::{Cluster, ClusterSnapshot, OrderKey};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchParams {
    /// Neighbourhood cutoff: `ρ_i = |{j : d(i, j) < d_c}|`, `i` included.
    pub d_c: f64,
    /// Points with `ρ ≤ ξ` are outliers.
    pub xi: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub rho: Vec<usize>,
    /// Nearest denser non-outlier point; `None` for the peak and outliers.
    pub dep: Vec<Option<usize>>,
    pub delta: Vec<f64>,
    /// (root, sorted members), sorted by root.
    pub clusters: Vec<(usize, Vec<usize>)>,
    pub outliers: Vec<usize>,
}

/// Density-peak clustering of a finite point set.
///
/// Densities count neighbours within `d_c`; dependencies are taken among
/// non-outlier points with equal densities ranked by index; links longer than
/// `τ` are cut.
pub fn batch_dp(points: &[Vec<f64>], params: BatchParams) -> Result<BatchResult> {
    if points.is_empty() {
        return Err(Error::Precondition("batch clustering needs at least one point".into()));
    }
    if !(params.d_c > 0.0 && params.tau > 0.0 && params.xi >= 0.0) {
        return Err(Error::InvalidParam(format!("{params:?}")));
    }
    let metric = Distance::Euclidean;
    let n = points.len();
    let rho: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| metric.distance(&points[i], &points[j]) < params.d_c)
                .count()
        })
        .collect();
    let inlier: Vec<usize> = (0..n).filter(|&i| rho[i] as f64 > params.xi).collect();
    let outliers: Vec<usize> = (0..n).filter(|&i| rho[i] as f64 <= params.xi).collect();

    let mut order = inlier.clone();
    order.sort_by(|&a, &b| rho[b].cmp(&rho[a]).then(a.cmp(&b)));
    let mut dep = vec![None; n];
    let mut delta = vec![f64::INFINITY; n];
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[..k] {
            let d = metric.distance(&points[i], &points[j]);
            let closer = match dep[i] {
                None => true,
                Some(cur) => d < delta[i] || (d == delta[i] && j < cur),
            };
            if closer {
                dep[i] = Some(j);
                delta[i] = d;
            }
        }
    }

    let mut root = vec![usize::MAX; n];
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &order {
        root[i] = match dep[i] {
            Some(p) if delta[i] <= params.tau => root[p],
            _ => i,
        };
        groups.entry(root[i]).or_default().push(i);
    }
    let clusters = groups
        .into_iter()
        .map(|(r, mut m)| {
            m.sort_unstable();
            (r, m)
        })
        .collect();
    Ok(BatchResult {
        rho,
        dep,
        delta,
        clusters,
        outliers,
    })
}

/// Dependency of every given cell computed from scratch: nearest cell that
/// ranks strictly denser by (weight, id).
pub fn recompute_all<'a, I>(cells: I, metric: Distance) -> BTreeMap<CellId, (Option<CellId>, f64)>
where
    I: IntoIterator<Item = &'a ClusterCell>,
{
    let mut cells: Vec<&ClusterCell> = cells.into_iter().collect();
    cells.sort_by_key(|c| OrderKey {
        weight: c.weight(),
        id: c.id,
    });
    let mut out = BTreeMap::new();
    for (k, c) in cells.iter().enumerate() {
        let mut dep: Option<CellId> = None;
        let mut delta = f64::INFINITY;
        for e in &cells[..k] {
            let d = metric.distance(&c.seed, &e.seed);
            let closer = match dep {
                None => true,
                Some(cur) => d < delta || (d == delta && e.id < cur),
            };
            if closer {
                dep = Some(e.id);
                delta = d;
            }
        }
        out.insert(c.id, (dep, delta));
    }
    out
}

/// Clusters of a forest given as `id → (dep, δ)` and a densest-first order.
pub fn clusters_from_forest(
    forest: &BTreeMap<CellId, (Option<CellId>, f64)>,
    densest_first: &[CellId],
    tau: f64,
) -> Vec<Cluster> {
    let mut root: HashMap<CellId, CellId> = HashMap::new();
    let mut groups: BTreeMap<CellId, Vec<CellId>> = BTreeMap::new();
    for &id in densest_first {
        let r = match forest[&id] {
            (Some(p), d) if d <= tau => root[&p],
            _ => id,
        };
        root.insert(id, r);
        groups.entry(r).or_default().push(id);
    }
    groups
        .into_iter()
        .map(|(id, mut members)| {
            members.sort_unstable();
            Cluster { id, members }
        })
        .collect()
}

/// A labelled point and the cell that absorbed it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledAssignment {
    pub cell: CellId,
    pub label: String,
    pub t: Timestamp,
}

/// Freshness-weighted purity of a snapshot.
///
/// Each point in a clustered cell weighs `a^(λ·(t − t_i))`; a cluster scores
/// the mass of its dominant label and the result is the scored mass over the
/// total clustered mass. Points in future or unclustered cells are ignored.
pub fn weighted_purity(
    snapshot: &ClusterSnapshot,
    points: &[LabeledAssignment],
    params: &DecayParams,
    t: Timestamp,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::UndefinedMetric("no labelled points".into()));
    }
    let cluster_of = snapshot.membership();
    let mut mass: BTreeMap<CellId, BTreeMap<&str, f64>> = BTreeMap::new();
    for p in points.iter().filter(|p| p.t <= t) {
        if let Some(&c) = cluster_of.get(&p.cell) {
            let w = params.freshness(p.t, t)?;
            *mass.entry(c).or_default().entry(p.label.as_str()).or_default() += w;
        }
    }
    let total: f64 = mass.values().flat_map(|m| m.values()).sum();
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("no clustered labelled mass".into()));
    }
    let dominant: f64 = mass
        .values()
        .map(|m| m.values().copied().fold(0.0, f64::max))
        .sum();
    Ok(dominant / total)
}
