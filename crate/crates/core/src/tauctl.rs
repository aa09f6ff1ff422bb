//! Choosing the cut threshold `τ`.
//!
//! A candidate `τ` splits the dependent distances into inter links (`δ > τ`)
//! and intra links (`δ ≤ τ`) and is scored by
//!
//! `F(α, τ) = α·(Σ_{δ>τ} δ)/(n·δ̄) + (1 − α)·(m·δ̄)/(Σ_{δ≤τ} δ)`
//!
//! where `n` and `m` count the two sides and `δ̄` is the overall mean. The
//! operator picks `τ⁰` once; `α` is then learned so that `τ⁰` minimizes `F`,
//! and later thresholds minimize `F` with that `α`.

use serde::{Deserialize, Serialize};

use crate::cellspace::{CellId, CellStore};
use crate::decay::Timestamp;
use crate::dptree::DpTree;
use crate::error::{Error, Result};

/// Step of the `α` search grid.
const ALPHA_STEPS: u32 = 100;

struct Split {
    n: usize,
    m: usize,
    inter: f64,
    intra: f64,
    mean: f64,
}

fn split(tau: f64, deltas: &[f64]) -> Split {
    let mut s = Split {
        n: 0,
        m: 0,
        inter: 0.0,
        intra: 0.0,
        mean: 0.0,
    };
    for &d in deltas {
        if d > tau {
            s.n += 1;
            s.inter += d;
        } else {
            s.m += 1;
            s.intra += d;
        }
    }
    s.mean = (s.inter + s.intra) / deltas.len().max(1) as f64;
    s
}

fn valid(s: &Split) -> bool {
    s.n >= 1 && s.m >= 1 && s.intra > 0.0
}

/// `F(α, τ)` over finite dependent distances.
pub fn objective(alpha: f64, tau: f64, deltas: &[f64]) -> Result<f64> {
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::UndefinedObjective("non-finite delta".into()));
    }
    let s = split(tau, deltas);
    if !valid(&s) {
        return Err(Error::UndefinedObjective(format!(
            "tau {tau} leaves {} inter and {} intra links (intra sum {})",
            s.n, s.m, s.intra
        )));
    }
    Ok(alpha * s.inter / (s.n as f64 * s.mean) + (1.0 - alpha) * s.m as f64 * s.mean / s.intra)
}

/// Distinct finite deltas that induce a valid split, ascending.
pub fn candidates(deltas: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = deltas.iter().copied().filter(|d| d.is_finite()).collect();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c.retain(|&tau| valid(&split(tau, deltas)));
    c
}

/// Learns `α` so that `τ⁰` scores strictly better than every candidate that
/// splits the deltas differently. Returns the midpoint of the feasible grid
/// values in `{0.01, …, 0.99}`.
pub fn learn_alpha(deltas: &[f64], tau0: f64) -> Result<f64> {
    let base = split(tau0, deltas);
    if !valid(&base) {
        return Err(Error::Precondition(format!(
            "tau0 {tau0} does not split the {} deltas into two non-empty sides",
            deltas.len()
        )));
    }
    let rivals: Vec<f64> = candidates(deltas)
        .into_iter()
        .filter(|&c| split(c, deltas).m != base.m)
        .collect();
    if rivals.is_empty() {
        return Err(Error::Precondition(
            "need at least two distinct candidate partitions to learn alpha".into(),
        ));
    }
    let feasible: Vec<f64> = (1..ALPHA_STEPS)
        .map(|k| k as f64 / ALPHA_STEPS as f64)
        .filter(|&alpha| {
            let f0 = objective(alpha, tau0, deltas).expect("valid split");
            rivals
                .iter()
                .all(|&c| f0 < objective(alpha, c, deltas).expect("valid candidate"))
        })
        .collect();
    match (feasible.first(), feasible.last()) {
        (Some(lo), Some(hi)) => Ok(((lo + hi) / 2.0 * ALPHA_STEPS as f64).round() / ALPHA_STEPS as f64),
        _ => Err(Error::NoConsistentAlpha(tau0)),
    }
}

/// The candidate minimizing `F(α, ·)`, ties going to the smaller `τ`; `None`
/// when no candidate yields a valid split.
pub fn select_tau(alpha: f64, deltas: &[f64]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for tau in candidates(deltas) {
        let f = objective(alpha, tau, deltas).expect("valid candidate");
        if best.is_none_or(|(_, bf)| f < bf) {
            best = Some((tau, f));
        }
    }
    best.map(|(tau, _)| tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionGraphPoint {
    pub cell: CellId,
    pub rho: f64,
    /// `+∞` for the peak.
    pub delta: f64,
}

/// `(ρ, δ)` of every active cell, densest first.
pub fn decision_graph(store: &CellStore, tree: &DpTree, t: Timestamp) -> Vec<DecisionGraphPoint> {
    tree.densest_first()
        .map(|id| {
            let c = store.cell(id);
            DecisionGraphPoint {
                cell: id,
                rho: store.clock().density(c.weight(), t),
                delta: c.delta,
            }
        })
        .collect()
}

/// Display value for an infinite delta: 1.1 × the largest finite one, or
/// `+∞` when there is none.
pub fn display_delta(points: &[DecisionGraphPoint]) -> f64 {
    points
        .iter()
        .map(|p| p.delta)
        .filter(|d| d.is_finite())
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))))
        .map_or(f64::INFINITY, |m| 1.1 * m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauState {
    pub alpha: f64,
    pub tau: f64,
    pub tau0: f64,
    /// When false `τ` stays at `τ⁰`.
    pub adaptive: bool,
    /// Candidates seen at the last selection.
    pub candidates: Vec<f64>,
}

impl TauState {
    pub fn new(alpha: f64, tau0: f64, adaptive: bool) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParam(format!("alpha {alpha} must lie in (0, 1)")));
        }
        if !(tau0 > 0.0) {
            return Err(Error::InvalidParam(format!("tau0 {tau0} must be > 0")));
        }
        Ok(TauState {
            alpha,
            tau: tau0,
            tau0,
            adaptive,
            candidates: Vec::new(),
        })
    }

    /// Reselects `τ` from `deltas`; returns the previous value when it
    /// changed. Keeps the current `τ` when no candidate is valid.
    pub fn reselect(&mut self, deltas: &[f64]) -> Option<f64> {
        if !self.adaptive {
            return None;
        }
        self.candidates = candidates(deltas);
        match select_tau(self.alpha, deltas) {
            Some(tau) if tau != self.tau => Some(std::mem::replace(&mut self.tau, tau)),
            _ => None,
        }
    }
}
