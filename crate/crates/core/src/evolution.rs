//! Cluster evolution events derived from consecutive snapshots.
//!
//! A cluster is identified by its root cell. Between two snapshots an old
//! cluster is matched to the new cluster with the same root, or failing that
//! to the new cluster holding more than half of its cells. Unmatched clusters
//! on either side become splits, merges, emergences, or disappearances.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::RangeBounds;

use serde::{Deserialize, Serialize};

use crate::cellspace::CellId;
use crate::decay::Timestamp;
use crate::dptree::ClusterSnapshot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Merge,
    Split,
    Emerge,
    Disappear,
    Adjust,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Merge => "merge",
            EventKind::Split => "split",
            EventKind::Emerge => "emerge",
            EventKind::Disappear => "disappear",
            EventKind::Adjust => "adjust",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustKind {
    MovedBetweenClusters,
    OutliersJoined,
    BecameOutliers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    /// A dependency link moved across `τ`.
    LinkCrossedTau,
    /// `τ` itself changed.
    TauShift,
    Activation,
    Deactivation,
    Relink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionEvent {
    pub time: Timestamp,
    pub kind: EventKind,
    pub old_ids: Vec<CellId>,
    pub new_ids: Vec<CellId>,
    pub adjust_kind: Option<AdjustKind>,
    pub cause: Cause,
}

impl EvolutionEvent {
    /// Change in cluster count implied by the event.
    pub fn arity_delta(&self) -> i64 {
        match self.kind {
            EventKind::Split => self.new_ids.len() as i64 - 1,
            EventKind::Merge => 1 - self.old_ids.len() as i64,
            EventKind::Emerge => 1,
            EventKind::Disappear => -1,
            EventKind::Adjust => 0,
        }
    }
}

/// Time-ordered, append-only event sequence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    events: Vec<EvolutionEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, event: EvolutionEvent) -> Result<()> {
        if let Some(last) = self.events.last() {
            if event.time < last.time {
                return Err(Error::Ordering(format!(
                    "event at {} appended after {}",
                    event.time, last.time
                )));
            }
        }
        self.events.push(event);
        Ok(())
    }

    pub fn extend(&mut self, events: impl IntoIterator<Item = EvolutionEvent>) -> Result<()> {
        events.into_iter().try_for_each(|e| self.append(e))
    }

    /// Events whose time lies in `range`.
    pub fn query<R: RangeBounds<Timestamp>>(&self, range: R) -> Vec<EvolutionEvent> {
        let start = self.events.partition_point(|e| match range.start_bound() {
            std::ops::Bound::Included(&s) => e.time < s,
            std::ops::Bound::Excluded(&s) => e.time <= s,
            std::ops::Bound::Unbounded => false,
        });
        self.events[start..]
            .iter()
            .take_while(|e| !past_end(&range, e.time))
            .cloned()
            .collect()
    }

    pub fn events(&self) -> &[EvolutionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Kinds in log order, with adjustments left out.
    pub fn structural_kinds(&self) -> Vec<EventKind> {
        self.events
            .iter()
            .map(|e| e.kind)
            .filter(|&k| k != EventKind::Adjust)
            .collect()
    }
}

fn past_end<R: RangeBounds<Timestamp>>(range: &R, t: Timestamp) -> bool {
    match range.end_bound() {
        std::ops::Bound::Included(&e) => t > e,
        std::ops::Bound::Excluded(&e) => t >= e,
        std::ops::Bound::Unbounded => false,
    }
}

/// Largest overlap wins; ties go to the smaller id.
fn pick_max(cands: impl Iterator<Item = (CellId, usize)>) -> Option<CellId> {
    cands
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(id, _)| id)
}

/// Events that turn `prev` into `next`, ordered merges and splits first,
/// then emergences and disappearances, then adjustments.
pub fn diff_snapshots(prev: &ClusterSnapshot, next: &ClusterSnapshot) -> Result<Vec<EvolutionEvent>> {
    if prev.engine_id != next.engine_id {
        return Err(Error::Provenance(prev.engine_id, next.engine_id));
    }
    if next.time < prev.time {
        return Err(Error::Ordering(format!(
            "snapshot at {} diffed against later snapshot at {}",
            next.time, prev.time
        )));
    }
    let time = next.time;
    let structural_cause = if prev.tau != next.tau {
        Cause::TauShift
    } else {
        Cause::LinkCrossedTau
    };

    let old_of = prev.membership();
    let new_of = next.membership();
    let old_size: HashMap<CellId, usize> =
        prev.clusters.iter().map(|c| (c.id, c.members.len())).collect();

    // overlap[(old, new)] = shared cells
    let mut overlap: BTreeMap<(CellId, CellId), usize> = BTreeMap::new();
    for (cell, &n) in &new_of {
        if let Some(&o) = old_of.get(cell) {
            *overlap.entry((o, n)).or_default() += 1;
        }
    }
    let mut by_old: BTreeMap<CellId, Vec<(CellId, usize)>> = BTreeMap::new();
    let mut by_new: BTreeMap<CellId, Vec<(CellId, usize)>> = BTreeMap::new();
    for (&(o, n), &k) in &overlap {
        by_old.entry(o).or_default().push((n, k));
        by_new.entry(n).or_default().push((o, k));
    }

    // matching: same root first, then majority of the old cluster's cells
    let mut old_match: BTreeMap<CellId, CellId> = BTreeMap::new();
    let mut new_match: BTreeMap<CellId, CellId> = BTreeMap::new();
    for c in &next.clusters {
        if old_size.contains_key(&c.id) {
            old_match.insert(c.id, c.id);
            new_match.insert(c.id, c.id);
        }
    }
    for c in &next.clusters {
        if new_match.contains_key(&c.id) {
            continue;
        }
        let majority = by_new.get(&c.id).into_iter().flatten().find(|&&(o, k)| {
            !old_match.contains_key(&o) && 2 * k > old_size[&o]
        });
        if let Some(&(o, _)) = majority {
            old_match.insert(o, c.id);
            new_match.insert(c.id, o);
        }
    }

    let mut split_children: BTreeMap<CellId, Vec<CellId>> = BTreeMap::new();
    let mut merge_parents: BTreeMap<CellId, Vec<CellId>> = BTreeMap::new();
    let mut loose_new: BTreeSet<CellId> = BTreeSet::new();
    let mut loose_old: BTreeSet<CellId> = BTreeSet::new();

    for c in &next.clusters {
        if new_match.contains_key(&c.id) {
            continue;
        }
        let links = by_new.get(&c.id).map(Vec::as_slice).unwrap_or(&[]);
        let parent = pick_max(links.iter().copied().filter(|(o, _)| old_match.contains_key(o)));
        match parent {
            Some(o) => split_children.entry(o).or_default().push(c.id),
            None => {
                loose_new.insert(c.id);
            }
        }
    }
    for c in &prev.clusters {
        if old_match.contains_key(&c.id) {
            continue;
        }
        let links = by_old.get(&c.id).map(Vec::as_slice).unwrap_or(&[]);
        let target = pick_max(links.iter().copied().filter(|(n, _)| new_match.contains_key(n)));
        match target {
            Some(n) => merge_parents.entry(n).or_default().push(c.id),
            None => {
                loose_old.insert(c.id);
            }
        }
    }

    let mut structural = Vec::new();
    let mut births = Vec::new();
    let event = |kind, old_ids: Vec<CellId>, new_ids: Vec<CellId>, cause| EvolutionEvent {
        time,
        kind,
        old_ids,
        new_ids,
        adjust_kind: None,
        cause,
    };

    for (o, kids) in &split_children {
        let mut new_ids = vec![old_match[o]];
        new_ids.extend(kids);
        structural.push(event(EventKind::Split, vec![*o], new_ids, structural_cause));
    }
    for (n, parents) in &merge_parents {
        let mut old_ids = vec![new_match[n]];
        old_ids.extend(parents);
        structural.push(event(EventKind::Merge, old_ids, vec![*n], structural_cause));
    }

    // connected components among the clusters that are still unexplained
    let mut seen_old: BTreeSet<CellId> = BTreeSet::new();
    let mut seen_new: BTreeSet<CellId> = BTreeSet::new();
    let starts: Vec<(bool, CellId)> = loose_old
        .iter()
        .map(|&o| (true, o))
        .chain(loose_new.iter().map(|&n| (false, n)))
        .collect();
    for (is_old, start) in starts {
        if (is_old && seen_old.contains(&start)) || (!is_old && seen_new.contains(&start)) {
            continue;
        }
        let mut olds = Vec::new();
        let mut news = Vec::new();
        let mut stack = vec![(is_old, start)];
        while let Some((side_old, id)) = stack.pop() {
            if side_old {
                if !seen_old.insert(id) {
                    continue;
                }
                olds.push(id);
                for &(n, _) in by_old.get(&id).into_iter().flatten() {
                    if loose_new.contains(&n) {
                        stack.push((false, n));
                    }
                }
            } else {
                if !seen_new.insert(id) {
                    continue;
                }
                news.push(id);
                for &(o, _) in by_new.get(&id).into_iter().flatten() {
                    if loose_old.contains(&o) {
                        stack.push((true, o));
                    }
                }
            }
        }
        olds.sort_unstable();
        news.sort_unstable();
        match (olds.len(), news.len()) {
            (0, _) => {
                for n in news {
                    births.push(event(EventKind::Emerge, vec![], vec![n], Cause::Activation));
                }
            }
            (_, 0) => {
                for o in olds {
                    births.push(event(EventKind::Disappear, vec![o], vec![], Cause::Deactivation));
                }
            }
            (1, 1) => {
                births.push(event(EventKind::Disappear, olds.clone(), vec![], Cause::Deactivation));
                births.push(event(EventKind::Emerge, vec![], news, Cause::Activation));
            }
            (1, _) => structural.push(event(EventKind::Split, olds, news, structural_cause)),
            (_, 1) => structural.push(event(EventKind::Merge, olds, news, structural_cause)),
            _ => {
                let inflow = |n: CellId| -> usize {
                    by_new[&n].iter().filter(|(o, _)| olds.contains(o)).map(|&(_, k)| k).sum()
                };
                let target = pick_max(news.iter().map(|&n| (n, inflow(n)))).expect("non-empty");
                structural.push(event(EventKind::Merge, olds.clone(), vec![target], structural_cause));
                for n in news.into_iter().filter(|&n| n != target) {
                    births.push(event(EventKind::Emerge, vec![], vec![n], Cause::Activation));
                }
            }
        }
    }

    // adjustments inside matched pairs
    let mut adjust = Vec::new();
    let adj = |kind, old_ids, new_ids, cause| EvolutionEvent {
        time,
        kind: EventKind::Adjust,
        old_ids,
        new_ids,
        adjust_kind: Some(kind),
        cause,
    };
    for (&o, &n) in &old_match {
        let joined = next
            .clusters
            .iter()
            .find(|c| c.id == n)
            .map(|c| c.members.iter().filter(|m| !old_of.contains_key(m)).count())
            .unwrap_or(0);
        if joined > 0 {
            adjust.push(adj(AdjustKind::OutliersJoined, vec![o], vec![n], Cause::Activation));
        }
        let left = prev
            .clusters
            .iter()
            .find(|c| c.id == o)
            .map(|c| c.members.iter().filter(|m| !new_of.contains_key(m)).count())
            .unwrap_or(0);
        if left > 0 {
            adjust.push(adj(AdjustKind::BecameOutliers, vec![o], vec![n], Cause::Deactivation));
        }
    }
    for &(o, n) in overlap.keys() {
        // cells moving between two clusters that both persist
        if let (Some(&mo), Some(&mn)) = (old_match.get(&o), new_match.get(&n)) {
            if mo != n && mn != o {
                adjust.push(adj(AdjustKind::MovedBetweenClusters, vec![o], vec![n], Cause::Relink));
            }
        }
    }

    structural.sort_by(|a, b| (a.kind, &a.old_ids, &a.new_ids).cmp(&(b.kind, &b.old_ids, &b.new_ids)));
    births.sort_by(|a, b| (a.kind, &a.old_ids, &a.new_ids).cmp(&(b.kind, &b.old_ids, &b.new_ids)));
    adjust.sort_by(|a, b| {
        (a.adjust_kind, &a.old_ids, &a.new_ids).cmp(&(b.adjust_kind, &b.old_ids, &b.new_ids))
    });
    structural.extend(births);
    structural.extend(adjust);
    Ok(structural)
}
