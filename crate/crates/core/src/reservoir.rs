//! Inactive cells: activation, decay-driven deactivation, and recycling.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cellspace::{CellId, CellStore};
use crate::decay::{DecayParams, Timestamp};
use crate::dptree::{DpTree, RelinkRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Activated(Vec<RelinkRecord>),
    StillInactive,
}

/// Upper bound on the number of inactive cells: `⌈ΔT_del·v + 1/β⌉`.
pub fn capacity_bound(params: &DecayParams) -> u64 {
    let h = params.deletion_horizon().seconds;
    (h * params.v + 1.0 / params.beta).ceil() as u64
}

/// Upper bound on the number of active cells: `⌈1/β⌉`.
pub fn active_bound(params: &DecayParams) -> u64 {
    (1.0 / params.beta).ceil() as u64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReservoir {
    last_touch: BTreeMap<CellId, Timestamp>,
}

impl OutlierReservoir {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.last_touch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_touch.is_empty()
    }

    pub fn contains(&self, id: CellId) -> bool {
        self.last_touch.contains_key(&id)
    }

    pub fn last_touch(&self, id: CellId) -> Option<Timestamp> {
        self.last_touch.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, Timestamp)> + '_ {
        self.last_touch.iter().map(|(&c, &t)| (c, t))
    }

    /// Starts tracking `c`; a no-op if it is already tracked.
    pub fn put(&mut self, c: CellId, t: Timestamp) {
        self.last_touch.entry(c).or_insert(t);
    }

    /// Records an absorption by `c`.
    pub fn touch(&mut self, c: CellId, t: Timestamp) -> Result<()> {
        match self.last_touch.get_mut(&c) {
            Some(slot) => {
                *slot = t;
                Ok(())
            }
            None => Err(Error::State(c, "touch on a cell outside the reservoir")),
        }
    }

    /// Moves `c` into the forest if its density reached the threshold.
    pub fn try_activate(
        &mut self,
        store: &mut CellStore,
        tree: &mut DpTree,
        c: CellId,
        t: Timestamp,
    ) -> Result<Activation> {
        if !self.contains(c) {
            return Err(Error::State(c, "try_activate on a cell outside the reservoir"));
        }
        let threshold = store.params().active_threshold();
        if store.cell_density_at(c, t)? >= threshold {
            self.last_touch.remove(&c);
            Ok(Activation::Activated(tree.insert_active(store, c)?))
        } else {
            Ok(Activation::StillInactive)
        }
    }

    /// Moves every active cell below the threshold at `t` into the reservoir,
    /// together with its descendants. Returns the removed subtrees, each
    /// listed root first.
    pub fn deactivate_sweep(
        &mut self,
        store: &mut CellStore,
        tree: &mut DpTree,
        t: Timestamp,
    ) -> Result<Vec<Vec<CellId>>> {
        let threshold = store.params().active_threshold();
        // density is monotone in weight, so the cells below threshold form
        // the least dense end of the order
        let below: Vec<CellId> = tree
            .densest_first()
            .rev()
            .take_while(|&id| store.density(id, t) < threshold)
            .collect();
        if below.is_empty() {
            return Ok(Vec::new());
        }
        let set: HashSet<CellId> = below.iter().copied().collect();
        let mut subtrees = Vec::new();
        for &id in below.iter().rev() {
            if !tree.contains(id) {
                continue;
            }
            let maximal = match store.cell(id).dep {
                Some(p) => !set.contains(&p),
                None => true,
            };
            if maximal {
                let removed = tree.remove_subtree(store, id)?;
                for &r in &removed {
                    self.put(r, t);
                }
                subtrees.push(removed);
            }
        }
        Ok(subtrees)
    }

    /// Deletes every inactive cell untouched for longer than the deletion
    /// horizon. Returns the deleted ids in ascending order.
    pub fn recycle(&mut self, store: &mut CellStore, t: Timestamp) -> Result<Vec<CellId>> {
        let horizon = store.params().deletion_horizon().seconds;
        let stale: Vec<CellId> = self
            .last_touch
            .iter()
            .filter(|(_, &last)| t - last > horizon)
            .map(|(&c, _)| c)
            .collect();
        for &c in &stale {
            self.last_touch.remove(&c);
            store.remove(c)?;
        }
        Ok(stale)
    }
}
