use serde::{Deserialize, Serialize};

use super::Algo;
use crate::error::{Error, Result};
use crate::mask::{TileClass, TileCounts, TileGrid};

/// Work done by one device in one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub device: usize,
    pub block_index: usize,
    pub tiles_total: u64,
    pub tiles_skipped: u64,
    pub tiles_partial: u64,
    pub tiles_full: u64,
    pub interactions_computed: u64,
    pub interactions_required: u64,
}

impl RoundStats {
    pub(crate) fn from_counts(round: usize, device: usize, block_index: usize, counts: &TileCounts) -> Self {
        Self {
            round,
            device,
            block_index,
            tiles_total: counts.total,
            tiles_skipped: counts.skipped,
            tiles_partial: counts.partial,
            tiles_full: counts.full,
            interactions_computed: counts.computed,
            interactions_required: counts.required,
        }
    }

    pub(crate) fn from_grid(round: usize, device: usize, block_index: usize, grid: &TileGrid, required: u64) -> Self {
        let (mut skipped, mut partial, mut full) = (0, 0, 0);
        for class in grid.classes() {
            match class {
                TileClass::Skip => skipped += 1,
                TileClass::Partial => partial += 1,
                TileClass::Full => full += 1,
            }
        }
        Self {
            round,
            device,
            block_index,
            tiles_total: grid.classes().len() as u64,
            tiles_skipped: skipped,
            tiles_partial: partial,
            tiles_full: full,
            interactions_computed: (partial + full) * (grid.tile_q * grid.tile_k) as u64,
            interactions_required: required,
        }
    }

    /// `required <= computed <= tiles_total * tile_area` and the class counts add up.
    pub fn is_consistent(&self, tile_area: u64) -> bool {
        self.tiles_skipped + self.tiles_partial + self.tiles_full == self.tiles_total
            && self.interactions_required <= self.interactions_computed
            && self.interactions_computed == (self.tiles_partial + self.tiles_full) * tile_area
            && self.interactions_computed <= self.tiles_total * tile_area
    }
}

/// Per-round work history of one device.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkStats {
    pub device: usize,
    pub rounds: Vec<RoundStats>,
}

/// Work accounting for a whole schedule run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleStats {
    pub algo: Algo,
    pub n_devices: usize,
    pub block_size: usize,
    pub tile_q: usize,
    pub tile_k: usize,
    pub devices: Vec<WorkStats>,
}

impl ScheduleStats {
    pub fn n_rounds(&self) -> usize {
        self.devices.first().map_or(0, |d| d.rounds.len())
    }

    pub fn tile_area(&self) -> u64 {
        (self.tile_q * self.tile_k) as u64
    }

    /// All rows ordered by round, then device.
    pub fn rows(&self) -> Vec<RoundStats> {
        let mut rows: Vec<_> = self.devices.iter().flat_map(|d| d.rounds.iter().copied()).collect();
        rows.sort_by_key(|r| (r.round, r.device));
        rows
    }

    pub fn round(&self, round: usize) -> Result<Vec<RoundStats>> {
        self.devices
            .iter()
            .map(|d| {
                d.rounds.get(round).copied().ok_or(Error::IndexOutOfRange {
                    what: "round",
                    index: round,
                    bound: d.rounds.len(),
                })
            })
            .collect()
    }

    pub fn total_required(&self) -> u64 {
        self.devices.iter().flat_map(|d| &d.rounds).map(|r| r.interactions_required).sum()
    }

    pub fn total_computed(&self) -> u64 {
        self.devices.iter().flat_map(|d| &d.rounds).map(|r| r.interactions_computed).sum()
    }

    /// Sum over rounds of the per-round critical path.
    pub fn critical_path_total(&self) -> u64 {
        (0..self.n_rounds()).map(|i| round_critical_path(self, i).unwrap_or(0)).sum()
    }
}

/// Maximum `interactions_computed` over devices in round `round`: the round's
/// latency proxy, since no device can start the next round before the
/// slowest one has forwarded its block.
pub fn round_critical_path(stats: &ScheduleStats, round: usize) -> Result<u64> {
    Ok(stats.round(round)?.iter().map(|r| r.interactions_computed).max().unwrap_or(0))
}

/// Ratio of summed ring critical paths to summed striped critical paths.
pub fn simulated_speedup(ring: &ScheduleStats, striped: &ScheduleStats) -> Result<f64> {
    if ring.algo != Algo::Ring || striped.algo != Algo::Striped {
        return Err(Error::MismatchedRuns(format!("expected (ring, striped), got ({}, {})", ring.algo, striped.algo)));
    }
    let shape = |s: &ScheduleStats| (s.n_devices, s.block_size, s.tile_q, s.tile_k, s.n_rounds());
    if shape(ring) != shape(striped) {
        return Err(Error::MismatchedRuns(format!(
            "ring (N, c, tile_q, tile_k, rounds) = {:?}, striped = {:?}",
            shape(ring),
            shape(striped)
        )));
    }
    let denom = striped.critical_path_total();
    if denom == 0 {
        return Err(Error::MismatchedRuns("striped run recorded no work".into()));
    }
    Ok(ring.critical_path_total() as f64 / denom as f64)
}
