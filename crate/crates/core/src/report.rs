//! Run reports: human-readable summaries and the per-device-per-round CSV.
//!
//! CSV columns, one row per device per round, header always present:
//! `algo,round,device,block_index,tiles_total,tiles_skipped,tiles_partial,tiles_full,interactions_computed,interactions_required`

use std::fmt::{self, Write as _};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{round_critical_path, simulated_speedup, Algo, ScheduleStats, SimConfig, SimRun};

pub const CSV_HEADER: [&str; 10] = [
    "algo",
    "round",
    "device",
    "block_index",
    "tiles_total",
    "tiles_skipped",
    "tiles_partial",
    "tiles_full",
    "interactions_computed",
    "interactions_required",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkRow {
    pub algo: Algo,
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

pub fn work_rows(stats: &ScheduleStats) -> Vec<WorkRow> {
    stats
        .rows()
        .into_iter()
        .map(|r| WorkRow {
            algo: stats.algo,
            round: r.round,
            device: r.device,
            block_index: r.block_index,
            tiles_total: r.tiles_total,
            tiles_skipped: r.tiles_skipped,
            tiles_partial: r.tiles_partial,
            tiles_full: r.tiles_full,
            interactions_computed: r.interactions_computed,
            interactions_required: r.interactions_required,
        })
        .collect()
}

/// Writes the rows of every schedule, in the order given.
pub fn write_csv<W: Write>(writer: W, schedules: &[&ScheduleStats]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for stats in schedules {
        for row in work_rows(stats) {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<WorkRow>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::InvalidConfig(format!("unexpected CSV header {:?}", r.headers()?)));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Everything a `simulate` invocation produced, fully determined by the
/// config and seed.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: SimConfig,
    pub runs: Vec<SimRun>,
    pub tolerance: f64,
}

impl RunReport {
    pub fn run(&self, algo: Algo) -> Option<&SimRun> {
        self.runs.iter().find(|r| r.algo == algo)
    }

    /// Ring-over-striped critical path ratio when both schedules ran.
    pub fn speedup(&self) -> Option<Result<f64>> {
        let ring = self.run(Algo::Ring)?;
        let striped = self.run(Algo::Striped)?;
        Some(simulated_speedup(&ring.stats, &striped.stats))
    }

    /// True when every checked run is within tolerance (vacuously true if
    /// no oracle check was requested).
    pub fn oracle_ok(&self) -> bool {
        self.runs.iter().all(|r| r.oracle_max_abs_error.is_none_or(|e| e <= self.tolerance))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let stats: Vec<_> = self.runs.iter().map(|r| &r.stats).collect();
        write_csv(writer, &stats)
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "devices={} seq_len={} block={} d_head={} tile={}x{} seed={} precision={} scaled={}",
            c.n_devices,
            c.n_seq,
            c.n_seq / c.n_devices.max(1),
            c.d_head,
            c.tile_q,
            c.tile_k,
            c.seed,
            c.precision,
            c.scaled
        )?;
        for run in &self.runs {
            writeln!(f)?;
            writeln!(f, "[{}]", run.algo)?;
            writeln!(
                f,
                "{:>5} {:>7} {:>6} {:>8} {:>8} {:>8} {:>14} {:>14}",
                "round", "device", "block", "skip", "partial", "full", "computed", "required"
            )?;
            for r in run.stats.rows() {
                writeln!(
                    f,
                    "{:>5} {:>7} {:>6} {:>8} {:>8} {:>8} {:>14} {:>14}",
                    r.round,
                    r.device,
                    r.block_index,
                    r.tiles_skipped,
                    r.tiles_partial,
                    r.tiles_full,
                    r.interactions_computed,
                    r.interactions_required
                )?;
            }
            let mut paths = String::new();
            for i in 0..run.stats.n_rounds() {
                let _ = write!(
                    paths,
                    "{}{}",
                    if i == 0 { "" } else { " " },
                    round_critical_path(&run.stats, i).unwrap_or(0)
                );
            }
            writeln!(f, "critical path per round: {paths}")?;
            writeln!(f, "critical path total: {}", run.stats.critical_path_total())?;
            if let Some(err) = run.oracle_max_abs_error {
                let verdict = if err <= self.tolerance { "ok" } else { "FAILED" };
                writeln!(f, "oracle max abs error: {err:.3e} (tolerance {:.0e}) {verdict}", self.tolerance)?;
            }
        }
        if let Some(s) = self.speedup() {
            writeln!(f)?;
            match s {
                Ok(s) => writeln!(f, "simulated speedup (ring / striped critical path): {s:.6}")?,
                Err(e) => writeln!(f, "simulated speedup unavailable: {e}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::account_schedule;

    #[test]
    fn csv_has_header_and_one_row_per_device_round() {
        let stats = account_schedule(&SimConfig::new(Algo::Ring, 4, 16, 2).with_tiles(1, 1)).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[&stats]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert!(text.ends_with('\n'));
        assert_eq!(text.lines().count(), 1 + 16);
        assert_eq!(text.lines().nth(1).unwrap(), "ring,0,0,0,16,6,0,10,10,10");
        let rows = read_csv(text.as_bytes()).unwrap();
        assert_eq!(rows, work_rows(&stats));
    }

    #[test]
    fn read_rejects_foreign_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
