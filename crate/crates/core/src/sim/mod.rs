//! The ring schedule over `N` simulated devices.
//!
//! Each device keeps its query block resident. On round `i` device `j` holds
//! key/value block `(j - i) mod N`, folds the unmasked tiles of that block into
//! its softmax accumulator, and forwards the block to device `(j + 1) mod N`.
//! After `N` rounds every block is back home and every accumulator is
//! normalized.
//!
//! Devices communicate only through ordered point-to-point channels. Each
//! device's floating-point work happens in a fixed order (rounds in sequence,
//! tiles row-major), so the threaded and round-robin executors produce
//! bit-identical results.

mod device;
mod stats;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use stats::{round_critical_path, simulated_speedup, RoundStats, ScheduleStats, WorkStats};

use crate::error::{Error, Result};
use crate::layout::{gather, gather_companion, partition, Layout, PermutedBatch, Scheme};
use crate::mask::{get_mask_ring, get_mask_striped, MaskSpec};
use crate::oracle::{oracle_causal_attention_with, OracleOptions};
use crate::par;
use crate::tensor::{Scalar, SequenceTensor};

/// Block-mask constructor: `(query block, key block, block size, N)`.
pub trait MaskFn: Fn(usize, usize, usize, usize) -> Result<MaskSpec> + Sync {}
impl<F: Fn(usize, usize, usize, usize) -> Result<MaskSpec> + Sync> MaskFn for F {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ring,
    Striped,
}

impl Algo {
    pub fn scheme(self) -> Scheme {
        match self {
            Algo::Ring => Scheme::Contiguous,
            Algo::Striped => Scheme::Striped,
        }
    }

    pub fn mask(self, j: usize, k: usize, block_size: usize, n_devices: usize) -> Result<MaskSpec> {
        match self {
            Algo::Ring => get_mask_ring(j, k, block_size, n_devices),
            Algo::Striped => get_mask_striped(j, k, block_size, n_devices),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Ring => "ring",
            Algo::Striped => "striped",
        })
    }
}

impl FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Algo::Ring),
            "striped" => Ok(Algo::Striped),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl Precision {
    /// Max abs error accepted by oracle checks driven from the command line.
    pub fn oracle_tolerance(self) -> f64 {
        match self {
            Precision::Single => 1e-3,
            Precision::Double => 1e-9,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Single => "single",
            Precision::Double => "double",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Executor {
    /// Every device on the calling thread, stepped round by round.
    Sequential,
    /// One OS thread per device.
    #[default]
    Threaded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub algo: Algo,
    pub n_devices: usize,
    pub n_seq: usize,
    pub d_head: usize,
    pub tile_q: usize,
    pub tile_k: usize,
    pub seed: u64,
    pub precision: Precision,
    pub check_oracle: bool,
    /// Apply `1/sqrt(d_head)` to scores.
    pub scaled: bool,
    pub executor: Executor,
    /// Process tile rows of a block in parallel (needs the `parallel` feature).
    pub data_parallel: bool,
}

impl SimConfig {
    /// Config with tiles equal to the whole block.
    pub fn new(algo: Algo, n_devices: usize, n_seq: usize, d_head: usize) -> Self {
        let c = n_seq.checked_div(n_devices).unwrap_or(0);
        Self {
            algo,
            n_devices,
            n_seq,
            d_head,
            tile_q: c,
            tile_k: c,
            seed: 0,
            precision: Precision::Double,
            check_oracle: false,
            scaled: false,
            executor: Executor::default(),
            data_parallel: true,
        }
    }

    pub fn with_tiles(mut self, tile_q: usize, tile_k: usize) -> Self {
        self.tile_q = tile_q;
        self.tile_k = tile_k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_algo(mut self, algo: Algo) -> Self {
        self.algo = algo;
        self
    }

    /// Checks divisibility and returns the layout implied by `algo`.
    pub fn layout(&self) -> Result<Layout> {
        let layout = Layout::new(self.algo.scheme(), self.n_seq, self.n_devices)?;
        if self.d_head == 0 {
            return Err(Error::InvalidConfig("d_head must be positive".into()));
        }
        let c = layout.block_size();
        if self.tile_q == 0 || c % self.tile_q != 0 {
            return Err(Error::RaggedTile { dimension: "rows", tile: self.tile_q, block: c });
        }
        if self.tile_k == 0 || c % self.tile_k != 0 {
            return Err(Error::RaggedTile { dimension: "cols", tile: self.tile_k, block: c });
        }
        Ok(layout)
    }
}

/// Per-device outputs (in permuted order) and work accounting.
#[derive(Clone, Debug)]
pub struct ScheduleOutput<T> {
    pub outputs: Vec<SequenceTensor<T>>,
    pub stats: ScheduleStats,
}

/// Runs the schedule on an already partitioned batch.
pub fn run_schedule<T: Scalar>(config: &SimConfig, batch: &PermutedBatch<T>) -> Result<ScheduleOutput<T>> {
    let algo = config.algo;
    run_schedule_with(config, batch, &move |j, k, c, n| algo.mask(j, k, c, n))
}

/// [`run_schedule`] with a caller-supplied mask constructor, e.g. to check
/// that a wrong mask is caught by the oracle comparison.
pub fn run_schedule_with<T: Scalar, M: MaskFn>(
    config: &SimConfig,
    batch: &PermutedBatch<T>,
    mask_fn: &M,
) -> Result<ScheduleOutput<T>> {
    let layout = config.layout()?;
    if batch.layout != layout {
        return Err(Error::InvalidConfig(format!(
            "batch partitioned as {} over {} devices, config expects {} over {}",
            batch.layout.scheme(),
            batch.layout.n_devices(),
            layout.scheme(),
            layout.n_devices()
        )));
    }
    let (outputs, stats) = device::execute(config, batch, mask_fn)?;
    Ok(ScheduleOutput { outputs, stats })
}

/// Work accounting for a schedule without touching any tensors. Agrees
/// exactly with the stats produced by [`run_schedule`], and scales to block
/// sizes where executing the attention would be impractical.
pub fn account_schedule(config: &SimConfig) -> Result<ScheduleStats> {
    let layout = config.layout()?;
    let n = layout.n_devices();
    let c = layout.block_size();
    let devices = par::map_collect((0..n).collect(), config.data_parallel, |j| {
        let rounds = (0..n)
            .map(|i| {
                let k = (j + n - i) % n;
                let counts = config.algo.mask(j, k, c, n)?.tile_counts(config.tile_q, config.tile_k)?;
                Ok(RoundStats::from_counts(i, j, k, &counts))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WorkStats { device: j, rounds })
    });
    Ok(ScheduleStats {
        algo: config.algo,
        n_devices: n,
        block_size: c,
        tile_q: config.tile_q,
        tile_k: config.tile_k,
        devices: devices.into_iter().collect::<Result<_>>()?,
    })
}

/// Seeded Q, K, V in original sequence order, sampled in `f64`.
pub fn random_inputs(config: &SimConfig) -> Result<[SequenceTensor<f64>; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok([
        SequenceTensor::random(config.n_seq, config.d_head, &mut rng)?,
        SequenceTensor::random(config.n_seq, config.d_head, &mut rng)?,
        SequenceTensor::random(config.n_seq, config.d_head, &mut rng)?,
    ])
}

/// Result of one end-to-end simulated run.
#[derive(Clone, Debug)]
pub struct SimRun {
    pub algo: Algo,
    pub stats: ScheduleStats,
    /// Output rows in original sequence order, widened to `f64`.
    pub output: SequenceTensor<f64>,
    pub oracle_max_abs_error: Option<f64>,
}

/// Generates seeded inputs, partitions them for `config.algo`, runs the
/// schedule at the configured precision, and reassembles the output.
/// With `check_oracle` the output is compared against the dense reference
/// computed in `f64` on the same (possibly rounded) inputs.
pub fn simulate(config: &SimConfig) -> Result<SimRun> {
    let inputs = random_inputs(config)?;
    match config.precision {
        Precision::Double => simulate_typed::<f64>(config, inputs),
        Precision::Single => simulate_typed::<f32>(config, inputs),
    }
}

fn simulate_typed<T: Scalar>(config: &SimConfig, inputs: [SequenceTensor<f64>; 3]) -> Result<SimRun> {
    let layout = config.layout()?;
    let [q, k, v] = inputs.map(|t| t.cast::<T>());
    let positions: Vec<i64> = (0..config.n_seq as i64).collect();
    let batch = partition(&layout, &q, &k, &v, std::slice::from_ref(&positions))?;
    let ScheduleOutput { outputs, stats } = run_schedule(config, &batch)?;
    if gather_companion(&layout, &batch.shards, 0)? != positions {
        return Err(Error::InvalidConfig("position ids did not survive the layout round trip".into()));
    }
    let output = gather(&layout, &outputs)?.cast::<f64>();
    let oracle_max_abs_error = if config.check_oracle {
        let options = OracleOptions { scaled: config.scaled, parallel: config.data_parallel };
        let expected = oracle_causal_attention_with(&q.cast::<f64>(), &k.cast(), &v.cast(), &options)?;
        Some(output.max_abs_diff(&expected)?)
    } else {
        None
    };
    Ok(SimRun { algo: config.algo, stats, output, oracle_max_abs_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(Algo::Ring, 3, 16, 4).layout().is_err());
        assert!(SimConfig::new(Algo::Ring, 4, 16, 0).layout().is_err());
        let err = SimConfig::new(Algo::Ring, 4, 16, 4).with_tiles(3, 4).layout().unwrap_err();
        assert!(matches!(err, Error::RaggedTile { dimension: "rows", .. }));
        let err = SimConfig::new(Algo::Ring, 4, 16, 4).with_tiles(4, 0).layout().unwrap_err();
        assert!(matches!(err, Error::RaggedTile { dimension: "cols", .. }));
    }

    #[test]
    fn ring_round_two_imbalance() {
        let stats = account_schedule(&SimConfig::new(Algo::Ring, 4, 16, 4).with_tiles(1, 1)).unwrap();
        let round = stats.round(2).unwrap();
        assert_eq!(round[1].block_index, 3);
        assert_eq!(round[1].tiles_skipped, round[1].tiles_total);
        assert_eq!(round[3].block_index, 1);
        assert_eq!(round[3].tiles_skipped, 0);
    }

    #[test]
    fn critical_paths_for_unit_tiles() {
        let c = 8u64;
        for (algo, expect_later) in [(Algo::Ring, c * c), (Algo::Striped, c * (c + 1) / 2)] {
            let stats = account_schedule(&SimConfig::new(algo, 4, 32, 4).with_tiles(1, 1)).unwrap();
            assert_eq!(round_critical_path(&stats, 0).unwrap(), c * (c + 1) / 2);
            for i in 1..4 {
                assert_eq!(round_critical_path(&stats, i).unwrap(), expect_later, "{algo} round {i}");
            }
            assert!(round_critical_path(&stats, 4).is_err());
        }
    }

    #[test]
    fn speedup_rejects_mismatched_runs() {
        let ring = account_schedule(&SimConfig::new(Algo::Ring, 4, 32, 4)).unwrap();
        let striped = account_schedule(&SimConfig::new(Algo::Striped, 4, 32, 4)).unwrap();
        let other = account_schedule(&SimConfig::new(Algo::Striped, 4, 64, 4)).unwrap();
        assert!(simulated_speedup(&ring, &striped).is_ok());
        assert!(simulated_speedup(&striped, &ring).is_err());
        assert!(simulated_speedup(&ring, &other).is_err());
    }

    #[test]
    fn batch_must_match_config_layout() {
        let cfg = SimConfig::new(Algo::Ring, 2, 4, 2);
        let [q, k, v] = random_inputs(&cfg).unwrap();
        let wrong = partition(&Layout::new(Scheme::Striped, 4, 2).unwrap(), &q, &k, &v, &[]).unwrap();
        assert!(matches!(run_schedule(&cfg, &wrong), Err(Error::InvalidConfig(_))));
    }
}
