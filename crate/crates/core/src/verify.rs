//! Property suite behind the `verify` command.
//!
//! Each property returns a [`PropertyResult`]; failures carry the offending
//! configuration and seed so they can be replayed with `simulate`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{self, ModelPreset, TmsQuery};
use crate::error::Result;
use crate::layout::Layout;
use crate::mask::{classify_tiles, MaskKind, MaskSpec, TileClass};
use crate::oracle::{attention_weights, oracle_causal_attention, OracleOptions};
use crate::par;
use crate::sim::{account_schedule, simulate, Algo, Executor, Precision, SimConfig};
use crate::softmax::SoftmaxAccumulator;
use crate::tensor::SequenceTensor;

/// Max abs error for double-precision exactness checks.
pub const EXACT_TOL_DOUBLE: f64 = 1e-12;
/// Max abs error for single-precision exactness checks.
pub const EXACT_TOL_SINGLE: f64 = 1e-4;
/// Allowed deviation from a transcribed TMS row.
pub const TMS_GOLDEN_TOL: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyResult {
    fn check(name: &'static str, failure: Option<String>, summary: impl Into<String>) -> Self {
        match failure {
            None => Self { name, passed: true, detail: summary.into() },
            Some(detail) => Self { name, passed: false, detail },
        }
    }
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<22} {}", self.name, self.detail)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    pub quick: bool,
}

/// Runs every property. Properties run in parallel when the `parallel`
/// feature is enabled; output order is fixed.
pub fn run_all(options: VerifyOptions) -> Vec<PropertyResult> {
    type Property = fn(VerifyOptions) -> PropertyResult;
    let props: Vec<Property> = vec![
        mask_exhaustive,
        tile_conservation,
        streaming_order,
        softmax_rows,
        numerical_stability,
        exactness,
        coverage,
        striped_balance,
        ring_imbalance,
        schedule_order,
        determinism,
        accounting_agrees,
        tms_golden,
        tms_monotonic,
    ];
    par::map_collect(props, true, |p| p(options))
}

fn mask_exhaustive(_: VerifyOptions) -> PropertyResult {
    let mut failure = None;
    let mut checked = 0u64;
    'outer: for n in [2, 3, 4, 8] {
        for c in [1, 2, 3, 5] {
            for j in 0..n {
                for k in 0..n {
                    let striped = Algo::Striped.mask(j, k, c, n).expect("in range");
                    let ring = Algo::Ring.mask(j, k, c, n).expect("in range");
                    for x in 0..c {
                        for y in 0..c {
                            checked += 2;
                            if striped.allows(x, y) != (k + y * n <= j + x * n) {
                                failure = Some(format!("striped N={n} c={c} j={j} k={k} pair ({x},{y})"));
                                break 'outer;
                            }
                            if ring.allows(x, y) != (k * c + y <= j * c + x) {
                                failure = Some(format!("ring N={n} c={c} j={j} k={k} pair ({x},{y})"));
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
    }
    PropertyResult::check("mask-exhaustive", failure, format!("{checked} pairs match global positions"))
}

fn tile_conservation(opts: VerifyOptions) -> PropertyResult {
    let max_block = if opts.quick { 24 } else { 64 };
    let kinds = [MaskKind::FullyMasked, MaskKind::FullyUnmasked, MaskKind::CausalInclusive, MaskKind::CausalExclusive];
    let mut grids = 0u64;
    for kind in kinds {
        for size in 1..=max_block {
            let divisors: Vec<usize> = (1..=size).filter(|d| size % d == 0).collect();
            for &tq in &divisors {
                for &tk in &divisors {
                    let mask = MaskSpec::new(kind, size, size);
                    grids += 1;
                    if let Some(why) = check_tiling(&mask, tq, tk) {
                        return PropertyResult::check(
                            "tile-conservation",
                            Some(format!("{kind} block {size} tile {tq}x{tk}: {why}")),
                            "",
                        );
                    }
                }
            }
        }
    }
    PropertyResult::check("tile-conservation", None, format!("{grids} tilings agree with pairwise enumeration"))
}

fn check_tiling(mask: &MaskSpec, tq: usize, tk: usize) -> Option<String> {
    let grid = classify_tiles(mask, tq, tk).ok()?;
    let area = tq * tk;
    let total = grid.count(TileClass::Skip) + grid.count(TileClass::Partial) + grid.count(TileClass::Full);
    if total * area != mask.block_rows * mask.block_cols {
        return Some("tile areas do not cover the block".into());
    }
    for a in 0..grid.tile_rows {
        for b in 0..grid.tile_cols {
            let allowed = (0..tq)
                .flat_map(|x| (0..tk).map(move |y| (x, y)))
                .filter(|&(x, y)| mask.allows(a * tq + x, b * tk + y))
                .count();
            let ok = match grid.get(a, b) {
                TileClass::Skip => allowed == 0,
                TileClass::Full => allowed == area,
                TileClass::Partial => allowed > 0 && allowed < area,
            };
            if !ok {
                return Some(format!("tile ({a},{b}) classified {:?} with {allowed}/{area} allowed", grid.get(a, b)));
            }
        }
    }
    let counts = mask.tile_counts(tq, tk).ok()?;
    if (counts.skipped, counts.partial, counts.full)
        != (
            grid.count(TileClass::Skip) as u64,
            grid.count(TileClass::Partial) as u64,
            grid.count(TileClass::Full) as u64,
        )
    {
        return Some("closed-form tile counts disagree with the grid".into());
    }
    None
}

/// Accumulates a causal problem with the key range cut at `cuts` and the
/// resulting tiles visited in `order`.
pub fn streamed_attention(
    q: &SequenceTensor<f64>,
    k: &SequenceTensor<f64>,
    v: &SequenceTensor<f64>,
    cuts: &[usize],
    order: &[usize],
) -> Result<SequenceTensor<f64>> {
    let n = q.rows();
    let mut bounds = vec![0];
    bounds.extend(cuts.iter().copied().filter(|&c| c > 0 && c < n));
    bounds.push(n);
    bounds.sort_unstable();
    bounds.dedup();
    let mut state = SoftmaxAccumulator::new(n, v.cols());
    let causal = MaskSpec::new(MaskKind::CausalInclusive, n, n);
    for &t in order {
        let (start, end) = (bounds[t], bounds[t + 1]);
        let mut tile = causal.tile_mask(0, 0, n, end - start);
        tile.col_start = start;
        state.accumulate_tile(
            0,
            q.view(),
            k.rows_view(start, end - start)?,
            v.rows_view(start, end - start)?,
            &tile,
            1.0,
        )?;
    }
    state.finalize()
}

fn streaming_order(opts: VerifyOptions) -> PropertyResult {
    let trials = if opts.quick { 20 } else { 100 };
    let mut worst = 0.0_f64;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=40);
        let d = rng.gen_range(1..=8);
        let q = SequenceTensor::random(n, d, &mut rng).unwrap();
        let k = SequenceTensor::random(n, d, &mut rng).unwrap();
        let v = SequenceTensor::random(n, rng.gen_range(1..=5), &mut rng).unwrap();
        let n_cuts = rng.gen_range(0..n.max(1));
        let cuts: Vec<usize> = (0..n_cuts).map(|_| rng.gen_range(0..n)).collect();
        let n_tiles = {
            let mut b: Vec<_> = cuts.iter().copied().filter(|&c| c > 0).collect();
            b.sort_unstable();
            b.dedup();
            b.len() + 1
        };
        let mut order: Vec<usize> = (0..n_tiles).collect();
        order.shuffle(&mut rng);
        let streamed = streamed_attention(&q, &k, &v, &cuts, &order).unwrap();
        let dense = oracle_causal_attention(&q, &k, &v).unwrap();
        let err = relative_error(&streamed, &dense);
        worst = worst.max(err);
        if err > EXACT_TOL_DOUBLE {
            return PropertyResult::check(
                "streaming-order",
                Some(format!("seed {seed}: n={n} tiles={n_tiles} relative error {err:.3e}")),
                "",
            );
        }
    }
    PropertyResult::check("streaming-order", None, format!("{trials} random tilings/orders, worst rel err {worst:.2e}"))
}

fn relative_error(a: &SequenceTensor<f64>, b: &SequenceTensor<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

fn softmax_rows(opts: VerifyOptions) -> PropertyResult {
    let seeds = if opts.quick { 3 } else { 10 };
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 33;
        let q = SequenceTensor::<f64>::random(n, 8, &mut rng).unwrap();
        let k = SequenceTensor::<f64>::random(n, 8, &mut rng).unwrap();
        let w = attention_weights(&q, &k, &OracleOptions::default()).unwrap();
        for i in 0..n {
            let sum: f64 = w.row(i).iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return PropertyResult::check("softmax-rows", Some(format!("seed {seed} row {i} sums to {sum}")), "");
            }
            if w.row(i)[i + 1..].iter().any(|&x| x != 0.0) {
                return PropertyResult::check(
                    "softmax-rows",
                    Some(format!("seed {seed} row {i} has weight above the diagonal")),
                    "",
                );
            }
        }
    }
    PropertyResult::check("softmax-rows", None, "rows sum to 1, upper triangle exactly 0")
}

fn numerical_stability(opts: VerifyOptions) -> PropertyResult {
    let seeds = if opts.quick { 5 } else { 20 };
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 24;
        // d = 1 and entries in [-100, 100] give scores across [-1e4, 1e4]
        let q = SequenceTensor::<f64>::from_fn(n, 1, |_, _| rng.gen_range(-100.0..100.0)).unwrap();
        let k = SequenceTensor::<f64>::from_fn(n, 1, |_, _| rng.gen_range(-100.0..100.0)).unwrap();
        let v = SequenceTensor::<f64>::random(n, 3, &mut rng).unwrap();
        let mut state = SoftmaxAccumulator::new(n, 3);
        let mask = MaskSpec::new(MaskKind::CausalInclusive, n, n);
        for b in 0..n / 4 {
            let tile = mask.tile_mask(0, b, n, 4);
            state
                .accumulate_tile(
                    0,
                    q.view(),
                    k.rows_view(b * 4, 4).unwrap(),
                    v.rows_view(b * 4, 4).unwrap(),
                    &tile,
                    1.0,
                )
                .unwrap();
            let finite = (0..n).all(|r| state.acc_row(r).iter().all(|x| x.is_finite()))
                && state.row_sum().iter().all(|x| x.is_finite());
            if !finite {
                return PropertyResult::check(
                    "numerical-stability",
                    Some(format!("seed {seed} tile {b}: non-finite state")),
                    "",
                );
            }
        }
    }
    PropertyResult::check("numerical-stability", None, "no NaN/inf for scores in [-1e4, 1e4]")
}

/// One exactness run.
#[derive(Clone, Debug)]
pub struct ExactnessCase {
    pub config: SimConfig,
    pub max_abs_error: f64,
    pub total_required: u64,
}

/// Default tiling for sweeps: half-block query tiles, quarter-block key tiles.
pub fn sweep_tiles(block: usize) -> (usize, usize) {
    let tq = (block / 2).max(1);
    let tk = (block / 4).max(1);
    (tq, tk)
}

/// Runs every (algo, N, n_seq, seed) combination with oracle checking.
pub fn exactness_sweep(
    algos: &[Algo],
    devices: &[usize],
    seq_lens: &[usize],
    seeds: &[u64],
    d_head: usize,
    precision: Precision,
) -> Result<Vec<ExactnessCase>> {
    let mut configs = Vec::new();
    for &algo in algos {
        for &n in devices {
            for &n_seq in seq_lens {
                for &seed in seeds {
                    let (tq, tk) = sweep_tiles(n_seq / n);
                    let mut cfg = SimConfig::new(algo, n, n_seq, d_head).with_tiles(tq, tk).with_seed(seed);
                    cfg.precision = precision;
                    cfg.check_oracle = true;
                    cfg.data_parallel = false;
                    cfg.executor = if seed % 2 == 0 { Executor::Threaded } else { Executor::Sequential };
                    configs.push(cfg);
                }
            }
        }
    }
    par::map_collect(configs, true, |config| {
        let run = simulate(&config)?;
        Ok(ExactnessCase {
            max_abs_error: run.oracle_max_abs_error.unwrap_or(f64::INFINITY),
            total_required: run.stats.total_required(),
            config,
        })
    })
    .into_iter()
    .collect()
}

fn describe(cfg: &SimConfig) -> String {
    format!(
        "{} N={} n_seq={} d_head={} tile={}x{} seed={} precision={}",
        cfg.algo, cfg.n_devices, cfg.n_seq, cfg.d_head, cfg.tile_q, cfg.tile_k, cfg.seed, cfg.precision
    )
}

fn exactness(opts: VerifyOptions) -> PropertyResult {
    let seeds: Vec<u64> = if opts.quick { vec![1, 2] } else { (1..=5).collect() };
    let algos = [Algo::Ring, Algo::Striped];
    let mut worst = 0.0_f64;
    let sweeps =
        [(Precision::Double, EXACT_TOL_DOUBLE, vec![16, 64, 256]), (Precision::Single, EXACT_TOL_SINGLE, vec![16, 64])];
    let mut cases = 0;
    for (precision, tol, lens) in sweeps {
        let results = match exactness_sweep(&algos, &[2, 4, 8], &lens, &seeds, 16, precision) {
            Ok(r) => r,
            Err(e) => return PropertyResult::check("exactness", Some(format!("simulation error: {e}")), ""),
        };
        for case in &results {
            if case.max_abs_error > tol {
                return PropertyResult::check(
                    "exactness",
                    Some(format!("{}: max abs error {:.3e} > {tol:.0e}", describe(&case.config), case.max_abs_error)),
                    "",
                );
            }
            if precision == Precision::Double {
                worst = worst.max(case.max_abs_error);
            }
        }
        cases += results.len();
    }
    PropertyResult::check("exactness", None, format!("{cases} runs match the oracle, worst double error {worst:.2e}"))
}

fn coverage(opts: VerifyOptions) -> PropertyResult {
    let lens: &[usize] = if opts.quick { &[16, 64] } else { &[16, 64, 256] };
    for algo in [Algo::Ring, Algo::Striped] {
        for n in [2, 4, 8] {
            for &n_seq in lens {
                if let Some(why) = coverage_failure(algo, n, n_seq) {
                    return PropertyResult::check("coverage", Some(format!("{algo} N={n} n_seq={n_seq}: {why}")), "");
                }
            }
        }
    }
    PropertyResult::check("coverage", None, "every causal pair computed exactly once")
}

/// Enumerates the unmasked pairs every device visits and maps them back to
/// global positions. Returns a description of the first violation.
pub fn coverage_failure(algo: Algo, n_devices: usize, n_seq: usize) -> Option<String> {
    let layout = match Layout::new(algo.scheme(), n_seq, n_devices) {
        Ok(l) => l,
        Err(e) => return Some(e.to_string()),
    };
    let c = layout.block_size();
    let mut seen = vec![0u8; n_seq * n_seq];
    for i in 0..n_devices {
        for j in 0..n_devices {
            let k = (j + n_devices - i) % n_devices;
            let mask = match algo.mask(j, k, c, n_devices) {
                Ok(m) => m,
                Err(e) => return Some(e.to_string()),
            };
            for x in 0..c {
                for y in 0..c {
                    if !mask.allows(x, y) {
                        continue;
                    }
                    let (qg, kg) =
                        (layout.global_of(j, x).expect("in range"), layout.global_of(k, y).expect("in range"));
                    if kg > qg {
                        return Some(format!("round {i} device {j} computes non-causal pair ({qg},{kg})"));
                    }
                    seen[qg * n_seq + kg] += 1;
                }
            }
        }
    }
    for qg in 0..n_seq {
        for kg in 0..=qg {
            let count = seen[qg * n_seq + kg];
            if count != 1 {
                return Some(format!("pair ({qg},{kg}) computed {count} times"));
            }
        }
    }
    let cfg = SimConfig::new(algo, n_devices, n_seq, 1).with_tiles(1, 1);
    let total = match account_schedule(&cfg) {
        Ok(s) => s.total_required(),
        Err(e) => return Some(e.to_string()),
    };
    let expected = (n_seq * (n_seq + 1) / 2) as u64;
    (total != expected).then(|| format!("total required {total} != {expected}"))
}

fn striped_balance(opts: VerifyOptions) -> PropertyResult {
    let blocks: &[usize] = if opts.quick { &[2, 8, 64] } else { &[2, 3, 8, 64, 100] };
    for &c in blocks {
        for n in [2, 4, 8] {
            let cfg = SimConfig::new(Algo::Striped, n, n * c, 1).with_tiles(1, 1);
            let stats = account_schedule(&cfg).expect("valid config");
            let (hi, lo) = ((c * (c + 1) / 2) as u64, (c * (c - 1) / 2) as u64);
            for i in 0..n {
                let round = stats.round(i).expect("round exists");
                let max = round.iter().map(|r| r.interactions_required).max().unwrap();
                let min = round.iter().map(|r| r.interactions_required).min().unwrap();
                let all_valid = round.iter().all(|r| r.interactions_required == hi || r.interactions_required == lo);
                let ratio_ok = if i == 0 { max == hi && min == hi } else { max == hi && min == lo };
                if !all_valid || !ratio_ok {
                    return PropertyResult::check(
                        "striped-balance",
                        Some(format!("N={n} c={c} round {i}: required in [{min}, {max}], expected {{{lo}, {hi}}}")),
                        "",
                    );
                }
            }
        }
    }
    PropertyResult::check("striped-balance", None, "per-device work is c(c+1)/2 or c(c-1)/2 every round")
}

fn ring_imbalance(opts: VerifyOptions) -> PropertyResult {
    let blocks: &[usize] = if opts.quick { &[2, 64] } else { &[1, 2, 3, 64, 100] };
    for &c in blocks {
        for n in [2, 4, 8] {
            let stats =
                account_schedule(&SimConfig::new(Algo::Ring, n, n * c, 1).with_tiles(1, 1)).expect("valid config");
            for i in 1..n {
                let round = stats.round(i).expect("round exists");
                let has_zero = round.iter().any(|r| r.interactions_required == 0);
                let has_full = round.iter().any(|r| r.interactions_required == (c * c) as u64);
                if !has_zero || !has_full {
                    return PropertyResult::check(
                        "ring-imbalance",
                        Some(format!("N={n} c={c} round {i} lacks an idle or saturated device")),
                        "",
                    );
                }
            }
        }
    }
    PropertyResult::check("ring-imbalance", None, "every round after the first has idle and saturated devices")
}

fn schedule_order(_: VerifyOptions) -> PropertyResult {
    for algo in [Algo::Ring, Algo::Striped] {
        for n in [2, 3, 4, 8] {
            let cfg = SimConfig::new(algo, n, n * 4, 2).with_seed(9);
            let run = match simulate(&cfg) {
                Ok(r) => r,
                Err(e) => return PropertyResult::check("schedule", Some(format!("{}: {e}", describe(&cfg))), ""),
            };
            for w in &run.stats.devices {
                for (i, r) in w.rounds.iter().enumerate() {
                    if r.round != i || r.block_index != (w.device + n - i) % n {
                        return PropertyResult::check(
                            "schedule",
                            Some(format!(
                                "{}: device {} round {i} held block {}",
                                describe(&cfg),
                                w.device,
                                r.block_index
                            )),
                            "",
                        );
                    }
                }
            }
        }
    }
    PropertyResult::check("schedule", None, "device j holds block (j - i) mod N on round i")
}

fn determinism(opts: VerifyOptions) -> PropertyResult {
    let seeds: &[u64] = if opts.quick { &[3] } else { &[3, 4, 5] };
    for &seed in seeds {
        for algo in [Algo::Ring, Algo::Striped] {
            let base = SimConfig::new(algo, 4, 64, 8).with_tiles(4, 8).with_seed(seed);
            let variants = [
                (Executor::Threaded, true),
                (Executor::Threaded, false),
                (Executor::Sequential, true),
                (Executor::Sequential, false),
            ];
            let mut reference: Option<(Vec<u64>, _)> = None;
            for (executor, data_parallel) in variants {
                let cfg = SimConfig { executor, data_parallel, ..base.clone() };
                let run = simulate(&cfg).expect("valid config");
                let bits: Vec<u64> = run.output.as_slice().iter().map(|x| x.to_bits()).collect();
                match &reference {
                    None => reference = Some((bits, run.stats)),
                    Some((ref_bits, ref_stats)) => {
                        if *ref_bits != bits || *ref_stats != run.stats {
                            return PropertyResult::check(
                                "determinism",
                                Some(format!(
                                    "{} differs under {executor:?}, data_parallel={data_parallel}",
                                    describe(&cfg)
                                )),
                                "",
                            );
                        }
                    }
                }
            }
        }
    }
    PropertyResult::check("determinism", None, "bit-identical across executors and repeated runs")
}

fn accounting_agrees(_: VerifyOptions) -> PropertyResult {
    for algo in [Algo::Ring, Algo::Striped] {
        for (n, n_seq, tq, tk) in [(2, 16, 2, 4), (4, 64, 4, 2), (4, 64, 1, 1), (8, 128, 16, 16), (3, 36, 6, 4)] {
            let cfg = SimConfig::new(algo, n, n_seq, 2).with_tiles(tq, tk);
            let executed = simulate(&cfg).expect("valid config").stats;
            let counted = account_schedule(&cfg).expect("valid config");
            if executed != counted {
                return PropertyResult::check(
                    "accounting",
                    Some(format!("{}: executed and closed-form stats differ", describe(&cfg))),
                    "",
                );
            }
            if let Some(r) = executed.rows().iter().find(|r| !r.is_consistent(executed.tile_area())) {
                return PropertyResult::check(
                    "accounting",
                    Some(format!("{}: inconsistent row {r:?}", describe(&cfg))),
                    "",
                );
            }
        }
    }
    PropertyResult::check("accounting", None, "executed tile stats equal the closed-form counts")
}

/// Transcribed anchor rows: (model, sp, flop weight, n_seq, TMS).
pub const TMS_ANCHORS: [(&str, u64, f64, u64, f64); 6] = [
    ("1b", 4, 2.0, 262144, 1.72),
    ("1b", 4, 2.0, 32768, 1.57),
    ("3b", 4, 2.0, 262144, 1.71),
    ("7b", 8, 1.0, 32768, 1.40),
    ("1b", 8, 1.0, 786432, 1.85),
    ("3b", 8, 1.0, 786432, 1.84),
];

fn tms_golden(_: VerifyOptions) -> PropertyResult {
    for (model, sp, w, n_seq, expected) in TMS_ANCHORS {
        let preset = ModelPreset::builtin(model).expect("builtin");
        let got = cost::round2(cost::tms(&TmsQuery { preset, n_seq, sp, flop_weight: w }).expect("valid query"));
        if got != expected {
            return PropertyResult::check(
                "tms-golden",
                Some(format!("anchor {model} sp={sp} w={w} n_seq={n_seq}: {got} != {expected}")),
                "",
            );
        }
    }
    let rows = cost::builtin_golden();
    let cmp = match cost::compare_golden(&rows, ModelPreset::resolve) {
        Ok(c) => c,
        Err(e) => return PropertyResult::check("tms-golden", Some(e.to_string()), ""),
    };
    let off: Vec<_> = cmp.iter().filter(|c| !c.within(TMS_GOLDEN_TOL)).collect();
    let exact = cmp.iter().filter(|c| c.delta.abs() < 1e-9).count();
    if let Some(c) = off.first() {
        return PropertyResult::check(
            "tms-golden",
            Some(format!(
                "{} rows outside ±{TMS_GOLDEN_TOL}; first: {} {} {}x{} n_seq={} table {} model {:.4}",
                off.len(),
                c.row.hardware,
                c.row.model,
                c.row.mesh_mp,
                c.row.mesh_sp,
                c.row.n_seq,
                c.row.tms,
                c.computed
            )),
            "",
        );
    }
    PropertyResult::check(
        "tms-golden",
        None,
        format!("{}/{} table rows exact at 2 decimals, all within ±{TMS_GOLDEN_TOL}", exact, cmp.len()),
    )
}

fn tms_monotonic(_: VerifyOptions) -> PropertyResult {
    for preset in ModelPreset::builtins() {
        for w in [1.0, 2.0] {
            for sp in [2u64, 4, 8, 16] {
                let series: Vec<f64> = (10..22)
                    .map(|p| {
                        cost::tms(&TmsQuery { preset: preset.clone(), n_seq: sp << p, sp, flop_weight: w })
                            .expect("valid")
                    })
                    .collect();
                if series.windows(2).any(|p| p[1] <= p[0]) {
                    return PropertyResult::check(
                        "tms-monotonic",
                        Some(format!("{} sp={sp} w={w}: not increasing in n_seq", preset.name)),
                        "",
                    );
                }
            }
            let by_sp: Vec<f64> = [2u64, 4, 8, 16]
                .iter()
                .map(|&sp| {
                    cost::tms(&TmsQuery { preset: preset.clone(), n_seq: 1 << 18, sp, flop_weight: w }).expect("valid")
                })
                .collect();
            if by_sp.windows(2).any(|p| p[1] <= p[0]) {
                return PropertyResult::check(
                    "tms-monotonic",
                    Some(format!("{} w={w}: not increasing in sp", preset.name)),
                    "",
                );
            }
        }
    }
    PropertyResult::check("tms-monotonic", None, "increasing in sequence length and sequence parallelism")
}
