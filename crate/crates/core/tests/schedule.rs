mod common;

use common::{max_abs_diff_rows, naive_causal_attention, triangle};
use proptest::prelude::*;
use ringsim::layout::gather_companion;
use ringsim::mask::MaskSpec;
use ringsim::oracle::oracle_causal_attention_with;
use ringsim::sim::{account_schedule, random_inputs, run_schedule, run_schedule_with, simulate, simulated_speedup};
use ringsim::verify::streamed_attention;
use ringsim::{
    gather, oracle_causal_attention, partition, Algo, Executor, Layout, MaskKind, OracleOptions, Precision, Scheme,
    SequenceTensor, SimConfig,
};

fn speedup(n: usize, c: usize) -> f64 {
    let ring = account_schedule(&SimConfig::new(Algo::Ring, n, n * c, 1).with_tiles(1, 1)).unwrap();
    let striped = account_schedule(&SimConfig::new(Algo::Striped, n, n * c, 1).with_tiles(1, 1)).unwrap();
    simulated_speedup(&ring, &striped).unwrap()
}

fn closed_form_speedup(n: usize, c: usize) -> f64 {
    let c = c as f64;
    let tri = c * (c + 1.0) / 2.0;
    (tri + (n as f64 - 1.0) * c * c) / (n as f64 * tri)
}

#[test]
fn library_oracle_matches_naive_reference() {
    for seed in 0..4 {
        let cfg = SimConfig::new(Algo::Ring, 2, 8, 3).with_seed(seed);
        let [q, k, v] = random_inputs(&cfg).unwrap();
        let lib = oracle_causal_attention(&q, &k, &v).unwrap();
        assert!(max_abs_diff_rows(&lib, &naive_causal_attention(&q, &k, &v, 1.0)) <= 1e-12);
        let scaled =
            oracle_causal_attention_with(&q, &k, &v, &OracleOptions { scaled: true, parallel: false }).unwrap();
        let naive = naive_causal_attention(&q, &k, &v, 1.0 / 3f64.sqrt());
        assert!(max_abs_diff_rows(&scaled, &naive) <= 1e-12);
    }
}

#[test]
fn both_layouts_agree_with_each_other() {
    for seed in 0..3 {
        let ring = simulate(&SimConfig::new(Algo::Ring, 4, 64, 8).with_seed(seed)).unwrap();
        let striped = simulate(&SimConfig::new(Algo::Striped, 4, 64, 8).with_seed(seed)).unwrap();
        assert!(ring.output.max_abs_diff(&striped.output).unwrap() <= 1e-12);
    }
}

#[test]
fn two_tile_streaming_is_order_independent() {
    let cfg = SimConfig::new(Algo::Ring, 2, 24, 5).with_seed(9);
    let [q, k, v] = random_inputs(&cfg).unwrap();
    let dense = oracle_causal_attention(&q, &k, &v).unwrap();
    for cut in [1, 7, 12, 23] {
        let fwd = streamed_attention(&q, &k, &v, &[cut], &[0, 1]).unwrap();
        let rev = streamed_attention(&q, &k, &v, &[cut], &[1, 0]).unwrap();
        assert!(fwd.max_abs_diff(&rev).unwrap() <= 1e-12, "cut {cut}");
        assert!(fwd.max_abs_diff(&dense).unwrap() <= 1e-12, "cut {cut}");
    }
}

#[test]
fn flipped_striped_mask_is_caught() {
    let cfg = SimConfig::new(Algo::Striped, 4, 32, 4).with_seed(2);
    let layout = cfg.layout().unwrap();
    let [q, k, v] = random_inputs(&cfg).unwrap();
    let batch = partition(&layout, &q, &k, &v, &[]).unwrap();
    // inclusive and exclusive swapped
    let wrong = |j: usize, kb: usize, c: usize, _n: usize| {
        let kind = if kb <= j { MaskKind::CausalExclusive } else { MaskKind::CausalInclusive };
        Ok(MaskSpec::new(kind, c, c))
    };
    // device 0 holds only excluded keys on round 0 under the flipped mask
    let err = run_schedule_with(&cfg, &batch, &wrong).unwrap_err();
    assert!(matches!(err, ringsim::Error::UnattendedRow { .. }), "{err}");

    // a subtler mutation: only the off-diagonal rounds are flipped
    let subtle = |j: usize, kb: usize, c: usize, _n: usize| {
        let kind = if kb < j { MaskKind::CausalExclusive } else { MaskKind::CausalInclusive };
        Ok(MaskSpec::new(kind, c, c))
    };
    let out = run_schedule_with(&cfg, &batch, &subtle).unwrap();
    let got = gather(&layout, &out.outputs).unwrap();
    let err = got.max_abs_diff(&oracle_causal_attention(&q, &k, &v).unwrap()).unwrap();
    assert!(err > 1e-3, "mutated mask went unnoticed ({err:e})");

    let ok = run_schedule(&cfg, &batch).unwrap();
    let got = gather(&layout, &ok.outputs).unwrap();
    assert!(got.max_abs_diff(&oracle_causal_attention(&q, &k, &v).unwrap()).unwrap() <= 1e-12);
}

#[test]
fn single_precision_is_close() {
    for algo in [Algo::Ring, Algo::Striped] {
        let mut cfg = SimConfig::new(algo, 4, 64, 16).with_tiles(8, 4).with_seed(4);
        cfg.precision = Precision::Single;
        cfg.check_oracle = true;
        let run = simulate(&cfg).unwrap();
        assert!(run.oracle_max_abs_error.unwrap() <= 1e-4);
    }
}

#[test]
fn scaled_scores_match_reference() {
    let mut cfg = SimConfig::new(Algo::Striped, 2, 32, 16).with_tiles(4, 8).with_seed(6);
    cfg.scaled = true;
    let run = simulate(&cfg).unwrap();
    let [q, k, v] = random_inputs(&cfg).unwrap();
    assert!(max_abs_diff_rows(&run.output, &naive_causal_attention(&q, &k, &v, 0.25)) <= 1e-12);
}

#[test]
fn executors_are_bit_identical() {
    for algo in [Algo::Ring, Algo::Striped] {
        let base = SimConfig::new(algo, 4, 64, 8).with_tiles(4, 2).with_seed(8);
        let mut outs = Vec::new();
        for executor in [Executor::Threaded, Executor::Sequential] {
            for data_parallel in [true, false] {
                let cfg = SimConfig { executor, data_parallel, ..base.clone() };
                outs.push(simulate(&cfg).unwrap());
            }
        }
        for run in &outs[1..] {
            assert_eq!(run.output, outs[0].output);
            assert_eq!(run.stats, outs[0].stats);
        }
    }
}

#[test]
fn accounting_matches_execution() {
    for algo in [Algo::Ring, Algo::Striped] {
        for (tq, tk) in [(1, 1), (2, 4), (8, 8), (4, 1), (16, 16)] {
            let cfg = SimConfig::new(algo, 4, 64, 2).with_tiles(tq, tk);
            let run = simulate(&cfg).unwrap();
            assert_eq!(run.stats, account_schedule(&cfg).unwrap(), "{algo} {tq}x{tk}");
            assert_eq!(run.stats.total_required(), triangle(64));
        }
    }
}

#[test]
fn position_ids_round_trip() {
    for scheme in [Scheme::Contiguous, Scheme::Striped] {
        let layout = Layout::new(scheme, 24, 4).unwrap();
        let t = SequenceTensor::from_fn(24, 2, |r, c| (r * 2 + c) as f64).unwrap();
        let ids: Vec<i64> = (0..24).collect();
        let targets: Vec<i64> = (0..24).map(|i| 100 + i).collect();
        let batch = partition(&layout, &t, &t, &t, &[ids.clone(), targets.clone()]).unwrap();
        for (d, shard) in batch.shards.iter().enumerate() {
            for (x, &g) in shard.companions[0].iter().enumerate() {
                assert_eq!(layout.global_of(d, x).unwrap() as i64, g);
                assert_eq!(shard.companions[1][x], 100 + g);
            }
        }
        assert_eq!(gather_companion(&layout, &batch.shards, 0).unwrap(), ids);
        assert_eq!(gather_companion(&layout, &batch.shards, 1).unwrap(), targets);
    }
}

#[test]
fn speedup_matches_closed_form() {
    let got = speedup(4, 1024);
    assert!((got - closed_form_speedup(4, 1024)).abs() < 1e-12);
    assert!((got - 1.7485).abs() < 1e-4, "{got}");
    let two = speedup(2, 4096);
    assert!((two - closed_form_speedup(2, 4096)).abs() < 1e-12);
    assert!(two < 1.5 && 1.5 - two < 1e-3, "{two}");
    let seq: Vec<f64> = [16, 64, 256, 1024].iter().map(|&c| speedup(2, c)).collect();
    assert!(seq.windows(2).all(|w| w[0] < w[1]), "{seq:?}");
}

#[test]
fn speedup_rejects_mismatched_runs() {
    let a = account_schedule(&SimConfig::new(Algo::Ring, 4, 64, 1)).unwrap();
    let b = account_schedule(&SimConfig::new(Algo::Striped, 2, 64, 1)).unwrap();
    assert!(simulated_speedup(&a, &b).is_err());
    assert!(simulated_speedup(&b, &a).is_err());
}

fn small_config() -> impl Strategy<Value = SimConfig> {
    (prop::sample::select(vec![2usize, 3, 4, 8]), 1usize..=6, 1usize..=6, 0u64..1000, any::<bool>()).prop_flat_map(
        |(n, c, d, seed, striped)| {
            let divisors: Vec<usize> = (1..=c).filter(|t| c % t == 0).collect();
            (prop::sample::select(divisors.clone()), prop::sample::select(divisors)).prop_map(move |(tq, tk)| {
                let algo = if striped { Algo::Striped } else { Algo::Ring };
                SimConfig::new(algo, n, n * c, d).with_tiles(tq, tk).with_seed(seed)
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_small_schedule_is_exact(cfg in small_config()) {
        let run = simulate(&cfg).unwrap();
        let [q, k, v] = random_inputs(&cfg).unwrap();
        prop_assert!(max_abs_diff_rows(&run.output, &naive_causal_attention(&q, &k, &v, 1.0)) <= 1e-12);
        prop_assert_eq!(run.stats.total_required(), triangle(cfg.n_seq as u64));
        prop_assert_eq!(&run.stats, &account_schedule(&cfg).unwrap());
        for r in run.stats.rows() {
            prop_assert!(r.is_consistent((cfg.tile_q * cfg.tile_k) as u64));
        }
    }

    #[test]
    fn gather_inverts_partition(n in prop::sample::select(vec![2usize, 4, 8]), c in 1usize..=12, width in 1usize..=4, striped in any::<bool>()) {
        let scheme = if striped { Scheme::Striped } else { Scheme::Contiguous };
        let layout = Layout::new(scheme, n * c, n).unwrap();
        let t = SequenceTensor::from_fn(n * c, width, |r, col| (r * 31 + col) as f64).unwrap();
        let ids: Vec<i64> = (0..(n * c) as i64).collect();
        let batch = partition(&layout, &t, &t, &t, std::slice::from_ref(&ids)).unwrap();
        let qs: Vec<_> = batch.shards.iter().map(|s| s.q.clone()).collect();
        prop_assert_eq!(gather(&layout, &qs).unwrap(), t);
        prop_assert_eq!(gather_companion(&layout, &batch.shards, 0).unwrap(), ids);
    }
}
