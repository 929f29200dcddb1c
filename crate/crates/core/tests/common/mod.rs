#![allow(dead_code)]

use ringsim::SequenceTensor;

/// Textbook causal attention: full score matrix, explicit -inf above the
/// diagonal, max-subtracted softmax, then a weighted sum of value rows.
pub fn naive_causal_attention(q: &SequenceTensor, k: &SequenceTensor, v: &SequenceTensor, scale: f64) -> Vec<Vec<f64>> {
    let n = q.rows();
    let mut out = Vec::with_capacity(n);
    for x in 0..n {
        let scores: Vec<f64> = (0..n)
            .map(|y| {
                if y > x {
                    f64::NEG_INFINITY
                } else {
                    scale * q.row(x).iter().zip(k.row(y)).map(|(a, b)| a * b).sum::<f64>()
                }
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut row = vec![0.0; v.cols()];
        for (y, w) in e.iter().enumerate() {
            for (o, val) in row.iter_mut().zip(v.row(y)) {
                *o += w / z * val;
            }
        }
        out.push(row);
    }
    out
}

pub fn max_abs_diff_rows(t: &SequenceTensor, rows: &[Vec<f64>]) -> f64 {
    rows.iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, x)| (i, j, *x)))
        .map(|(i, j, x)| (t.get(i, j) - x).abs())
        .fold(0.0, f64::max)
}

pub fn triangle(n: u64) -> u64 {
    n * (n + 1) / 2
}
