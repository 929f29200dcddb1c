//! Dense reference implementation of causal self-attention.
//!
//! This materializes the full score matrix and is only meant for checking
//! distributed runs on small problems.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{dot, Scalar, SequenceTensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    /// Multiply scores by `1/sqrt(d_head)`. Off by default.
    pub scaled: bool,
    /// Compute rows in parallel when the `parallel` feature is enabled.
    pub parallel: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { scaled: false, parallel: true }
    }
}

/// Score multiplier for a head dimension under the given scaling policy.
pub fn score_scale<T: Scalar>(d_head: usize, scaled: bool) -> T {
    if scaled {
        T::one() / T::of(d_head as f64).sqrt()
    } else {
        T::one()
    }
}

fn check_shapes<T: Scalar>(q: &SequenceTensor<T>, k: &SequenceTensor<T>, v: &SequenceTensor<T>) -> Result<()> {
    if q.rows() != k.rows() || q.rows() != v.rows() {
        return Err(Error::DimensionMismatch(format!(
            "Q, K, V row counts {}, {}, {} differ",
            q.rows(),
            k.rows(),
            v.rows()
        )));
    }
    if q.cols() != k.cols() {
        return Err(Error::DimensionMismatch(format!("Q width {} vs K width {}", q.cols(), k.cols())));
    }
    Ok(())
}

/// Dense causal attention weights `Softmax(QK^T + C)`, one row per query.
pub fn attention_weights<T: Scalar>(
    q: &SequenceTensor<T>,
    k: &SequenceTensor<T>,
    options: &OracleOptions,
) -> Result<SequenceTensor<T>> {
    if q.rows() != k.rows() || q.cols() != k.cols() {
        return Err(Error::DimensionMismatch(format!(
            "Q is {}x{}, K is {}x{}",
            q.rows(),
            q.cols(),
            k.rows(),
            k.cols()
        )));
    }
    let n = q.rows();
    let scale = score_scale::<T>(q.cols(), options.scaled);
    let rows = par::map_collect((0..n).collect(), options.parallel, |i| {
        let mut row: Vec<T> =
            (0..n).map(|j| if j <= i { scale * dot(q.row(i), k.row(j)) } else { T::neg_infinity() }).collect();
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for s in row.iter_mut() {
            *s = if *s == T::neg_infinity() { T::zero() } else { (*s - max).exp() };
            total = total + *s;
        }
        row.iter_mut().for_each(|p| *p = *p / total);
        row
    });
    SequenceTensor::new(n, n, rows.concat())
}

/// `Softmax(QK^T + C) V` with the causal mask `C`, unscaled.
pub fn oracle_causal_attention<T: Scalar>(
    q: &SequenceTensor<T>,
    k: &SequenceTensor<T>,
    v: &SequenceTensor<T>,
) -> Result<SequenceTensor<T>> {
    oracle_causal_attention_with(q, k, v, &OracleOptions::default())
}

pub fn oracle_causal_attention_with<T: Scalar>(
    q: &SequenceTensor<T>,
    k: &SequenceTensor<T>,
    v: &SequenceTensor<T>,
    options: &OracleOptions,
) -> Result<SequenceTensor<T>> {
    check_shapes(q, k, v)?;
    let weights = attention_weights(q, k, options)?;
    let width = v.cols();
    let rows = par::map_collect((0..q.rows()).collect(), options.parallel, |i| {
        let mut out = vec![T::zero(); width];
        for (j, &p) in weights.row(i).iter().enumerate().take(i + 1) {
            for (o, &vj) in out.iter_mut().zip(v.row(j)) {
                *o = *o + p * vj;
            }
        }
        out
    });
    SequenceTensor::new(q.rows(), width, rows.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token_returns_its_value() {
        let q = SequenceTensor::from_rows(&[vec![3.0, -1.0]]).unwrap();
        let k = SequenceTensor::from_rows(&[vec![0.2, 7.0]]).unwrap();
        let v = SequenceTensor::from_rows(&[vec![5.0, 6.0, 7.0]]).unwrap();
        let out = oracle_causal_attention(&q, &k, &v).unwrap();
        assert_eq!(out.as_slice(), &[5.0, 6.0, 7.0]);
    }

    #[test]
    fn zero_scores_average_allowed_values() {
        let q = SequenceTensor::<f64>::zeros(2, 2).unwrap();
        let v = SequenceTensor::from_rows(&[vec![1.0, 3.0], vec![5.0, -1.0]]).unwrap();
        let out = oracle_causal_attention(&q, &q, &v).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let a = SequenceTensor::<f64>::zeros(3, 2).unwrap();
        let b = SequenceTensor::<f64>::zeros(2, 2).unwrap();
        let c = SequenceTensor::<f64>::zeros(3, 4).unwrap();
        assert!(oracle_causal_attention(&a, &b, &a).is_err());
        assert!(oracle_causal_attention(&a, &a, &b).is_err());
        assert!(oracle_causal_attention(&a, &c, &a).is_err());
        // value width is free
        assert!(oracle_causal_attention(&a, &a, &c).is_ok());
    }

    #[test]
    fn scaling_divides_scores() {
        let q = SequenceTensor::from_rows(&[vec![1.0; 4], vec![2.0; 4]]).unwrap();
        let w = attention_weights(&q, &q, &OracleOptions { scaled: true, parallel: false }).unwrap();
        // scores row 1: 8/2 = 4 and 16/2 = 8
        let expected = 1.0 / (1.0 + (4.0_f64 - 8.0).exp());
        assert!((w.get(1, 1) - expected).abs() < 1e-15);
    }
}
