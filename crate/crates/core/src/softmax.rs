//! Streaming (online) softmax accumulation over key tiles.

use crate::error::{Error, Result};
use crate::mask::TileMask;
use crate::tensor::{dot, RowsView, Scalar, SequenceTensor};

/// Running state for one query block: unnormalized output rows, row maxima
/// and row sums of exponentials.
///
/// A row with `sum == 0` has not seen any unmasked score yet; its maximum is
/// `-inf` and its output row is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxAccumulator<T = f64> {
    rows: usize,
    cols: usize,
    acc: Vec<T>,
    max: Vec<T>,
    sum: Vec<T>,
}

/// Mutable borrow of a contiguous band of accumulator rows.
pub struct AccumulatorRows<'a, T> {
    row_start: usize,
    cols: usize,
    acc: &'a mut [T],
    max: &'a mut [T],
    sum: &'a mut [T],
}

impl<T: Scalar> SoftmaxAccumulator<T> {
    /// Fresh state for `rows` queries producing `cols`-wide output rows.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            acc: vec![T::zero(); rows * cols],
            max: vec![T::neg_infinity(); rows],
            sum: vec![T::zero(); rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn acc_row(&self, row: usize) -> &[T] {
        &self.acc[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_max(&self) -> &[T] {
        &self.max
    }

    pub fn row_sum(&self) -> &[T] {
        &self.sum
    }

    /// Splits the state into bands of `band_rows` rows for independent updates.
    pub fn bands_mut(&mut self, band_rows: usize) -> Vec<AccumulatorRows<'_, T>> {
        let cols = self.cols;
        self.acc
            .chunks_mut(band_rows * cols)
            .zip(self.max.chunks_mut(band_rows))
            .zip(self.sum.chunks_mut(band_rows))
            .enumerate()
            .map(|(i, ((acc, max), sum))| AccumulatorRows { row_start: i * band_rows, cols, acc, max, sum })
            .collect()
    }

    /// Folds one tile into the state. `q` covers accumulator rows
    /// `row_start..row_start + q.rows()`; `k` and `v` hold the tile's keys and
    /// values; `mask` gives the allowed pairs in tile-local coordinates.
    /// Scores are `scale * q . k`.
    pub fn accumulate_tile(
        &mut self,
        row_start: usize,
        q: RowsView<'_, T>,
        k: RowsView<'_, T>,
        v: RowsView<'_, T>,
        mask: &TileMask,
        scale: T,
    ) -> Result<()> {
        if row_start + q.rows() > self.rows {
            return Err(Error::DimensionMismatch(format!(
                "tile rows {}..{} exceed accumulator rows {}",
                row_start,
                row_start + q.rows(),
                self.rows
            )));
        }
        let cols = self.cols;
        let rows = row_start..row_start + q.rows();
        let mut band = AccumulatorRows {
            row_start,
            cols,
            acc: &mut self.acc[rows.start * cols..rows.end * cols],
            max: &mut self.max[rows.clone()],
            sum: &mut self.sum[rows],
        };
        band.accumulate_tile(0, q, k, v, mask, scale)
    }

    /// Normalizes each output row by its running sum.
    pub fn finalize(&self) -> Result<SequenceTensor<T>> {
        if let Some(row) = self.sum.iter().position(|&l| l <= T::zero()) {
            return Err(Error::UnattendedRow { row });
        }
        let mut data = self.acc.clone();
        for (row, &l) in data.chunks_mut(self.cols).zip(&self.sum) {
            row.iter_mut().for_each(|x| *x = *x / l);
        }
        SequenceTensor::new(self.rows, self.cols, data)
    }
}

impl<'a, T: Scalar> AccumulatorRows<'a, T> {
    pub fn row_start(&self) -> usize {
        self.row_start
    }

    pub fn rows(&self) -> usize {
        self.max.len()
    }

    /// Same contract as [`SoftmaxAccumulator::accumulate_tile`], with
    /// `offset` counted from the start of this band.
    pub fn accumulate_tile(
        &mut self,
        offset: usize,
        q: RowsView<'_, T>,
        k: RowsView<'_, T>,
        v: RowsView<'_, T>,
        mask: &TileMask,
        scale: T,
    ) -> Result<()> {
        if offset + q.rows() > self.rows() {
            return Err(Error::DimensionMismatch("tile rows exceed band".into()));
        }
        if k.rows() != v.rows() {
            return Err(Error::DimensionMismatch(format!("{} keys but {} values", k.rows(), v.rows())));
        }
        if q.cols() != k.cols() {
            return Err(Error::DimensionMismatch(format!("query width {} vs key width {}", q.cols(), k.cols())));
        }
        if v.cols() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "value width {} vs accumulator width {}",
                v.cols(),
                self.cols
            )));
        }
        if mask.rows != q.rows() || mask.cols != k.rows() {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs tile {}x{}",
                mask.rows,
                mask.cols,
                q.rows(),
                k.rows()
            )));
        }

        let mut scores = vec![T::neg_infinity(); k.rows()];
        for x in 0..q.rows() {
            let qx = q.row(x);
            let mut tile_max = T::neg_infinity();
            for (y, s) in scores.iter_mut().enumerate() {
                *s = if mask.allows(x, y) { scale * dot(qx, k.row(y)) } else { T::neg_infinity() };
                tile_max = tile_max.max(*s);
            }
            if tile_max == T::neg_infinity() {
                continue;
            }
            let r = offset + x;
            let old_max = self.max[r];
            let new_max = old_max.max(tile_max);
            let rescale = if old_max == T::neg_infinity() { T::zero() } else { (old_max - new_max).exp() };
            let acc = &mut self.acc[r * self.cols..(r + 1) * self.cols];
            acc.iter_mut().for_each(|a| *a = *a * rescale);
            let mut row_sum = T::zero();
            for (y, &s) in scores.iter().enumerate() {
                if s == T::neg_infinity() {
                    continue;
                }
                let p = (s - new_max).exp();
                row_sum = row_sum + p;
                for (a, &vy) in acc.iter_mut().zip(v.row(y)) {
                    *a = *a + p * vy;
                }
            }
            self.sum[r] = self.sum[r] * rescale + row_sum;
            self.max[r] = new_max;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{MaskKind, MaskSpec};

    fn full_mask(rows: usize, cols: usize, kind: MaskKind) -> TileMask {
        MaskSpec::new(kind, rows, cols).tile_mask(0, 0, rows, cols)
    }

    #[test]
    fn finalize_divides_by_sum() {
        let mut st = SoftmaxAccumulator::<f64>::new(1, 2);
        st.acc = vec![2.0, 4.0];
        st.max = vec![0.0];
        st.sum = vec![2.0];
        assert_eq!(st.finalize().unwrap().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn fresh_state_cannot_finalize() {
        let st = SoftmaxAccumulator::<f64>::new(3, 2);
        assert!(matches!(st.finalize(), Err(Error::UnattendedRow { row: 0 })));
    }

    #[test]
    fn fully_masked_row_is_untouched() {
        let q = SequenceTensor::from_rows(&[vec![1.0, 0.5], vec![-0.3, 0.2]]).unwrap();
        let k = SequenceTensor::from_rows(&[vec![0.1, 0.9], vec![0.7, -0.4]]).unwrap();
        let v = SequenceTensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut st = SoftmaxAccumulator::<f64>::new(2, 2);
        // seed row 0 with something so "unchanged" is not trivially zero
        st.accumulate_tile(0, q.view(), k.view(), v.view(), &full_mask(2, 2, MaskKind::FullyUnmasked), 1.0).unwrap();
        let before = st.clone();
        // exclusive mask: row 0 has no allowed keys
        st.accumulate_tile(0, q.view(), k.view(), v.view(), &full_mask(2, 2, MaskKind::CausalExclusive), 1.0).unwrap();
        assert_eq!(st.acc_row(0), before.acc_row(0));
        assert_eq!(st.row_max()[0].to_bits(), before.row_max()[0].to_bits());
        assert_eq!(st.row_sum()[0].to_bits(), before.row_sum()[0].to_bits());
        assert_ne!(st.acc_row(1), before.acc_row(1));
    }

    #[test]
    fn invariants_hold_for_partially_filled_state() {
        let q = SequenceTensor::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let k = q.clone();
        let mut st = SoftmaxAccumulator::<f64>::new(3, 1);
        st.accumulate_tile(0, q.view(), k.view(), k.view(), &full_mask(3, 3, MaskKind::CausalExclusive), 1.0).unwrap();
        assert_eq!(st.row_sum()[0], 0.0);
        assert_eq!(st.row_max()[0], f64::NEG_INFINITY);
        assert_eq!(st.acc_row(0), &[0.0]);
        assert!(st.row_sum()[1] > 0.0 && st.row_sum()[2] > 0.0);
    }

    #[test]
    fn extreme_scores_stay_finite() {
        let q = SequenceTensor::from_rows(&[vec![100.0], vec![-100.0]]).unwrap();
        let k = SequenceTensor::from_rows(&[vec![100.0], vec![-100.0], vec![0.5]]).unwrap();
        let v = SequenceTensor::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let mut st = SoftmaxAccumulator::<f64>::new(2, 1);
        let m = full_mask(2, 3, MaskKind::FullyUnmasked);
        st.accumulate_tile(0, q.view(), k.view(), v.view(), &m, 1.0).unwrap();
        st.accumulate_tile(0, q.view(), k.view(), v.view(), &m, 1.0).unwrap();
        assert!(st.acc.iter().chain(&st.sum).all(|x| x.is_finite()));
        let out = st.finalize().unwrap();
        assert!((out.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((out.get(1, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let q = SequenceTensor::<f64>::zeros(2, 3).unwrap();
        let k = SequenceTensor::<f64>::zeros(2, 2).unwrap();
        let mut st = SoftmaxAccumulator::new(2, 2);
        let m = full_mask(2, 2, MaskKind::FullyUnmasked);
        assert!(st.accumulate_tile(0, q.view(), k.view(), k.view(), &m, 1.0).is_err());
        assert!(st.accumulate_tile(1, k.view(), k.view(), k.view(), &m, 1.0).is_err());
    }
}
