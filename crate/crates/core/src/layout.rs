//! Token-to-device partitioning.
//!
//! The striped scheme is realized as a one-time permutation of the sequence
//! followed by the same contiguous split used by the ring scheme, so the
//! schedule itself never needs to know which layout it is running on.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, SequenceTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Contiguous,
    Striped,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Contiguous => "contiguous",
            Scheme::Striped => "striped",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    scheme: Scheme,
    n_seq: usize,
    n_devices: usize,
}

impl Layout {
    pub fn new(scheme: Scheme, n_seq: usize, n_devices: usize) -> Result<Self> {
        if n_devices < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 devices, got {n_devices}")));
        }
        if n_seq == 0 {
            return Err(Error::EmptySequence);
        }
        if !n_seq.is_multiple_of(n_devices) {
            return Err(Error::NotDivisible { what: "sequence length", value: n_seq, divisor: n_devices });
        }
        Ok(Self { scheme, n_seq, n_devices })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn n_seq(&self) -> usize {
        self.n_seq
    }

    pub fn n_devices(&self) -> usize {
        self.n_devices
    }

    pub fn block_size(&self) -> usize {
        self.n_seq / self.n_devices
    }

    /// Global token position held at `local` on `device`.
    pub fn global_of(&self, device: usize, local: usize) -> Result<usize> {
        if device >= self.n_devices {
            return Err(Error::IndexOutOfRange { what: "device", index: device, bound: self.n_devices });
        }
        let c = self.block_size();
        if local >= c {
            return Err(Error::IndexOutOfRange { what: "local", index: local, bound: c });
        }
        Ok(match self.scheme {
            Scheme::Contiguous => device * c + local,
            Scheme::Striped => device + local * self.n_devices,
        })
    }

    /// Inverse of [`Layout::global_of`].
    pub fn locate(&self, global: usize) -> Result<(usize, usize)> {
        if global >= self.n_seq {
            return Err(Error::IndexOutOfRange { what: "position", index: global, bound: self.n_seq });
        }
        let c = self.block_size();
        Ok(match self.scheme {
            Scheme::Contiguous => (global / c, global % c),
            Scheme::Striped => (global % self.n_devices, global / self.n_devices),
        })
    }

    /// `order[p]` is the global position placed at permuted position `p`.
    /// Splitting the permuted sequence into contiguous blocks of `block_size`
    /// gives each device its shard.
    pub fn permutation(&self) -> Vec<usize> {
        let c = self.block_size();
        (0..self.n_seq)
            .map(|p| match self.scheme {
                Scheme::Contiguous => p,
                Scheme::Striped => (p / c) + (p % c) * self.n_devices,
            })
            .collect()
    }
}

/// One device's share of the inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Shard<T = f64> {
    pub q: SequenceTensor<T>,
    pub k: SequenceTensor<T>,
    pub v: SequenceTensor<T>,
    /// Companion arrays (position ids, target ids, ...) in the same order.
    pub companions: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutedBatch<T = f64> {
    pub layout: Layout,
    pub shards: Vec<Shard<T>>,
}

/// Permutes `q`, `k`, `v` and every companion array under `layout` and splits
/// them into per-device shards.
pub fn partition<T: Scalar>(
    layout: &Layout,
    q: &SequenceTensor<T>,
    k: &SequenceTensor<T>,
    v: &SequenceTensor<T>,
    companions: &[Vec<i64>],
) -> Result<PermutedBatch<T>> {
    let n = layout.n_seq();
    for (name, rows) in [("Q", q.rows()), ("K", k.rows()), ("V", v.rows())] {
        if rows != n {
            return Err(Error::DimensionMismatch(format!("{name} has {rows} rows, layout expects {n}")));
        }
    }
    if let Some(bad) = companions.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch(format!("companion array has {} entries, layout expects {n}", bad.len())));
    }
    let order = layout.permutation();
    let c = layout.block_size();
    let shards = order
        .chunks(c)
        .map(|idx| {
            Ok(Shard {
                q: q.select_rows(idx)?,
                k: k.select_rows(idx)?,
                v: v.select_rows(idx)?,
                companions: companions.iter().map(|arr| idx.iter().map(|&g| arr[g]).collect()).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PermutedBatch { layout: *layout, shards })
}

/// Reassembles per-device tensors into original sequence order.
pub fn gather<T: Scalar>(layout: &Layout, shards: &[SequenceTensor<T>]) -> Result<SequenceTensor<T>> {
    if shards.len() != layout.n_devices() {
        return Err(Error::DimensionMismatch(format!("{} shards for {} devices", shards.len(), layout.n_devices())));
    }
    let c = layout.block_size();
    let cols = shards[0].cols();
    for (d, s) in shards.iter().enumerate() {
        if s.rows() != c || s.cols() != cols {
            return Err(Error::DimensionMismatch(format!(
                "shard {d} is {}x{}, expected {c}x{cols}",
                s.rows(),
                s.cols()
            )));
        }
    }
    let mut data = Vec::with_capacity(layout.n_seq() * cols);
    for g in 0..layout.n_seq() {
        let (d, x) = layout.locate(g)?;
        data.extend_from_slice(shards[d].row(x));
    }
    SequenceTensor::new(layout.n_seq(), cols, data)
}

/// Reassembles one companion array (index `which`) into original order.
pub fn gather_companion(layout: &Layout, shards: &[Shard<impl Scalar>], which: usize) -> Result<Vec<i64>> {
    let c = layout.block_size();
    (0..layout.n_seq())
        .map(|g| {
            let (d, x) = layout.locate(g)?;
            shards
                .get(d)
                .and_then(|s| s.companions.get(which))
                .filter(|arr| arr.len() == c)
                .map(|arr| arr[x])
                .ok_or_else(|| Error::DimensionMismatch(format!("shard {d} lacks companion {which}")))
        })
        .collect()
}
