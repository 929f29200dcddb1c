//! Symbolic block masks for both schedules and tile-granularity skipping.
//!
//! Masks are indexed `[query row x, key column y]` within a block pair.
//! Nothing here materializes a boolean matrix on the hot path: tile classes and
//! pair counts are computed from the triangular structure directly.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MaskKind {
    FullyMasked,
    FullyUnmasked,
    /// Allows `y <= x`.
    CausalInclusive,
    /// Allows `y < x`.
    CausalExclusive,
}

impl MaskKind {
    pub fn allows(self, x: usize, y: usize) -> bool {
        match self {
            MaskKind::FullyMasked => false,
            MaskKind::FullyUnmasked => true,
            MaskKind::CausalInclusive => y <= x,
            MaskKind::CausalExclusive => y < x,
        }
    }

    /// Diagonal offset `d` for the triangular kinds: a pair is allowed iff `y + d <= x`.
    fn diagonal_offset(self) -> Option<usize> {
        match self {
            MaskKind::CausalInclusive => Some(0),
            MaskKind::CausalExclusive => Some(1),
            _ => None,
        }
    }

    /// Classifies the rectangle `rows x cols` (half-open ranges).
    pub fn classify_rect(self, rows: (usize, usize), cols: (usize, usize)) -> TileClass {
        let (r0, r1) = rows;
        let (c0, c1) = cols;
        match self.diagonal_offset() {
            None if self == MaskKind::FullyMasked => TileClass::Skip,
            None => TileClass::Full,
            Some(d) => {
                if c1 - 1 + d <= r0 {
                    TileClass::Full
                } else if c0 + d > r1 - 1 {
                    TileClass::Skip
                } else {
                    TileClass::Partial
                }
            }
        }
    }

    /// Number of allowed pairs in the rectangle `rows x cols`.
    pub fn allowed_in_rect(self, rows: (usize, usize), cols: (usize, usize)) -> u64 {
        let width = (cols.1 - cols.0) as u64;
        match self.diagonal_offset() {
            None if self == MaskKind::FullyMasked => 0,
            None => (rows.1 - rows.0) as u64 * width,
            Some(d) => (rows.0..rows.1).map(|x| ((x + 1) as u64).saturating_sub((d + cols.0) as u64).min(width)).sum(),
        }
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MaskKind::FullyMasked => "fully-masked",
            MaskKind::FullyUnmasked => "fully-unmasked",
            MaskKind::CausalInclusive => "causal-inclusive",
            MaskKind::CausalExclusive => "causal-exclusive",
        };
        f.write_str(s)
    }
}

/// Mask over one `block_rows x block_cols` query/key block pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub block_rows: usize,
    pub block_cols: usize,
}

impl MaskSpec {
    pub fn new(kind: MaskKind, block_rows: usize, block_cols: usize) -> Self {
        Self { kind, block_rows, block_cols }
    }

    pub fn allows(&self, x: usize, y: usize) -> bool {
        x < self.block_rows && y < self.block_cols && self.kind.allows(x, y)
    }

    /// Unmasked pairs in the whole block.
    pub fn allowed_count(&self) -> u64 {
        self.kind.allowed_in_rect((0, self.block_rows), (0, self.block_cols))
    }

    /// Materialized allowed-pair matrix. For tests and inspection only.
    pub fn allowed_matrix(&self) -> Vec<Vec<bool>> {
        (0..self.block_rows).map(|x| (0..self.block_cols).map(|y| self.kind.allows(x, y)).collect()).collect()
    }

    /// The mask restricted to tile `(tile_row, tile_col)` of a `tile_q x tile_k` tiling.
    pub fn tile_mask(&self, tile_row: usize, tile_col: usize, tile_q: usize, tile_k: usize) -> TileMask {
        TileMask {
            kind: self.kind,
            row_start: tile_row * tile_q,
            col_start: tile_col * tile_k,
            rows: tile_q,
            cols: tile_k,
        }
    }

    /// Tile counts and pair counts for a tiling, in O(block_rows / tile_q)
    /// for the tile classes plus O(block_rows) for the required pairs.
    pub fn tile_counts(&self, tile_q: usize, tile_k: usize) -> Result<TileCounts> {
        check_tiling(self, tile_q, tile_k)?;
        let tile_rows = self.block_rows / tile_q;
        let tile_cols = self.block_cols / tile_k;
        let mut counts = TileCounts {
            total: (tile_rows * tile_cols) as u64,
            required: self.allowed_count(),
            ..TileCounts::default()
        };
        match self.kind.diagonal_offset() {
            None if self.kind == MaskKind::FullyMasked => counts.skipped = counts.total,
            None => counts.full = counts.total,
            Some(d) => {
                for a in 0..tile_rows {
                    let r0 = a * tile_q;
                    let r1 = r0 + tile_q;
                    let full = ((r0 + 1 - d) / tile_k).min(tile_cols);
                    let live = if r1 > d { ((r1 - 1 - d) / tile_k + 1).min(tile_cols) } else { 0 };
                    counts.full += full as u64;
                    counts.partial += (live - full) as u64;
                    counts.skipped += (tile_cols - live) as u64;
                }
            }
        }
        counts.computed = (counts.full + counts.partial) * (tile_q * tile_k) as u64;
        Ok(counts)
    }
}

/// A [`MaskSpec`] restricted to one tile; coordinates passed to
/// [`TileMask::allows`] are local to the tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileMask {
    pub kind: MaskKind,
    pub row_start: usize,
    pub col_start: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TileMask {
    pub fn allows(&self, x: usize, y: usize) -> bool {
        self.kind.allows(self.row_start + x, self.col_start + y)
    }

    pub fn class(&self) -> TileClass {
        self.kind
            .classify_rect((self.row_start, self.row_start + self.rows), (self.col_start, self.col_start + self.cols))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TileClass {
    Skip,
    Partial,
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TileCounts {
    pub total: u64,
    pub skipped: u64,
    pub partial: u64,
    pub full: u64,
    /// Pairs inside non-skipped tiles.
    pub computed: u64,
    /// Unmasked pairs.
    pub required: u64,
}

/// Row-major grid of tile classes for one block pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileGrid {
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub tile_q: usize,
    pub tile_k: usize,
    classes: Vec<TileClass>,
}

impl TileGrid {
    pub fn get(&self, tile_row: usize, tile_col: usize) -> TileClass {
        self.classes[tile_row * self.tile_cols + tile_col]
    }

    pub fn row(&self, tile_row: usize) -> &[TileClass] {
        &self.classes[tile_row * self.tile_cols..(tile_row + 1) * self.tile_cols]
    }

    pub fn classes(&self) -> &[TileClass] {
        &self.classes
    }

    pub fn count(&self, class: TileClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
}

fn check_tiling(mask: &MaskSpec, tile_q: usize, tile_k: usize) -> Result<()> {
    if tile_q == 0 || !mask.block_rows.is_multiple_of(tile_q) {
        return Err(Error::RaggedTile { dimension: "rows", tile: tile_q, block: mask.block_rows });
    }
    if tile_k == 0 || !mask.block_cols.is_multiple_of(tile_k) {
        return Err(Error::RaggedTile { dimension: "cols", tile: tile_k, block: mask.block_cols });
    }
    Ok(())
}

/// Classifies every `tile_q x tile_k` tile of `mask`. Tile sizes must divide
/// the block dimensions.
pub fn classify_tiles(mask: &MaskSpec, tile_q: usize, tile_k: usize) -> Result<TileGrid> {
    check_tiling(mask, tile_q, tile_k)?;
    let tile_rows = mask.block_rows / tile_q;
    let tile_cols = mask.block_cols / tile_k;
    let mut classes = Vec::with_capacity(tile_rows * tile_cols);
    for a in 0..tile_rows {
        for b in 0..tile_cols {
            classes.push(mask.tile_mask(a, b, tile_q, tile_k).class());
        }
    }
    Ok(TileGrid { tile_rows, tile_cols, tile_q, tile_k, classes })
}

fn check_block_indices(j: usize, k: usize, n_devices: usize) -> Result<()> {
    if j >= n_devices {
        return Err(Error::IndexOutOfRange { what: "device", index: j, bound: n_devices });
    }
    if k >= n_devices {
        return Err(Error::IndexOutOfRange { what: "block", index: k, bound: n_devices });
    }
    Ok(())
}

/// Mask for query block `j` against key block `k` under the contiguous layout.
pub fn get_mask_ring(j: usize, k: usize, block_size: usize, n_devices: usize) -> Result<MaskSpec> {
    check_block_indices(j, k, n_devices)?;
    let kind = match k.cmp(&j) {
        std::cmp::Ordering::Greater => MaskKind::FullyMasked,
        std::cmp::Ordering::Equal => MaskKind::CausalInclusive,
        std::cmp::Ordering::Less => MaskKind::FullyUnmasked,
    };
    Ok(MaskSpec::new(kind, block_size, block_size))
}

/// Mask for query stripe `j` against key stripe `k` under the striped layout.
///
/// Query row `x` sits at global position `j + xN` and key column `y` at
/// `k + yN`, so `y <= x` is allowed when `k <= j` and `y < x` otherwise.
pub fn get_mask_striped(j: usize, k: usize, block_size: usize, n_devices: usize) -> Result<MaskSpec> {
    check_block_indices(j, k, n_devices)?;
    let kind = if k <= j { MaskKind::CausalInclusive } else { MaskKind::CausalExclusive };
    Ok(MaskSpec::new(kind, block_size, block_size))
}
