//! Simulation and analysis of distributed exact causal self-attention.
//!
//! Two ring schedules are modelled over `N` simulated devices:
//!
//! * **Ring**: each device owns a contiguous block of the sequence.
//! * **Striped**: each device owns the tokens whose position is congruent to
//!   its index modulo `N`.
//!
//! Both run the same rotation of key/value blocks around the ring and differ
//! only in the block masks they apply. The crate provides a dense reference
//! implementation of causal attention, the online-softmax accumulator used by
//! every device, per-round work accounting at tile granularity, and an
//! analytic FLOP model for the theoretical maximum speedup (TMS) of the
//! striped schedule over the contiguous one.

pub mod cost;
pub mod error;
pub mod layout;
pub mod mask;
pub mod oracle;
mod par;
pub mod report;
pub mod sim;
pub mod softmax;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use layout::{gather, partition, Layout, PermutedBatch, Scheme, Shard};
pub use mask::{classify_tiles, get_mask_ring, get_mask_striped, MaskKind, MaskSpec, TileClass, TileGrid};
pub use oracle::{oracle_causal_attention, OracleOptions};
pub use sim::{Algo, Executor, Precision, ScheduleStats, SimConfig, WorkStats};
pub use softmax::SoftmaxAccumulator;
pub use tensor::{RowsView, Scalar, SequenceTensor};

/// Returns true when the crate was built with rayon-backed data parallelism.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
