use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;

use super::stats::{RoundStats, ScheduleStats, WorkStats};
use super::{Executor, MaskFn, SimConfig};
use crate::error::{Error, Result};
use crate::layout::PermutedBatch;
use crate::mask::{classify_tiles, TileClass};
use crate::oracle::score_scale;
use crate::par;
use crate::softmax::SoftmaxAccumulator;
use crate::tensor::{Scalar, SequenceTensor};

/// Key and value rows travelling together around the ring.
struct KvBlock<T> {
    index: usize,
    k: SequenceTensor<T>,
    v: SequenceTensor<T>,
}

struct Device<'a, T, M> {
    id: usize,
    n_devices: usize,
    tile_q: usize,
    tile_k: usize,
    scale: T,
    data_parallel: bool,
    mask_fn: &'a M,
    q: &'a SequenceTensor<T>,
    held: Option<KvBlock<T>>,
    acc: SoftmaxAccumulator<T>,
    stats: WorkStats,
    to_next: Sender<KvBlock<T>>,
    from_prev: Receiver<KvBlock<T>>,
}

impl<T: Scalar, M: MaskFn> Device<'_, T, M> {
    fn compute(&mut self, round: usize) -> Result<()> {
        let n = self.n_devices;
        let held = self.held.as_ref().ok_or(Error::ChannelClosed { device: self.id })?;
        let expected = (self.id + n - round % n) % n;
        if held.index != expected {
            return Err(Error::ScheduleViolation { device: self.id, round, held: held.index, expected });
        }
        let c = self.q.rows();
        let mask = (self.mask_fn)(self.id, held.index, c, n)?;
        let grid = classify_tiles(&mask, self.tile_q, self.tile_k)?;
        self.stats.rounds.push(RoundStats::from_grid(round, self.id, held.index, &grid, mask.allowed_count()));

        let (tq, tk, scale) = (self.tile_q, self.tile_k, self.scale);
        let (q, k, v) = (self.q, &held.k, &held.v);
        let grid = &grid;
        // Tile rows touch disjoint accumulator rows; within a row band tiles
        // are folded left to right, so the result does not depend on how
        // bands are scheduled.
        let results = par::map_collect(self.acc.bands_mut(tq), self.data_parallel, |mut band| {
            let a = band.row_start() / tq;
            for (b, class) in grid.row(a).iter().enumerate() {
                if *class == TileClass::Skip {
                    continue;
                }
                band.accumulate_tile(
                    0,
                    q.rows_view(a * tq, tq)?,
                    k.rows_view(b * tk, tk)?,
                    v.rows_view(b * tk, tk)?,
                    &mask.tile_mask(a, b, tq, tk),
                    scale,
                )?;
            }
            Ok(())
        });
        results.into_iter().collect()
    }

    fn send(&mut self) -> Result<()> {
        let block = self.held.take().ok_or(Error::ChannelClosed { device: self.id })?;
        self.to_next.send(block).map_err(|_| Error::ChannelClosed { device: self.id })
    }

    fn receive(&mut self) -> Result<()> {
        let block = self.from_prev.recv().map_err(|_| Error::ChannelClosed { device: self.id })?;
        self.held = Some(block);
        Ok(())
    }

    fn finish(self) -> Result<(SequenceTensor<T>, WorkStats)> {
        match &self.held {
            Some(b) if b.index == self.id => {}
            Some(b) => {
                return Err(Error::ScheduleViolation {
                    device: self.id,
                    round: self.n_devices,
                    held: b.index,
                    expected: self.id,
                })
            }
            None => return Err(Error::ChannelClosed { device: self.id }),
        }
        Ok((self.acc.finalize()?, self.stats))
    }
}

/// Runs the rotation schedule with an arbitrary block-mask function.
pub(super) fn execute<T: Scalar, M: MaskFn>(
    config: &SimConfig,
    batch: &PermutedBatch<T>,
    mask_fn: &M,
) -> Result<(Vec<SequenceTensor<T>>, ScheduleStats)> {
    let n = batch.layout.n_devices();
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..n).map(|_| channel::<KvBlock<T>>()).unzip();
    let scale = score_scale::<T>(config.d_head, config.scaled);
    // Device threads blocking a pool worker must not queue work on that pool.
    let data_parallel = config.data_parallel && !(config.executor == Executor::Threaded && par::on_worker_thread());

    let mut devices = Vec::with_capacity(n);
    for (j, from_prev) in receivers.into_iter().enumerate() {
        let shard = &batch.shards[j];
        devices.push(Device {
            id: j,
            n_devices: n,
            tile_q: config.tile_q,
            tile_k: config.tile_k,
            scale,
            data_parallel,
            mask_fn,
            q: &shard.q,
            held: Some(KvBlock { index: j, k: shard.k.clone(), v: shard.v.clone() }),
            acc: SoftmaxAccumulator::new(shard.q.rows(), shard.v.cols()),
            stats: WorkStats { device: j, rounds: Vec::with_capacity(n) },
            to_next: senders[(j + 1) % n].clone(),
            from_prev,
        });
    }
    drop(senders);

    let results = match config.executor {
        Executor::Sequential => run_round_robin(devices, n),
        Executor::Threaded => run_threaded(devices, n),
    };

    let mut outputs = Vec::with_capacity(n);
    let mut per_device = Vec::with_capacity(n);
    let mut first_err = None;
    for r in results {
        match r {
            Ok((out, stats)) => {
                outputs.push(out);
                per_device.push(stats);
            }
            // a failing device closes its channels, so its neighbours report
            // disconnection; surface the root cause
            Err(e @ Error::ChannelClosed { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    let stats = ScheduleStats {
        algo: config.algo,
        n_devices: n,
        block_size: batch.layout.block_size(),
        tile_q: config.tile_q,
        tile_k: config.tile_k,
        devices: per_device,
    };
    Ok((outputs, stats))
}

fn run_round_robin<T: Scalar, M: MaskFn>(
    mut devices: Vec<Device<'_, T, M>>,
    n_rounds: usize,
) -> Vec<Result<(SequenceTensor<T>, WorkStats)>> {
    let step = |devices: &mut Vec<Device<'_, T, M>>| -> Result<()> {
        for round in 0..n_rounds {
            for d in devices.iter_mut() {
                d.compute(round)?;
            }
            for d in devices.iter_mut() {
                d.send()?;
            }
            for d in devices.iter_mut() {
                d.receive()?;
            }
        }
        Ok(())
    };
    match step(&mut devices) {
        Ok(()) => devices.into_iter().map(Device::finish).collect(),
        Err(e) => vec![Err(e)],
    }
}

fn run_threaded<T: Scalar, M: MaskFn>(
    devices: Vec<Device<'_, T, M>>,
    n_rounds: usize,
) -> Vec<Result<(SequenceTensor<T>, WorkStats)>> {
    thread::scope(|s| {
        let handles: Vec<_> = devices
            .into_iter()
            .map(|mut d| {
                s.spawn(move || {
                    for round in 0..n_rounds {
                        d.compute(round)?;
                        d.send()?;
                        d.receive()?;
                    }
                    d.finish()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p))).collect()
    })
}
