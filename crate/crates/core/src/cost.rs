//! Analytic FLOP model for the striped-over-ring theoretical maximum speedup.
//!
//! Communication is assumed to be fully overlapped with compute and only
//! matrix-multiply FLOPs are counted. Per token per layer:
//!
//! * non-attention work: `8 d_model^2` (QKV and output projections),
//!   `4 d_model d_ff` (two-matrix MLP) and `2 d_model n_vocab / n_layer`
//!   (logits amortized over layers);
//! * attention work against an unmasked sequence: `4 n_seq d_model`
//!   (`QK^T` plus `PV`), weighted by `flop_weight`.
//!
//! The ring schedule only saves half of its first round (`(N - 1/2)/N` of the
//! unmasked attention cost), while the striped schedule saves half of every
//! round. Forward/backward multipliers apply to both terms and cancel.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Causal attention interactions for query block `i` against key block `j`
/// under the striped layout with block size `c`.
pub fn work(i: usize, j: usize, c: u64) -> u64 {
    if i >= j {
        c * (c + 1) / 2
    } else {
        c * c.saturating_sub(1) / 2
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPreset {
    #[serde(default)]
    pub name: String,
    pub n_vocab: u64,
    pub d_model: u64,
    pub d_ff: u64,
    pub n_layer: u64,
    pub n_head: u64,
}

impl ModelPreset {
    pub fn builtins() -> [ModelPreset; 3] {
        let p = |name: &str, d_model, d_ff, n_layer, n_head| ModelPreset {
            name: name.into(),
            n_vocab: 32000,
            d_model,
            d_ff,
            n_layer,
            n_head,
        };
        [p("1b", 2048, 5504, 22, 16), p("3b", 3200, 8640, 26, 32), p("7b", 4096, 11008, 32, 32)]
    }

    pub fn builtin(name: &str) -> Option<ModelPreset> {
        let key = name.to_ascii_lowercase();
        Self::builtins().into_iter().find(|p| p.name == key)
    }

    /// Parses a preset from TOML keyed by `n_vocab`, `d_model`, `d_ff`,
    /// `n_layer`, `n_head` (and optionally `name`).
    pub fn from_toml_str(s: &str) -> Result<ModelPreset> {
        let preset: ModelPreset = toml::from_str(s)?;
        preset.validate()?;
        Ok(preset)
    }

    pub fn load(path: &Path) -> Result<ModelPreset> {
        let mut preset = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if preset.name.is_empty() {
            preset.name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        }
        Ok(preset)
    }

    /// A built-in name (`1b`, `3b`, `7b`) or a path to a preset file.
    pub fn resolve(source: &str) -> Result<ModelPreset> {
        if let Some(p) = Self::builtin(source) {
            return Ok(p);
        }
        let path = Path::new(source);
        if path.is_file() {
            return Self::load(path);
        }
        Err(Error::UnknownPreset(source.into()))
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("n_vocab", self.n_vocab),
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("n_layer", self.n_layer),
            ("n_head", self.n_head),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::InvalidConfig(format!("preset field {name} must be positive"))),
            None => Ok(()),
        }
    }

    /// Non-attention matmul FLOPs per token per layer.
    pub fn other_flops_per_token(&self) -> f64 {
        let d = self.d_model as f64;
        8.0 * d * d + 4.0 * d * self.d_ff as f64 + 2.0 * d * self.n_vocab as f64 / self.n_layer as f64
    }

    /// Unmasked attention FLOPs per token per layer at sequence length `n_seq`.
    pub fn attention_flops_per_token(&self, n_seq: u64) -> f64 {
        4.0 * n_seq as f64 * self.d_model as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TmsQuery {
    pub preset: ModelPreset,
    pub n_seq: u64,
    /// Sequence-parallel degree `N`.
    pub sp: u64,
    /// Relative cost of an attention FLOP (2 for TF32 attention on A100, 1 on TPU).
    pub flop_weight: f64,
}

impl TmsQuery {
    pub fn validate(&self) -> Result<()> {
        self.preset.validate()?;
        if self.sp < 2 {
            return Err(Error::InvalidConfig(format!("sequence parallelism must be >= 2, got {}", self.sp)));
        }
        if self.n_seq == 0 || !self.n_seq.is_multiple_of(self.sp) {
            return Err(Error::NotDivisible {
                what: "sequence length",
                value: self.n_seq as usize,
                divisor: self.sp as usize,
            });
        }
        if !(self.flop_weight > 0.0 && self.flop_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!("flop weight must be positive, got {}", self.flop_weight)));
        }
        Ok(())
    }
}

/// Fraction of unmasked attention work on the ring schedule's critical path.
pub fn ring_attention_fraction(sp: u64) -> f64 {
    (sp as f64 - 0.5) / sp as f64
}

/// Fraction of unmasked attention work on the striped schedule's critical path.
pub const STRIPED_ATTENTION_FRACTION: f64 = 0.5;

/// Theoretical maximum speedup of the striped schedule over the ring schedule.
pub fn tms(q: &TmsQuery) -> Result<f64> {
    q.validate()?;
    let other = q.preset.other_flops_per_token();
    let attn = q.flop_weight * q.preset.attention_flops_per_token(q.n_seq);
    Ok((other + attn * ring_attention_fraction(q.sp)) / (other + attn * STRIPED_ATTENTION_FRACTION))
}

/// Rounds to two decimals, as printed in TMS tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Model-parallel x sequence-parallel mesh. Only the sequence-parallel degree
/// enters the model; the model-parallel degree is a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mesh {
    pub model_parallel: u64,
    pub sequence_parallel: u64,
}

impl fmt::Display for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.model_parallel, self.sequence_parallel)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmsRow {
    pub model: String,
    pub mesh_mp: u64,
    pub mesh_sp: u64,
    pub n_seq: u64,
    pub flop_weight: f64,
    pub tms: f64,
}

/// Evaluates every (preset, mesh, n_seq) combination in that nesting order.
pub fn tms_table(presets: &[ModelPreset], meshes: &[Mesh], seq_lens: &[u64], flop_weight: f64) -> Result<Vec<TmsRow>> {
    let mut rows = Vec::new();
    for preset in presets {
        for mesh in meshes {
            for &n_seq in seq_lens {
                let q = TmsQuery { preset: preset.clone(), n_seq, sp: mesh.sequence_parallel, flop_weight };
                rows.push(TmsRow {
                    model: preset.name.clone(),
                    mesh_mp: mesh.model_parallel,
                    mesh_sp: mesh.sequence_parallel,
                    n_seq,
                    flop_weight,
                    tms: tms(&q)?,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_tms_csv<W: std::io::Write>(writer: W, rows: &[TmsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One transcribed row of a published TMS table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenRow {
    pub hardware: String,
    pub model: String,
    pub mesh_mp: u64,
    pub mesh_sp: u64,
    pub n_seq: u64,
    pub flop_weight: f64,
    pub tms: f64,
}

const GOLDEN_CSV: &str = include_str!("../data/tms_golden.csv");

/// The bundled golden table (A100, TPU v3 and TPU v4 runs).
pub fn builtin_golden() -> Vec<GoldenRow> {
    read_golden(GOLDEN_CSV.as_bytes()).expect("bundled golden table parses")
}

pub fn read_golden<R: Read>(reader: R) -> Result<Vec<GoldenRow>> {
    csv::Reader::from_reader(reader).deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldenComparison {
    pub row: GoldenRow,
    pub computed: f64,
    /// `round2(computed) - row.tms`.
    pub delta: f64,
}

impl GoldenComparison {
    pub fn within(&self, tolerance: f64) -> bool {
        self.delta.abs() <= tolerance + 1e-9
    }
}

/// Recomputes each golden row with the preset `resolve(row.model)`.
pub fn compare_golden(
    rows: &[GoldenRow],
    resolve: impl Fn(&str) -> Result<ModelPreset>,
) -> Result<Vec<GoldenComparison>> {
    rows.iter()
        .map(|row| {
            let q = TmsQuery {
                preset: resolve(&row.model)?,
                n_seq: row.n_seq,
                sp: row.mesh_sp,
                flop_weight: row.flop_weight,
            };
            let computed = tms(&q)?;
            Ok(GoldenComparison { row: row.clone(), computed, delta: round2(computed) - row.tms })
        })
        .collect()
}
