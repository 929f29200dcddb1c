use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sequence must contain at least one token")]
    EmptySequence,

    #[error("tensor entry at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("{what} index {index} out of range (must be < {bound})")]
    IndexOutOfRange { what: &'static str, index: usize, bound: usize },

    #[error("{what} ({value}) is not divisible by {divisor}")]
    NotDivisible { what: &'static str, value: usize, divisor: usize },

    #[error("tile {dimension} {tile} does not divide block {dimension} {block}")]
    RaggedTile { dimension: &'static str, tile: usize, block: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("query row {row} attended no keys")]
    UnattendedRow { row: usize },

    #[error("device {device}: ring channel disconnected")]
    ChannelClosed { device: usize },

    #[error("device {device} round {round}: holds block {held}, schedule expects {expected}")]
    ScheduleViolation { device: usize, round: usize, held: usize, expected: usize },

    #[error("runs are not comparable: {0}")]
    MismatchedRuns(String),

    #[error("unknown model preset `{0}`")]
    UnknownPreset(String),

    #[error("preset config: {0}")]
    PresetParse(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
