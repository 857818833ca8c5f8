use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distribution must have at least one entry")]
    EmptyDistribution,

    #[error("weight {value} at index {index} is not finite")]
    NonFiniteWeight { index: usize, value: f64 },

    #[error("weight {value} at index {index} is negative beyond tolerance")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights sum to {sum}, which deviates from 1 beyond tolerance")]
    NotNormalized { sum: f64 },

    #[error("weights sum to zero; cannot normalize")]
    ZeroMass,

    #[error("no samples provided")]
    EmptySamples,

    #[error("sample value {value} out of range for domain of size {domain_size}")]
    SampleOutOfRange { value: usize, domain_size: usize },

    #[error("domain mismatch: expected size {expected}, got {actual}")]
    DomainMismatch { expected: usize, actual: usize },

    #[error("output index {index} out of range for {size} outputs")]
    OutputOutOfRange { index: usize, size: usize },

    #[error("channel must have at least one input row and one output column")]
    EmptyChannel,

    #[error("channel row {row} has {len} entries, expected {expected}")]
    RaggedChannel {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("channel row {row} is not a distribution: {source}")]
    InvalidChannelRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "inverse channel undefined at output {output}: the prior gives it zero predictive mass"
    )]
    UndefinedInverseRow { output: usize },

    #[error("prior is implausible for the observations: outputs {outputs:?} are observed but predicted with zero probability")]
    Implausible { outputs: Vec<usize> },

    #[error("every input is excluded by the observations; nothing to estimate")]
    AllInputsPruned,

    #[error("stopping criteria invalid: {reason}")]
    InvalidStopCriteria { reason: String },

    #[error("oracle supports at most {max} inputs, channel has {actual}")]
    DomainTooLargeForOracle { max: usize, actual: usize },

    #[error("grid resolution must be at least 1")]
    DegenerateGrid,

    #[error("sample count must be at least 1")]
    EmptyRun,

    #[error("malformed channel matrix: {0}")]
    ChannelParse(String),

    #[error("malformed trace record at line {line}: {reason}")]
    TraceParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
