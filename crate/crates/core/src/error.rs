use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("vasculature node {node}: {rule}")]
    Vasculature { node: u32, rule: String },
    #[error("vasculature: {0}")]
    Graph(String),
    #[error("unknown region id {0}")]
    UnknownRegion(u32),
    #[error("invalid simulation config: {0}")]
    SimConfig(String),
    #[error("invalid profile `{name}`: {reason}")]
    Profile { name: String, reason: String },
    #[error("transform: {0}")]
    Transform(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("input graph: {0}")]
    InputGraph(String),
    #[error("hyperparameter {field} = {value} outside its domain")]
    Hyperparam { field: &'static str, value: String },
    #[error("model/graph schema mismatch: {0}")]
    Schema(String),
    #[error("non-finite value in layer {layer} ({stage})")]
    NonFinite { layer: usize, stage: &'static str },
    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
