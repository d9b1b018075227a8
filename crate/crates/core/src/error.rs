use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("geometry error at node {node}: {msg}")]
    Geometry { node: usize, msg: String },
    #[error("divergence in {field} at node {node}")]
    Divergence { node: usize, field: &'static str },
    #[error("time step underflow (dt = {dt:e})")]
    Stiffness { dt: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed snapshot at byte {offset}: {msg}")]
    Snapshot { offset: usize, msg: String },
    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
