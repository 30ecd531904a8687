use thiserror::Error;

use crate::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("invalid protocol constants: {0}")]
    InvalidConstants(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("node {0} is out of range")]
    UnknownNode(NodeId),

    #[error("sender and receiver are the same node ({0})")]
    SelfLink(NodeId),

    #[error("receiver {0} is transmitting in the same slot")]
    ReceiverTransmitting(NodeId),

    #[error("sender {sender} is colocated with receiver {receiver}")]
    ColocatedSender { sender: NodeId, receiver: NodeId },

    #[error("node {0} issued more than one transmission intent in a slot")]
    DuplicateIntent(NodeId),

    #[error("transmission probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
