use thiserror::Error;

use crate::graph::{EdgeId, VertexId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("line {line}: self-loop on vertex {vertex}")]
    SelfLoop { line: usize, vertex: VertexId },
    #[error("line {line}: duplicate edge {u}-{v}")]
    DuplicateEdge { line: usize, u: VertexId, v: VertexId },
    #[error("line {line}: nonpositive weight {weight} on edge {u}-{v}")]
    NonPositiveWeight {
        line: usize,
        u: VertexId,
        v: VertexId,
        weight: String,
    },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("vertex {vertex} out of range (n = {n})")]
    InvalidVertex { vertex: VertexId, n: usize },
    #[error("edge {0} does not belong to the graph")]
    UnknownEdge(EdgeId),
    #[error("terminal set is empty")]
    EmptyTerminals,
    #[error("too many terminals: {got} (limit {limit})")]
    TooManyTerminals { got: usize, limit: usize },
    #[error("instance too large: {what} = {got} (limit {limit})")]
    InstanceTooLarge {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("exact arithmetic required for {0}")]
    InexactArithmetic(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("generator gave up after {attempts} disconnected draws")]
    RetriesExhausted { attempts: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
