use crate::model::VertexId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vertices {0} and {1} are not adjacent")]
    NonAdjacent(VertexId, VertexId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown cell {0}")]
    UnknownCell(u32),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("dangling path reference {path} in cell {cell}")]
    DanglingRef { cell: u32, path: u32 },
    #[error("index does not match decomposition: {0}")]
    MismatchedIndex(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
