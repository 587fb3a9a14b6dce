use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph file is not valid JSON: {0}")]
    GraphSyntax(#[from] serde_json::Error),
    #[error("unknown node name {name:?} in edge {index}")]
    UnknownNodeName { name: String, index: usize },
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("duplicate node name {0:?}")]
    DuplicateNode(String),
    #[error("duplicate edge {parent:?} -> {child:?}")]
    DuplicateEdge { parent: String, child: String },
    #[error("self-loop on node {0:?}")]
    SelfLoop(String),
    #[error("edges {a:?} -> {b:?} and {b:?} -> {a:?} both present")]
    BidirectedEdge { a: String, b: String },
    #[error("graph contains a cycle through node {0:?}")]
    Cycle(String),

    #[error("PC set of node {node:?} has {size} members, over the arrangement cap {cap}; use the fast backend")]
    ArrangementCapExceeded { node: String, size: usize, cap: usize },
    #[error("node {node:?} has {count} parents, over the brute-force limit {limit}")]
    BruteForceLimitExceeded { node: String, count: usize, limit: usize },

    #[error("CSV {0}")]
    Csv(String),
    #[error("row {row}: non-numeric cell {cell:?} in column {column:?}")]
    NonNumericCell { row: usize, cell: String, column: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("dataset has no column for node {0:?}")]
    MissingColumn(String),
    #[error("invalid fold count {k} for {n} rows")]
    InvalidFolds { k: usize, n: usize },

    #[error("branch input dimension mismatch: {expected} inputs, {found} values")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("branch count must be at least 1")]
    InvalidBranchCount,
    #[error("non-finite {what} at node {node:?} branch {branch}")]
    NonFinite { what: &'static str, node: String, branch: usize },
    #[error("singular normal equations at node {node:?} branch {branch}")]
    SingularSystem { node: String, branch: usize },
    #[error("closed-form updates require the linear link (node {0:?} uses sigmoid)")]
    SigmoidClosedForm(String),
    #[error("training loss became non-finite at outer epoch {outer}")]
    NonFiniteLoss { outer: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("checkpoint {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
