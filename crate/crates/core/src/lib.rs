//! Embedding of sparse stochastic graphs into 1, 2, or 3 dimensions.
//!
//! The input is a sparse directed graph whose rows are (or are
//! conditioned into) probability distributions over neighbors. The
//! output is a low-dimensional point per vertex, fitted by gradient
//! descent on the divergence between the graph and heavy-tailed kernel
//! similarities of the points.
//!
//! Pipeline stages, one module each:
//!
//! * [`graph`]: CSR storage, validation, symmetrization into the joint
//!   distribution.
//! * [`io`]: MatrixMarket and TSV edge-list reading and writing.
//! * [`conditioning`]: per-row rescaling to a target mass, or classic
//!   perplexity equalization for distance inputs.
//! * [`attractive`]: the sparse attractive force, with row reordering
//!   and cache blocking.
//! * [`nuconv`]: the dense repulsive force, factored through an
//!   equispaced grid and separable transforms.
//! * [`optimizer`]: the descent loop with adaptive gains, momentum, and
//!   early exaggeration.
//! * [`exact`]: direct quadratic reference implementations, used for
//!   verification and small problems.
//! * [`synth`]: synthetic instances with known structure.

pub mod attractive;
pub mod conditioning;
pub mod exact;
pub mod graph;
pub mod io;
pub mod nuconv;
pub mod optimizer;
pub mod synth;

pub use attractive::{
    attractive_term, PointOrder, ReorderStrategy, ReorderedMatrix, TranslocationPlan,
};
pub use conditioning::{
    perplexity_equalize, rescale, ConditioningError, PerplexityConfig, RescalingConfig,
};
pub use graph::{GraphError, JointDistribution, SparseGraph, ValueKind};
pub use io::{load_graph, save_graph, GraphFormat, LoadError};
pub use nuconv::{ConvKernel, GridConfig, GridWorkspace};
pub use optimizer::{
    embed, EmbedConfig, EmbedError, EmbedResult, EmbeddingRun, InitKind, KlTracePoint,
};
