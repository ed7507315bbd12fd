//! Static dimension and threshold optimization for binary hyperdimensional
//! computations, plus a small data-structure library and simulation harness.

pub mod analytics;
pub mod dslib;
pub mod error;
pub mod hdvec;
pub mod indcheck;
pub mod optimizer;
pub mod simharness;
pub mod speclang;

pub use analytics::{DistanceDistribution, IndependenceConstraint, MeanDistances, QdsClass};
pub use dslib::{
    Database, DbDecl, ItemMemory, ItemSpace, KgDecl, KnowledgeGraph, Nfa, NfaDecl, ParamTable, Probe, QueryNoise,
    QuerySetting, SetDecl, SetDs, Targets,
};
pub use error::{Error, Pos, Result};
pub use hdvec::{
    bind, bundle, distance, flip_bits, partial_distance, permute, rand_code, Codebook, Hypervector, RngStream,
};
pub use indcheck::{check_independent_product, check_independent_set, CodeId, CodeTuple, IndependentSet};
pub use optimizer::{optimize, OptimizationResult, QueryParams, DEFAULT_MAX_N};
pub use speclang::{
    expand_vars, parse_hw_model, parse_spec, print_spec, AccuracySpec, Expr, HardwareModel, Requirement,
};
