//! Lightweight subsetwise additive spanners.
//!
//! Builders for `+εW(·,·)`, `+(4+ε)W(·,·)` and `+(4+ε)W_max` subsetwise
//! spanners, a multi-level spanner solver, and exact oracles that certify
//! every output and measure subset-lightness against Steiner lower bounds.

// `!(x > 0.0)` is deliberate: it also rejects NaN parameters.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The DP tables read better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod condition;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod graph;
pub mod instance;
pub mod multilevel;
pub mod oracle;
pub mod paths;
pub mod spanner_additive;
pub mod spanner_sampled;
pub mod steiner;
pub mod transform;
pub mod weight;

pub use condition::{AdditiveCondition, BetaMode};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ResultRow};
pub use generate::{generate, GeneratorKind, GeneratorSpec};
pub use graph::{load_graph, Edge, EdgeId, Graph, VertexId};
pub use instance::Instance;
pub use multilevel::{
    four_approx_baseline, round_levels, rounding_cost_ratio, solve_multilevel, MultiLevelInstance,
    MultiLevelSolution, OneLevelOracle,
};
pub use oracle::{exact_multilevel, exact_one_level, subset_lightness, verify_spanner, VerificationReport};
pub use paths::{build_path_table, masked_distance, fixed_shortest_path, FixedPath, PathTable};
pub use spanner_additive::{eps_spanner, four_eps_spanner, EpsilonSplit, Spanner};
pub use spanner_sampled::{wmax_spanner, EllSetting, SampleConfig};
pub use steiner::{approx_steiner, build_backbone, exact_steiner, Backbone, SteinerTree};
pub use transform::{build_universe, map_back, ScaledInstance};
pub use weight::{Exact, Weight};
