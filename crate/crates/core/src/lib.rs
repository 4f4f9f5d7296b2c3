//! Approximate matrix permanents with belief propagation on a bipartite
//! matching model (the Bethe permanent), plus exact oracles, weak baselines,
//! a Monte Carlo sampler, a permanent kernel between point sets and the
//! benchmark harness that compares them.

pub mod bench;
pub mod bp;
pub mod error;
pub mod exact;
pub mod kernel;
pub mod logspace;
pub mod matrix;
pub mod sampler;

pub use bp::{
    bethe_free_energy, compute_beliefs, estimate_permanent, extract_belief_matrix, init_messages,
    run_bp, sinkhorn_scale, update_messages, BeliefState, BetheResult, BpConfig, Init,
    MatchingModel, MessageState, ZeroEntryPolicy,
};
pub use error::{Error, Result};
pub use exact::{brute_force_permanent, determinant, ryser_permanent, scaled_diagonal};
pub use logspace::{LogValue, Sign};
pub use matrix::{
    parse_matrix, random_permutation, random_uniform_matrix, serialize_matrix, MatrixFormat,
    Permutation, RngSpec, SquareMatrix,
};
