//! Model-free data-driven solvers for small-strain mechanics, with tangent
//! spaces learned from the material data by ball-tensor voting.

pub mod benchmarks;
pub mod dd_solver;
pub mod error;
pub mod fem;
pub mod material_data;
pub mod phase_space;
pub mod study;
pub mod tensor_voting;

pub use dd_solver::{solve, ElementDataSets, Scheme, SolveResult, SolverConfig};
pub use error::{Error, Result};
pub use fem::{ConstitutiveLaw, Problem};
pub use material_data::MaterialDataSet;
pub use phase_space::{GlobalState, LocalState, MetricTensor};
pub use tensor_voting::{TangentFrame, VotingConfig};
