//! Finite-space Kantorovich optimal transport through the algebra of
//! table moves: couplings of the transportation polytope, zero-margin
//! moves, maximal-homophily (North-West) tables in two and three
//! dimensions, connectivity paths, an exact solver certified by cyclical
//! monotonicity, and a simulated-annealing MCMC with its experiment
//! harness.

pub mod annealing;
pub mod error;
pub mod homophily;
pub mod io;
pub mod moves;
pub mod par;
pub mod tables;
pub mod transport;
pub mod trivariate;

pub use error::{Error, Result};
pub use tables::{
    cost_of, product_coupling, support, support_components, validate_coupling,
    vertex_support_check, Coupling, CostMatrix, Matrix, ProbabilityVector,
};

pub use annealing::{anneal, AnnealConfig, AnnealReport, Schedule};
pub use homophily::{cograduation_index, homophily_coupling, path_to_homophily, BivariateSample};
pub use moves::{is_cyclically_monotone, BasicMove, Move, SimpleMove};
pub use transport::{exact_kcost, fill_diagonal, geodesic_coupling, reduce_cycles, TransportSolution};
pub use trivariate::{homophily3, path_to_homophily3, Coupling3, Tensor3, TriMove};
