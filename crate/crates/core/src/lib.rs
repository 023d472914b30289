//! Discrete exterior calculus on tetrahedral meshes for helicity-constrained
//! magnetic energy minimisation.
//!
//! The crate is organised bottom-up: [`mesh`] builds oriented simplicial
//! complexes, [`whitney`] assembles the lowest-order Whitney operators,
//! [`spaces`] and [`hodge`] expose the constrained and harmonic subspaces,
//! [`curlops`] solves the curl eigenproblem, [`energetics`] minimises energy
//! at fixed helicity and [`diffeo`] checks invariance under volume-preserving
//! maps.

mod cache;
pub mod curlops;
pub mod diffeo;
pub mod energetics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod hodge;
pub mod linalg;
pub mod mesh;
pub mod rank;
pub mod spaces;
pub mod sparse;
pub mod whitney;

pub use error::{Error, Result, Sign};
pub use mesh::{generate_mesh, load_mesh, save_mesh, Domain, SimplicialComplex};
pub use whitney::{assemble_operators, evaluate_cochain, interpolate_to_cochain, Cochain, OperatorBundle};
