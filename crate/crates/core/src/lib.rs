//! Riemannian optimization of LOCC protocols over products of complex Stiefel
//! manifolds, with PPT semidefinite upper bounds.

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod manifold;
pub mod objectives;
pub mod optimizer;
pub mod protocol;
pub mod sdp;
pub mod state;

pub use error::{Error, Result};
