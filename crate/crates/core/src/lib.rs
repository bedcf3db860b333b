//! Effective homology engine.
//!
//! Spaces are locally effective simplicial sets; each constructed space carries a
//! strong chain equivalence between its normalized chains and a finite-type
//! complex, so integer homology can be computed by Smith normal form even when the
//! space has infinitely many simplices in every dimension.

pub mod error;
pub mod linalg;
pub mod gen;
pub mod cmbn;
pub mod guard;
pub mod complex;
pub mod reduction;
pub mod simplicial;
pub mod words;
pub mod loops;
pub mod em;
pub mod postnikov;

pub use error::{Error, Result};
