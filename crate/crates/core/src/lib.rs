//! Numerical laboratory for rigidity and Jamison sequences: circle
//! arithmetic, sequence families, continued fractions, Fourier certificates
//! of singular measures, Cantor-type constructions, the operator `T = D + B`
//! with closed-form powers, and a Gaussian process simulator.

pub mod cantor;
pub mod circle;
pub mod contfrac;
pub mod error;
pub mod gaussproc;
pub mod hp;
pub mod json;
pub mod measures;
pub mod operator;
pub mod rng;
pub mod seqgen;

pub use error::{Error, Result};
