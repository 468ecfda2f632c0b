//! Harmonic analysis on the unit sphere of a nonarchimedean local field,
//! computed at finite level.
//!
//! Every object lives over a finite quotient `O/p^M`, where the theory
//! becomes finite linear algebra: the sphere is a finite set, `GL_n(O)` acts
//! through a finite group, and locally constant functions are vectors.

pub mod arch;
pub mod error;
pub mod harmonics;
pub mod linalg;
pub mod matgroup;
pub mod pseries;
pub mod ring;
pub mod sphere;

pub use error::{Error, Result};
