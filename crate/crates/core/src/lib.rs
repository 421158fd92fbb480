//! Hermite expansions and the harmonic analysis built on them: multiscale
//! tiles with Gauss-Hermite cubature, Littlewood-Paley windows, needlet
//! frames, Besov and Triebel-Lizorkin norms, pseudo-multipliers and a
//! harness that measures the constants in the associated estimates.

pub mod error;
pub mod frames;
pub mod hermite;
pub mod lp;
pub mod norms;
pub mod pseudomult;
pub mod tiles;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
