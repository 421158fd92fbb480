//! Hermite functions, their kernels and the spectral representation.

mod difference;
mod grid;
mod kernels;
mod multi;
mod quadrature;
mod recurrence;
mod spectral;

pub use difference::{binomial, finite_difference, leibniz_difference};
pub use grid::{GridFunction, TensorGrid};
pub use kernels::{
    christoffel, degree_convolution, e_function, log_christoffel, projector_kernel, projector_kernels,
    projector_kernels_dx, qq_kernel,
    Constants,
};
pub use multi::{eval_hermite_nd, MultiIndex};
pub use quadrature::{gauss_hermite, gauss_legendre, hermite_zeros, GaussHermite, GaussRule};
pub use recurrence::{
    eval_hermite_1d, h0_at_zero, hermite_derivative_1d, hermite_derivative_table,
    hermite_moments, ScaledHermite,
};
pub(crate) use recurrence::hermite_values;
pub use spectral::{eigenvalue, SpectralFunction};
