//! Numerical kernels for the kinetic Kolmogorov-Fokker-Planck equation
//! `∂_t u - v·D_x u - a^{ij}(t) D_{v_i v_j} u + λu = f`.

pub mod coefficients;
pub mod corpus;
pub mod error;
pub mod fd;
pub mod fractional;
pub mod geometry;
pub mod grid;
pub mod maximal;
pub mod norms;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod verification;
pub mod weights;

pub use error::{KfpError, Result};
pub use geometry::{Cylinder, CylinderSide, PhasePoint, QuasiMetricParams, SlantSign};
pub use grid::{GridField, GridSpec};
pub use spectral::SpectralField;
