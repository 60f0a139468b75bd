//! Surface impedance tensors and Rayleigh surface waves for anisotropic
//! linear elastic half-spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`material`] - stiffness tensors in Voigt form, acoustic (Christoffel)
//!   tensors, validation, rotation and JSON ingestion.
//! * [`polyfactor`] - the quadratic pencil `f(s) = c(xi + s nu) - rho` and its
//!   spectral factor `q`, computed both from the pencil eigenpairs and from
//!   real line integrals of `f(s)^-1`.
//! * [`impedance`] - the impedance tensor `z = i(a q + a1)`, its identity
//!   residuals, small dense Sylvester solves and the radial derivative of `z`.
//! * [`rayleigh`] - limiting speeds, Rayleigh speeds as roots of `det z`,
//!   polarisation vectors, direction scans and kernel phase transport.
//! * [`isotropic`] - closed forms for isotropic media and the full
//!   subprincipal-symbol pipeline.
//! * [`selftest`] - the identity suite used by the `selftest` command.
//!
//! Units are SI throughout: stiffness in Pa, density in kg/m^3, speeds in
//! m/s. Tangential covectors `xi` are slownesses (s/m), i.e. wave numbers at
//! unit angular frequency, so that `c_r |xi| = 1` on the Rayleigh variety.

pub mod error;
pub mod impedance;
pub mod isotropic;
pub mod linalg;
pub mod material;
pub mod polyfactor;
pub mod rayleigh;
pub mod selftest;

pub use error::{Error, Result};
pub use impedance::{
    impedance_diagnostics, impedance_tensor, radial_derivative_z, solve_zminus,
    subprincipal_from_ingredients, sylvester_solve, ImpedanceData, ImpedanceDiagnostics, ZMinus,
};
pub use material::{
    acoustic_tensor, isotropic_stiffness, parse_material, rotate_stiffness, validate_stiffness,
    Material, StiffnessTensor, SurfaceFrame, ValidationReport,
};
pub use polyfactor::{
    build_pencil, factor_integral, factor_residuals, is_elliptic, pencil_spectrum,
    spectral_factor, FactorMethod, QuadraticPencil, SpectralFactor,
};
pub use rayleigh::{
    eval_p, kernel_phase_holonomy, limiting_speed, rayleigh_point, scan_directions, Holonomy,
    RayleighPoint, Scan, ScanRow,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Real 3-vector (covector components in an orthonormal frame).
pub type Vec3 = nalgebra::Vector3<f64>;
/// Complex 3-vector.
pub type CVec3 = nalgebra::Vector3<C64>;
/// Real 3x3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// Complex 3x3 matrix.
pub type CMat3 = nalgebra::Matrix3<C64>;
/// Complex 2x2 matrix.
pub type CMat2 = nalgebra::Matrix2<C64>;
