//! Large-deviation and linear-response analysis of the entropy increments.
//!
//! `e(α) = lim (1/N) log 𝔼[e^{−α·S_N𝔍}]` is the logarithm of the spectral
//! radius of the deformed generator. Its derivatives give the mean rates
//! and the Gaussian covariance, its Legendre transform the rate function,
//! and its symmetries the fluctuation relations. Near equal temperatures
//! the kinetic coefficients follow from the temperature dependence of the
//! steady fluxes.

pub mod cumulant;
pub mod error;
pub mod export;
pub mod legendre;
pub mod response;
pub mod symmetry;

pub use cumulant::CumulantFunction;
pub use error::{FluctuationError, Result};
pub use export::{matrix_json, plot_script, write_cumulant_csv, write_rate_csv};
pub use legendre::{entropy_rate_function, legendre, rate_function, LegendrePoint, RateFunction};
pub use response::{
    clt_covariance, common_beta, extrapolate_to_zero, green_kubo, kinetic_coefficients,
    steady_fluxes, CltCovariance, GreenKubo, KineticMatrix,
};
pub use symmetry::{gc_symmetry_report, translation_symmetry_report, SymmetryReport, SYMMETRY_TOL};
