#![doc = include_str!("../../../README.md")]

pub mod bench;
pub mod error;
pub mod esd;
pub mod fpa;
pub mod functionals;
pub mod model;
pub mod ode;
pub mod oracles;
pub mod quadrature;
pub mod silverstein;
pub mod support;

pub use error::{Error, Result};
pub use model::{
    check_gamma, comb_psd, validate_psd, DensityInterval, PopulationSpectrum, Precision, SpectralDensity,
    StieltjesSample, SupportReport,
};
pub use esd::{compute_esd, compute_esd_detailed, evaluate_density, solve_interval};
pub use support::{find_leftmost_edge, find_support};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/population-spectra.md")]
    mod population_spectra {}
    #[doc = include_str!("../../../book/src/silverstein-equation.md")]
    mod silverstein_equation {}
    #[doc = include_str!("../../../book/src/support.md")]
    mod support {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/fixed-point.md")]
    mod fixed_point {}
    #[doc = include_str!("../../../book/src/functionals.md")]
    mod functionals {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
}
