//! Heston-model pricing of volatility-index futures, joint calibration to an
//! option smile and the index level, and the learners used to explain the
//! market-minus-model residual from trader inventory features.
//!
//! The numerical kernels (`blackscholes`, `heston`, `vstoxx`, `quadrature`,
//! `learners::lasso`) are generic over [`Real`], implemented for `f32` and
//! `f64`. Concrete aliases for the common `f64` instantiations live here.

pub mod blackscholes;
pub mod calibrator;
pub mod error;
pub mod features;
pub mod heston;
pub mod learners;
pub mod mc;
pub mod optimize;
pub mod quadrature;
pub mod real;
pub mod vstoxx;

pub use blackscholes::OptionKind;
pub use error::{Error, Result};
pub use real::Real;

pub type HestonParams = heston::HestonParams<f64>;
pub type HestonParamsF32 = heston::HestonParams<f32>;
pub type OptionQuote = blackscholes::OptionQuote<f64>;
pub type OptionQuoteF32 = blackscholes::OptionQuote<f32>;
pub type IndexWindow = vstoxx::IndexWindow<f64>;
pub type LassoFit = learners::LassoFit<f64>;
pub type LassoPath = learners::LassoPath<f64>;
pub type Standardizer = features::Standardizer<f64>;
