//! Pseudodifferential toolkit for linear p-evolution equations in Gevrey
//! classes: symbols, quantization, conjugation by infinite-order operators,
//! constant selection and energy checks on a periodic lattice.

// `!(a > b)` is deliberate in validators: NaN must be rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod config;
pub mod cutoffs;
pub mod error;
pub mod grid;
pub mod jet;
pub mod linalg;
pub mod norms;
pub mod pipeline;
pub mod problems;
pub mod quad;
pub mod quantizer;
pub mod runconfig;
pub mod symbols;

pub use config::{BoundaryConfig, GevreyConfig};
pub use error::{PevoError, Result};
pub use grid::{bracket_h, spectral_derivative, Grid, GridSpec, StateVector};
pub use symbols::{symbol_derivative, tabulate, FnSymbol, ScalarSymbol, SymbolGrid};
pub use problems::{make_preset, PresetOverrides, Problem};
pub use quantizer::{OperatorMatrix, Side};
pub use runconfig::RunConfig;
