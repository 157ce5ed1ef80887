//! Exterior calculus on Lie algebroids over a single coordinate chart, and the
//! secondary characteristic classes of base-preserving algebroid morphisms.
//!
//! Everything is symbolic in the base coordinates: coefficients are
//! [`ScalarField`] expression DAGs with exact derivatives, and identities are
//! checked by evaluating residual forms at seeded sample points.

pub mod algebroid;
pub mod check;
pub mod chern_weil;
pub mod classes;
pub mod connection;
pub mod error;
pub mod expr;
pub mod form;
pub mod matrix;

pub use algebroid::{AlgebroidChart, Morphism, Section};
pub use check::{form_distance, form_residual, sample_points, CheckReport, Probes};
pub use connection::AConnection;
pub use error::{Error, EvalError, ParseError, Result};
pub use expr::{parse_expression, ScalarField, Tape};
pub use form::{generalized_delta, AForm, MultiIndex};
pub use matrix::{FieldMatrix, FormMatrix};
