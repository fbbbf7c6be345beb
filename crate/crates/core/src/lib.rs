//! Numerical weighted-norm analysis on the half line `(0, ∞)` for the
//! Bessel-type measures `dm_λ = t^{2λ} dt` and `dν_λ = t^{2λ+1} dt`.
//!
//! The crate is organised bottom-up:
//!
//! - [`measure`]: closed-form power moments, the two measures, dyadic cells,
//!   truncated windows and piecewise-constant grid functions.
//! - [`weights`]: per-interval Muckenhoupt-type products and their suprema
//!   for the classical, Andersen–Kerman and tilde classes (plus local
//!   variants), exact power-weight membership, dual weights.
//! - [`maximal`]: the λ-maximal function, dyadic expectations, the dyadic
//!   maximal function, Calderón–Zygmund decomposition and boundedness probes.
//! - [`oscillation`]: sharp maximal function, BMO norms for both averaging
//!   measures, median values, John–Nirenberg profiles.
//! - [`reverse`]: reverse-Hölder checks, absolute continuity, ratio testing,
//!   openness search, testing-condition characterisation.
//! - [`singular`]: truncated kernel operators, commutators, the contour
//!   formula for commutators and the lower-bound set construction.
//!
//! Every supremum is taken over a finite family of intervals inside a dyadic
//! window `(2^{-L}, 2^L]` and is therefore a lower bound for the true value.

// `!(x > y)` guards are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod serde_ext;
pub mod error;
pub mod maximal;
pub mod measure;
pub mod oscillation;
pub mod reverse;
pub mod singular;
pub mod weights;

pub use error::{Error, Result};
pub use measure::{
    DyadicInterval, Grid, GridFunction, Interval, LambdaMeasure, MeasureKind, Window,
};

pub use weights::{ClassKind, Weight, WeightConstantReport};
