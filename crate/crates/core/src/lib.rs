//! Numerical laboratory for gradient descent-ascent dynamics.
//!
//! A payoff function `S(x, y)` drives the coupled flow `ẋ = -∇ₓS`,
//! `ẏ = +∇ᵧS`: the `x` variables descend the gradient while the `y`
//! variables ascend it. This crate simulates that flow, monitors the
//! total-energy Lyapunov function `L = ½|ż|² - r·S` and the
//! electric/magnetic/residual force decomposition of the induced
//! second-order dynamics, certifies convergence and boundedness from the
//! extremal eigenvalues of the Hessian blocks `S_xx` and `S_yy`, and
//! classifies trajectories as converged, bounded-non-convergent,
//! diverged, or undetermined.
//!
//! Payoffs come as built-in families (quadratic, Liénard) with exact
//! derivatives, or as parsed expressions differentiated by forward-mode
//! dual numbers.

// Validation sites use `!(x > 0.0)` so NaN is rejected along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod classify;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod linalg;
pub mod output;
pub mod payoff;
pub mod sample;

pub use error::{EvalError, InvalidPayoff};
pub use payoff::{ExpressionPayoff, LienardPayoff, Payoff, QuadraticPayoff};
