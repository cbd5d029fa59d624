//! Polynomial root finding by post-selected iterative phase estimation on a
//! simulated register, with a classical root finder as reference.
//!
//! Pipeline: [`poly`] scales the polynomial into a modified companion
//! matrix, [`prc`] synthesizes a circuit realizing it under post-selection on
//! the [`qsim`] statevector simulator, and [`ipea`] reads eigenvalue phase and
//! magnitude from the controlled circuit and deflates root by root.
//! [`oracle`] supplies classical ground truth; [`ledger`] is the gate-count model.

pub mod oracle;
pub mod poly;
pub mod prc;
pub mod qsim;
pub mod ipea;
pub mod ledger;
