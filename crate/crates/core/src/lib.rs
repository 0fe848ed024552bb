//! Quantile-particle simulation of a diffusion on the space of probability
//! measures on ℝ driven by a spectrally colored Brownian sheet.
//!
//! A measure `μ` is carried by its quantile function sampled at
//! `u_i = (i + ½)/n`. Each particle moves as
//!
//! ```text
//! dy_i = b(y_i, μ) dt + m_i^{-1/2} Σ_j f(k_j) [cos(k_j y_i) dW^re_j + sin(k_j y_i) dW^im_j]
//! ```
//!
//! with mass `m_i = (1/n) Σ_l φ(y_i − y_l)`. Around this core sit the derivative
//! flow, drift inversion with Girsanov reweighting, a Hölder-to-Lipschitz
//! regularizer, a conditional-law Picard iteration and a coalescing reference flow.

pub mod acceptance;
pub mod arratia;
pub mod drift;
pub mod dynamics;
pub mod error;
pub mod girsanov;
pub mod kernels;
pub mod meanfield;
pub mod noise;
pub mod state;

pub use error::{Error, Result};
