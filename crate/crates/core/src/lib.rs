//! Classical polaron dynamics with an ultraviolet cutoff, together with a
//! small truncated-Fock quantum desk used to cross-check the classical limit.
//!
//! The classical state lives on `R^{2d} ⊕ L²(k-grid)`; see [`phasespace`].
//! Form factors and the Gross profile are tabulated in [`formfactor`], the
//! three energy functionals and their gradients in [`energy`], the explicit
//! dressing map in [`dressing`] and all flows in [`dynamics`].

pub mod dressing;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod exec;
pub mod formfactor;
pub mod phasespace;
pub mod quantumdesk;
pub mod quadrature;
pub mod sampling;

pub use error::{Error, Result};
pub use num_complex::Complex64;
