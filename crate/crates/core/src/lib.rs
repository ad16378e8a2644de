//! Discrete fractional `W^{s,p}` energies of maps into spheres, their
//! constrained minimizers, and numerical probes of minimizer regularity.
//!
//! The pipeline is [`grid`] → [`kernel`] → [`energy`] → [`minimize`] →
//! [`diagnostics`], with [`cli_io`] wrapping it for the `gagliardo` binary.
//! The guide in `book/` walks through it; its examples run as doc-tests.

pub mod error;
pub mod grid;
pub mod kernel;
pub mod params;
pub mod quadrature;
pub mod sum;
pub mod field;
pub mod energy;
pub mod manifold;
pub mod minimize;
pub mod diagnostics;
pub mod presets;
pub mod cli_io;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/discretization.md")]
mod book_discretization {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/minimization.md")]
mod book_minimization {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/diagnostics.md")]
mod book_diagnostics {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/formats.md")]
mod book_formats {}
