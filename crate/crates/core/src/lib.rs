//! Noisy Ramsey metrology with periodically driven atoms.
//!
//! Each atom of an N-atom GHZ probe decays into its own 2D square-lattice
//! reservoir. A periodic modulation of the transition frequency can bind a
//! Floquet bound state in a quasienergy gap, which freezes the decay and
//! restores `t²` growth of the quantum Fisher information.
//!
//! Modules:
//! - [`model`]: parameters, spectral density, correlation function
//! - [`special`], [`quad`]: elliptic integrals, Lambert W, quadrature
//! - [`dynamics`], [`lattice`]: amplitude dynamics and its lattice oracle
//! - [`qfi`]: QFI of the GHZ probe
//! - [`floquet`]: Floquet bound states and spectrum scans
//! - [`asymptotics`]: long-time and Markovian closed forms
//! - [`design`]: inverse design of the drive amplitude
//! - [`io`], [`cli`]: file formats and the command-line tool

pub mod asymptotics;
pub mod cli;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod io;
pub mod lattice;
pub mod model;
pub mod qfi;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
pub use model::{MarkovianModel, ModelParams};
