//! Bayesian retrodiction for quantum channels and superchannels.
//!
//! The crate is organized bottom-up:
//!
//! - [`qmat`]: dense complex matrices, tensor products, partial traces and
//!   Hermitian matrix functions.
//! - [`channels`]: density matrices, CPTP maps in Choi form, instruments and
//!   fidelity.
//! - [`supermaps`]: superchannels over the four systems `(W, X, Y, Z)`, their
//!   validity conditions and the basic constructions.
//! - [`retrodiction`]: the Petz map, retrodiction supermaps and the
//!   co-isometry form of a retrodiction build.
//! - [`vsolver`]: numerical search for the co-isometry `V`.
//! - [`classical`]: Bayes and Jeffrey updates on finite alphabets.
//! - [`experiments`]: recovery strategies and fidelity sweeps.
//! - [`io`]: the JSON and CSV formats used by the command-line tool.

pub mod channels;
pub mod choi;
pub mod classical;
pub mod error;
pub mod experiments;
pub mod io;
pub mod qmat;
pub mod random;
pub mod retrodiction;
pub mod supermaps;
pub mod vsolver;

pub use channels::{Channel, DensityMatrix, Instrument, MeasurePrepareChannel};
pub use error::{Error, Result};
pub use qmat::{CMatrix, SystemDims, C64};
pub use retrodiction::{Family, RetrodictionBuild};
pub use supermaps::{Superchannel, TeethRealization};
