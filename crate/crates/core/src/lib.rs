//! Classical two-bit simulation of qubit prepare-and-measure statistics.
//!
//! The crate is organised around the pipeline it implements:
//!
//! * [`qstate`]: Bloch vectors, rank-1 POVMs, Hermitian matrices and the Born rule.
//! * [`protocols`]: round engines for the two-bit, interactive, singlet and Bell protocols.
//! * [`harness`]: Monte Carlo estimation against quantum predictions and identity checks.
//! * [`lp`]: the linear-programming backend interface and a dense revised simplex.
//! * [`witness`]: classical simulability via visibility LPs, dimension witnesses and bounds.
//! * [`exact`]: exact-rational certificates of witness violations.
//! * [`geometry`]: octahedron, snub cube and Thomson configurations.

pub mod error;
pub mod exact;
pub mod geometry;
pub mod harness;
pub mod lp;
pub mod protocols;
pub mod qstate;
pub mod rng;
pub mod scenario;
pub mod witness;

pub use error::{Error, Result};
pub use qstate::{BlochVector, HermitianMatrix, PovmElement, Rank1Povm, TwoPartyState};
pub use witness::{Behavior, Witness};

/// Default seed used whenever a caller does not provide one.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;
