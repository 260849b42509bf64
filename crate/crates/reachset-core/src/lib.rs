//! Sampled boundaries of reachability sets for curvature-bounded paths.
//!
//! A unit-speed vehicle moves in 2D or 3D with curvature bounded by
//! `kappa_max`. The set of states reachable at an exact arrival time has a
//! boundary swept out by a small catalogue of extremal path classes:
//! circular arcs (`C`), straight lines (`S`), helicoidal arcs with a
//! distinguished torsion profile (`H`), and their concatenations. This crate
//! enumerates those classes, integrates the associated geometry, checks the
//! Pontryagin conditions that certify a candidate as a boundary point, and
//! assembles sampled boundary clouds together with Monte Carlo inner
//! approximations used for cross-validation.
//!
//! The crate is `no_std` + `alloc`; all floating-point math goes through
//! [`libm`] so results are bit-stable across platforms. File IO, CSV/JSON
//! serialization, and thread-parallel drivers live in the companion CLI
//! crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod families;
pub mod geom;
pub mod math;
pub mod pmp;
pub mod reach;
pub mod torsion;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
