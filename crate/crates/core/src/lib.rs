//! Steady-state transmission, bistability and optical nonreciprocity of a few
//! two-level atoms strongly coupled to an asymmetric Fabry–Pérot cavity.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bistability;
pub mod cubic;
pub mod designer;
pub mod error;
pub mod measurement;
pub mod params;
pub mod quantum;
pub mod semiclassical;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
pub use params::{Direction, RawParams, SystemParams};
