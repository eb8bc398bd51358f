//! Cost-minimal bidding for overlapping ad campaigns over second-price
//! auctions: supply-curve arithmetic, recursive decomposition solver with
//! analytic cost floor and gap bound, two-bid mixed strategies, brute-force
//! oracles and a calibrated auction simulator.

pub mod auction_sim;
pub mod error;
pub(crate) mod flow;
pub mod io;
pub mod market;
pub mod oracle;
pub mod single_group;
pub mod solver;
pub mod supply_curve;

pub use error::{Error, Result};
