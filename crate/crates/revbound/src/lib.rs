//! Revenue upper bounds and simple selling mechanisms for a monopolist
//! selling m goods to a single additive buyer.
//!
//! The library computes closed-form upper bounds on the optimal revenue
//! for i.i.d. uniform and independent exponential valuations, evaluates
//! the explicit dual solutions that certify those bounds, and provides
//! independent oracles (Monte Carlo simulation of menu mechanisms and a
//! discretized linear program) that confirm every claimed number at desk
//! scale.

pub mod bounds;
pub mod dual;
pub mod error;
pub mod gamma;
pub mod lp;
pub mod mechanisms;
mod fixedpoint;
pub mod numeric;
pub mod priors;

pub use error::{Error, Result};
