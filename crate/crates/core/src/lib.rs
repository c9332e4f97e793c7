//! Mallows ranking model for tied, partial and right-censored rankings.
//!
//! The crate covers the whole pipeline: the penalized Kendall-tau distance
//! between bucket orders ([`rankings`]), the exact Mallows model over
//! `{1..l}^n` ([`mallows`]), Metropolis-within-Gibbs posterior sampling with
//! MAP extraction ([`inference`]), synthetic data with right censoring
//! ([`synth`]) and dataset/report serialization ([`io`]).

pub mod error;
pub mod inference;
pub mod io;
pub mod mallows;
pub mod rankings;
pub mod synth;

pub use error::{Error, Result};
