//! Joint communication and energy cooperation for renewable-powered CoMP
//! clusters with zero-forcing precoding.

pub mod baselines;
pub mod channel;
pub mod energy;
pub mod harness;
pub mod error;
pub mod lp;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
