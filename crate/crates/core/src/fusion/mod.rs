//! Exact and weighted-exponential-product fusion on grid pdfs, weight
//! optimization, and channel-filter state.

mod channel;
mod omega;
mod rules;

pub use channel::{ChannelState, LinkId};
pub use omega::{optimize_omega, optimize_omega_masses, OmegaCost, OmegaCriterion};
pub use rules::{estimate_common_info, exact_fuse, exact_product, power_product, wep_fuse, FusedMasses};
