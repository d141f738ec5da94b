//! Certified bounds on posterior extrema over boxes.

pub mod bnb;
pub mod envelope;
pub mod lipschitz;
pub mod mean;
mod qp;
pub mod variance;

pub use bnb::{BnBConfig, BoundResult};
pub use envelope::{kernel_envelope, linear_envelope, Curve, Line, LinearEnvelope};
pub use lipschitz::{lipschitz_bound, sup_d_bound};
pub use mean::{mean_inf_bounds, mean_sup_bounds, mu_o_l1_sup, mu_o_sup};
pub use variance::{variance_self_sup, variance_sup_bounds};
