//! Certified bounds on how far Gaussian-process predictions can move when
//! the input is perturbed inside a box.
//!
//! A [`TrainedGP`] is fitted once. [`certify`] then bounds the probability
//! that a posterior draw deviates by more than `δ` from its value at a test
//! point, anywhere in an [`InputBox`]. The [`sampling`] module estimates the
//! same probabilities by brute force, and [`nngp`] covers ReLU network
//! kernels and image masks. The [`io`] module holds the file formats used by
//! the `gpcert` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod bounds;
pub mod certificate;
pub mod domain;
pub mod dudley;
pub mod error;
pub mod float_serde;
pub mod gp;
pub mod io;
pub mod kernels;
pub mod nngp;
pub mod sampling;
pub mod synthetic;

pub use certificate::{certify, Certificate, CertificateRequest, Mode, Target};
pub use domain::{InputBox, Interval};
pub use error::{Error, Result};
pub use gp::{Dataset, TrainedGP};
pub use kernels::{KernelSpec, PhiSup};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/nngp.md")]
    mod nngp {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
