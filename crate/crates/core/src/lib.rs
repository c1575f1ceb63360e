//! Pole selection and error analysis for rational system identification on
//! the unit disk.
//!
//! The crate is organized around a few layers: pseudohyperbolic geometry and
//! elliptic integrals ([`hyperbolic`]), conformal maps between pole regions
//! and annuli ([`conformal`]), asymptotically optimal and minimax pole
//! configurations ([`pole_select`]), partial-fraction and state-space LTI
//! plumbing ([`lti`]), closed-loop simulation and least-squares
//! identification ([`ident`]), information-theoretic sample-size floors
//! ([`hardness`]), and reproducible benchmark systems ([`benchmarks`]).

pub mod benchmarks;
pub mod conformal;
pub mod error;
pub mod hardness;
pub mod hyperbolic;
pub mod ident;
pub mod lti;
mod optim;
pub mod pole_select;
pub mod region;
pub mod serdes;

pub use error::{Error, Result};
pub use hyperbolic::{
    blaschke_product, elliptic_k, pair_product, pseudo_metric, tau_analytic,
    worst_case_product, EllipticModulus, PairProduct,
};
pub use region::{PoleRegion, RegionShape};
