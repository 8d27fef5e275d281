//! Core algorithms for misinformation attacks on a social network coupled to a
//! power grid.
//!
//! A social seed set diffuses under the Independent Cascade model; every
//! influenced user whose account is coupled to a demand bus inflates that
//! bus's demand. The inflated demand is fed to a DC power-flow cascade model
//! in which overloaded lines trip until the grid stabilizes. On top of these
//! two simulators the crate provides the attack strategies (random, greedy
//! social, and the two social-power variants built on the cascading impact
//! calculator), a small LP/MILP engine with the three formulations they need,
//! and controlled load shedding as the defensive counterpart.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI and
//! parallel sweeps live in the companion `misgrid` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod attack;
pub mod construct;
pub mod diffusion;
mod error;
mod linalg;
pub mod milp;
pub mod model;
pub mod powerflow;
pub mod protect;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    compute_yield, failed_nodes, BusId, Coupling, Generator, Line, LineId, Load, Params,
    PowerGrid, Scenario, SocialEdge, SocialGraph, UserId,
};
