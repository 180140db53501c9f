//! Joint placement of diffusion-model denoising blocks on edge base stations
//! and uplink channel scheduling for mobile users.
//!
//! The crate bundles a discrete-time simulator ([`sim`]), a greedy access
//! scheduler ([`mac`]), a D3QL placement agent ([`agent`], built on [`nn`]),
//! heuristic baselines ([`policy`]), an exact solver and constraint checker
//! for small instances ([`oracle`]) and the experiment harness ([`harness`]).

pub mod agent;
pub mod config;
pub mod harness;
pub mod mac;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod trace;
