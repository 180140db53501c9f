//! The guide's chapters, included as documentation so `cargo test` runs
//! every Rust block in them.

#[doc = include_str!("../../../book/src/introduction.md")]
#[cfg(doctest)]
pub struct Introduction;

#[doc = include_str!("../../../book/src/model.md")]
#[cfg(doctest)]
pub struct Model;

#[doc = include_str!("../../../book/src/access.md")]
#[cfg(doctest)]
pub struct Access;

#[doc = include_str!("../../../book/src/simulation.md")]
#[cfg(doctest)]
pub struct Simulation;

#[doc = include_str!("../../../book/src/policies.md")]
#[cfg(doctest)]
pub struct Policies;

#[doc = include_str!("../../../book/src/agent.md")]
#[cfg(doctest)]
pub struct Agent;

#[doc = include_str!("../../../book/src/oracle.md")]
#[cfg(doctest)]
pub struct Oracle;

#[doc = include_str!("../../../book/src/harness.md")]
#[cfg(doctest)]
pub struct Harness;
