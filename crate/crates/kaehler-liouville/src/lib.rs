//! Kähler-Liouville manifolds from combinatorial seed data.
//!
//! The exact layer ([`poset`], [`constants`], [`fan`], [`invariants`])
//! works over the integers and rationals.  The analytic layer ([`frame`],
//! [`block`], [`flow`], [`fubini_study`]) works in `f64`.

pub mod config;
pub mod constants;
pub mod exact;
pub mod fan;
pub mod poset;
pub mod frame;
pub mod invariants;
pub mod numeric;
pub mod block;
pub mod cli;
pub mod flow;
pub mod fubini_study;
