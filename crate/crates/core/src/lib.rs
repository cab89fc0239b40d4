//! Knowledge-based situational fuzzy control.
//!
//! The engine parses controlled-language utterances, infers with sup-min
//! composition weighted by possibility, selects and explains decisions by
//! situational control, and drives a simulated organizational unit.

pub mod inference;
pub mod kb;
pub mod lp;
pub mod reasoning;
pub mod service;
pub mod sim;
pub mod situational;
