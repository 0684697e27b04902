//! Highway lane-change decision making with a rule-based safety shield:
//! traffic sources, the driving environment, longitudinal/lateral control,
//! the Horn-clause shield, and a from-scratch deep Q-learner.

pub mod agent;
pub mod checkpoint;
pub mod control;
pub mod env;
pub mod nn;
pub mod shield;
pub mod traffic;
pub mod types;
