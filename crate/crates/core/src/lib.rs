//! Battery-aware user association and power control for a cellular network
//! with one harvesting-only base station and one hybrid-supply base station.

pub mod baselines;
pub mod controller;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod stochastic;
