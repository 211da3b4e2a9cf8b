//! File formats, fixtures and the deterministic generator behind them.

pub mod report;
pub mod rng;
pub mod synth;
pub mod tensor;
