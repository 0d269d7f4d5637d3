//! Attention-based semantic video compression for edge offloading, with the
//! latency/accuracy cost model, budget planner and channel-trace simulator
//! that decide how a clip is compressed and where it is processed.

pub mod attention;
pub mod baselines;
pub mod budget;
pub mod clip;
pub mod codec;
pub mod latency;
pub mod mask;
pub mod planner;
pub mod profile;
pub mod recovery;
pub mod simulator;
pub mod tensor;
pub mod weights;
