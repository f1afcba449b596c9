//! Decentralised deep-RL RAN controllers refined by a centralised
//! genetic-algorithm optimiser over an asynchronous message fabric.

pub mod agents;
pub mod federation;
pub mod harness;
pub mod ne;
pub mod neuro;
pub mod ransim;
