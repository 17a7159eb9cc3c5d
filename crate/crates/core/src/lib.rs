pub mod channel;
pub mod spectrum;
pub mod hiding;
pub mod explore;
pub mod jammer;
pub mod dqn;
pub mod policy;
pub mod scenario;
pub mod arena;
pub mod metrics;
pub mod experiment;
