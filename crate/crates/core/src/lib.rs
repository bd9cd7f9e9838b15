pub mod extraction;
pub mod taxonomy;
pub mod gateway;
pub mod analysis;
pub mod metrics;
