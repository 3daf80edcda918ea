pub mod cluster;
pub mod dom;
pub mod features;
pub mod hash;
pub mod ingest;
pub mod normalize;
pub mod orchestrator;
pub mod script;
pub mod synthesis;
