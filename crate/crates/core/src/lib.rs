//! Scenario generation pipeline: a small probabilistic scenario language,
//! few-shot LLM script generation with diagnostic-guided repair, a
//! deterministic kinematic traffic simulator with collision classification,
//! control-map rendering, and conditioning-bundle export for external
//! video diffusion backends.

pub mod dsl;
pub mod sim;
pub mod render;
pub mod condgen;
pub mod prompt;
