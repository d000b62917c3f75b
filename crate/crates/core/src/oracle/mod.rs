//! Ground truth for testing and benchmarking: hand-built fixtures, a seeded
//! synthetic generator with planted noise, noise injectors, and exhaustive
//! optimal searches for small instances.

pub mod fixtures;
mod inject;
mod opt;
mod synth;

pub use inject::{inject_noise, InjectionLog, NoiseKind};
pub use opt::{opt_pattern, opt_pattern_with_limit, opt_tuple, opt_tuple_with_limit, OPT_PATTERN_LIMIT, OPT_TUPLE_LIMIT};
pub use synth::{generate, GroundTruth, PlantSpec, SynthSpec};
