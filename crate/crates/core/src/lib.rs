//! Novelty search with explore, refine and regenerate phases for building
//! repertoires of diverse, successful open-loop grasping trajectories.
//!
//! ```
//! use e2r::{run, RunConfig, Strategy};
//!
//! let cfg = RunConfig { budget: 300, ..RunConfig::default() };
//! let out = run(&cfg, Strategy::E2R).unwrap();
//! assert_eq!(out.logs.len(), 4);
//! ```

pub mod engine;
pub mod env;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod novelty;
pub mod rng;
pub mod selection;
pub mod variation;

pub use engine::{run, Engine, GenerationLog, RunOutput, Strategy};
pub use env::{EnvConfig, Environment, PlanarEnv};
pub use error::{Error, Result};
pub use metrics::MetricsConfig;
pub use model::{
    validate_config, BehaviorDescriptor, Genome, Individual, NoveltyArchive, RunConfig, Slot,
    SuccessArchive, Trajectory,
};
pub use variation::MutationParams;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/genome.md")]
    mod genome {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/novelty.md")]
    mod novelty {}
    #[doc = include_str!("../../../book/src/variation.md")]
    mod variation {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
