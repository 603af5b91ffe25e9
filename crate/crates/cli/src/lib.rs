//! Configuration, presets and the run pipeline behind the `madelab` tool.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{canonicalize, parse_config, ConfigError, Scenario, ScenarioConfig};
pub use run::{run_scenario, RunError, RunManifest, RunOptions};
