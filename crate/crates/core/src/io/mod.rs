pub mod cache;
pub mod config;
pub mod report;
pub mod svg;

pub use config::{bundled, load_config, parse_config, read_json, write_json, ExperimentConfig};
pub use report::{emit_frames, emit_results, write_trajectory_csv};
pub use cache::{cached_model, CacheStatus, ModelCache};
