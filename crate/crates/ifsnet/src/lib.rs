//! Configuration files, `Φ⁻¹` table files, PGM output and the run driver for
//! the `ifsnet` renderer. The numerical core lives in `ifsnet-core`.

pub mod config;
pub mod image;
pub mod report;
pub mod run;
pub mod table_file;

pub use config::{load_config, parse_config, ConfigError, RunConfig};
pub use run::{render, run, RunError, RunOutput};
