//! Subcommand implementations.

mod ask;
mod eval;
mod forge;
mod index;
mod ingest;
mod serve;

pub use ask::{ask, AskOptions};
pub use eval::eval;
pub use forge::{forge, ForgeInputs};
pub use index::index;
pub use ingest::ingest;
pub use serve::serve;

use std::path::Path;

use trellis_core::config::EngineConfig;
use trellis_core::Result;

/// Write the fully explicit default config.
pub fn generate_config(output: Option<&Path>) -> Result<()> {
    let json = EngineConfig::default_json();
    match output {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, &json)?;
            println!("wrote default config to {}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}
