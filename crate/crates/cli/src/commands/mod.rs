pub mod cep;
pub mod fit;
pub mod replicate;
pub mod sensitivity;
pub mod simulate;

use crate::config::KeyValues;
use crate::CliError;
use std::path::{Path, PathBuf};

/// Loads the optional key-value config file named by `--config`.
pub fn load_config(path: &Option<PathBuf>) -> Result<KeyValues, CliError> {
    match path {
        Some(p) => KeyValues::load(p),
        None => Ok(KeyValues::default()),
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}
