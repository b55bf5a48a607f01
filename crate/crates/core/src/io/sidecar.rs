//! Plain-text provenance written beside each frame store.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::store::write_atomic;

/// What a store holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreKind {
    Signal,
    Background,
}

impl StoreKind {
    fn as_str(self) -> &'static str {
        match self {
            StoreKind::Signal => "signal",
            StoreKind::Background => "background",
        }
    }
}

pub fn sidecar_path(store: &Path) -> PathBuf {
    let mut name = store
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".meta");
    store.with_file_name(name)
}

/// Writes the full resolved configuration (which carries the ground truth)
/// plus the store kind and frame count.
pub fn write_sidecar(
    store: &Path,
    config: &ExperimentConfig,
    kind: StoreKind,
    n_frames: usize,
) -> Result<()> {
    let text = format!(
        "# twinbeam frame store metadata\nkind = {}\nstored_frames = {n_frames}\n{}",
        kind.as_str(),
        config.to_text()
    );
    write_atomic(&sidecar_path(store), |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn read_sidecar(store: &Path) -> Result<(ExperimentConfig, StoreKind)> {
    let path = sidecar_path(store);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let (config, extra) = ExperimentConfig::parse_with_extra(&text, &["kind", "stored_frames"])?;
    let kind = match extra.get("kind").map(String::as_str) {
        Some("signal") => StoreKind::Signal,
        Some("background") => StoreKind::Background,
        other => {
            return Err(Error::Config(format!(
                "{}: bad or missing `kind` ({other:?})",
                path.display()
            )))
        }
    };
    Ok((config, kind))
}
