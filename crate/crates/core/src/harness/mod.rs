//! File formats, configuration, the synthetic generator, and the discovery,
//! evaluation and sweep pipelines driven by the command-line tool.

pub mod archive;
pub mod config;
pub mod npy;
pub mod pipeline;
pub mod sweep;
pub mod synth;
pub mod text_io;

pub use archive::{load_bank, save_bank};
pub use config::Config;
pub use npy::{load_array, load_array_with_report, save_array, Dtype, LoadReport};
pub use pipeline::{
    discover, evaluate, evaluate_with_probe, run_discovery, train_reference_probe, Dictionary,
    DiscoveryOptions, EvalOptions, Evaluation, ZeroShotMode,
};
pub use sweep::{run_sweep, SweepGrid, SweepRow, SweepTable};
pub use synth::{generate_synthetic, Dataset, Split, SyntheticSpec};

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to a sibling temporary file, flushes it, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}
