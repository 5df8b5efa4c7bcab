//! Loading the panel file shared by `summary`, `regress` and `var`.

use std::fs;

use shadowfx_core::pricing::{read_panel, WeeklyPanelRow};
use shadowfx_core::regulation::constrained_dummy;

use crate::config::RunConfig;
use crate::manifest::{digest_hex, FileEntry};
use crate::{CliError, Result};

pub struct LoadedPanel {
    pub rows: Vec<WeeklyPanelRow>,
    pub entry: FileEntry,
}

pub fn load_panel(cfg: &RunConfig) -> Result<LoadedPanel> {
    let path = cfg.panel_path();
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    let rows = read_panel(bytes.as_slice()).map_err(|source| CliError::Panel { path: path.clone(), source })?;
    let entry = FileEntry {
        name: path.display().to_string(),
        sha256: digest_hex(&bytes),
        rows: Some(rows.len()),
        rejected: None,
    };
    Ok(LoadedPanel { rows, entry })
}

/// Recomputes the constrained flag of every row from its peg and
/// capital-control values at threshold `delta`. Rows lacking either value
/// lose their flag. Returns the number of rows whose flag changed.
pub fn apply_delta(rows: &mut [WeeklyPanelRow], delta: f64) -> usize {
    let mut changed = 0;
    for r in rows {
        let flag = match (r.peg, r.cc) {
            (Some(p), Some(cc)) => Some(constrained_dummy(p, cc, delta)),
            _ => None,
        };
        changed += usize::from(flag != r.constrained);
        r.constrained = flag;
    }
    changed
}
