//! Tidy long-format export (`series,t,value`) of a finished run.

use std::fs;
use std::path::Path;

use crate::store::MANIFEST;

/// Columns exported from Gronwall traces.
pub const GRONWALL_SERIES: [&str; 3] = ["G", "w_l2", "bound"];

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("no experiment '{0}' under {1}")]
    Unknown(String, String),
    #[error("experiment '{0}' has no trace data")]
    Empty(String),
    #[error("malformed {file}: {message}")]
    Malformed { file: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Collects every CSV of the run into one long table. Simulation traces keep
/// all columns; ladder member `i` contributes `i:G`, `i:w_l2` and `i:bound`.
pub fn export_plot_data(root: &Path, id: &str) -> Result<String, ExportError> {
    let dir = root.join(id);
    if id.is_empty() || id.starts_with('.') || !dir.join(MANIFEST).is_file() {
        return Err(ExportError::Unknown(id.to_string(), root.display().to_string()));
    }
    let mut names: Vec<String> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    // numeric member files in ladder order, then the rest by name
    names.sort_by_key(|n| {
        let stem = n.trim_end_matches(".csv");
        (stem.parse::<usize>().map_or(1, |_| 0), stem.parse::<usize>().unwrap_or(0), n.clone())
    });
    if names.is_empty() {
        return Err(ExportError::Empty(id.to_string()));
    }
    let mut out = String::from("series,t,value\n");
    for name in names {
        let text = fs::read_to_string(dir.join(&name))?;
        let stem = name.trim_end_matches(".csv");
        let member = stem.parse::<usize>().is_ok();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        if header.first() != Some(&"t") {
            return Err(ExportError::Malformed { file: name, message: "first column is not t".into() });
        }
        let columns: Vec<(usize, String)> = header
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, h)| !member || GRONWALL_SERIES.contains(h))
            .map(|(i, h)| (i, if member { format!("{stem}:{h}") } else { h.to_string() }))
            .collect();
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        for (col, series) in &columns {
            for row in &rows {
                if row.len() != header.len() {
                    return Err(ExportError::Malformed { file: name, message: format!("row has {} fields", row.len()) });
                }
                out.push_str(&format!("{series},{},{}\n", row[0], row[*col]));
            }
        }
    }
    Ok(out)
}
