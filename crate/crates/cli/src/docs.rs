use std::path::Path;

use anyhow::Context;
use sawmatch_core::evaluation::SourceDoc;

/// Regular, non-hidden files of a directory in name order. A single file
/// path yields just that file.
pub fn read_docs(path: &Path) -> anyhow::Result<Vec<SourceDoc>> {
    let mut paths = Vec::new();
    if path.is_file() {
        paths.push(path.to_path_buf());
    } else {
        for entry in std::fs::read_dir(path).with_context(|| format!("reading {}", path.display()))? {
            let p = entry?.path();
            let hidden = p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'));
            if p.is_file() && !hidden {
                paths.push(p);
            }
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            Ok(SourceDoc {
                id: p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                bytes: std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?,
            })
        })
        .collect()
}

pub fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}
