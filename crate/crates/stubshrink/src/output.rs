//! Writing output trees so that a failed run leaves nothing behind.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{0} already exists (use --force to replace it)")]
    Exists(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Writes `files` (relative path → contents) as the directory `out`. The
/// tree is assembled in a sibling temporary directory and renamed into
/// place, replacing an existing `out` only when `force` is set.
pub fn write_tree(out: &Path, files: &BTreeMap<String, String>, force: bool) -> Result<(), OutputError> {
    if out.exists() && !force {
        return Err(OutputError::Exists(out.to_path_buf()));
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = parent.join(format!(".{}.tmp-{}", name, std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    let result = (|| {
        for (rel, text) in files {
            let p = tmp.join(rel);
            if let Some(d) = p.parent() {
                fs::create_dir_all(d).map_err(io_err(d))?;
            }
            fs::write(&p, text).map_err(io_err(&p))?;
        }
        fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
        if out.exists() {
            fs::remove_dir_all(out).map_err(io_err(out))?;
        }
        fs::rename(&tmp, out).map_err(io_err(out))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

/// Writes one file, creating parent directories.
pub fn write_file(path: &Path, text: &str) -> Result<(), OutputError> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    fs::write(path, text).map_err(io_err(path))
}
