use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CmdResult, Failure};

pub mod evaluate;
pub mod icp;
pub mod info;
pub mod register;
pub mod simulate;
pub mod sweep;

pub fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::input(format!("writing {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).expect("output types are serializable");
    text.push('\n');
    write_text(path, &text)
}

pub fn create_dir(path: &Path) -> CmdResult {
    std::fs::create_dir_all(path).map_err(|e| Failure::input(format!("creating {}: {e}", path.display())))
}

/// First of `flag`, then `file`, else a usage error naming `what`.
pub fn required(flag: Option<&PathBuf>, file: Option<&PathBuf>, what: &str) -> CmdResult<PathBuf> {
    flag.or(file)
        .cloned()
        .ok_or_else(|| Failure::Usage(format!("missing {what} (flag or config file)")))
}

/// One index per line under a `node` header.
pub fn node_list_csv(nodes: &[usize]) -> String {
    let mut out = String::from("node\n");
    for n in nodes {
        out.push_str(&n.to_string());
        out.push('\n');
    }
    out
}

/// Subdirectories of `root` containing `marker`, sorted by name.
pub fn dirs_with(root: &Path, marker: &str) -> CmdResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|e| Failure::input(format!("reading {}: {e}", root.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(marker).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
