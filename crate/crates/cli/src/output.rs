//! Outputs that appear whole or not at all.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Tracks files written by one command so a failure can take them back.
#[derive(Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

impl Outputs {
    /// Writes through a temporary sibling and renames it into place.
    pub fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let tmp = temp_sibling(path);
        let result = fs::write(&tmp, contents)
            .and_then(|_| fs::rename(&tmp, path))
            .with_context(|| format!("writing {}", path.display()));
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    /// Fills a temporary directory with `fill` and swaps it in for `dir`.
    /// An existing `dir` is only replaced if it holds nothing but `.pgm` files.
    pub fn replace_dir(&mut self, dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        if dir.exists() {
            let foreign = fs::read_dir(dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .filter_map(|e| e.ok())
                .any(|e| e.path().extension().is_none_or(|x| x != "pgm"));
            if foreign {
                bail!("{} exists and holds files other than frames", dir.display());
            }
        }
        if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let tmp = temp_sibling(dir);
        let _ = fs::remove_dir_all(&tmp);
        let result = fill(&tmp).and_then(|_| {
            if dir.exists() {
                fs::remove_dir_all(dir).with_context(|| format!("removing {}", dir.display()))?;
            }
            fs::rename(&tmp, dir).with_context(|| format!("moving frames into {}", dir.display()))
        });
        if result.is_err() {
            let _ = fs::remove_dir_all(&tmp);
        }
        result?;
        self.written.push(dir.to_path_buf());
        Ok(())
    }

    /// Removes everything written so far.
    pub fn discard(self) {
        for path in self.written.iter().rev() {
            if path.is_dir() {
                let _ = fs::remove_dir_all(path);
            } else {
                let _ = fs::remove_file(path);
            }
        }
    }
}
