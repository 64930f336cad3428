use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Everything a command writes goes through here, below one directory.
pub struct Output {
    root: PathBuf,
    report: String,
}

impl Output {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), report: String::new() })
    }

    pub fn write(&self, rel: &str, contents: &str) -> Result<PathBuf> {
        let rel = Path::new(rel);
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            bail!("refusing to write outside the output directory: {}", rel.display());
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn section(&mut self, block: impl Display) {
        let text = block.to_string();
        self.report.push_str(&text);
        if !text.is_empty() && !text.ends_with('\n') {
            self.report.push('\n');
        }
        self.report.push('\n');
    }

    pub fn line(&mut self, key: &str, value: impl Display) {
        self.report.push_str(&format!("{key}={value}\n"));
    }

    /// Writes `report.txt` and echoes it to stdout.
    pub fn finish(self) -> Result<()> {
        self.write("report.txt", &self.report)?;
        print!("{}", self.report);
        Ok(())
    }
}
