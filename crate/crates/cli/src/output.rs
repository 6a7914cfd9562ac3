//! Output files, written to a temporary file in the target directory and
//! renamed into place.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use tempfile::NamedTempFile;

pub(crate) struct Output {
    dir: PathBuf,
}

impl Output {
    pub(crate) fn new(dir: PathBuf) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub(crate) fn text(&self, name: &str, contents: &str) -> std::io::Result<()> {
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(name)).map_err(|e| e.error)?;
        Ok(())
    }

    pub(crate) fn json<T: Serialize>(&self, name: &str, value: &T) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        self.text(name, &(text + "\n"))
    }
}
