use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dkts::config::{config_hash, Settings};

use crate::Failure;

/// Everything needed to repeat a run, written once it has finished.
pub struct RunManifest {
    pub subcommand: &'static str,
    pub settings: Settings,
    pub inputs: Vec<(&'static str, PathBuf)>,
    pub outputs: Vec<(&'static str, PathBuf)>,
    pub wall_secs: f64,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let resolved = self.settings.resolved();
        let mut out = String::new();
        let _ = writeln!(out, "subcommand\t{}", self.subcommand);
        let _ = writeln!(out, "dkts-cli\t{}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "dkts-core\t{}", dkts::VERSION);
        let _ = writeln!(out, "seed\t{}", self.settings.seed);
        let _ = writeln!(out, "config_hash\t{}", config_hash(&resolved));
        for (name, path) in &self.inputs {
            let _ = writeln!(out, "input.{name}\t{}", path.display());
        }
        for (name, path) in &self.outputs {
            let _ = writeln!(out, "output.{name}\t{}", path.display());
        }
        let _ = writeln!(out, "wall_secs\t{:.3}", self.wall_secs);
        for (k, v) in resolved.iter() {
            let _ = writeln!(out, "config.{k}\t{v}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| dkts::Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        dkts::Error::io(path, e)
    })?;
    Ok(())
}

/// `out.ext` → `out.ext.manifest`
pub fn beside(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".manifest");
    PathBuf::from(p)
}
