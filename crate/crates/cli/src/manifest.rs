use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ccbie::TrainConfig;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.txt";

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(format!("{:x}", Sha256::digest(fs::read(path)?)))
}

/// Everything needed to rerun a command: what ran, on which inputs, with
/// which resolved settings.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub config: Option<TrainConfig>,
    pub inputs: Vec<(PathBuf, String)>,
    pub started: u64,
    pub finished: u64,
}

impl RunManifest {
    pub fn start(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: None,
            inputs: Vec::new(),
            started: unix_now(),
            finished: 0,
        }
    }

    pub fn with_config(mut self, config: &TrainConfig) -> Self {
        self.config = Some(config.clone());
        self
    }

    pub fn add_input(&mut self, path: &Path) -> io::Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("#key\tvalue\n");
        out.push_str(&format!("command\t{}\n", self.command));
        out.push_str(&format!("version\t{}\n", self.version));
        out.push_str(&format!("seed\t{}\n", self.seed));
        out.push_str(&format!("started_unix\t{}\n", self.started));
        out.push_str(&format!("finished_unix\t{}\n", self.finished));
        for (path, digest) in &self.inputs {
            out.push_str(&format!("input\t{}\tsha256:{digest}\n", path.display()));
        }
        if let Some(cfg) = &self.config {
            for (k, v) in cfg.to_pairs() {
                out.push_str(&format!("config.{k}\t{v}\n"));
            }
        }
        out
    }

    /// Stamps the finish time and writes `manifest.txt`, plus `config.txt`
    /// (loadable with `--config`) when a config is attached.
    pub fn finish(mut self, dir: &Path) -> io::Result<()> {
        self.finished = unix_now();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), self.to_text())?;
        if let Some(cfg) = &self.config {
            fs::write(dir.join("config.txt"), cfg.to_text())?;
        }
        Ok(())
    }
}
