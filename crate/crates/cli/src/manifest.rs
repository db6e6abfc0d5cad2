use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::jobs::{Job, Outputs};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub config: Job,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(job: &Job, outputs: &Outputs) -> Self {
        RunManifest {
            command: job.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: job.seeds(),
            config: job.clone(),
            outputs: outputs.files.iter().map(|(n, _)| n.clone()).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Writes every output and then the manifest. Each file goes to a temporary
/// name first and is renamed into place, so readers never see a partial file.
pub fn commit(out_dir: &Path, job: &Job, outputs: &Outputs) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let manifest = RunManifest::new(job, outputs);
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    let mut staged = Vec::new();
    let all = outputs
        .files
        .iter()
        .map(|(n, b)| (n.as_str(), b.as_slice()))
        .chain([(MANIFEST_FILE, json.as_slice())]);
    for (name, bytes) in all {
        let tmp = out_dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, bytes) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(e).with_context(|| format!("writing {}", tmp.display()));
        }
        staged.push((tmp, out_dir.join(name)));
    }
    let mut written = Vec::new();
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest).with_context(|| format!("renaming into {}", dest.display()))?;
        written.push(dest);
    }
    Ok(written)
}
