//! Study outputs: a long-format score CSV and a JSON summary, both tagged
//! with the tool version, seed and a hash of the configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("oobforest ", env!("CARGO_PKG_VERSION"));

/// SHA-256 of the compact JSON form (object keys are sorted).
pub fn config_hash(config: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(config).expect("a JSON value always serializes");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub study: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(study: &str, seed: u64, config: serde_json::Value) -> Self {
        Metadata {
            tool: TOOL_VERSION.to_string(),
            study: study.to_string(),
            seed,
            config_sha256: config_hash(&config),
            config,
        }
    }

    /// `# key: value` lines.
    pub fn write_comment_header<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# tool: {}", self.tool)?;
        writeln!(w, "# study: {}", self.study)?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# config_sha256: {}", self.config_sha256)?;
        writeln!(w, "# config: {}", self.config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub rep: usize,
    pub method: String,
    pub feature: String,
    pub score: f64,
}

/// Everything a study writes to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutput {
    pub meta: Metadata,
    pub rows: Vec<ScoreRow>,
    pub summary: serde_json::Value,
}

impl StudyOutput {
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.meta.study, self.meta.seed)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.meta
            .write_comment_header(&mut w)
            .map_err(|e| Error::io("<csv>", e))?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["rep", "method", "feature", "score"])?;
        for r in &self.rows {
            wr.write_record([r.rep.to_string(), r.method.clone(), r.feature.clone(), format!("{:e}", r.score)])?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let doc = serde_json::json!({ "meta": self.meta, "summary": self.summary });
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Write `<study>_<seed>.csv` and `<study>_<seed>.json` into `dir`.
    /// Nothing is left behind on failure.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{}.csv", self.file_stem()));
        let json_path = dir.join(format!("{}.json", self.file_stem()));
        let result = (|| {
            let f = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
            self.write_csv(std::io::BufWriter::new(f))?;
            fs::write(&json_path, self.summary_json()?).map_err(|e| Error::io(&json_path, e))
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&csv_path);
            let _ = fs::remove_file(&json_path);
            return Err(e);
        }
        Ok((csv_path, json_path))
    }
}
