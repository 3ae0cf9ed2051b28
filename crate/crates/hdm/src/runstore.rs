//! Per-run persistence: a run directory holding manifest.json plus JSONL
//! logs of records and judgments, the aggregated cells as CSV, and the
//! rendered report.
//!
//! Layout: runs/{run_id}/manifest.json, records.jsonl, judgments.jsonl,
//! cells.csv, report.md. Appends are serialized through one writer per
//! file and flushed per line, so a crash loses at most the in-flight item.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusSpec;
use crate::judge::{AggregateCell, EvalJudgment};
use crate::pipeline::PipelineRecord;
use crate::prompts::{Dimension, Metric};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown run: {0}")]
    UnknownRun(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("corrupt data in {0}: {1}")]
    Corrupt(String, String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

/// Everything needed to replay a run against a warmed cache.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: String,
    pub config_snapshot: serde_json::Value,
    pub corpus: Option<CorpusSpec>,
    pub seed: u64,
    pub n: usize,
    pub modes: Vec<String>,
    pub models: Vec<String>,
    pub languages: (String, String),
    pub prompt_variant: String,
    pub runs: u32,
    pub status: RunStatus,
}

/// Root directory of run storage.
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    pub fn create_run(&self, manifest: &RunManifest) -> Result<RunHandle, StoreError> {
        let dir = self.run_dir(&manifest.run_id);
        fs::create_dir_all(&dir)?;
        write_manifest(&dir, manifest)?;
        RunHandle::open_dir(&dir)
    }

    pub fn open_run(&self, run_id: &str) -> Result<RunHandle, StoreError> {
        let dir = self.run_dir(run_id);
        if !dir.join("manifest.json").is_file() {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        RunHandle::open_dir(&dir)
    }

    pub fn manifest(&self, run_id: &str) -> Result<RunManifest, StoreError> {
        let path = self.run_dir(run_id).join("manifest.json");
        let text =
            fs::read_to_string(&path).map_err(|_| StoreError::UnknownRun(run_id.to_string()))?;
        serde_json::from_str(&text)
            .map_err(|e| StoreError::Corrupt(path.display().to_string(), e.to_string()))
    }

    pub fn set_status(&self, run_id: &str, status: RunStatus) -> Result<(), StoreError> {
        let mut manifest = self.manifest(run_id)?;
        manifest.status = status;
        write_manifest(&self.run_dir(run_id), &manifest)
    }
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), StoreError> {
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| StoreError::Corrupt("manifest".into(), e.to_string()))?;
    fs::write(dir.join("manifest.json"), body)?;
    Ok(())
}

/// Open run: serialized appenders for the two JSONL logs.
pub struct RunHandle {
    dir: PathBuf,
    records: Mutex<BufWriter<File>>,
    judgments: Mutex<BufWriter<File>>,
}

fn append_writer(path: &Path) -> Result<BufWriter<File>, StoreError> {
    Ok(BufWriter::new(
        OpenOptions::new().create(true).append(true).open(path)?,
    ))
}

fn append_line<T: Serialize>(
    writer: &Mutex<BufWriter<File>>,
    item: &T,
) -> Result<(), StoreError> {
    let line = serde_json::to_string(item)
        .map_err(|e| StoreError::Corrupt("serialize".into(), e.to_string()))?;
    let mut w = writer.lock().unwrap();
    writeln!(w, "{line}")?;
    w.flush()?;
    Ok(())
}

fn load_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| StoreError::Corrupt(path.display().to_string(), e.to_string()))
        })
        .collect()
}

impl RunHandle {
    fn open_dir(dir: &Path) -> Result<Self, StoreError> {
        Ok(Self {
            records: Mutex::new(append_writer(&dir.join("records.jsonl"))?),
            judgments: Mutex::new(append_writer(&dir.join("judgments.jsonl"))?),
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append_record(&self, record: &PipelineRecord) -> Result<(), StoreError> {
        append_line(&self.records, record)
    }

    pub fn append_judgment(&self, judgment: &EvalJudgment) -> Result<(), StoreError> {
        append_line(&self.judgments, judgment)
    }

    pub fn load_records(&self) -> Result<Vec<PipelineRecord>, StoreError> {
        load_jsonl(&self.dir.join("records.jsonl"))
    }

    pub fn load_judgments(&self) -> Result<Vec<EvalJudgment>, StoreError> {
        load_jsonl(&self.dir.join("judgments.jsonl"))
    }

    pub fn write_cells(&self, cells: &[AggregateCell]) -> Result<(), StoreError> {
        fs::write(self.dir.join("cells.csv"), cells_to_csv(cells))?;
        Ok(())
    }

    pub fn load_cells(&self) -> Result<Vec<AggregateCell>, StoreError> {
        cells_from_csv_path(&self.dir.join("cells.csv"))
    }

    pub fn write_report(&self, markdown: &str) -> Result<(), StoreError> {
        fs::write(self.dir.join("report.md"), markdown)?;
        Ok(())
    }
}

pub const CELLS_HEADER: &str = "model,mode,dimension,metric,mean,n_valid,n_total,validity_rate";

/// CSV export with the fixed AggregateCell header. Means keep full
/// precision here; display rounding happens only in rendered tables.
pub fn cells_to_csv(cells: &[AggregateCell]) -> String {
    let mut out = String::from(CELLS_HEADER);
    out.push('\n');
    for c in cells {
        let mean = c.mean.map(|m| format!("{m}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.4}\n",
            c.model,
            c.mode,
            c.dimension.keyword(),
            c.metric.label(),
            mean,
            c.n_valid,
            c.n_total,
            c.validity_rate
        ));
    }
    out
}

/// Parse a cells CSV (run export or fixture baseline file).
pub fn cells_from_csv(text: &str) -> Result<Vec<AggregateCell>, StoreError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut cells = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| StoreError::Corrupt("cells csv".into(), e.to_string()))?;
        let field = |ix: usize| row.get(ix).unwrap_or("").to_string();
        let bad = |what: &str| StoreError::Corrupt("cells csv".into(), format!("line {}: {what}", i + 2));
        cells.push(AggregateCell {
            model: field(0),
            mode: field(1),
            dimension: Dimension::parse(&field(2)).ok_or_else(|| bad("dimension"))?,
            metric: Metric::parse(&field(3)).ok_or_else(|| bad("metric"))?,
            mean: {
                let f = field(4);
                if f.trim().is_empty() {
                    None
                } else {
                    Some(f.trim().parse().map_err(|_| bad("mean"))?)
                }
            },
            n_valid: field(5).trim().parse().map_err(|_| bad("n_valid"))?,
            n_total: field(6).trim().parse().map_err(|_| bad("n_total"))?,
            validity_rate: field(7).trim().parse().map_err(|_| bad("validity_rate"))?,
        });
    }
    Ok(cells)
}

pub fn cells_from_csv_path(path: &Path) -> Result<Vec<AggregateCell>, StoreError> {
    let text = fs::read_to_string(path)
        .map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
    cells_from_csv(&text)
}

/// Fresh run id: UTC timestamp plus a random suffix.
pub fn new_run_id() -> String {
    use rand::Rng;
    let suffix: u32 = rand::thread_rng().gen_range(0..0xFFFF);
    format!(
        "run-{}-{suffix:04x}",
        chrono::Utc::now().format("%Y%m%d-%H%M%S")
    )
}
