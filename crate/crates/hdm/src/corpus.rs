//! Joke corpus ingestion (CSV / JSONL) and seeded sampling.
//!
//! Sampling uses a Fisher-Yates partial shuffle driven by ChaCha8 seeded
//! from a single u64, so a recorded seed reproduces the exact selection on
//! any platform.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::JokeSample;
use crate::prompts::LanguageTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "csv" => Some(CorpusFormat::Csv),
            "jsonl" | "json" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }
}

/// How to read one dataset file into JokeSamples.
///
/// `text_column` may name a single column, or join two with `+`
/// (e.g. `question+answer`), which produces `Q: {a} A: {b}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub name: String,
    pub path: PathBuf,
    pub format: CorpusFormat,
    pub text_column: String,
    pub id_column: Option<String>,
    pub language: LanguageTag,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("parse error at line {0}: {1}")]
    ParseError(usize, String),
    #[error("missing column: {0}")]
    MissingColumn(String),
}

/// Load result: samples plus the count of rows dropped for empty text.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub samples: Vec<JokeSample>,
    pub dropped_empty: usize,
}

fn joined_text(
    get: &dyn Fn(&str) -> Option<String>,
    text_column: &str,
) -> Result<String, CorpusError> {
    if let Some((a, b)) = text_column.split_once('+') {
        let qa = get(a.trim()).ok_or_else(|| CorpusError::MissingColumn(a.trim().to_string()))?;
        let ab = get(b.trim()).ok_or_else(|| CorpusError::MissingColumn(b.trim().to_string()))?;
        Ok(format!("Q: {} A: {}", qa.trim(), ab.trim()))
    } else {
        get(text_column).ok_or_else(|| CorpusError::MissingColumn(text_column.to_string()))
    }
}

pub fn load(spec: &CorpusSpec) -> Result<LoadedCorpus, CorpusError> {
    if !spec.path.is_file() {
        return Err(CorpusError::FileNotFound(spec.path.display().to_string()));
    }
    match spec.format {
        CorpusFormat::Csv => load_csv(spec),
        CorpusFormat::Jsonl => load_jsonl(spec),
    }
}

fn push_sample(
    out: &mut LoadedCorpus,
    spec: &CorpusSpec,
    row_no: usize,
    text: String,
    id: Option<String>,
) {
    let text = text.trim().to_string();
    // Joined Q+A rows with both sides empty reduce to "Q:  A:".
    let effectively_empty = text.is_empty() || text == "Q:  A:";
    if effectively_empty {
        out.dropped_empty += 1;
        return;
    }
    out.samples.push(JokeSample {
        id: id
            .filter(|s| !s.trim().is_empty())
            .unwrap_or_else(|| format!("{}-{}", spec.name, row_no)),
        text,
        language: spec.language.clone(),
        dataset: spec.name.clone(),
    });
}

fn load_csv(spec: &CorpusSpec) -> Result<LoadedCorpus, CorpusError> {
    let mut reader = csv::Reader::from_path(&spec.path)
        .map_err(|e| CorpusError::ParseError(0, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::ParseError(1, e.to_string()))?
        .clone();
    let col_idx = |name: &str| headers.iter().position(|h| h == name);
    // Validate referenced columns up front.
    for col in spec.text_column.split('+').map(str::trim) {
        if col_idx(col).is_none() {
            return Err(CorpusError::MissingColumn(col.to_string()));
        }
    }
    if let Some(idc) = &spec.id_column {
        if col_idx(idc).is_none() {
            return Err(CorpusError::MissingColumn(idc.clone()));
        }
    }
    let mut out = LoadedCorpus {
        samples: Vec::new(),
        dropped_empty: 0,
    };
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| CorpusError::ParseError(i + 2, e.to_string()))?;
        let get = |name: &str| col_idx(name).and_then(|ix| row.get(ix)).map(String::from);
        let text = joined_text(&get, &spec.text_column)?;
        let id = spec.id_column.as_deref().and_then(&get);
        push_sample(&mut out, spec, i, text, id);
    }
    Ok(out)
}

fn load_jsonl(spec: &CorpusSpec) -> Result<LoadedCorpus, CorpusError> {
    let text = std::fs::read_to_string(&spec.path)
        .map_err(|e| CorpusError::ParseError(0, e.to_string()))?;
    let mut out = LoadedCorpus {
        samples: Vec::new(),
        dropped_empty: 0,
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CorpusError::ParseError(i + 1, e.to_string()))?;
        let get = |name: &str| {
            obj.get(name).map(|v| match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
        };
        let text = joined_text(&get, &spec.text_column)?;
        let id = spec.id_column.as_deref().and_then(&get);
        push_sample(&mut out, spec, i, text, id);
    }
    Ok(out)
}

/// Uniform sample without replacement of size min(n, |jokes|), reproducible
/// from the seed. Fisher-Yates partial shuffle over indices, O(n) swaps.
pub fn sample(jokes: &[JokeSample], n: usize, seed: u64) -> Vec<JokeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..jokes.len()).collect();
    let k = n.min(jokes.len());
    for i in 0..k {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    indices[..k].iter().map(|&i| jokes[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn spec(path: PathBuf, format: CorpusFormat, text_column: &str, id_column: Option<&str>) -> CorpusSpec {
        CorpusSpec {
            name: "short-jokes".into(),
            path,
            format,
            text_column: text_column.into(),
            id_column: id_column.map(String::from),
            language: LanguageTag::parse("en").unwrap(),
        }
    }

    fn synthetic(n: usize) -> Vec<JokeSample> {
        (0..n)
            .map(|i| JokeSample {
                id: format!("j{i}"),
                text: format!("joke {i}"),
                language: LanguageTag::parse("en").unwrap(),
                dataset: "synthetic".into(),
            })
            .collect()
    }

    #[test]
    fn csv_load_basic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jokes.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "ID,Joke").unwrap();
        writeln!(f, "1,\"Why did the chicken cross the road?\"").unwrap();
        writeln!(f, "2,Knock knock").unwrap();
        writeln!(f, "3,  a third one  ").unwrap();
        let loaded = load(&spec(path, CorpusFormat::Csv, "Joke", Some("ID"))).unwrap();
        assert_eq!(loaded.samples.len(), 3);
        assert_eq!(loaded.samples[0].dataset, "short-jokes");
        assert_eq!(loaded.samples[0].id, "1");
        assert_eq!(loaded.samples[2].text, "a third one");
    }

    #[test]
    fn csv_empty_rows_dropped_and_ids_synthesized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jokes.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "Joke").unwrap();
        writeln!(f, "first").unwrap();
        writeln!(f, "   ").unwrap();
        writeln!(f, "third").unwrap();
        let loaded = load(&spec(path, CorpusFormat::Csv, "Joke", None)).unwrap();
        assert_eq!(loaded.samples.len(), 2);
        assert_eq!(loaded.dropped_empty, 1);
        assert_eq!(loaded.samples[0].id, "short-jokes-0");
        assert_eq!(loaded.samples[1].id, "short-jokes-2");
    }

    #[test]
    fn csv_missing_column_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jokes.csv");
        std::fs::write(&path, "A,B\n1,2\n").unwrap();
        assert!(matches!(
            load(&spec(path, CorpusFormat::Csv, "Joke", None)),
            Err(CorpusError::MissingColumn(_))
        ));
    }

    #[test]
    fn file_not_found() {
        assert!(matches!(
            load(&spec(PathBuf::from("/nonexistent.csv"), CorpusFormat::Csv, "Joke", None)),
            Err(CorpusError::FileNotFound(_))
        ));
    }

    #[test]
    fn jsonl_question_answer_joining() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qa.jsonl");
        std::fs::write(
            &path,
            "{\"question\": \"Why?\", \"answer\": \"Because.\"}\n",
        )
        .unwrap();
        let loaded = load(&spec(path, CorpusFormat::Jsonl, "question+answer", None)).unwrap();
        assert_eq!(loaded.samples[0].text, "Q: Why? A: Because.");
    }

    #[test]
    fn jsonl_bad_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"joke\": \"ok\"}\nnot json\n").unwrap();
        match load(&spec(path, CorpusFormat::Jsonl, "joke", None)) {
            Err(CorpusError::ParseError(line, _)) => assert_eq!(line, 2),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn load_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jokes.csv");
        std::fs::write(&path, "Joke\none\ntwo\n").unwrap();
        let s = spec(path, CorpusFormat::Csv, "Joke", None);
        assert_eq!(load(&s).unwrap().samples, load(&s).unwrap().samples);
    }

    #[test]
    fn sample_size_and_uniqueness() {
        let jokes = synthetic(10_000);
        let picked = sample(&jokes, 500, 7);
        assert_eq!(picked.len(), 500);
        let mut ids: Vec<&str> = picked.iter().map(|j| j.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 500);
        assert!(sample(&jokes, 0, 7).is_empty());
        assert_eq!(sample(&jokes, 20_000, 7).len(), 10_000);
    }

    #[test]
    fn sample_is_seed_deterministic() {
        let jokes = synthetic(1000);
        let a: Vec<String> = sample(&jokes, 100, 42).iter().map(|j| j.id.clone()).collect();
        let b: Vec<String> = sample(&jokes, 100, 42).iter().map(|j| j.id.clone()).collect();
        let c: Vec<String> = sample(&jokes, 100, 43).iter().map(|j| j.id.clone()).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
