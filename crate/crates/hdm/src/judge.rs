//! LLM-as-judge scoring: issue SQM (0-100) and STARS (1-5) judgments per
//! quality dimension, parse responses leniently but range-check strictly,
//! and aggregate over runs with invalid responses omitted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway};
use crate::pipeline::PipelineRecord;
use crate::prompts::{Dimension, Metric, PromptForge};

/// One judge call over one pipeline record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalJudgment {
    pub record_ref: String,
    pub metric: Metric,
    pub dimension: Dimension,
    pub judge_model: String,
    pub raw: String,
    pub value: Option<f64>,
    pub valid: bool,
    pub run_index: u32,
}

/// Mean and validity bookkeeping for one (model, mode, dimension, metric)
/// group. `mean` is `None` when the group has no valid judgments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub model: String,
    pub mode: String,
    pub dimension: Dimension,
    pub metric: Metric,
    pub mean: Option<f64>,
    pub n_valid: u64,
    pub n_total: u64,
    pub validity_rate: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum JudgeError {
    #[error("no {0} cells found for mode {1}")]
    MissingCounterpart(String, String),
}

/// Extract the first standalone number from the judge reply and accept it
/// iff 0 <= v <= 100. Tolerates "92/100", "92%", and surrounding prose.
/// Total: never errors.
pub fn parse_sqm(raw: &str) -> Option<f64> {
    let re = regex::Regex::new(r"(?:^|[^\d.])(\d+(?:\.\d+)?)").unwrap();
    let caps = re.captures(raw)?;
    let v: f64 = caps[1].parse().ok()?;
    (0.0..=100.0).contains(&v).then_some(v)
}

/// Extract a 1-5 star rating: "N", "N stars", "N/5", or a run of star
/// glyphs. First match wins. Total: never errors.
pub fn parse_stars(raw: &str) -> Option<i64> {
    // A run of star glyphs anywhere counts first if it appears before a digit.
    let glyph_pos = raw.find('★');
    let digit_pos = raw.find(|c: char| c.is_ascii_digit());
    if let Some(gp) = glyph_pos {
        if digit_pos.is_none_or(|dp| gp < dp) {
            let n = raw[gp..].chars().take_while(|&c| c == '★').count() as i64;
            return (1..=5).contains(&n).then_some(n);
        }
    }
    let re = regex::Regex::new(r"(\d+)\s*(?:stars?|/\s*5)?").unwrap();
    let caps = re.captures(raw)?;
    let n: i64 = caps[1].parse().ok()?;
    (1..=5).contains(&n).then_some(n)
}

/// Judge one record on one (metric, dimension). Gateway failures and
/// unparseable replies both surface as `valid = false` with the raw text
/// (or error note) preserved.
pub fn judge(
    record: &PipelineRecord,
    metric: Metric,
    dimension: Dimension,
    judge_model: &str,
    gateway: &Gateway,
    forge: &PromptForge,
    run_index: u32,
) -> EvalJudgment {
    let mut judgment = EvalJudgment {
        record_ref: record.record_ref(),
        metric,
        dimension,
        judge_model: judge_model.to_string(),
        raw: String::new(),
        value: None,
        valid: false,
        run_index,
    };
    let prompt = match forge.render_judge(
        metric,
        dimension,
        &record.joke.text,
        &record.final_joke,
        &record.src,
        &record.tgt,
    ) {
        Ok(p) => p,
        Err(e) => {
            judgment.raw = format!("[prompt error: {e}]");
            return judgment;
        }
    };
    match gateway.complete(&ChatRequest::user(judge_model, &prompt, "judge")) {
        Ok(resp) => {
            judgment.raw = resp.text;
            judgment.value = match metric {
                Metric::Sqm => parse_sqm(&judgment.raw),
                Metric::Stars => parse_stars(&judgment.raw).map(|n| n as f64),
            };
            judgment.valid = judgment.value.is_some();
        }
        Err(e) => {
            judgment.raw = format!("[gateway error: {e}]");
        }
    }
    judgment
}

/// Judge a batch of records over every (metric, dimension, judge run)
/// combination. Read-only over the records.
pub fn judge_batch(
    records: &[PipelineRecord],
    metrics: &[Metric],
    dimensions: &[Dimension],
    judge_runs: u32,
    judge_model: &str,
    gateway: &Gateway,
    forge: &PromptForge,
) -> Vec<EvalJudgment> {
    let mut tasks = Vec::new();
    for record in records {
        for &metric in metrics {
            for &dimension in dimensions {
                for run in 1..=judge_runs {
                    tasks.push((record, metric, dimension, run));
                }
            }
        }
    }
    let run_one = |&(record, metric, dimension, run): &(&PipelineRecord, Metric, Dimension, u32)| {
        judge(record, metric, dimension, judge_model, gateway, forge, run)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        tasks.par_iter().map(run_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        tasks.iter().map(run_one).collect()
    }
}

/// Group key resolver: maps a judgment's record_ref to the generation
/// (model, mode label) it scored.
pub type RecordMeta<'a> = &'a dyn Fn(&str) -> Option<(String, String)>;

/// Mean valid value per (model, mode, dimension, metric) group; invalid
/// judgments count toward n_total only. Output order is the sorted group
/// key, so aggregation is permutation-invariant.
pub fn aggregate(judgments: &[EvalJudgment], meta: RecordMeta) -> Vec<AggregateCell> {
    #[derive(Default)]
    struct Acc {
        sum: f64,
        n_valid: u64,
        n_total: u64,
    }
    let mut groups: BTreeMap<(String, String, String, String), Acc> = BTreeMap::new();
    for j in judgments {
        let Some((model, mode)) = meta(&j.record_ref) else {
            continue;
        };
        let key = (
            model,
            mode,
            j.dimension.keyword().to_string(),
            j.metric.label().to_string(),
        );
        let acc = groups.entry(key).or_default();
        acc.n_total += 1;
        if j.valid {
            if let Some(v) = j.value {
                acc.sum += v;
                acc.n_valid += 1;
            }
        }
    }
    groups
        .into_iter()
        .map(|((model, mode, dim, metric), acc)| AggregateCell {
            model,
            mode,
            dimension: Dimension::parse(&dim).unwrap(),
            metric: Metric::parse(&metric).unwrap(),
            mean: (acc.n_valid > 0).then(|| acc.sum / acc.n_valid as f64),
            n_valid: acc.n_valid,
            n_total: acc.n_total,
            validity_rate: if acc.n_total > 0 {
                acc.n_valid as f64 / acc.n_total as f64
            } else {
                0.0
            },
        })
        .collect()
}

/// Per-(dimension, metric) gain of `method_mode` over `baseline_mode`:
/// the unweighted mean of per-model mean deltas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainDelta {
    pub dimension: Dimension,
    pub metric: Metric,
    pub per_model: Vec<(String, f64)>,
    pub mean_delta: f64,
}

pub fn gain_vs_baseline(
    cells: &[AggregateCell],
    method_mode: &str,
    baseline_mode: &str,
) -> Result<Vec<GainDelta>, JudgeError> {
    let mut axes: Vec<(Dimension, Metric)> = Vec::new();
    for c in cells {
        if !axes.contains(&(c.dimension, c.metric)) {
            axes.push((c.dimension, c.metric));
        }
    }
    let mut out = Vec::new();
    for (dimension, metric) in axes {
        let find = |mode: &str, model: &str| {
            cells
                .iter()
                .find(|c| {
                    c.mode == mode
                        && c.model == model
                        && c.dimension == dimension
                        && c.metric == metric
                })
                .and_then(|c| c.mean)
        };
        let models: Vec<String> = {
            let mut seen = Vec::new();
            for c in cells {
                if c.dimension == dimension
                    && c.metric == metric
                    && c.mode == method_mode
                    && !seen.contains(&c.model)
                {
                    seen.push(c.model.clone());
                }
            }
            seen
        };
        if models.is_empty() {
            return Err(JudgeError::MissingCounterpart(
                format!("{dimension}/{metric}"),
                method_mode.to_string(),
            ));
        }
        let mut per_model = Vec::new();
        for model in &models {
            let m = find(method_mode, model).ok_or_else(|| {
                JudgeError::MissingCounterpart(model.clone(), method_mode.to_string())
            })?;
            let b = find(baseline_mode, model).ok_or_else(|| {
                JudgeError::MissingCounterpart(model.clone(), baseline_mode.to_string())
            })?;
            per_model.push((model.clone(), m - b));
        }
        let mean_delta = per_model.iter().map(|(_, d)| d).sum::<f64>() / per_model.len() as f64;
        out.push(GainDelta {
            dimension,
            metric,
            per_model,
            mean_delta,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqm_parse_rules() {
        assert_eq!(parse_sqm("Score: 92/100"), Some(92.0));
        assert_eq!(parse_sqm("105"), None);
        assert_eq!(parse_sqm("I would rate the humour at 70 out of 100."), Some(70.0));
        assert_eq!(parse_sqm("85"), Some(85.0));
        assert_eq!(parse_sqm("87.5%"), Some(87.5));
        assert_eq!(parse_sqm("no number here"), None);
        assert_eq!(parse_sqm(""), None);
        assert_eq!(parse_sqm("0"), Some(0.0));
        assert_eq!(parse_sqm("100"), Some(100.0));
    }

    #[test]
    fn stars_parse_rules() {
        assert_eq!(parse_stars("★★★★"), Some(4));
        assert_eq!(parse_stars("3 stars"), Some(3));
        assert_eq!(parse_stars("4/5"), Some(4));
        assert_eq!(parse_stars("5"), Some(5));
        assert_eq!(parse_stars("zero stars"), None);
        assert_eq!(parse_stars("6 stars"), None);
        assert_eq!(parse_stars("★★★★★★"), None);
        assert_eq!(parse_stars(""), None);
    }

    fn judgment(model: &str, mode: &str, value: Option<f64>) -> EvalJudgment {
        EvalJudgment {
            record_ref: format!("{model}|{mode}"),
            metric: Metric::Sqm,
            dimension: Dimension::Humour,
            judge_model: "judge".into(),
            raw: String::new(),
            value,
            valid: value.is_some(),
            run_index: 1,
        }
    }

    fn meta_from_ref(r: &str) -> Option<(String, String)> {
        let (model, mode) = r.split_once('|')?;
        Some((model.to_string(), mode.to_string()))
    }

    #[test]
    fn aggregate_means_and_validity() {
        let js = vec![
            judgment("m", "full", Some(50.0)),
            judgment("m", "full", Some(60.0)),
            judgment("m", "full", Some(70.0)),
        ];
        let cells = aggregate(&js, &meta_from_ref);
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].mean, Some(60.0));
        assert_eq!(cells[0].validity_rate, 1.0);

        let js = vec![
            judgment("m", "full", Some(80.0)),
            judgment("m", "full", None),
            judgment("m", "full", Some(90.0)),
        ];
        let cells = aggregate(&js, &meta_from_ref);
        assert_eq!(cells[0].mean, Some(85.0));
        assert_eq!(cells[0].n_valid, 2);
        assert_eq!(cells[0].n_total, 3);
        assert!((cells[0].validity_rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let mut js = vec![
            judgment("m", "full", Some(10.0)),
            judgment("m", "base", Some(20.0)),
            judgment("n", "full", None),
            judgment("m", "full", Some(30.0)),
        ];
        let a = aggregate(&js, &meta_from_ref);
        js.reverse();
        let b = aggregate(&js, &meta_from_ref);
        assert_eq!(a, b);
    }

    #[test]
    fn fully_invalid_group_is_flagged_not_averaged() {
        let js = vec![judgment("m", "full", None), judgment("m", "full", None)];
        let cells = aggregate(&js, &meta_from_ref);
        assert_eq!(cells[0].mean, None);
        assert_eq!(cells[0].validity_rate, 0.0);
    }

    #[test]
    fn excluding_invalids_matches_valid_subset() {
        let mixed = vec![
            judgment("m", "full", Some(40.0)),
            judgment("m", "full", None),
            judgment("m", "full", Some(60.0)),
            judgment("m", "full", None),
        ];
        let valid_only: Vec<_> = mixed.iter().filter(|j| j.valid).cloned().collect();
        let a = aggregate(&mixed, &meta_from_ref);
        let b = aggregate(&valid_only, &meta_from_ref);
        assert_eq!(a[0].mean, b[0].mean);
    }

    #[test]
    fn gain_identity_is_zero() {
        let js = vec![
            judgment("m", "full", Some(50.0)),
            judgment("n", "full", Some(70.0)),
        ];
        let cells = aggregate(&js, &meta_from_ref);
        let gains = gain_vs_baseline(&cells, "full", "full").unwrap();
        for g in gains {
            assert_eq!(g.mean_delta, 0.0);
        }
    }

    #[test]
    fn gain_missing_counterpart_errors() {
        let js = vec![judgment("m", "full", Some(50.0))];
        let cells = aggregate(&js, &meta_from_ref);
        assert!(gain_vs_baseline(&cells, "full", "base").is_err());
    }
}
