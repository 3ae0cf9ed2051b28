//! Table generation: main results (rows = model x mode, six metric
//! columns), the four-mode ablation shape, gain summaries against a
//! baseline, and side-by-side case sheets.

use std::fmt::Write as _;

use thiserror::Error;

use crate::judge::{gain_vs_baseline, AggregateCell, GainDelta, JudgeError};
use crate::pipeline::{PipelineMode, PipelineRecord};
use crate::prompts::{Dimension, Metric};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("run has no aggregated cells")]
    EmptyRun,
    #[error("mode {0} missing for model {1}")]
    MissingMode(String, String),
    #[error("no record found for sample {0} in mode {1}")]
    MissingRecord(String, String),
    #[error(transparent)]
    Gains(#[from] JudgeError),
}

/// Round half-up to two decimals, applied only at render time.
pub fn format2(v: f64) -> String {
    let scaled = (v * 100.0 + 0.5).floor() / 100.0;
    format!("{scaled:.2}")
}

fn fmt_cell(mean: Option<f64>) -> String {
    match mean {
        Some(v) => format2(v),
        None => "n/a".to_string(),
    }
}

/// A rendered table, in both export formats.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub csv: String,
    pub markdown: String,
}

const MAIN_COLUMNS: [(Metric, Dimension); 6] = [
    (Metric::Sqm, Dimension::Humour),
    (Metric::Stars, Dimension::Humour),
    (Metric::Sqm, Dimension::Fluency),
    (Metric::Stars, Dimension::Fluency),
    (Metric::Sqm, Dimension::Coherence),
    (Metric::Stars, Dimension::Coherence),
];

fn column_label(metric: Metric, dim: Dimension) -> String {
    let d = match dim {
        Dimension::Humour => "H",
        Dimension::Fluency => "F",
        Dimension::Coherence => "C",
    };
    let m = match metric {
        Metric::Sqm => "SQM",
        Metric::Stars => "STAR",
    };
    format!("{m}-{d}")
}

fn find_mean(
    cells: &[AggregateCell],
    model: &str,
    mode: &str,
    dim: Dimension,
    metric: Metric,
) -> Option<f64> {
    cells
        .iter()
        .find(|c| c.model == model && c.mode == mode && c.dimension == dim && c.metric == metric)
        .and_then(|c| c.mean)
}

fn ordered_models(cells: &[AggregateCell]) -> Vec<String> {
    let mut models = Vec::new();
    for c in cells {
        if !models.contains(&c.model) {
            models.push(c.model.clone());
        }
    }
    models
}

fn ordered_modes(cells: &[AggregateCell], model: &str) -> Vec<String> {
    let mut modes = Vec::new();
    for c in cells {
        if c.model == model && !modes.contains(&c.mode) {
            modes.push(c.mode.clone());
        }
    }
    modes
}

/// Main results shape: one row per (model, mode), the six metric columns,
/// best value per column bolded within each model group (markdown only).
pub fn main_table(cells: &[AggregateCell]) -> Result<Table, ReportError> {
    if cells.is_empty() {
        return Err(ReportError::EmptyRun);
    }
    let mut csv = String::from("model,mode");
    for (metric, dim) in MAIN_COLUMNS {
        write!(csv, ",{}", column_label(metric, dim)).unwrap();
    }
    csv.push('\n');
    let mut md = String::from("| Model | Mode |");
    for (metric, dim) in MAIN_COLUMNS {
        write!(md, " {} |", column_label(metric, dim)).unwrap();
    }
    md.push('\n');
    md.push_str("|---|---|---|---|---|---|---|---|\n");

    for model in ordered_models(cells) {
        let modes = ordered_modes(cells, &model);
        // Best value per column, within this model group.
        let best: Vec<Option<f64>> = MAIN_COLUMNS
            .iter()
            .map(|&(metric, dim)| {
                modes
                    .iter()
                    .filter_map(|mode| find_mean(cells, &model, mode, dim, metric))
                    .fold(None, |acc: Option<f64>, v| {
                        Some(acc.map_or(v, |a| a.max(v)))
                    })
            })
            .collect();
        for mode in &modes {
            write!(csv, "{model},{mode}").unwrap();
            write!(md, "| {model} | {mode} |").unwrap();
            for (col, &(metric, dim)) in MAIN_COLUMNS.iter().enumerate() {
                let mean = find_mean(cells, &model, mode, dim, metric);
                let text = fmt_cell(mean);
                write!(csv, ",{text}").unwrap();
                let is_best = match (mean, best[col]) {
                    (Some(v), Some(b)) => (v - b).abs() < 1e-12,
                    _ => false,
                };
                if is_best {
                    write!(md, " **{text}** |").unwrap();
                } else {
                    write!(md, " {text} |").unwrap();
                }
            }
            csv.push('\n');
            md.push('\n');
        }
    }
    Ok(Table { csv, markdown: md })
}

/// Ablation shape: for each model group, the four modes in the order
/// full, -HDM, -HT, base, with SQM humour/fluency/coherence columns.
pub fn ablation_table(cells: &[AggregateCell]) -> Result<Table, ReportError> {
    if cells.is_empty() {
        return Err(ReportError::EmptyRun);
    }
    let mode_order = [
        PipelineMode::Full,
        PipelineMode::HtOnly,
        PipelineMode::HdmOnly,
        PipelineMode::Base,
    ];
    let dims = [Dimension::Humour, Dimension::Fluency, Dimension::Coherence];
    let mut csv = String::from("model,mode,SQM-H,SQM-F,SQM-C\n");
    let mut md =
        String::from("| Model | Setting | SQM-H | SQM-F | SQM-C |\n|---|---|---|---|---|\n");
    for model in ordered_models(cells) {
        for mode in mode_order {
            let label = mode.label();
            if !cells.iter().any(|c| c.model == model && c.mode == label) {
                return Err(ReportError::MissingMode(label.to_string(), model));
            }
            write!(csv, "{model},{label}").unwrap();
            write!(md, "| {model} | {label} |").unwrap();
            for dim in dims {
                let text = fmt_cell(find_mean(cells, &model, label, dim, Metric::Sqm));
                write!(csv, ",{text}").unwrap();
                write!(md, " {text} |").unwrap();
            }
            csv.push('\n');
            md.push('\n');
        }
    }
    Ok(Table { csv, markdown: md })
}

/// Markdown gain summary of `method_mode` over `baseline_mode`. When
/// `reference` supplies previously published per-axis deltas, any
/// recomputed value differing by more than 0.005 gets a footnote.
pub fn gains_summary(
    cells: &[AggregateCell],
    method_mode: &str,
    baseline_mode: &str,
    reference: &[(Dimension, Metric, f64)],
) -> Result<(Vec<GainDelta>, String), ReportError> {
    let gains = gain_vs_baseline(cells, method_mode, baseline_mode)?;
    let mut md = format!("## Gains: {method_mode} vs {baseline_mode}\n\n");
    md.push_str("| Dimension | Metric | Mean delta |\n|---|---|---|\n");
    let mut footnotes = Vec::new();
    for g in &gains {
        writeln!(
            md,
            "| {} | {} | {} |",
            g.dimension,
            g.metric,
            format2(g.mean_delta)
        )
        .unwrap();
        if let Some(&(_, _, published)) = reference
            .iter()
            .find(|&&(d, m, _)| d == g.dimension && m == g.metric)
        {
            if (g.mean_delta - published).abs() > 0.005 {
                footnotes.push(format!(
                    "- {} {}: recomputed delta {} differs from the previously reported {}; \
                     we report the recomputed value.",
                    g.dimension,
                    g.metric,
                    format2(g.mean_delta),
                    format2(published)
                ));
            }
        }
    }
    if !footnotes.is_empty() {
        md.push_str("\nNotes:\n");
        for f in footnotes {
            md.push_str(&f);
            md.push('\n');
        }
    }
    Ok((gains, md))
}

/// Side-by-side case sheet: original joke, direct translation and its
/// back-translation, staged translation and its back-translation.
pub fn case_sheet(records: &[PipelineRecord], sample_ids: &[String]) -> Result<String, ReportError> {
    let mut md = String::from("# Case sheet\n");
    for id in sample_ids {
        let find = |mode: PipelineMode| {
            records
                .iter()
                .find(|r| r.joke.id == *id && r.mode == mode)
                .ok_or_else(|| ReportError::MissingRecord(id.clone(), mode.label().to_string()))
        };
        let base = find(PipelineMode::Base)?;
        let full = find(PipelineMode::Full)?;
        let bt = |r: &PipelineRecord| r.back_translation.clone().unwrap_or_else(|| "(none)".into());
        writeln!(md, "\n## {id}\n").unwrap();
        writeln!(md, "- Original: {}", base.joke.text).unwrap();
        writeln!(md, "- Direct translation: {}", base.final_joke).unwrap();
        writeln!(md, "- Direct back-translation: {}", bt(base)).unwrap();
        writeln!(md, "- Staged translation: {}", full.final_joke).unwrap();
        writeln!(md, "- Staged back-translation: {}", bt(full)).unwrap();
    }
    Ok(md)
}
