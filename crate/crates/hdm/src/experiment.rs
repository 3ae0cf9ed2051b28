//! End-to-end experiment orchestration: sample the corpus, run the batch,
//! judge every record, aggregate, and write the run directory. Shared by
//! the CLI and the test suites.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::config::{AppConfig, ConfigError};
use crate::corpus;
use crate::gateway::{Gateway, HttpBackend, MockBackend, MockScript};
use crate::judge::{self, AggregateCell, EvalJudgment};
use crate::pipeline::{self, BatchSpec, JokeSample, ModelHandle, PipelineRecord};
use crate::prompts::{Dimension, Metric, PromptForge};
use crate::report;
use crate::runstore::{self, RunManifest, RunStatus, RunStore};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Store(#[from] crate::runstore::StoreError),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
    #[error("{0}")]
    Other(String),
}

/// Gains published for the staged method relative to the MAPS baseline,
/// used to footnote deviations when recomputing from fixture cells.
pub const REPORTED_SQM_GAINS_VS_MAPS: [(Dimension, Metric, f64); 3] = [
    (Dimension::Humour, Metric::Sqm, 7.75),
    (Dimension::Fluency, Metric::Sqm, 2.81),
    (Dimension::Coherence, Metric::Sqm, 6.13),
];

pub struct RunOutcome {
    pub run_id: String,
    pub n_records: usize,
    pub n_judgments: usize,
    pub n_valid_judgments: usize,
    pub cells: Vec<AggregateCell>,
    pub report_markdown: String,
}

/// Build the gateway for one named model from its config entry.
pub fn build_gateway(config: &AppConfig, model: &str) -> Result<Arc<Gateway>, ExperimentError> {
    build_gateway_scripted(config, model, MockScript::new())
}

/// Like [`build_gateway`] but with a custom script for mock backends.
pub fn build_gateway_scripted(
    config: &AppConfig,
    model: &str,
    script: MockScript,
) -> Result<Arc<Gateway>, ExperimentError> {
    let entry = config.gateway_entry(model)?;
    let backend: Arc<dyn crate::gateway::ChatBackend> = match entry.backend.as_str() {
        "mock" => Arc::new(MockBackend::new(script)),
        "http" => Arc::new(HttpBackend::new(&entry.base_url, &entry.api_key_env)?),
        other => {
            return Err(ExperimentError::Config(ConfigError::Invalid(format!(
                "unknown backend kind: {other}"
            ))))
        }
    };
    Ok(Arc::new(
        Gateway::new(backend, entry.to_gateway_config())?
            .with_request_defaults(entry.temperature, entry.max_tokens),
    ))
}

pub fn build_forge(config: &AppConfig) -> Result<PromptForge, ExperimentError> {
    let mut forge = PromptForge::new(&config.prompt_variant)?;
    if let Some(dir) = &config.prompt_dir {
        forge = forge.with_prompt_dir(dir)?;
    }
    Ok(forge)
}

/// Load and sample the configured corpus.
pub fn sampled_corpus(config: &AppConfig) -> Result<Vec<JokeSample>, ExperimentError> {
    let corpus_cfg = config
        .corpus
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("no corpus configured".into()))?;
    let loaded = corpus::load(&corpus_cfg.to_spec()?)?;
    let n = if config.n == 0 {
        loaded.samples.len()
    } else {
        config.n
    };
    Ok(corpus::sample(&loaded.samples, n, config.seed))
}

/// record_ref -> (model, mode label) lookup for aggregation.
pub fn record_meta_map(records: &[PipelineRecord]) -> HashMap<String, (String, String)> {
    records
        .iter()
        .map(|r| {
            (
                r.record_ref(),
                (r.model_id.clone(), r.mode.label().to_string()),
            )
        })
        .collect()
}

pub fn aggregate_run(
    records: &[PipelineRecord],
    judgments: &[EvalJudgment],
) -> Vec<AggregateCell> {
    let meta = record_meta_map(records);
    judge::aggregate(judgments, &|r: &str| meta.get(r).cloned())
}

fn render_report(
    manifest: &RunManifest,
    cells: &[AggregateCell],
    n_records: usize,
    n_judgments: usize,
) -> Result<String, ExperimentError> {
    let mut md = format!(
        "# Run {}\n\ncreated: {}\nmodels: {}\nmodes: {}\nvariant: {}\nrecords: {n_records}\njudgments: {n_judgments}\n\n## Main results\n\n",
        manifest.run_id,
        manifest.created_at,
        manifest.models.join(", "),
        manifest.modes.join(", "),
        manifest.prompt_variant,
    );
    md.push_str(&report::main_table(cells)?.markdown);
    md.push_str("\n## Validity\n\n| Model | Mode | Dimension | Metric | Valid | Total | Rate |\n|---|---|---|---|---|---|---|\n");
    for c in cells {
        writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {:.4} |",
            c.model, c.mode, c.dimension, c.metric, c.n_valid, c.n_total, c.validity_rate
        )
        .unwrap();
    }
    Ok(md)
}

fn build_manifest(config: &AppConfig, run_id: String, n: usize) -> RunManifest {
    RunManifest {
        run_id,
        created_at: chrono::Utc::now().to_rfc3339(),
        config_snapshot: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        corpus: config.corpus.as_ref().and_then(|c| c.to_spec().ok()),
        seed: config.seed,
        n,
        modes: config.modes.clone(),
        models: config.models.clone(),
        languages: (config.src.clone(), config.tgt.clone()),
        prompt_variant: config.prompt_variant.clone(),
        runs: config.runs,
        status: RunStatus::Running,
    }
}

/// The `run` command body. `script` seeds mock backends (tests, demos);
/// pass an empty script for echo behaviour.
pub fn run_experiment(
    config: &AppConfig,
    script: MockScript,
) -> Result<RunOutcome, ExperimentError> {
    config.validate()?;
    let samples = sampled_corpus(config)?;
    if samples.is_empty() {
        return Err(ExperimentError::Other("corpus sample is empty".into()));
    }
    let forge = build_forge(config)?;
    let src = config.src_tag()?;
    let tgt = config.tgt_tag()?;
    let modes = config.mode_list()?;

    let models: Vec<ModelHandle> = config
        .models
        .iter()
        .map(|m| {
            Ok(ModelHandle {
                model_id: m.clone(),
                gateway: build_gateway_scripted(config, m, script.clone())?,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let store = RunStore::new(&config.run_dir)?;
    let run_id = runstore::new_run_id();
    let manifest = build_manifest(config, run_id.clone(), samples.len());
    let handle = store.create_run(&manifest)?;

    let spec = BatchSpec {
        corpus: &samples,
        modes: &modes,
        models: &models,
        runs: config.runs,
        src: &src,
        tgt: &tgt,
        forge: &forge,
        with_back_translation: config.back_translate,
    };
    let records = pipeline::run_batch(&spec, &|record| {
        // Sink failures surface when the batch returns.
        let _ = handle.append_record(record);
    })?;

    let judge_gateway = build_gateway_scripted(config, &config.judge.model, script.clone())?;
    let judgeable: Vec<PipelineRecord> = records.iter().filter(|r| r.succeeded()).cloned().collect();
    let judgments = judge::judge_batch(
        &judgeable,
        &config.metric_list()?,
        &config.dimension_list()?,
        config.judge.judge_runs,
        &config.judge.model,
        &judge_gateway,
        &forge,
    );
    for j in &judgments {
        handle.append_judgment(j)?;
    }

    let cells = aggregate_run(&records, &judgments);
    handle.write_cells(&cells)?;
    let report_markdown = render_report(&manifest, &cells, records.len(), judgments.len())?;
    handle.write_report(&report_markdown)?;
    store.set_status(&run_id, RunStatus::Complete)?;

    Ok(RunOutcome {
        run_id,
        n_records: records.len(),
        n_judgments: judgments.len(),
        n_valid_judgments: judgments.iter().filter(|j| j.valid).count(),
        cells,
        report_markdown,
    })
}

/// Prompt audit mode: render every stage prompt for the first sample of
/// every configured mode, no network calls. Byte-stable for fixed inputs.
pub fn dry_run(config: &AppConfig) -> Result<String, ExperimentError> {
    config.validate()?;
    let samples = sampled_corpus(config)?;
    let first = samples
        .first()
        .ok_or_else(|| ExperimentError::Other("corpus sample is empty".into()))?;
    let forge = build_forge(config)?;
    let src = config.src_tag()?;
    let tgt = config.tgt_tag()?;
    let mut out = format!("# Dry run: prompts for sample {}\n", first.id);
    for mode in config.mode_list()? {
        writeln!(out, "\n## mode {}", mode.label()).unwrap();
        match mode {
            crate::pipeline::PipelineMode::Base => {
                writeln!(out, "\n--- direct ---\n{}", forge.render_direct_translate(&first.text, &src, &tgt)?).unwrap();
            }
            crate::pipeline::PipelineMode::HtOnly => {
                writeln!(out, "\n--- theory_direct ---\n{}", forge.render_theory_direct(&first.text, &src, &tgt)?).unwrap();
            }
            m => {
                let theory = m.uses_theory();
                writeln!(out, "\n--- decompose ---\n{}", forge.render_decompose(&first.text, theory)?).unwrap();
                writeln!(out, "\n--- translate ---\n{}", forge.render_translate_analysis("<analysis>", &src, &tgt)?).unwrap();
                writeln!(out, "\n--- compose ---\n{}", forge.render_compose("<translated analysis>", &tgt)?).unwrap();
            }
        }
    }
    Ok(out)
}

/// The `variants` command body: run the full staged mode once per variant
/// and emit a per-variant SQM summary table.
pub fn run_variants(
    config: &AppConfig,
    script: MockScript,
) -> Result<(Vec<(String, RunOutcome)>, String), ExperimentError> {
    config.validate()?;
    let base_forge = PromptForge::default();
    let mut outcomes = Vec::new();
    for variant in base_forge.variant_ids() {
        let cfg = AppConfig {
            prompt_variant: variant.clone(),
            modes: vec!["full".into()],
            ..config.clone()
        };
        let outcome = run_experiment(&cfg, script.clone())?;
        outcomes.push((variant, outcome));
    }
    let mut md = String::from("# Prompt variant summary (SQM)\n\n| Variant | Dimension | Mean | Validity |\n|---|---|---|---|\n");
    for (variant, outcome) in &outcomes {
        for c in &outcome.cells {
            if c.metric == Metric::Sqm {
                writeln!(
                    md,
                    "| {variant} | {} | {} | {:.4} |",
                    c.dimension,
                    c.mean.map(report::format2).unwrap_or_else(|| "n/a".into()),
                    c.validity_rate
                )
                .unwrap();
            }
        }
    }
    Ok((outcomes, md))
}
