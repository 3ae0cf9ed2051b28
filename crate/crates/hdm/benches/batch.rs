//! Parallel vs sequential batch throughput on a mock backend.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hdm::gateway::{Gateway, GatewayConfig, MockBackend, MockScript};
use hdm::pipeline::{self, BatchSpec, JokeSample, ModelHandle, PipelineMode};
use hdm::prompts::{LanguageTag, PromptForge};

fn make_spec_parts() -> (Vec<JokeSample>, ModelHandle, PromptForge) {
    let corpus: Vec<JokeSample> = (0..24)
        .map(|i| JokeSample {
            id: format!("bench-{i}"),
            text: format!("Why did number {i} cross the road? To get to the other side."),
            language: LanguageTag::parse("en").unwrap(),
            dataset: "bench".into(),
        })
        .collect();
    let backend = Arc::new(MockBackend::new(MockScript::new()));
    let gateway = Arc::new(
        Gateway::new(
            backend,
            GatewayConfig {
                cache_dir: None,
                rate_limit: (1_000_000, 1_000),
                max_concurrency: 16,
                ..GatewayConfig::default()
            },
        )
        .unwrap(),
    );
    let model = ModelHandle {
        model_id: "mock".into(),
        gateway,
    };
    (corpus, model, PromptForge::default())
}

fn bench_batch(c: &mut Criterion) {
    let (corpus, model, forge) = make_spec_parts();
    let models = vec![model];
    let modes = [PipelineMode::Base, PipelineMode::Full];
    let src = LanguageTag::parse("en").unwrap();
    let tgt = LanguageTag::parse("zh").unwrap();
    let spec = BatchSpec {
        corpus: &corpus,
        modes: &modes,
        models: &models,
        runs: 1,
        src: &src,
        tgt: &tgt,
        forge: &forge,
        with_back_translation: false,
    };

    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("run_batch", "parallel-default"), |b| {
        b.iter(|| pipeline::run_batch(&spec, &|_| {}).unwrap())
    });
    group.bench_function(BenchmarkId::new("run_batch_sequential", "baseline"), |b| {
        b.iter(|| pipeline::run_batch_sequential(&spec, &|_| {}).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
