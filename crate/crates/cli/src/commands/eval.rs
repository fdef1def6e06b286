//! `trellis eval` — run the benchmark with replayed or generated answers.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use trellis_core::benchmark::{self, BenchmarkTask, JudgeSetup, ReplayedAnswer, RunConfig};
use trellis_core::config::{EngineConfig, LlmRole};
use trellis_core::corpus::Taxonomy;
use trellis_core::data_engine;
use trellis_core::engine::Engine;
use trellis_core::error::Result;
use trellis_core::jsonl;
use trellis_core::judge::DEFAULT_JUDGE_TEMPLATE;
use trellis_core::llm::Limiter;

pub fn eval(
    config: &EngineConfig,
    bench: &Path,
    answers: Option<&Path>,
    judge: bool,
    output: Option<&Path>,
    mini: Option<usize>,
) -> Result<()> {
    let domains: Option<Vec<String>> = Taxonomy::load(&config.paths.taxonomy)
        .ok()
        .map(|t| t.domains().to_vec());
    let mut tasks: Vec<BenchmarkTask> = benchmark::load_tasks(bench, domains.as_deref())?;

    if let Some(n) = mini {
        tasks = data_engine::sample_mini(&tasks, n, config.seed)?;
        eprintln!("evaluating a stratified subsample of {n} tasks (seed {})", config.seed);
    }

    let replayed: Option<HashMap<String, String>> = match answers {
        Some(path) => {
            let rows: Vec<ReplayedAnswer> = jsonl::read_jsonl(path)?;
            Some(rows.into_iter().map(|r| (r.id, r.answer)).collect())
        }
        None => None,
    };
    let engine = match replayed {
        Some(_) => None,
        None => Some(Engine::load(config.clone())?),
    };
    let answerer = move |task: &BenchmarkTask| -> Result<String> {
        match (&replayed, &engine) {
            (Some(map), _) => map.get(&task.id).cloned().ok_or_else(|| {
                trellis_core::Error::InvalidInput(format!("no replayed answer for {}", task.id))
            }),
            (None, Some(engine)) => engine.answer(&task.question).map(|a| a.text),
            (None, None) => unreachable!("either answers or engine present"),
        }
    };

    let limiter = Limiter::new(config.engine.max_inflight_llm);
    let judge_backend = if judge {
        Some(config.build_backend(LlmRole::Judge, Arc::clone(&limiter))?)
    } else {
        None
    };
    let judge_template = judge_template(config)?;
    let judge_setup = judge_backend.as_ref().map(|backend| JudgeSetup {
        backend: backend.as_ref(),
        template: &judge_template,
        max_retries: config.role(LlmRole::Judge).max_retries,
    });

    let report = benchmark::run_benchmark(
        &tasks,
        &answerer,
        judge_setup.as_ref(),
        RunConfig {
            failure_budget: config.engine.failure_budget,
        },
    )?;

    let mut body = serde_json::to_string_pretty(&report)?;
    body.push('\n');
    match output {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, &body)?;
            println!("report written to {}", path.display());
        }
        None => print!("{body}"),
    }
    eprintln!(
        "evaluated {}/{} tasks: BLEU {:.2}, METEOR {:.2}, ROUGE-L F {:.2}{}",
        report.evaluated_count,
        report.task_count,
        report.metrics.bleu,
        report.metrics.meteor,
        report.metrics.rouge_l.f1,
        report
            .llm_score
            .map(|s| format!(", LLM score {s:.2}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn judge_template(config: &EngineConfig) -> Result<String> {
    if let Some(dir) = &config.paths.templates {
        let path = dir.join("judge.txt");
        if path.exists() {
            return Ok(std::fs::read_to_string(&path)?);
        }
    }
    Ok(DEFAULT_JUDGE_TEMPLATE.to_string())
}
