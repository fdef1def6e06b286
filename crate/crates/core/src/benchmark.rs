//! Benchmark task schema and the dual-evaluation runner (automatic metrics
//! plus optional LLM-judge scoring).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::judge::{self, JudgeScore};
use crate::llm::ChatBackend;
use crate::metrics::{self, MetricReport};

/// The thirteen benchmark task types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskType {
    Extraction,
    Classification,
    Identification,
    #[serde(rename = "Terminology Rewrite")]
    TerminologyRewrite,
    Judgment,
    Description,
    Recommendation,
    #[serde(rename = "Question Answering")]
    QuestionAnswering,
    #[serde(rename = "Experiment Design")]
    ExperimentDesign,
    #[serde(rename = "Sequential Causal Reasoning")]
    SequentialCausalReasoning,
    #[serde(rename = "Multi-hop Evidence Synthesis QA")]
    MultiHopEvidenceSynthesisQa,
    #[serde(rename = "Contextual Multi-factor Decision")]
    ContextualMultiFactorDecision,
    #[serde(rename = "Open-ended Commonsense Inference")]
    OpenEndedCommonsenseInference,
}

impl TaskType {
    pub const ALL: [TaskType; 13] = [
        TaskType::Extraction,
        TaskType::Classification,
        TaskType::Identification,
        TaskType::TerminologyRewrite,
        TaskType::Judgment,
        TaskType::Description,
        TaskType::Recommendation,
        TaskType::QuestionAnswering,
        TaskType::ExperimentDesign,
        TaskType::SequentialCausalReasoning,
        TaskType::MultiHopEvidenceSynthesisQa,
        TaskType::ContextualMultiFactorDecision,
        TaskType::OpenEndedCommonsenseInference,
    ];

    /// The difficulty tier this task type belongs to.
    pub fn tier(&self) -> Difficulty {
        use TaskType::*;
        match self {
            Extraction | Classification | Identification | TerminologyRewrite => Difficulty::Easy,
            Judgment | Description | Recommendation | QuestionAnswering => Difficulty::Medium,
            ExperimentDesign
            | SequentialCausalReasoning
            | MultiHopEvidenceSynthesisQa
            | ContextualMultiFactorDecision
            | OpenEndedCommonsenseInference => Difficulty::Hard,
        }
    }

    pub fn label(&self) -> String {
        serde_json::to_value(self)
            .expect("task type serializes")
            .as_str()
            .expect("task type is a string")
            .to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn label(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTask {
    pub id: String,
    pub task_type: TaskType,
    pub difficulty: Difficulty,
    pub question: String,
    pub reference: String,
    pub domain: String,
}

impl BenchmarkTask {
    /// Enforce the tier pairing and (when a domain list is given) domain
    /// membership.
    pub fn validate(&self, domains: Option<&[String]>) -> Result<()> {
        if self.id.is_empty() || self.question.is_empty() {
            return Err(Error::InvalidInput(format!(
                "task {:?}: id and question must be non-empty",
                self.id
            )));
        }
        if self.difficulty != self.task_type.tier() {
            return Err(Error::InvalidInput(format!(
                "task {}: {} is a {} task, not {}",
                self.id,
                self.task_type.label(),
                self.task_type.tier().label(),
                self.difficulty.label()
            )));
        }
        if let Some(domains) = domains {
            if !domains.iter().any(|d| d == &self.domain) {
                return Err(Error::InvalidInput(format!(
                    "task {}: unknown domain {:?}",
                    self.id, self.domain
                )));
            }
        }
        Ok(())
    }
}

/// Load tasks from a JSONL file, validating each.
pub fn load_tasks(path: &std::path::Path, domains: Option<&[String]>) -> Result<Vec<BenchmarkTask>> {
    let tasks: Vec<BenchmarkTask> = crate::jsonl::read_jsonl(path)?;
    for task in &tasks {
        task.validate(domains)?;
    }
    Ok(tasks)
}

/// Judge settings for a run.
pub struct JudgeSetup<'a> {
    pub backend: &'a dyn ChatBackend,
    pub template: &'a str,
    pub max_retries: u32,
}

/// Runner knobs.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    /// The run fails when more than this fraction of tasks error.
    pub failure_budget: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            failure_budget: 0.2,
        }
    }
}

/// Per-group metric means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupStats {
    pub count: usize,
    pub bleu: f64,
    pub meteor: f64,
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    pub rouge_l_f: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm_score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskFailure {
    pub id: String,
    pub error: String,
}

/// Full benchmark report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub task_count: usize,
    pub evaluated_count: usize,
    pub metrics: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_dim: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm_score: Option<f64>,
    pub by_task_type: BTreeMap<String, GroupStats>,
    pub by_difficulty: BTreeMap<String, GroupStats>,
    pub failures: Vec<TaskFailure>,
}

struct TaskOutcome {
    report: MetricReport,
    judge_score: Option<JudgeScore>,
}

fn evaluate_task(
    task: &BenchmarkTask,
    answerer: &(dyn Fn(&BenchmarkTask) -> Result<String> + Sync),
    judge_setup: Option<&JudgeSetup<'_>>,
) -> Result<TaskOutcome> {
    let answer = answerer(task)?;
    let report = metrics::report(&answer, &task.reference)?;
    let judge_score = match judge_setup {
        Some(setup) => Some(judge::judge(
            &task.question,
            &task.reference,
            &answer,
            setup.backend,
            setup.template,
            setup.max_retries,
        )?),
        None => None,
    };
    Ok(TaskOutcome {
        report,
        judge_score,
    })
}

fn group_stats(outcomes: &[(&BenchmarkTask, &TaskOutcome)]) -> GroupStats {
    let reports: Vec<MetricReport> = outcomes.iter().map(|(_, o)| o.report).collect();
    let mean = metrics::mean_report(&reports).expect("group is non-empty");
    let judged: Vec<JudgeScore> = outcomes
        .iter()
        .filter_map(|(_, o)| o.judge_score.clone())
        .collect();
    let llm_score = judge::aggregate_llm_score(&judged).ok().map(|(_, s)| s);
    GroupStats {
        count: outcomes.len(),
        bleu: mean.bleu,
        meteor: mean.meteor,
        rouge1_f: mean.rouge1.f1,
        rouge2_f: mean.rouge2.f1,
        rouge_l_f: mean.rouge_l.f1,
        llm_score,
    }
}

/// Run the benchmark: answer every task (generation engine or replayed
/// answers), score against the reference, optionally judge, and aggregate.
/// Individual task failures are recorded and the run continues; the run
/// itself fails only when more than `failure_budget` of tasks errored.
pub fn run_benchmark(
    tasks: &[BenchmarkTask],
    answerer: &(dyn Fn(&BenchmarkTask) -> Result<String> + Sync),
    judge_setup: Option<&JudgeSetup<'_>>,
    cfg: RunConfig,
) -> Result<Report> {
    if tasks.is_empty() {
        return Err(Error::EmptyInput("no benchmark tasks".into()));
    }

    #[cfg(feature = "parallel")]
    let results: Vec<Result<TaskOutcome>> = tasks
        .par_iter()
        .map(|t| evaluate_task(t, answerer, judge_setup))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<TaskOutcome>> = tasks
        .iter()
        .map(|t| evaluate_task(t, answerer, judge_setup))
        .collect();

    let mut outcomes: Vec<(&BenchmarkTask, TaskOutcome)> = Vec::new();
    let mut failures: Vec<TaskFailure> = Vec::new();
    for (task, result) in tasks.iter().zip(results) {
        match result {
            Ok(outcome) => outcomes.push((task, outcome)),
            Err(e) => failures.push(TaskFailure {
                id: task.id.clone(),
                error: e.to_string(),
            }),
        }
    }

    let failed_fraction = failures.len() as f64 / tasks.len() as f64;
    if failed_fraction > cfg.failure_budget {
        return Err(Error::FailureBudgetExceeded {
            failed: failures.len(),
            total: tasks.len(),
            budget: cfg.failure_budget,
        });
    }
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("every task failed".into()));
    }

    let reports: Vec<MetricReport> = outcomes.iter().map(|(_, o)| o.report).collect();
    let corpus = metrics::mean_report(&reports).expect("non-empty");

    let judged: Vec<JudgeScore> = outcomes
        .iter()
        .filter_map(|(_, o)| o.judge_score.clone())
        .collect();
    let (per_dim, llm_score) = match judge::aggregate_llm_score(&judged) {
        Ok((per_dim, total)) => (Some(per_dim), Some(total)),
        Err(_) => (None, None),
    };

    let mut by_task_type: BTreeMap<String, GroupStats> = BTreeMap::new();
    for task_type in TaskType::ALL {
        let group: Vec<(&BenchmarkTask, &TaskOutcome)> = outcomes
            .iter()
            .filter(|(t, _)| t.task_type == task_type)
            .map(|(t, o)| (*t, o))
            .collect();
        if !group.is_empty() {
            by_task_type.insert(task_type.label(), group_stats(&group));
        }
    }
    let mut by_difficulty: BTreeMap<String, GroupStats> = BTreeMap::new();
    for difficulty in [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard] {
        let group: Vec<(&BenchmarkTask, &TaskOutcome)> = outcomes
            .iter()
            .filter(|(t, _)| t.difficulty == difficulty)
            .map(|(t, o)| (*t, o))
            .collect();
        if !group.is_empty() {
            by_difficulty.insert(difficulty.label().to_string(), group_stats(&group));
        }
    }

    Ok(Report {
        task_count: tasks.len(),
        evaluated_count: outcomes.len(),
        metrics: corpus,
        per_dim,
        llm_score,
        by_task_type,
        by_difficulty,
        failures,
    })
}

/// Answerer backed by a replayed-answers map (id -> answer).
pub fn replay_answerer(
    answers: HashMap<String, String>,
) -> impl Fn(&BenchmarkTask) -> Result<String> + Sync {
    move |task: &BenchmarkTask| {
        answers
            .get(&task.id)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no replayed answer for task {}", task.id)))
    }
}

/// Replayed-answers JSONL row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayedAnswer {
    pub id: String,
    pub answer: String,
}
