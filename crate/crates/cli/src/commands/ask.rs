//! `trellis ask` — one-shot query against the loaded artifacts.
//!
//! Stdout is byte-deterministic for a fixed corpus, config, and mock
//! backend; timings and warnings go to stderr (or behind --timings in JSON).

use serde_json::json;

use trellis_core::config::EngineConfig;
use trellis_core::engine::Engine;
use trellis_core::fusion::RankedEvidence;
use trellis_core::Result;

#[derive(Debug, Clone, Copy)]
pub struct AskOptions {
    pub no_llm: bool,
    pub json: bool,
    pub timings: bool,
}

fn print_evidence_text(evidence: &[RankedEvidence]) {
    for item in evidence {
        let channels: Vec<String> = item
            .channel_scores
            .iter()
            .map(|(c, s)| format!("{c}={s:.4}"))
            .collect();
        println!(
            "[{}] ({:.4}; {}) {}: {}",
            item.rank,
            item.composite,
            channels.join(", "),
            item.id,
            item.text.replace('\n', " ")
        );
    }
}

pub fn ask(config: &EngineConfig, query: &str, k: Option<usize>, opts: AskOptions) -> Result<()> {
    let k = k.unwrap_or(config.fusion.top_n);
    let engine = Engine::load(config.clone())?;

    if opts.no_llm {
        let retrieval = engine.retrieve(query, k)?;
        if opts.json {
            let mut body = json!({
                "evidence": retrieval.evidence,
                "warnings": retrieval.warnings,
            });
            if opts.timings {
                body["timings_ms"] = serde_json::to_value(&retrieval.timings_ms)?;
            }
            println!("{}", serde_json::to_string_pretty(&body)?);
        } else {
            print_evidence_text(&retrieval.evidence);
            for warning in &retrieval.warnings {
                eprintln!("warning: {warning}");
            }
            eprintln!("timings: {:?}", retrieval.timings_ms);
        }
        return Ok(());
    }

    let answer = engine.answer_with_k(query, k)?;
    if opts.json {
        let mut body = json!({
            "answer": answer.text,
            "evidence": answer.evidence,
            "warnings": answer.warnings,
        });
        if opts.timings {
            body["timings_ms"] = serde_json::to_value(&answer.timings_ms)?;
        }
        println!("{}", serde_json::to_string_pretty(&body)?);
    } else {
        println!("{}", answer.text);
        println!();
        println!("Evidence:");
        print_evidence_text(&answer.evidence);
        for warning in &answer.warnings {
            eprintln!("warning: {warning}");
        }
        eprintln!("timings: {:?}", answer.timings_ms);
    }
    Ok(())
}
