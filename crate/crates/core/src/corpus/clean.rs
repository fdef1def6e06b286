//! Structure-aware parsing and noise removal.
//!
//! Three regex-driven noise classes: reference sections (the header line and
//! everything after it), page-number-only lines, and boilerplate lines that
//! repeat verbatim across the document.

use std::collections::HashMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanDocument, RawDocument, Section};
use crate::error::{Error, Result};

/// Noise-removal rules. Patterns are case-insensitive regexes matched
/// against whole lines (trailing whitespace stripped).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleaningConfig {
    /// A line matching any of these starts a reference section; it and all
    /// following lines are dropped.
    pub reference_header_patterns: Vec<String>,
    /// Lines matching any of these are dropped (defaults: bare page numbers
    /// in digits or roman numerals).
    pub page_number_patterns: Vec<String>,
    /// A non-empty line occurring at least this many times verbatim is
    /// dropped everywhere. 0 disables the rule.
    pub boilerplate_min_repeat: usize,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            reference_header_patterns: vec![
                r"^\s*#{0,6}\s*(references|bibliography|literature cited)\s*:?\s*$".into(),
            ],
            page_number_patterns: vec![r"^\s*\d+\s*$".into(), r"^\s*[ivxlcdm]+\s*$".into()],
            boilerplate_min_repeat: 3,
        }
    }
}

struct CompiledRules {
    reference_headers: Vec<Regex>,
    page_numbers: Vec<Regex>,
}

impl CleaningConfig {
    fn compile(&self) -> Result<CompiledRules> {
        let build = |patterns: &[String]| -> Result<Vec<Regex>> {
            patterns
                .iter()
                .map(|p| {
                    regex::RegexBuilder::new(p)
                        .case_insensitive(true)
                        .build()
                        .map_err(|e| Error::Config(format!("bad cleaning pattern {p:?}: {e}")))
                })
                .collect()
        };
        Ok(CompiledRules {
            reference_headers: build(&self.reference_header_patterns)?,
            page_numbers: build(&self.page_number_patterns)?,
        })
    }
}

fn heading_of(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    let hashes = trimmed.bytes().take_while(|&b| b == b'#').count();
    if (1..=6).contains(&hashes) {
        let rest = &trimmed[hashes..];
        if rest.starts_with(' ') || rest.starts_with('\t') {
            return Some(rest.trim());
        }
    }
    None
}

/// Clean a raw document and split it into heading-delimited sections.
///
/// Returns [`Error::EmptyAfterCleaning`] when no section text survives.
pub fn parse_document(raw: &RawDocument, rules: &CleaningConfig) -> Result<CleanDocument> {
    let compiled = rules.compile()?;

    let mut lines: Vec<&str> = Vec::new();
    for line in raw.body.lines() {
        let line = line.trim_end();
        if compiled.reference_headers.iter().any(|re| re.is_match(line)) {
            break; // the header and everything after it
        }
        if compiled.page_numbers.iter().any(|re| re.is_match(line)) {
            continue;
        }
        lines.push(line);
    }

    if rules.boilerplate_min_repeat > 0 {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for line in &lines {
            if !line.is_empty() {
                *counts.entry(line).or_insert(0) += 1;
            }
        }
        lines.retain(|line| {
            line.is_empty() || counts[line] < rules.boilerplate_min_repeat
        });
    }

    let mut sections: Vec<(String, Vec<&str>)> = Vec::new();
    for line in lines {
        if let Some(heading) = heading_of(line) {
            sections.push((heading.to_string(), Vec::new()));
        } else {
            if sections.is_empty() {
                sections.push((String::new(), Vec::new()));
            }
            sections.last_mut().unwrap().1.push(line);
        }
    }

    let sections: Vec<Section> = sections
        .into_iter()
        .map(|(heading, body)| Section {
            heading,
            text: body.join("\n").trim().to_string(),
        })
        .filter(|s| !s.heading.is_empty() || !s.text.is_empty())
        .collect();

    if sections.iter().all(|s| s.text.is_empty()) {
        return Err(Error::EmptyAfterCleaning(raw.id.clone()));
    }

    Ok(CleanDocument {
        id: raw.id.clone(),
        title: raw.title.clone(),
        sections,
    })
}

/// Render a cleaned document back to markdown. `parse_document` of the
/// result reproduces the same sections (cleaning is idempotent).
pub fn serialize_document(doc: &CleanDocument) -> String {
    let mut out = String::new();
    for section in &doc.sections {
        if !section.heading.is_empty() {
            out.push_str("# ");
            out.push_str(&section.heading);
            out.push('\n');
        }
        if !section.text.is_empty() {
            out.push_str(&section.text);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    fn raw(body: &str) -> RawDocument {
        RawDocument {
            id: "doc".into(),
            source: Source::Paper,
            title: "Title".into(),
            body: body.into(),
        }
    }

    #[test]
    fn reference_block_is_dropped() {
        let doc = parse_document(&raw("# A\ntext\n\nReferences\n[1] foo"), &Default::default())
            .unwrap();
        assert_eq!(
            doc.sections,
            vec![Section {
                heading: "A".into(),
                text: "text".into()
            }]
        );
    }

    #[test]
    fn page_number_lines_are_dropped() {
        let doc = parse_document(&raw("p1\n42\np2"), &Default::default()).unwrap();
        assert_eq!(doc.sections[0].text, "p1\np2");
    }

    #[test]
    fn roman_numeral_pages_are_dropped() {
        let doc = parse_document(&raw("intro\nxiv\nmore"), &Default::default()).unwrap();
        assert_eq!(doc.sections[0].text, "intro\nmore");
    }

    #[test]
    fn boilerplate_repeated_at_threshold_is_dropped_everywhere() {
        // Three "pages", each carrying the same footer line; with
        // boilerplate_min_repeat=3 the count reaches the threshold and the
        // line must vanish from every section.
        let body = "# One\nalpha\nAgriConf 2024\n# Two\nbeta\nAgriConf 2024\n# Three\ngamma\nAgriConf 2024";
        let rules = CleaningConfig {
            boilerplate_min_repeat: 3,
            ..Default::default()
        };
        let occurrences = body.matches("AgriConf 2024").count();
        assert!(occurrences >= rules.boilerplate_min_repeat);
        let doc = parse_document(&raw(body), &rules).unwrap();
        for section in &doc.sections {
            assert!(!section.text.contains("AgriConf 2024"), "{section:?}");
        }
        assert_eq!(doc.sections.len(), 3);
        assert_eq!(doc.sections[1].text, "beta");
    }

    #[test]
    fn boilerplate_below_threshold_survives() {
        let body = "# One\nAgriConf 2024\n# Two\nAgriConf 2024";
        let doc = parse_document(&raw(body), &Default::default()).unwrap();
        assert_eq!(doc.sections[0].text, "AgriConf 2024");
    }

    #[test]
    fn empty_after_cleaning_is_an_error() {
        let err = parse_document(&raw("42\nReferences\n[1] x"), &Default::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyAfterCleaning(_)));
    }

    #[test]
    fn cleaning_is_idempotent() {
        let body = "preamble text\n# First\nalpha beta\n\ngamma\n## Second\ndelta\n7\nReferences\n[1] z";
        let rules = CleaningConfig::default();
        let once = parse_document(&raw(body), &rules).unwrap();
        let again = parse_document(&raw(&serialize_document(&once)), &rules).unwrap();
        assert_eq!(once.sections, again.sections);
    }
}
