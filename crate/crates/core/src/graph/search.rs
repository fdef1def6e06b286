//! Query-to-graph entity linking and multi-hop evidence search.

use crate::error::{Error, Result};
use crate::graph::{EvidencePath, KnowledgeGraph, PathEdge};
use crate::text;

/// Score a path: `decay^(hops-1)` times the geometric mean of its edge
/// confidences. In (0, 1] whenever all confidences are positive.
pub fn path_score(path: &EvidencePath, decay: f64) -> f64 {
    let hops = path.edges.len();
    if hops == 0 {
        return 0.0;
    }
    let product: f64 = path.edges.iter().map(|e| e.confidence).product();
    decay.powi(hops as i32 - 1) * product.powf(1.0 / hops as f64)
}

/// Canonical one-line rendering, e.g. `a —causes→ b —treats→ c`.
pub fn render_path(path: &EvidencePath) -> String {
    let mut out = String::new();
    for (i, node) in path.nodes.iter().enumerate() {
        if i > 0 {
            out.push_str(" —");
            out.push_str(&path.edges[i - 1].relation);
            out.push_str("→ ");
        }
        out.push_str(node);
    }
    out
}

/// Find graph entities appearing in the query as whole-token subsequences.
///
/// Longer entity mentions win: once a span of query tokens is claimed, any
/// entity whose only mentions overlap that span is subsumed. Results are
/// ordered longest-match-first (ties by entity name) and capped at
/// `max_links`.
pub fn link_entities(query: &str, graph: &KnowledgeGraph, max_links: usize) -> Vec<usize> {
    let query_tokens = text::tokenize(query);
    if query_tokens.is_empty() || max_links == 0 {
        return Vec::new();
    }

    // (entity id, token length, candidate start positions)
    let mut candidates: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for (id, name) in graph.entities().iter().enumerate() {
        let entity_tokens = text::tokenize(name);
        if entity_tokens.is_empty() || entity_tokens.len() > query_tokens.len() {
            continue;
        }
        let positions: Vec<usize> = (0..=query_tokens.len() - entity_tokens.len())
            .filter(|&s| query_tokens[s..s + entity_tokens.len()] == entity_tokens[..])
            .collect();
        if !positions.is_empty() {
            candidates.push((id, entity_tokens.len(), positions));
        }
    }
    candidates.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| graph.entity_name(a.0).cmp(graph.entity_name(b.0)))
    });

    let mut claimed = vec![false; query_tokens.len()];
    let mut linked = Vec::new();
    for (id, len, positions) in candidates {
        if linked.len() >= max_links {
            break;
        }
        if let Some(&start) = positions
            .iter()
            .find(|&&s| claimed[s..s + len].iter().all(|c| !c))
        {
            claimed[start..start + len].iter_mut().for_each(|c| *c = true);
            linked.push(id);
        }
    }
    linked
}

/// Enumerate all simple directed paths from the seed entities up to
/// `max_hops`, scored by [`path_score`], top-k descending with ties broken
/// by the lexicographic node sequence.
pub fn multi_hop_search(
    graph: &KnowledgeGraph,
    seeds: &[usize],
    max_hops: usize,
    k: usize,
    decay: f64,
) -> Result<Vec<EvidencePath>> {
    if !(1..=3).contains(&max_hops) {
        return Err(Error::InvalidInput(format!(
            "max_hops must be in 1..=3, got {max_hops}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "decay must be in (0, 1], got {decay}"
        )));
    }

    let mut unique_seeds = Vec::new();
    for &s in seeds {
        if s < graph.entity_count() && !unique_seeds.contains(&s) {
            unique_seeds.push(s);
        }
    }

    let mut paths: Vec<EvidencePath> = Vec::new();
    for seed in unique_seeds {
        let mut node_stack = vec![seed];
        let mut edge_stack: Vec<PathEdge> = Vec::new();
        dfs(graph, max_hops, &mut node_stack, &mut edge_stack, &mut paths);
    }

    for path in &mut paths {
        path.score = path_score(path, decay);
    }
    paths.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.nodes.cmp(&b.nodes))
    });
    paths.truncate(k);
    Ok(paths)
}

fn dfs(
    graph: &KnowledgeGraph,
    max_hops: usize,
    node_stack: &mut Vec<usize>,
    edge_stack: &mut Vec<PathEdge>,
    paths: &mut Vec<EvidencePath>,
) {
    if edge_stack.len() == max_hops {
        return;
    }
    let current = *node_stack.last().unwrap();
    for edge in graph.edges_from(current) {
        if node_stack.contains(&edge.neighbor) {
            continue; // simple paths only
        }
        node_stack.push(edge.neighbor);
        edge_stack.push(PathEdge {
            relation: edge.relation.clone(),
            confidence: edge.confidence,
            source_chunk: edge.source_chunk.clone(),
        });
        paths.push(EvidencePath {
            nodes: node_stack
                .iter()
                .map(|&id| graph.entity_name(id).to_string())
                .collect(),
            edges: edge_stack.clone(),
            score: 0.0,
        });
        dfs(graph, max_hops, node_stack, edge_stack, paths);
        node_stack.pop();
        edge_stack.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Triple;

    fn t(h: &str, r: &str, ta: &str, conf: f64) -> Triple {
        Triple::new(h, r, ta, "c1", conf).unwrap()
    }

    fn path(nodes: &[&str], confs: &[f64]) -> EvidencePath {
        EvidencePath {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            edges: confs
                .iter()
                .map(|&c| PathEdge {
                    relation: "causes".into(),
                    confidence: c,
                    source_chunk: "c1".into(),
                })
                .collect(),
            score: 0.0,
        }
    }

    #[test]
    fn one_hop_score_ignores_decay() {
        let p = path(&["a", "b"], &[0.8]);
        assert!((path_score(&p, 0.3) - 0.8).abs() < 1e-12);
        assert!((path_score(&p, 1.0) - 0.8).abs() < 1e-12);
    }

    // decay 0.7, confidences 0.9 and 0.4: 0.7 * sqrt(0.36) = 0.42.
    #[test]
    fn two_hop_score_matches_formula() {
        let p = path(&["a", "b", "c"], &[0.9, 0.4]);
        assert!((path_score(&p, 0.7) - 0.42).abs() < 1e-12);
    }

    #[test]
    fn perfect_confidence_and_decay_scores_one() {
        for hops in 1..=3 {
            let nodes: Vec<String> = (0..=hops).map(|i| format!("n{i}")).collect();
            let node_refs: Vec<&str> = nodes.iter().map(String::as_str).collect();
            let p = path(&node_refs, &vec![1.0; hops]);
            assert!((path_score(&p, 1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn score_non_increasing_in_hop_count() {
        let decay = 0.7;
        let s1 = path_score(&path(&["a", "b"], &[0.8]), decay);
        let s2 = path_score(&path(&["a", "b", "c"], &[0.8, 0.8]), decay);
        let s3 = path_score(&path(&["a", "b", "c", "d"], &[0.8, 0.8, 0.8]), decay);
        assert!(s1 >= s2 && s2 >= s3);
    }

    #[test]
    fn render_single_and_double_hop() {
        assert_eq!(render_path(&path(&["a", "b"], &[1.0])), "a —causes→ b");
        assert_eq!(
            render_path(&path(&["a", "b", "c"], &[1.0, 1.0])),
            "a —causes→ b —causes→ c"
        );
    }

    #[test]
    fn render_is_injective_over_fixture_paths() {
        let g = KnowledgeGraph::build(&[
            t("a", "causes", "b", 1.0),
            t("a", "treats", "c", 1.0),
            t("b", "treats", "c", 1.0),
            t("c", "affects", "d", 1.0),
            t("b", "affects", "d", 1.0),
            t("d", "treats", "e", 1.0),
        ]);
        let seeds: Vec<usize> = (0..g.entity_count()).collect();
        let paths = multi_hop_search(&g, &seeds, 2, 100, 0.7).unwrap();
        assert!(paths.len() >= 10);
        let rendered: std::collections::HashSet<String> =
            paths.iter().map(render_path).collect();
        assert_eq!(rendered.len(), paths.len());
    }

    #[test]
    fn longer_entity_match_subsumes_shorter() {
        let g = KnowledgeGraph::build(&[
            t("wheat rust", "infects", "wheat fields", 1.0),
            t("wheat", "requires", "nitrogen", 1.0),
        ]);
        let linked = link_entities("how does wheat rust spread", &g, 5);
        let names: Vec<&str> = linked.iter().map(|&id| g.entity_name(id)).collect();
        assert_eq!(names, vec!["wheat rust"]);
    }

    #[test]
    fn no_overlap_yields_no_links() {
        let g = KnowledgeGraph::build(&[t("maize", "requires", "nitrogen", 1.0)]);
        assert!(link_entities("pricing of farm machinery", &g, 5).is_empty());
    }

    #[test]
    fn links_come_back_longest_first() {
        let g = KnowledgeGraph::build(&[
            t("downy mildew", "infects", "grape vine", 1.0),
            t("rice", "requires", "flooding", 1.0),
            t("barley", "requires", "cool weather", 1.0),
        ]);
        let linked = link_entities("does downy mildew hit rice or barley", &g, 5);
        let names: Vec<&str> = linked.iter().map(|&id| g.entity_name(id)).collect();
        assert_eq!(names, vec!["downy mildew", "barley", "rice"]);
    }

    #[test]
    fn max_links_caps_results() {
        let g = KnowledgeGraph::build(&[
            t("rice", "requires", "flooding", 1.0),
            t("barley", "requires", "cool weather", 1.0),
        ]);
        assert_eq!(link_entities("rice and barley", &g, 1).len(), 1);
    }

    #[test]
    fn seed_without_outgoing_edges_yields_nothing() {
        let g = KnowledgeGraph::build(&[t("a", "causes", "b", 1.0)]);
        let b = g.entity_id("b").unwrap();
        assert!(multi_hop_search(&g, &[b], 2, 10, 0.7).unwrap().is_empty());
    }

    #[test]
    fn chain_enumerates_both_prefix_paths() {
        let g = KnowledgeGraph::build(&[t("a", "causes", "b", 1.0), t("b", "causes", "c", 1.0)]);
        let a = g.entity_id("a").unwrap();
        let paths = multi_hop_search(&g, &[a], 2, 10, 0.7).unwrap();
        let node_seqs: Vec<Vec<String>> = paths.iter().map(|p| p.nodes.clone()).collect();
        assert!(node_seqs.contains(&vec!["a".into(), "b".into()]));
        assert!(node_seqs.contains(&vec!["a".into(), "b".into(), "c".into()]));
        assert_eq!(paths.len(), 2);
    }

    #[test]
    fn cycles_do_not_repeat_nodes() {
        let g = KnowledgeGraph::build(&[
            t("a", "causes", "b", 1.0),
            t("b", "causes", "a", 1.0),
        ]);
        let a = g.entity_id("a").unwrap();
        let paths = multi_hop_search(&g, &[a], 3, 50, 1.0).unwrap();
        for p in &paths {
            let unique: std::collections::HashSet<&String> = p.nodes.iter().collect();
            assert_eq!(unique.len(), p.nodes.len(), "repeated node in {p:?}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let g = KnowledgeGraph::build(&[t("a", "causes", "b", 1.0)]);
        assert!(multi_hop_search(&g, &[0], 0, 1, 0.7).is_err());
        assert!(multi_hop_search(&g, &[0], 4, 1, 0.7).is_err());
        assert!(multi_hop_search(&g, &[0], 2, 0, 0.7).is_err());
        assert!(multi_hop_search(&g, &[0], 2, 1, 0.0).is_err());
    }

    // Exhaustive oracle: enumerate simple paths up to 2 hops by brute force
    // over the full edge list and compare as sets.
    #[test]
    fn search_matches_brute_force_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let n_nodes = rng.gen_range(5..40);
            let n_edges = rng.gen_range(5..120);
            let triples: Vec<Triple> = (0..n_edges)
                .map(|_| {
                    t(
                        &format!("n{}", rng.gen_range(0..n_nodes)),
                        &format!("r{}", rng.gen_range(0..3)),
                        &format!("n{}", rng.gen_range(0..n_nodes)),
                        (rng.gen_range(1..=10) as f64) / 10.0,
                    )
                })
                .filter(|t| t.head != t.tail)
                .collect();
            let g = KnowledgeGraph::build(&triples);
            let canonical = g.canonical_triples();
            let seeds: Vec<usize> = (0..g.entity_count()).collect();

            // Brute force over the merged triple list. One path per edge
            // (or edge pair), so parallel relations appear once each.
            let mut expected: Vec<Vec<String>> = Vec::new();
            for t1 in &canonical {
                expected.push(vec![t1.head.clone(), t1.tail.clone()]);
                for t2 in &canonical {
                    if t2.head == t1.tail && t2.tail != t1.head {
                        expected.push(vec![t1.head.clone(), t1.tail.clone(), t2.tail.clone()]);
                    }
                }
            }
            expected.sort();

            let mut got: Vec<Vec<String>> = multi_hop_search(&g, &seeds, 2, usize::MAX, 0.7)
                .unwrap()
                .into_iter()
                .map(|p| p.nodes)
                .collect();
            got.sort();
            assert_eq!(got, expected);
        }
    }
}
