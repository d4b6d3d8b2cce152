//! The document-concept graph: containment edges between documents and
//! the concepts they carry, plus undirected concept-concept edges from a
//! knowledge-base file.
//!
//! Message direction is restricted: documents receive from their
//! concepts, concepts receive from neighboring concepts, and nothing
//! ever flows from a document into a concept.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("kb edges file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("kb edge references unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("unknown concept id {0:?} in matched set")]
    UnknownMatched(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Immutable graph over one corpus. Node ids are positions into the
/// corpus' sorted document and concept lists.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct DocConceptGraph {
    pub doc_ids: Vec<String>,
    pub concept_ids: Vec<String>,
    /// Per document: sorted concept positions it contains (its incoming
    /// message set).
    pub doc_neighbors: Vec<Vec<usize>>,
    /// Per concept: sorted neighboring concept positions; symmetric.
    pub concept_neighbors: Vec<Vec<usize>>,
    /// Knowledge edges as loaded, keyed `(min, max)` with the relation
    /// label kept as metadata. Propagation ignores the label.
    pub kb_edge_labels: BTreeMap<(usize, usize), String>,
    /// Self-loop kb lines dropped during the build.
    pub rejected_self_loops: usize,
}

/// A per-batch (or per-query) overlay marking which concepts match the
/// active queries. Doc-incident edges from a marked concept carry the
/// reward factor; the base graph stays untouched so overlays from
/// concurrent batches never interfere.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchOverlay {
    matched: Vec<bool>,
}

impl MatchOverlay {
    /// No concept marked: the reward factor degenerates to 1 everywhere.
    pub fn none(graph: &DocConceptGraph) -> Self {
        MatchOverlay {
            matched: vec![false; graph.concept_ids.len()],
        }
    }

    pub fn is_matched(&self, concept_pos: usize) -> bool {
        self.matched.get(concept_pos).copied().unwrap_or(false)
    }

    pub fn matched_count(&self) -> usize {
        self.matched.iter().filter(|&&m| m).count()
    }
}

impl DocConceptGraph {
    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn concept_count(&self) -> usize {
        self.concept_ids.len()
    }

    pub fn concept_position(&self, id: &str) -> Option<usize> {
        self.concept_ids.binary_search_by(|c| c.as_str().cmp(id)).ok()
    }

    pub fn doc_position(&self, id: &str) -> Option<usize> {
        self.doc_ids.binary_search_by(|d| d.as_str().cmp(id)).ok()
    }

    /// Flag the doc-incident edges of `matched_concepts`. Every id must
    /// be a registered concept.
    pub fn mark_matched<'a, I>(&self, matched_concepts: I) -> Result<MatchOverlay>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut overlay = MatchOverlay::none(self);
        for id in matched_concepts {
            let pos = self
                .concept_position(id)
                .ok_or_else(|| GraphError::UnknownMatched(id.to_string()))?;
            overlay.matched[pos] = true;
        }
        Ok(overlay)
    }

    /// Overlay from already-resolved concept positions.
    pub fn mark_matched_positions(&self, positions: &BTreeSet<usize>) -> MatchOverlay {
        let mut overlay = MatchOverlay::none(self);
        for &p in positions {
            if p < overlay.matched.len() {
                overlay.matched[p] = true;
            }
        }
        overlay
    }
}

/// Build the graph: containment edges from each document's concept list,
/// knowledge edges from a TSV of `concept_id <TAB> relation <TAB>
/// concept_id` lines. Duplicate kb lines collapse to one edge; self
/// loops are dropped and counted.
pub fn build_graph(corpus: &Corpus, kb_edges_path: Option<&Path>) -> Result<DocConceptGraph> {
    let doc_ids: Vec<String> = corpus.documents.iter().map(|d| d.id.clone()).collect();
    let concept_ids: Vec<String> = corpus.concepts.iter().map(|c| c.id.clone()).collect();
    let concept_pos: HashMap<&str, usize> = concept_ids
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let doc_neighbors: Vec<Vec<usize>> = corpus
        .documents
        .iter()
        .map(|d| {
            d.concept_ids
                .iter()
                .map(|c| *concept_pos.get(c.as_str()).expect("corpus resolved ids"))
                .collect()
        })
        .collect();

    let mut neighbor_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); concept_ids.len()];
    let mut kb_edge_labels = BTreeMap::new();
    let mut rejected_self_loops = 0usize;
    if let Some(path) = kb_edges_path {
        for (u, label, v) in read_kb_edges(path)? {
            let up = *concept_pos
                .get(u.as_str())
                .ok_or_else(|| GraphError::UnknownConcept(u.clone()))?;
            let vp = *concept_pos
                .get(v.as_str())
                .ok_or_else(|| GraphError::UnknownConcept(v.clone()))?;
            if up == vp {
                rejected_self_loops += 1;
                continue;
            }
            neighbor_sets[up].insert(vp);
            neighbor_sets[vp].insert(up);
            kb_edge_labels
                .entry((up.min(vp), up.max(vp)))
                .or_insert(label);
        }
    }

    Ok(DocConceptGraph {
        doc_ids,
        concept_ids,
        doc_neighbors,
        concept_neighbors: neighbor_sets
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect(),
        kb_edge_labels,
        rejected_self_loops,
    })
}

fn read_kb_edges(path: &Path) -> Result<Vec<(String, String, String)>> {
    let file = File::open(path).map_err(|e| GraphError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut edges = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| GraphError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 || fields[0].is_empty() || fields[2].is_empty() {
            return Err(GraphError::Parse {
                line: line_no,
                message: "expected `concept_id<TAB>relation<TAB>concept_id`".into(),
            });
        }
        edges.push((
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
        ));
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_corpus, EmbeddingInit};
    use std::io::Write;

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn fixture_corpus() -> crate::corpus::Corpus {
        let docs = write_file(concat!(
            "{\"id\":\"d1\",\"title\":\"t one\",\"abstract\":\"alpha beta\",\"concepts\":[\"c1\",\"c2\"]}\n",
            "{\"id\":\"d2\",\"title\":\"t two\",\"abstract\":\"gamma delta\",\"concepts\":[\"c3\"]}\n",
        ));
        let concepts = write_file("c1\tone\nc2\ttwo\nc3\tthree\n");
        load_corpus(docs.path(), concepts.path(), 4, &EmbeddingInit::Random, 1).unwrap()
    }

    #[test]
    fn containment_and_kb_edges() {
        let corpus = fixture_corpus();
        let kb = write_file("c2\trelated_to\tc3\n");
        let g = build_graph(&corpus, Some(kb.path())).unwrap();
        let c = |id: &str| g.concept_position(id).unwrap();
        assert_eq!(g.doc_neighbors[g.doc_position("d1").unwrap()], vec![c("c1"), c("c2")]);
        assert_eq!(g.concept_neighbors[c("c2")], vec![c("c3")]);
        assert_eq!(g.concept_neighbors[c("c3")], vec![c("c2")]);
        assert!(g.concept_neighbors[c("c1")].is_empty());
    }

    #[test]
    fn duplicate_kb_lines_collapse() {
        let corpus = fixture_corpus();
        let kb = write_file("c1\trel\tc2\nc1\trel\tc2\nc2\trel\tc1\n");
        let g = build_graph(&corpus, Some(kb.path())).unwrap();
        let c = |id: &str| g.concept_position(id).unwrap();
        assert_eq!(g.concept_neighbors[c("c1")], vec![c("c2")]);
        assert_eq!(g.kb_edge_labels.len(), 1);
    }

    #[test]
    fn no_kb_edges_is_valid() {
        let corpus = fixture_corpus();
        let g = build_graph(&corpus, None).unwrap();
        assert!(g.concept_neighbors.iter().all(|n| n.is_empty()));
    }

    #[test]
    fn self_loops_rejected_with_count() {
        let corpus = fixture_corpus();
        let kb = write_file("c1\trel\tc1\nc2\trel\tc3\n");
        let g = build_graph(&corpus, Some(kb.path())).unwrap();
        assert_eq!(g.rejected_self_loops, 1);
        let c = |id: &str| g.concept_position(id).unwrap();
        assert_eq!(g.concept_neighbors[c("c2")], vec![c("c3")]);
    }

    #[test]
    fn unknown_kb_concept_is_named() {
        let corpus = fixture_corpus();
        let kb = write_file("c1\trel\tc9\n");
        let err = build_graph(&corpus, Some(kb.path())).unwrap_err();
        assert!(err.to_string().contains("c9"), "{err}");
    }

    #[test]
    fn symmetry_invariant() {
        let corpus = fixture_corpus();
        let kb = write_file("c1\ta\tc2\nc2\tb\tc3\nc3\tc\tc1\n");
        let g = build_graph(&corpus, Some(kb.path())).unwrap();
        for (u, nbrs) in g.concept_neighbors.iter().enumerate() {
            for &v in nbrs {
                assert!(g.concept_neighbors[v].contains(&u));
            }
        }
    }

    #[test]
    fn order_independent_build() {
        let corpus = fixture_corpus();
        let kb_a = write_file("c1\trel\tc2\nc2\trel\tc3\n");
        let kb_b = write_file("c2\trel\tc3\nc1\trel\tc2\n");
        let a = build_graph(&corpus, Some(kb_a.path())).unwrap();
        let b = build_graph(&corpus, Some(kb_b.path())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mark_matched_flags_requested_edges() {
        let corpus = fixture_corpus();
        let g = build_graph(&corpus, None).unwrap();
        let c2 = g.concept_position("c2").unwrap();
        let overlay = g.mark_matched(["c2"]).unwrap();
        assert!(overlay.is_matched(c2));
        assert!(!overlay.is_matched(g.concept_position("c1").unwrap()));
        assert_eq!(overlay.matched_count(), 1);

        let empty = g.mark_matched([]).unwrap();
        assert_eq!(empty, MatchOverlay::none(&g));

        let all: Vec<&str> = g.concept_ids.iter().map(|s| s.as_str()).collect();
        let full = g.mark_matched(all).unwrap();
        assert_eq!(full.matched_count(), g.concept_count());

        assert!(g.mark_matched(["c9"]).is_err());
    }
}
