//! Corpus ingestion: documents, titles, concept annotations, vocabulary,
//! and word-embedding initialization.
//!
//! Concept extraction itself happens upstream; annotations arrive as
//! plain files. Input formats:
//!
//! * docs: JSON lines, one object per line:
//!   `{"id", "title", "abstract", "concepts": [..], "mesh": [..]?}`
//! * concepts: TSV `concept_id <TAB> surface_form`, one surface form per
//!   line (ids repeat for multiple forms)
//! * embeddings: text, `token v1 v2 ... vdim` per line

mod embeddings;
mod tokenize;
mod vocab;

pub use embeddings::{init_embeddings, uniform_bound, EmbeddingInit};
pub use tokenize::tokenize;
pub use vocab::{
    Vocabulary, EOS, EOS_INDEX, PAD, PAD_INDEX, SEP_DEMOGRAPHIC, SEP_DISEASE, SEP_GENE,
    SEP_VARIANT, SPECIAL_TOKENS, UNK, UNK_INDEX,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numkit::Tensor2;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("docs file line {line}: {message}")]
    DocParse { line: usize, message: String },
    #[error("duplicate document id {0:?}")]
    DuplicateDoc(String),
    #[error("document {doc:?} has an empty token sequence")]
    EmptyDocument { doc: String },
    #[error("unresolved concept ids: {}", format_offenders(.0))]
    UnresolvedConcepts(Vec<(String, String)>),
    #[error("concepts file line {line}: {message}")]
    ConceptParse { line: usize, message: String },
    #[error("embeddings file line {line}: {message}")]
    EmbeddingParse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn format_offenders(offenders: &[(String, String)]) -> String {
    offenders
        .iter()
        .map(|(doc, concept)| format!("{concept:?} (document {doc:?})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// One ingested document: indexed abstract tokens, indexed title tokens
/// (decoder target), resolved concept ids, and optional MeSH terms.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<usize>,
    pub title_tokens: Vec<usize>,
    /// Sorted, deduplicated.
    pub concept_ids: Vec<String>,
    pub mesh: Vec<String>,
}

/// A registered biomedical concept with its surface forms and initial
/// embedding (mean of its surface-form token embeddings).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Concept {
    pub id: String,
    /// Sorted, at least one entry.
    pub surface_forms: Vec<String>,
    pub embedding: Tensor2,
}

/// Immutable corpus bundle: documents, concept registry, vocabulary, and
/// the initial word-embedding matrix.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Corpus {
    /// Sorted by id.
    pub documents: Vec<Document>,
    /// Sorted by id.
    pub concepts: Vec<Concept>,
    pub vocab: Vocabulary,
    pub embedding_dim: usize,
    /// V x dim; the PAD row is zero.
    pub embeddings: Tensor2,
    #[serde(skip)]
    doc_index: HashMap<String, usize>,
    #[serde(skip)]
    concept_index: HashMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct RawDocument {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    r#abstract: String,
    #[serde(default)]
    concepts: Vec<String>,
    #[serde(default)]
    mesh: Vec<String>,
}

impl Corpus {
    pub fn doc(&self, id: &str) -> Option<&Document> {
        self.doc_index.get(id).map(|&i| &self.documents[i])
    }

    pub fn doc_position(&self, id: &str) -> Option<usize> {
        self.doc_index.get(id).copied()
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concept_index.get(id).map(|&i| &self.concepts[i])
    }

    pub fn concept_position(&self, id: &str) -> Option<usize> {
        self.concept_index.get(id).copied()
    }

    /// Restore the skipped lookup tables after deserialization.
    pub fn rebuild_indexes(&mut self) {
        self.vocab.rebuild_index();
        self.doc_index = self
            .documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        self.concept_index = self
            .concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
    }
}

/// Load and index a corpus from the docs and concepts files, then
/// initialize embeddings.
///
/// The vocabulary is the union of abstract tokens, title tokens, and
/// concept surface-form tokens, plus the special tokens.
pub fn load_corpus(
    docs_path: &Path,
    concepts_path: &Path,
    dim: usize,
    emb: &EmbeddingInit,
    seed: u64,
) -> Result<Corpus> {
    let surface_by_concept = read_concepts_file(concepts_path)?;
    let raw_docs = read_docs_file(docs_path)?;

    // Resolve concept references before anything else so the error can
    // list every offender at once.
    let mut offenders = Vec::new();
    for (doc, _) in &raw_docs {
        for c in &doc.concepts {
            if !surface_by_concept.contains_key(c) {
                offenders.push((doc.id.clone(), c.clone()));
            }
        }
    }
    if !offenders.is_empty() {
        return Err(CorpusError::UnresolvedConcepts(offenders));
    }

    let mut token_pool: BTreeSet<String> = BTreeSet::new();
    let mut tokenized: Vec<(String, Vec<String>, Vec<String>, Vec<String>, Vec<String>)> =
        Vec::new();
    for (doc, line) in raw_docs {
        let tokens = tokenize(&doc.r#abstract);
        if tokens.is_empty() {
            return Err(CorpusError::DocParse {
                line,
                message: format!("document {:?} has an empty abstract", doc.id),
            });
        }
        let title_tokens = tokenize(&doc.title);
        token_pool.extend(tokens.iter().cloned());
        token_pool.extend(title_tokens.iter().cloned());
        let mut concept_ids: Vec<String> = doc.concepts.clone();
        concept_ids.sort();
        concept_ids.dedup();
        tokenized.push((doc.id, tokens, title_tokens, concept_ids, doc.mesh));
    }
    for forms in surface_by_concept.values() {
        for form in forms {
            token_pool.extend(tokenize(form));
        }
    }

    let vocab = Vocabulary::build(token_pool.iter());
    let embeddings = init_embeddings(&vocab, dim, emb, seed)?;

    let mut documents: Vec<Document> = tokenized
        .into_iter()
        .map(|(id, tokens, title_tokens, concept_ids, mesh)| Document {
            id,
            tokens: tokens
                .iter()
                .map(|t| vocab.index_of(t).expect("doc token in vocab"))
                .collect(),
            title_tokens: title_tokens
                .iter()
                .map(|t| vocab.index_of(t).expect("title token in vocab"))
                .collect(),
            concept_ids,
            mesh,
        })
        .collect();
    documents.sort_by(|a, b| a.id.cmp(&b.id));

    let concepts: Vec<Concept> = surface_by_concept
        .into_iter()
        .map(|(id, forms)| {
            let embedding = mean_surface_embedding(&forms, &vocab, &embeddings, dim);
            Concept {
                id,
                surface_forms: forms.into_iter().collect(),
                embedding,
            }
        })
        .collect();

    let mut corpus = Corpus {
        documents,
        concepts,
        vocab,
        embedding_dim: dim,
        embeddings,
        doc_index: HashMap::new(),
        concept_index: HashMap::new(),
    };
    corpus.rebuild_indexes();
    Ok(corpus)
}

/// A concept's initial vector: the mean embedding of all tokens across
/// its surface forms.
fn mean_surface_embedding(
    forms: &BTreeSet<String>,
    vocab: &Vocabulary,
    embeddings: &Tensor2,
    dim: usize,
) -> Tensor2 {
    let mut sum = Tensor2::zeros(1, dim);
    let mut count = 0usize;
    for form in forms {
        for token in tokenize(form) {
            let idx = vocab.index_or_unk(&token);
            for (s, &e) in sum.data_mut().iter_mut().zip(embeddings.row(idx)) {
                *s += e;
            }
            count += 1;
        }
    }
    if count > 0 {
        sum = sum.scale(1.0 / count as f64);
    }
    sum
}

fn read_docs_file(path: &Path) -> Result<Vec<(RawDocument, usize)>> {
    let file = File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument =
            serde_json::from_str(&line).map_err(|e| CorpusError::DocParse {
                line: line_no,
                message: e.to_string(),
            })?;
        if !seen.insert(raw.id.clone()) {
            return Err(CorpusError::DuplicateDoc(raw.id));
        }
        docs.push((raw, line_no));
    }
    Ok(docs)
}

fn read_concepts_file(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let file = File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(2, '\t');
        let id = fields.next().unwrap_or("").trim();
        let form = fields.next().map(str::trim).unwrap_or("");
        if id.is_empty() || form.is_empty() {
            return Err(CorpusError::ConceptParse {
                line: line_no,
                message: "expected `concept_id<TAB>surface_form`".into(),
            });
        }
        map.entry(id.to_string()).or_default().insert(form.to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn two_doc_fixture() -> (tempfile::NamedTempFile, tempfile::NamedTempFile) {
        let docs = write_file(concat!(
            "{\"id\":\"d1\",\"title\":\"Alpha study\",\"abstract\":\"Pancreatic cancer cells.\",\"concepts\":[\"c1\"]}\n",
            "{\"id\":\"d2\",\"title\":\"Beta study\",\"abstract\":\"CDK6 amplification in tumors.\",\"concepts\":[\"c1\"],\"mesh\":[\"neoplasms\"]}\n",
        ));
        let concepts = write_file("c1\tpancreatic cancer\nc1\tpancreatic carcinoma\n");
        (docs, concepts)
    }

    #[test]
    fn loads_fixture_with_shared_concept() {
        let (docs, concepts) = two_doc_fixture();
        let corpus =
            load_corpus(docs.path(), concepts.path(), 4, &EmbeddingInit::Random, 1).unwrap();
        assert_eq!(corpus.documents.len(), 2);
        assert_eq!(corpus.concepts.len(), 1);
        for d in &corpus.documents {
            assert_eq!(d.concept_ids, vec!["c1".to_string()]);
        }
        // Vocabulary holds the union of abstract, title, and surface tokens.
        for t in ["pancreatic", "cancer", "cdk6", "alpha", "carcinoma", "."] {
            assert!(corpus.vocab.index_of(t).is_some(), "missing {t}");
        }
        assert_eq!(corpus.documents[1].mesh, vec!["neoplasms".to_string()]);
    }

    #[test]
    fn unknown_concept_is_named_in_error() {
        let docs = write_file(
            "{\"id\":\"d1\",\"title\":\"t\",\"abstract\":\"some text\",\"concepts\":[\"c99\"]}\n",
        );
        let concepts = write_file("c1\tcancer\n");
        let err = load_corpus(docs.path(), concepts.path(), 4, &EmbeddingInit::Random, 1)
            .unwrap_err();
        assert!(err.to_string().contains("c99"), "{err}");
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let docs = write_file(concat!(
            "{\"id\":\"d1\",\"title\":\"t\",\"abstract\":\"a b\",\"concepts\":[]}\n",
            "{\"id\":\"d1\",\"title\":\"t\",\"abstract\":\"c d\",\"concepts\":[]}\n",
        ));
        let concepts = write_file("c1\tcancer\n");
        let err = load_corpus(docs.path(), concepts.path(), 4, &EmbeddingInit::Random, 1)
            .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateDoc(id) if id == "d1"));
    }

    #[test]
    fn empty_concepts_file_still_loads() {
        let docs = write_file(
            "{\"id\":\"d1\",\"title\":\"t\",\"abstract\":\"plain text only\",\"concepts\":[]}\n",
        );
        let concepts = write_file("");
        let corpus =
            load_corpus(docs.path(), concepts.path(), 4, &EmbeddingInit::Random, 1).unwrap();
        assert!(corpus.concepts.is_empty());
    }

    #[test]
    fn empty_abstract_is_an_error() {
        let docs = write_file("{\"id\":\"d1\",\"title\":\"t\",\"abstract\":\"\",\"concepts\":[]}\n");
        let concepts = write_file("");
        let err = load_corpus(docs.path(), concepts.path(), 4, &EmbeddingInit::Random, 1)
            .unwrap_err();
        assert!(err.to_string().contains("empty abstract"), "{err}");
    }

    #[test]
    fn concept_embedding_is_mean_of_surface_tokens() {
        let (docs, concepts) = two_doc_fixture();
        let corpus =
            load_corpus(docs.path(), concepts.path(), 4, &EmbeddingInit::Random, 9).unwrap();
        let c = corpus.concept("c1").unwrap();
        // Forms: "pancreatic cancer", "pancreatic carcinoma" -> 4 tokens.
        let v = &corpus.vocab;
        let e = &corpus.embeddings;
        let ids = [
            v.index_of("pancreatic").unwrap(),
            v.index_of("cancer").unwrap(),
            v.index_of("pancreatic").unwrap(),
            v.index_of("carcinoma").unwrap(),
        ];
        for j in 0..4 {
            let want: f64 = ids.iter().map(|&i| e.get(i, j)).sum::<f64>() / 4.0;
            assert!((c.embedding.get(0, j) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn serde_round_trip_rebuilds_indexes() {
        let (docs, concepts) = two_doc_fixture();
        let corpus =
            load_corpus(docs.path(), concepts.path(), 4, &EmbeddingInit::Random, 1).unwrap();
        let json = serde_json::to_string(&corpus).unwrap();
        let mut restored: Corpus = serde_json::from_str(&json).unwrap();
        restored.rebuild_indexes();
        assert_eq!(restored.doc("d2").unwrap().id, "d2");
        assert_eq!(restored.concept_position("c1"), Some(0));
        assert_eq!(restored, corpus);
    }
}
