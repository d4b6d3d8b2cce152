use std::collections::BTreeSet;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Padding token; its embedding row is all-zero and never trained.
pub const PAD: &str = "<pad>";
/// Out-of-vocabulary fallback with a trained embedding row.
pub const UNK: &str = "<unk>";
/// End-of-sequence marker for the title decoder.
pub const EOS: &str = "<eos>";
/// Learned field separators for flattened structured queries.
pub const SEP_DISEASE: &str = "<sep:disease>";
pub const SEP_GENE: &str = "<sep:gene>";
pub const SEP_VARIANT: &str = "<sep:variant>";
pub const SEP_DEMOGRAPHIC: &str = "<sep:demographic>";

/// Specials occupy the lowest indices, in this order. None of them can
/// be produced by the tokenizer (angle brackets are always split off),
/// so they never collide with corpus tokens.
pub const SPECIAL_TOKENS: [&str; 7] = [
    PAD,
    UNK,
    EOS,
    SEP_DISEASE,
    SEP_GENE,
    SEP_VARIANT,
    SEP_DEMOGRAPHIC,
];

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;
pub const EOS_INDEX: usize = 2;

/// Token <-> index bijection over one shared controlled vocabulary.
///
/// Documents, titles, concept surface forms, and queries all draw from
/// the same table; the decoder's output space is this vocabulary too.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Build from the set of corpus tokens. Specials come first, the
    /// rest in sorted order, so construction is order-independent.
    pub fn build<I, S>(corpus_tokens: I) -> Vocabulary
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let unique: BTreeSet<String> = corpus_tokens
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .collect();
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(unique);
        let mut vocab = Vocabulary {
            tokens,
            index: HashMap::new(),
        };
        vocab.rebuild_index();
        vocab
    }

    /// Restore the token->index map after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Exact lookup; `None` for out-of-vocabulary tokens.
    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Lookup with UNK fallback, for inference-time inputs.
    pub fn index_or_unk(&self, token: &str) -> usize {
        self.index_of(token).unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(|s| s.as_str())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
