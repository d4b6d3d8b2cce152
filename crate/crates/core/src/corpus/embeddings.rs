use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::vocab::{Vocabulary, PAD_INDEX};
use super::{CorpusError, Result};
use crate::numkit::Tensor2;

/// How to fill the initial word-embedding matrix.
#[derive(Debug, Clone)]
pub enum EmbeddingInit {
    /// Uniform samples from [-sqrt(3/dim), +sqrt(3/dim)).
    Random,
    /// Load vectors by token from a text file (`token v1 .. vdim` per
    /// line); vocabulary tokens missing from the file fall back to the
    /// random rule.
    Pretrained(std::path::PathBuf),
}

/// The sampling bound sqrt(3/dim).
pub fn uniform_bound(dim: usize) -> f64 {
    (3.0 / dim as f64).sqrt()
}

/// Build the V x dim embedding matrix for `vocab`. The PAD row is zeroed
/// in either mode.
pub fn init_embeddings(
    vocab: &Vocabulary,
    dim: usize,
    mode: &EmbeddingInit,
    seed: u64,
) -> Result<Tensor2> {
    if dim == 0 {
        return Err(CorpusError::Invalid("embedding dim must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = uniform_bound(dim);
    let mut matrix = Tensor2::zeros(vocab.len(), dim);
    for i in 0..vocab.len() {
        for j in 0..dim {
            matrix.set(i, j, rng.random_range(-bound..bound));
        }
    }
    if let EmbeddingInit::Pretrained(path) = mode {
        load_pretrained_into(&mut matrix, vocab, dim, path)?;
    }
    for v in matrix.row_mut(PAD_INDEX) {
        *v = 0.0;
    }
    Ok(matrix)
}

fn load_pretrained_into(
    matrix: &mut Tensor2,
    vocab: &Vocabulary,
    dim: usize,
    path: &Path,
) -> Result<()> {
    let file = File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut covered = 0usize;
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let token = fields.next().expect("non-empty line has a first field");
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| CorpusError::EmbeddingParse {
                    line: line_no,
                    message: format!("bad float {f:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(CorpusError::EmbeddingParse {
                line: line_no,
                message: format!("expected {dim} values for {token:?}, got {}", values.len()),
            });
        }
        if let Some(idx) = vocab.index_of(token) {
            matrix.row_mut(idx).copy_from_slice(&values);
            covered += 1;
        }
    }
    if covered == 0 {
        return Err(CorpusError::Invalid(format!(
            "pretrained embeddings at {} cover no vocabulary token",
            path.display()
        )));
    }
    Ok(())
}
