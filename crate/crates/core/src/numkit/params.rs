use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{NumError, Result, Tensor2};

pub const CHECKPOINT_MAGIC: &str = "litrank-tensors v1";

/// Named parameter tensors with matching gradient buffers.
///
/// The flat view orders coordinates lexicographically by parameter name
/// (byte order), then row-major within each tensor. That ordering is what
/// checkpoints, the optimizer, and finite-difference indexing all share.
///
/// Gradient accumulation is additive; callers zero gradients explicitly
/// per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    // BTreeMap iteration order is the flat-view order.
    entries: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: Tensor2,
    grad: Tensor2,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            entries: BTreeMap::new(),
        }
    }

    /// Register a parameter. Names are unique and must not contain
    /// whitespace (they appear as single fields in checkpoint records).
    pub fn insert(&mut self, name: &str, value: Tensor2) -> Result<()> {
        if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
            return Err(NumError::Invalid(format!(
                "parameter name {name:?} is empty or contains whitespace"
            )));
        }
        if self.entries.contains_key(name) {
            return Err(NumError::DuplicateParam(name.to_string()));
        }
        let grad = Tensor2::zeros(value.rows(), value.cols());
        self.entries.insert(name.to_string(), Entry { value, grad });
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Result<&Tensor2> {
        self.entries
            .get(name)
            .map(|e| &e.value)
            .ok_or_else(|| NumError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor2> {
        self.entries
            .get_mut(name)
            .map(|e| &mut e.value)
            .ok_or_else(|| NumError::UnknownParam(name.to_string()))
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor2> {
        self.entries
            .get(name)
            .map(|e| &e.grad)
            .ok_or_else(|| NumError::UnknownParam(name.to_string()))
    }

    pub fn grad_mut(&mut self, name: &str) -> Result<&mut Tensor2> {
        self.entries
            .get_mut(name)
            .map(|e| &mut e.grad)
            .ok_or_else(|| NumError::UnknownParam(name.to_string()))
    }

    /// Parameter names in flat-view order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// Iterate `(name, value, grad)` in flat-view order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor2, &Tensor2)> {
        self.entries
            .iter()
            .map(|(n, e)| (n.as_str(), &e.value, &e.grad))
    }

    /// Apply `f(name, value, grad)` to every entry in flat-view order.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Tensor2, &mut Tensor2)) {
        for (n, e) in self.entries.iter_mut() {
            f(n, &mut e.value, &mut e.grad);
        }
    }

    pub fn zero_grads(&mut self) {
        for e in self.entries.values_mut() {
            e.grad.fill(0.0);
        }
    }

    /// Total coordinate count of the flat view.
    pub fn flat_len(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    /// Parameter values flattened in flat-view order.
    pub fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for e in self.entries.values() {
            out.extend_from_slice(e.value.data());
        }
        out
    }

    /// Gradients flattened in flat-view order.
    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for e in self.entries.values() {
            out.extend_from_slice(e.grad.data());
        }
        out
    }

    /// Overwrite parameter values from a flat slice.
    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(NumError::Invalid(format!(
                "flat view has {} coordinates, got {}",
                self.flat_len(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for e in self.entries.values_mut() {
            let n = e.value.len();
            e.value.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Resolve a flat coordinate to `(name, in-tensor offset)`.
    pub fn locate(&self, flat_index: usize) -> Result<(&str, usize)> {
        let mut offset = flat_index;
        for (name, e) in self.entries.iter() {
            if offset < e.value.len() {
                return Ok((name.as_str(), offset));
            }
            offset -= e.value.len();
        }
        Err(NumError::IndexOutOfRange {
            what: "flat coordinate",
            index: flat_index,
            size: self.flat_len(),
        })
    }

    /// Add `delta` to one flat coordinate, returning the previous value.
    pub fn nudge(&mut self, flat_index: usize, delta: f64) -> Result<f64> {
        let (name, off) = {
            let (n, o) = self.locate(flat_index)?;
            (n.to_string(), o)
        };
        let t = self.get_mut(&name)?;
        let old = t.data()[off];
        t.data_mut()[off] = old + delta;
        Ok(old)
    }

    /// Set one flat coordinate to an exact value.
    pub fn set_coord(&mut self, flat_index: usize, value: f64) -> Result<()> {
        let (name, off) = {
            let (n, o) = self.locate(flat_index)?;
            (n.to_string(), o)
        };
        self.get_mut(&name)?.data_mut()[off] = value;
        Ok(())
    }

    /// Write all tensors as a bit-exact textual record block:
    ///
    /// ```text
    /// litrank-tensors v1
    /// <count>
    /// <name> <rows> <cols> <hex64>...
    /// ```
    ///
    /// Each value is the hexadecimal IEEE-754 bit pattern of the f64, so
    /// save/load round-trips exactly.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "{}", self.entries.len())?;
        for (name, e) in self.entries.iter() {
            write!(w, "{} {} {}", name, e.value.rows(), e.value.cols())?;
            for v in e.value.data() {
                write!(w, " {:016x}", v.to_bits())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Read a record block written by [`ParamStore::save`] from a line
    /// iterator; consumes exactly the block's lines.
    pub fn load_from_lines<'a, I>(lines: &mut I, line_no: &mut usize) -> Result<ParamStore>
    where
        I: Iterator<Item = std::io::Result<String>> + 'a,
    {
        let mut next_line = |line_no: &mut usize| -> Result<String> {
            *line_no += 1;
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(NumError::Io(e)),
                None => Err(NumError::CheckpointParse {
                    line: *line_no,
                    message: "unexpected end of file".into(),
                }),
            }
        };
        let magic = next_line(line_no)?;
        if magic.trim() != CHECKPOINT_MAGIC {
            return Err(NumError::CheckpointParse {
                line: *line_no,
                message: format!("expected {CHECKPOINT_MAGIC:?}, got {:?}", magic.trim()),
            });
        }
        let count_line = next_line(line_no)?;
        let count: usize = count_line.trim().parse().map_err(|_| NumError::CheckpointParse {
            line: *line_no,
            message: format!("bad tensor count {:?}", count_line.trim()),
        })?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let line = next_line(line_no)?;
            let mut fields = line.split_ascii_whitespace();
            let parse_fail = |message: String, line: usize| NumError::CheckpointParse { line, message };
            let name = fields
                .next()
                .ok_or_else(|| parse_fail("missing tensor name".into(), *line_no))?;
            let rows: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_fail("bad row count".into(), *line_no))?;
            let cols: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_fail("bad col count".into(), *line_no))?;
            let mut data = Vec::with_capacity(rows * cols);
            for field in fields {
                let bits = u64::from_str_radix(field, 16)
                    .map_err(|_| parse_fail(format!("bad hex value {field:?}"), *line_no))?;
                data.push(f64::from_bits(bits));
            }
            if data.len() != rows * cols {
                return Err(parse_fail(
                    format!(
                        "tensor {name:?} declares {rows}x{cols} but carries {} values",
                        data.len()
                    ),
                    *line_no,
                ));
            }
            store.insert(name, Tensor2::from_vec(rows, cols, data)?)?;
        }
        Ok(store)
    }

    /// Convenience wrapper: read one block from a reader.
    pub fn load<R: BufRead>(r: &mut R) -> Result<ParamStore> {
        let mut line_no = 0usize;
        Self::load_from_lines(&mut r.lines(), &mut line_no)
    }
}
