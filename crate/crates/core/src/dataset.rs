//! Sparse binary-classification data in LIBSVM text format, the bias trick,
//! and uniform without-replacement subsampling of example positions.
//!
//! Feature columns are stored zero-based: LIBSVM index `k` becomes column
//! `k - 1`. Example positions in an [`IndexSample`] are zero-based as well.

use std::fmt::Write as _;
use std::io::BufRead;
use std::ops::Deref;

use thiserror::Error;

use crate::rng::RandomStream;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: malformed entry: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: non-finite value {token:?}")]
    NonFiniteValue { line: usize, token: String },
    #[error("line {line}: feature index must be >= 1, got {token:?}")]
    NonPositiveIndex { line: usize, token: String },
    #[error("line {line}: unrecognized label {token:?} (expected 0, 1, -1 or +1)")]
    UnrecognizedLabel { line: usize, token: String },
    #[error("line {line}: feature index {index} exceeds dimension {dim}")]
    IndexOutOfRange { line: usize, index: usize, dim: usize },
    #[error("bias feature already added")]
    BiasAlreadyAdded,
    #[error("sample size {size} out of range for {n} examples")]
    SizeOutOfRange { size: usize, n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One example `a^i`: strictly increasing zero-based columns with nonzero values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseExample {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseExample {
    /// Builds an example from `(column, value)` pairs in any order. Zero values
    /// are dropped; repeated columns are rejected.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Result<Self, String> {
        pairs.retain(|&(_, v)| v != 0.0);
        pairs.sort_by_key(|&(k, _)| k);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(format!("feature {} given twice", w[0].0 + 1));
        }
        if pairs.iter().any(|&(_, v)| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        let (indices, values) = pairs.into_iter().unzip();
        Ok(SparseExample { indices, values })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .map(|&k| k as usize)
            .zip(self.values.iter().copied())
    }

    /// `<a, w>` for a dense `w`.
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.iter().map(|(k, v)| v * w[k]).sum()
    }

    /// `out += alpha * a`.
    #[inline]
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        for (k, v) in self.iter() {
            out[k] += alpha * v;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Immutable labelled dataset. Labels are exactly `-1.0` or `+1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    examples: Vec<SparseExample>,
    labels: Vec<f64>,
    bias_added: bool,
}

impl Dataset {
    /// Assembles a dataset from parts, checking labels and column bounds.
    pub fn new(dim: usize, examples: Vec<SparseExample>, labels: Vec<f64>) -> Result<Self, DatasetError> {
        if examples.len() != labels.len() {
            return Err(DatasetError::MalformedLine {
                line: 0,
                reason: format!("{} examples but {} labels", examples.len(), labels.len()),
            });
        }
        for (i, (ex, &y)) in examples.iter().zip(&labels).enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(DatasetError::UnrecognizedLabel {
                    line: i + 1,
                    token: y.to_string(),
                });
            }
            if let Some(&k) = ex.indices.last() {
                if k as usize >= dim {
                    return Err(DatasetError::IndexOutOfRange {
                        line: i + 1,
                        index: k as usize + 1,
                        dim,
                    });
                }
            }
        }
        Ok(Dataset {
            dim,
            examples,
            labels,
            bias_added: false,
        })
    }

    pub fn n(&self) -> usize {
        self.examples.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn examples(&self) -> &[SparseExample] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &SparseExample {
        &self.examples[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn bias_added(&self) -> bool {
        self.bias_added
    }

    pub fn max_squared_norm(&self) -> f64 {
        self.examples
            .iter()
            .map(SparseExample::squared_norm)
            .fold(0.0, f64::max)
    }

    /// Appends a constant-one feature in a new last column.
    pub fn add_bias(mut self) -> Result<Dataset, DatasetError> {
        if self.bias_added {
            return Err(DatasetError::BiasAlreadyAdded);
        }
        let col = self.dim as u32;
        for ex in &mut self.examples {
            ex.indices.push(col);
            ex.values.push(1.0);
        }
        self.dim += 1;
        self.bias_added = true;
        Ok(self)
    }

    /// Renders the dataset as LIBSVM text (labels `+1`/`-1`, 1-based indices).
    /// Values use Rust's shortest round-trip formatting.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (ex, &y) in self.examples.iter().zip(&self.labels) {
            out.push_str(if y > 0.0 { "+1" } else { "-1" });
            for (k, v) in ex.iter() {
                let _ = write!(out, " {}:{}", k + 1, v);
            }
            out.push('\n');
        }
        out
    }
}

fn parse_label(token: &str, line: usize) -> Result<f64, DatasetError> {
    let unrecognized = || DatasetError::UnrecognizedLabel {
        line,
        token: token.to_string(),
    };
    let v: f64 = token.parse().map_err(|_| unrecognized())?;
    if v == 1.0 {
        Ok(1.0)
    } else if v == 0.0 || v == -1.0 {
        Ok(-1.0)
    } else {
        Err(unrecognized())
    }
}

fn parse_feature(token: &str, line: usize) -> Result<(u32, f64), DatasetError> {
    let (idx, val) = token.split_once(':').ok_or_else(|| DatasetError::MalformedLine {
        line,
        reason: format!("missing ':' in {token:?}"),
    })?;
    let idx: i64 = idx.parse().map_err(|_| DatasetError::MalformedLine {
        line,
        reason: format!("non-numeric index in {token:?}"),
    })?;
    if idx < 1 {
        return Err(DatasetError::NonPositiveIndex {
            line,
            token: token.to_string(),
        });
    }
    let idx = u32::try_from(idx - 1).map_err(|_| DatasetError::MalformedLine {
        line,
        reason: format!("index too large in {token:?}"),
    })?;
    let value: f64 = val.parse().map_err(|_| DatasetError::MalformedLine {
        line,
        reason: format!("non-numeric value in {token:?}"),
    })?;
    if !value.is_finite() {
        return Err(DatasetError::NonFiniteValue {
            line,
            token: token.to_string(),
        });
    }
    Ok((idx, value))
}

/// Parses LIBSVM text. `dim` overrides the inferred dimension (max index);
/// indices beyond an explicit `dim` are an error. Blank lines are skipped.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset, DatasetError> {
    let mut examples = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        labels.push(parse_label(label, lineno)?);
        let pairs = tokens
            .map(|t| parse_feature(t, lineno))
            .collect::<Result<Vec<_>, _>>()?;
        let ex =
            SparseExample::from_pairs(pairs).map_err(|reason| DatasetError::MalformedLine { line: lineno, reason })?;
        if let Some(&k) = ex.indices.last() {
            let one_based = k as usize + 1;
            if let Some(d) = dim {
                if one_based > d {
                    return Err(DatasetError::IndexOutOfRange {
                        line: lineno,
                        index: one_based,
                        dim: d,
                    });
                }
            }
            max_index = max_index.max(one_based);
        }
        examples.push(ex);
    }
    Ok(Dataset {
        dim: dim.unwrap_or(max_index),
        examples,
        labels,
        bias_added: false,
    })
}

pub fn parse_libsvm_str(text: &str, dim: Option<usize>) -> Result<Dataset, DatasetError> {
    parse_libsvm(text.as_bytes(), dim)
}

/// Distinct zero-based example positions drawn uniformly without replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSample {
    indices: Vec<usize>,
}

impl IndexSample {
    /// All positions `0..n`, in order.
    pub fn full(n: usize) -> Self {
        IndexSample {
            indices: (0..n).collect(),
        }
    }

    /// Wraps explicit positions; duplicates or positions `>= n` are rejected.
    pub fn from_indices(indices: Vec<usize>, n: usize) -> Result<Self, DatasetError> {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() || sorted.last().is_some_and(|&i| i >= n) {
            return Err(DatasetError::SizeOutOfRange { size: indices.len(), n });
        }
        Ok(IndexSample { indices })
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }
}

impl Deref for IndexSample {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.indices
    }
}

/// Uniform `size`-subset of `0..n` by a partial Fisher-Yates shuffle over a
/// virtual identity pool, so the cost is `O(size)` regardless of `n`.
pub fn sample_indices(stream: &mut RandomStream, n: usize, size: usize) -> Result<IndexSample, DatasetError> {
    if size > n {
        return Err(DatasetError::SizeOutOfRange { size, n });
    }
    let mut displaced = std::collections::HashMap::with_capacity(size);
    let mut indices = Vec::with_capacity(size);
    for i in 0..size {
        let j = stream.uniform_index(i, n);
        let at_j = *displaced.get(&j).unwrap_or(&j);
        let at_i = *displaced.get(&i).unwrap_or(&i);
        displaced.insert(j, at_i);
        indices.push(at_j);
    }
    Ok(IndexSample { indices })
}

/// Draws a reproducible synthetic logistic-regression problem.
///
/// Features are dense Gaussians whose column scales decay geometrically from
/// `max_scale` (first column) to `min_scale` (last column). Labels are drawn
/// from the logistic model itself, `P(y = +1) = sigmoid(<a, w_true>)`, with a
/// standard normal ground truth `w_true`.
pub fn synthetic_logistic(stream: &mut RandomStream, n: usize, dim: usize, max_scale: f64, min_scale: f64) -> Dataset {
    let truth: Vec<f64> = (0..dim).map(|_| stream.standard_normal()).collect();
    let ratio = min_scale / max_scale;
    let scales: Vec<f64> = (0..dim)
        .map(|j| {
            if dim > 1 {
                max_scale * ratio.powf(j as f64 / (dim - 1) as f64)
            } else {
                max_scale
            }
        })
        .collect();
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let pairs: Vec<(u32, f64)> = (0..dim)
            .map(|j| (j as u32, scales[j] * stream.standard_normal()))
            .collect();
        let ex = SparseExample::from_pairs(pairs).expect("finite gaussian features");
        let margin = ex.dot(&truth);
        let y = if stream.uniform() < 1.0 / (1.0 + (-margin).exp()) {
            1.0
        } else {
            -1.0
        };
        examples.push(ex);
        labels.push(y);
    }
    Dataset::new(dim, examples, labels).expect("well-formed synthetic data")
}
