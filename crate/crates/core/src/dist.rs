//! Finite alphabets and dense joint distributions over named axes.
//!
//! Weights are kept unnormalized together with an explicit normalizer so that
//! integer-weighted tables (the 1..4 weights of the 3x3 candidate, for
//! instance) stay exact in memory. Probabilities are derived on demand.

use std::collections::HashMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{Real, SUM_TOL};

/// Default upper bound on the number of cells of an n-fold product table.
pub const DEFAULT_CELL_CAP: u128 = 10_000_000;

/// Environment variable overriding [`DEFAULT_CELL_CAP`].
pub const CELL_CAP_ENV: &str = "BOUNDSEC_CELL_CAP";

/// Cell cap honoring the `BOUNDSEC_CELL_CAP` override.
pub fn cell_cap() -> u128 {
    std::env::var(CELL_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_CELL_CAP)
}

/// Renders a tuple symbol, e.g. `["1", "3"]` becomes `(1,3)`.
pub fn tuple_label<S: AsRef<str>>(parts: &[S]) -> String {
    let inner: Vec<&str> = parts.iter().map(|p| p.as_ref()).collect();
    format!("({})", inner.join(","))
}

/// Ordered list of distinct symbol labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Self { symbols, index })
    }

    /// The binary output alphabet `{"0", "1"}`.
    pub fn binary() -> Self {
        Self::new(["0", "1"]).expect("static alphabet")
    }

    /// Symbols `"lo"`, ..., `"hi"` as decimal strings.
    pub fn numeric(lo: i64, hi: i64) -> Self {
        Self::new((lo..=hi).map(|i| i.to_string())).expect("distinct integers")
    }

    /// Alphabet of `n`-tuples over `self`, first component most significant.
    pub fn power(&self, n: usize) -> Self {
        assert!(n >= 1, "tuple length must be positive");
        if n == 1 {
            return self.clone();
        }
        let parts: Vec<&Alphabet> = std::iter::repeat_n(self, n).collect();
        Self::product(&parts)
    }

    /// Cartesian product alphabet with tuple labels, row-major order.
    pub fn product(parts: &[&Alphabet]) -> Self {
        let total: usize = parts.iter().map(|a| a.len()).product();
        let mut labels = Vec::with_capacity(total);
        let mut digits = vec![0usize; parts.len()];
        for _ in 0..total {
            let comps: Vec<&str> = digits
                .iter()
                .zip(parts)
                .map(|(&d, a)| a.symbol(d))
                .collect();
            labels.push(tuple_label(&comps));
            for k in (0..parts.len()).rev() {
                digits[k] += 1;
                if digits[k] < parts[k].len() {
                    break;
                }
                digits[k] = 0;
            }
        }
        Self::new(labels).expect("tuples of distinct symbols are distinct")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }
}

/// A named axis of a joint distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axis {
    pub name: String,
    pub alphabet: Alphabet,
}

impl Axis {
    pub fn new(name: impl Into<String>, alphabet: Alphabet) -> Self {
        Self {
            name: name.into(),
            alphabet,
        }
    }
}

/// Dense table of nonnegative weights over the product of the axis alphabets.
///
/// Cells are laid out row-major: the last axis varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution<T> {
    axes: Vec<Axis>,
    weights: Vec<T>,
    normalizer: T,
}

/// Distribution of the remaining axes given `axis = symbol`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSlice<T> {
    pub axis: String,
    pub symbol: String,
    /// Probability of the conditioning event under the parent distribution.
    pub probability: T,
    /// Conditional distribution with normalizer 1.
    pub distribution: JointDistribution<T>,
}

/// Relative normalization tolerance: `SUM_TOL`, widened for low-precision scalars.
pub(crate) fn sum_tolerance<T: Real>() -> T {
    T::lit(SUM_TOL).max(T::epsilon() * T::lit(64.0))
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// Calls `f(flat_index, multi_index)` for every cell of `shape`, row-major.
pub(crate) fn for_each_index(shape: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for flat in 0..total {
        f(flat, &idx);
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

impl<T: Real> JointDistribution<T> {
    /// Builds and validates a distribution.
    pub fn new(axes: Vec<Axis>, weights: Vec<T>, normalizer: T) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("distribution needs at least one axis".into()));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::DuplicateAxis(a.name.clone()));
            }
        }
        let expected: usize = axes.iter().map(|a| a.alphabet.len()).product();
        if weights.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: weights.len(),
            });
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.alphabet.len()).collect();
        for (flat, &w) in weights.iter().enumerate() {
            if !(w >= T::zero()) || !w.is_finite() {
                let mut cell = Vec::new();
                let mut rest = flat;
                for (k, s) in strides_of(&shape).iter().enumerate() {
                    cell.push(axes[k].alphabet.symbol(rest / s).to_string());
                    rest %= s;
                }
                return Err(Error::NegativeWeight {
                    cell: tuple_label(&cell),
                    weight: w.as_f64(),
                });
            }
        }
        let sum: T = weights.iter().copied().sum();
        if !(normalizer > T::zero())
            || (sum - normalizer).abs() > sum_tolerance::<T>() * normalizer.abs().max(T::one())
        {
            return Err(Error::NormalizerMismatch {
                sum: sum.as_f64(),
                normalizer: normalizer.as_f64(),
            });
        }
        Ok(Self {
            axes,
            weights,
            normalizer,
        })
    }

    /// Builds a distribution whose normalizer is the sum of `weights`.
    pub fn from_weights(axes: Vec<Axis>, weights: Vec<T>) -> Result<Self> {
        let sum: T = weights.iter().copied().sum();
        Self::new(axes, weights, sum)
    }

    /// Builds a distribution from a cell-wise weight function.
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(|a| a.alphabet.len()).collect();
        let mut weights = vec![T::zero(); shape.iter().product()];
        for_each_index(&shape, |flat, idx| weights[flat] = f(idx));
        Self::from_weights(axes, weights)
    }

    /// Outer product of two distributions over disjoint axis sets.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        let mut weights = Vec::with_capacity(self.weights.len() * other.weights.len());
        for &a in &self.weights {
            for &b in &other.weights {
                weights.push(a * b);
            }
        }
        Self::new(axes, weights, self.normalizer * other.normalizer)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn alphabet(&self, name: &str) -> Result<&Alphabet> {
        Ok(&self.axes[self.axis_index(name)?].alphabet)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.alphabet.len()).collect()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn normalizer(&self) -> T {
        self.normalizer
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Probabilities of all cells in layout order.
    pub fn probabilities(&self) -> Vec<T> {
        self.weights.iter().map(|&w| w / self.normalizer).collect()
    }

    pub(crate) fn flat_index(&self, idx: &[usize]) -> usize {
        let shape = self.shape();
        let strides = strides_of(&shape);
        idx.iter().zip(&strides).map(|(i, s)| i * s).sum()
    }

    fn indices_of(&self, symbols: &[&str]) -> Result<Vec<usize>> {
        if symbols.len() != self.axes.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} symbols, got {}",
                self.axes.len(),
                symbols.len()
            )));
        }
        symbols
            .iter()
            .zip(&self.axes)
            .map(|(s, a)| {
                a.alphabet.index_of(s).ok_or_else(|| Error::UnknownSymbol {
                    axis: a.name.clone(),
                    symbol: s.to_string(),
                })
            })
            .collect()
    }

    /// Weight of the cell named by one symbol per axis.
    pub fn weight_of(&self, symbols: &[&str]) -> Result<T> {
        let idx = self.indices_of(symbols)?;
        Ok(self.weights[self.flat_index(&idx)])
    }

    /// Probability of the cell named by one symbol per axis.
    pub fn prob_of(&self, symbols: &[&str]) -> Result<T> {
        Ok(self.weight_of(symbols)? / self.normalizer)
    }

    /// Same weights rescaled to normalizer 1.
    pub fn normalized(&self) -> Self {
        Self {
            axes: self.axes.clone(),
            weights: self.probabilities(),
            normalizer: T::one(),
        }
    }

    pub fn rename_axis(&self, from: &str, to: &str) -> Result<Self> {
        let k = self.axis_index(from)?;
        if from != to && self.axes.iter().any(|a| a.name == to) {
            return Err(Error::DuplicateAxis(to.to_string()));
        }
        let mut out = self.clone();
        out.axes[k].name = to.to_string();
        Ok(out)
    }

    /// Sums weights over every axis not in `keep`; axes appear in `keep` order.
    pub fn marginal(&self, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("marginal needs at least one axis".into()));
        }
        let kept: Vec<usize> = keep
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<_>>()?;
        for (i, k) in kept.iter().enumerate() {
            if kept[..i].contains(k) {
                return Err(Error::DuplicateAxis(keep[i].to_string()));
            }
        }
        let axes: Vec<Axis> = kept.iter().map(|&k| self.axes[k].clone()).collect();
        let out_shape: Vec<usize> = axes.iter().map(|a| a.alphabet.len()).collect();
        let out_strides = strides_of(&out_shape);
        let mut weights = vec![T::zero(); out_shape.iter().product()];
        for_each_index(&self.shape(), |flat, idx| {
            let target: usize = kept
                .iter()
                .zip(&out_strides)
                .map(|(&k, s)| idx[k] * s)
                .sum();
            weights[target] = weights[target] + self.weights[flat];
        });
        Ok(Self {
            axes,
            weights,
            normalizer: self.normalizer,
        })
    }

    /// Conditional distribution of the remaining axes given `axis = symbol`.
    pub fn condition(&self, axis: &str, symbol: &str) -> Result<ConditionalSlice<T>> {
        let k = self.axis_index(axis)?;
        let s = self.axes[k]
            .alphabet
            .index_of(symbol)
            .ok_or_else(|| Error::UnknownSymbol {
                axis: axis.to_string(),
                symbol: symbol.to_string(),
            })?;
        if self.axes.len() == 1 {
            return Err(Error::InvalidArgument(
                "cannot condition a single-axis distribution".into(),
            ));
        }
        let axes: Vec<Axis> = self
            .axes
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, a)| a.clone())
            .collect();
        let mut weights = Vec::new();
        for_each_index(&self.shape(), |flat, idx| {
            if idx[k] == s {
                weights.push(self.weights[flat]);
            }
        });
        let mass: T = weights.iter().copied().sum();
        if !(mass > T::zero()) {
            return Err(Error::ZeroProbabilityEvent {
                axis: axis.to_string(),
                symbol: symbol.to_string(),
            });
        }
        let weights: Vec<T> = weights.into_iter().map(|w| w / mass).collect();
        let sum: T = weights.iter().copied().sum();
        Ok(ConditionalSlice {
            axis: axis.to_string(),
            symbol: symbol.to_string(),
            probability: mass / self.normalizer,
            distribution: Self {
                axes,
                weights,
                normalizer: sum,
            },
        })
    }

    /// Distribution of `n` independent copies, with the configured cell cap.
    pub fn n_fold(&self, n: usize) -> Result<Self> {
        self.n_fold_with_cap(n, cell_cap())
    }

    /// Distribution of `n` independent copies. Each axis keeps its name and
    /// takes the tuple alphabet; cell weights multiply.
    pub fn n_fold_with_cap(&self, n: usize, cap: u128) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        let cells = (self.weights.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if cells > cap {
            return Err(Error::CellCapExceeded { cells, cap });
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let base_shape = self.shape();
        let mut shape = base_shape.clone();
        let mut weights = self.weights.clone();
        for _ in 1..n {
            let new_shape: Vec<usize> = shape.iter().zip(&base_shape).map(|(a, b)| a * b).collect();
            let new_strides = strides_of(&new_shape);
            let mut next = vec![T::zero(); weights.len() * self.weights.len()];
            for_each_index(&shape, |fa, ia| {
                let wa = weights[fa];
                for_each_index(&base_shape, |fb, ib| {
                    let target: usize = (0..shape.len())
                        .map(|k| (ia[k] * base_shape[k] + ib[k]) * new_strides[k])
                        .sum();
                    next[target] = wa * self.weights[fb];
                });
            });
            shape = new_shape;
            weights = next;
        }
        let axes = self
            .axes
            .iter()
            .map(|a| Axis::new(a.name.clone(), a.alphabet.power(n)))
            .collect();
        Ok(Self {
            axes,
            weights,
            normalizer: self.normalizer.powi(n as i32),
        })
    }

    /// Replaces axes `first` and `second` by a single tuple-valued axis named
    /// `name`, placed where `first` was.
    pub fn merge_axes(&self, first: &str, second: &str, name: &str) -> Result<Self> {
        let a = self.axis_index(first)?;
        let b = self.axis_index(second)?;
        if a == b {
            return Err(Error::DuplicateAxis(first.to_string()));
        }
        let merged_alpha = Alphabet::product(&[&self.axes[a].alphabet, &self.axes[b].alphabet]);
        let nb = self.axes[b].alphabet.len();
        let order: Vec<usize> = (0..self.axes.len()).filter(|&k| k != b).collect();
        let mut axes: Vec<Axis> = order.iter().map(|&k| self.axes[k].clone()).collect();
        let pos = order.iter().position(|&k| k == a).expect("first axis kept");
        axes[pos] = Axis::new(name, merged_alpha);
        if axes[..pos].iter().chain(&axes[pos + 1..]).any(|x| x.name == name) {
            return Err(Error::DuplicateAxis(name.to_string()));
        }
        let out_shape: Vec<usize> = axes.iter().map(|x| x.alphabet.len()).collect();
        let out_strides = strides_of(&out_shape);
        let mut weights = vec![T::zero(); self.weights.len()];
        for_each_index(&self.shape(), |flat, idx| {
            let target: usize = order
                .iter()
                .enumerate()
                .map(|(j, &k)| {
                    let i = if k == a { idx[a] * nb + idx[b] } else { idx[k] };
                    i * out_strides[j]
                })
                .sum();
            weights[target] = self.weights[flat];
        });
        Ok(Self {
            axes,
            weights,
            normalizer: self.normalizer,
        })
    }

    /// Replaces an axis by a new alphabet through a row-stochastic matrix
    /// `rows[in][out]`. Total weight is preserved.
    pub(crate) fn push_through(&self, axis: &str, output: &Alphabet, rows: &[Vec<T>]) -> Result<Self> {
        let k = self.axis_index(axis)?;
        let mut axes = self.axes.clone();
        axes[k] = Axis::new(axis, output.clone());
        let out_shape: Vec<usize> = axes.iter().map(|a| a.alphabet.len()).collect();
        let out_strides = strides_of(&out_shape);
        let mut weights = vec![T::zero(); out_shape.iter().product()];
        for_each_index(&self.shape(), |flat, idx| {
            let w = self.weights[flat];
            if w == T::zero() {
                return;
            }
            let base: usize = idx
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(j, &i)| i * out_strides[j])
                .sum();
            for (o, &t) in rows[idx[k]].iter().enumerate() {
                if t != T::zero() {
                    let target = base + o * out_strides[k];
                    weights[target] = weights[target] + w * t;
                }
            }
        });
        Ok(Self {
            axes,
            weights,
            normalizer: self.normalizer,
        })
    }

    /// Serializes to the distribution JSON format; zero cells are omitted.
    pub fn to_json(&self) -> Value {
        let axes: Vec<Value> = self
            .axes
            .iter()
            .map(|a| json!({"name": a.name, "symbols": a.alphabet.symbols()}))
            .collect();
        let mut cells = Vec::new();
        for_each_index(&self.shape(), |flat, idx| {
            let w = self.weights[flat];
            if w != T::zero() {
                let mut row: Vec<Value> = idx
                    .iter()
                    .zip(&self.axes)
                    .map(|(&i, a)| Value::String(a.alphabet.symbol(i).to_string()))
                    .collect();
                row.push(json!(w.as_f64()));
                cells.push(Value::Array(row));
            }
        });
        json!({"axes": axes, "weights": cells, "normalizer": self.normalizer.as_f64()})
    }

    /// Parses and validates the distribution JSON format.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_json(&value)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let bad = |msg: String| Error::Parse(msg);
        let axes_v = value
            .get("axes")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `axes` array".into()))?;
        let mut axes = Vec::new();
        for (i, a) in axes_v.iter().enumerate() {
            let name = a
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| bad(format!("axes[{i}]: missing `name`")))?;
            let symbols = a
                .get("symbols")
                .and_then(Value::as_array)
                .ok_or_else(|| bad(format!("axes[{i}]: missing `symbols`")))?
                .iter()
                .map(|s| match s {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(bad(format!("axes[{i}]: symbols must be strings"))),
                })
                .collect::<Result<Vec<_>>>()?;
            axes.push(Axis::new(name, Alphabet::new(symbols)?));
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.alphabet.len()).collect();
        let strides = strides_of(&shape);
        let mut weights = vec![T::zero(); shape.iter().product()];
        let mut seen = vec![false; weights.len()];
        let cells = value
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `weights` array".into()))?;
        for (i, cell) in cells.iter().enumerate() {
            let row = cell
                .as_array()
                .filter(|r| r.len() == axes.len() + 1)
                .ok_or_else(|| bad(format!("weights[{i}]: expected {} entries", axes.len() + 1)))?;
            let mut flat = 0usize;
            for (k, axis) in axes.iter().enumerate() {
                let sym = match &row[k] {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    _ => return Err(bad(format!("weights[{i}]: symbol {k} must be a string"))),
                };
                let s = axis.alphabet.index_of(&sym).ok_or_else(|| Error::UnknownSymbol {
                    axis: axis.name.clone(),
                    symbol: sym.clone(),
                })?;
                flat += s * strides[k];
            }
            let w = row[axes.len()]
                .as_f64()
                .ok_or_else(|| bad(format!("weights[{i}]: weight must be a number")))?;
            if w < 0.0 {
                return Err(Error::NegativeWeight {
                    cell: format!("weights[{i}]"),
                    weight: w,
                });
            }
            if seen[flat] {
                return Err(bad(format!("weights[{i}]: duplicate cell")));
            }
            seen[flat] = true;
            weights[flat] = T::lit(w);
        }
        let normalizer = match value.get("normalizer") {
            Some(v) => T::lit(
                v.as_f64()
                    .ok_or_else(|| bad("`normalizer` must be a number".into()))?,
            ),
            None => weights.iter().copied().sum(),
        };
        Self::new(axes, weights, normalizer)
    }
}
