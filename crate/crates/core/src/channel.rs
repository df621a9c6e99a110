//! Row-stochastic channels, binarizations, and the decomposition of a binary
//! channel into a fair coin and a Z-shaped channel.

use serde::{Deserialize, Serialize};

use crate::dist::{sum_tolerance, Alphabet, JointDistribution};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Transition table `rows[input][output]`; each row is a probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel<T> {
    input: Alphabet,
    output: Alphabet,
    rows: Vec<Vec<T>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    input: Vec<String>,
    output: Vec<String>,
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct BinarizationJson {
    input: Vec<String>,
    p0: Vec<f64>,
}

fn check_probability_row<T: Real>(row: usize, values: &[T]) -> Result<()> {
    for &v in values {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::NotStochastic {
                row,
                reason: format!("entry {v} outside [0,1]"),
            });
        }
    }
    let sum: T = values.iter().copied().sum();
    if (sum - T::one()).abs() > sum_tolerance::<T>() * T::lit(values.len().max(1) as f64) {
        return Err(Error::NotStochastic {
            row,
            reason: format!("sums to {sum}"),
        });
    }
    Ok(())
}

impl<T: Real> Channel<T> {
    pub fn new(input: Alphabet, output: Alphabet, rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.len() != input.len() {
            return Err(Error::ShapeMismatch {
                expected: input.len(),
                got: rows.len(),
            });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != output.len() {
                return Err(Error::ShapeMismatch {
                    expected: output.len(),
                    got: r.len(),
                });
            }
            check_probability_row(i, r)?;
        }
        Ok(Self { input, output, rows })
    }

    pub fn identity(alphabet: &Alphabet) -> Self {
        let n = alphabet.len();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        Self {
            input: alphabet.clone(),
            output: alphabet.clone(),
            rows,
        }
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn get(&self, input: usize, output: usize) -> T {
        self.rows[input][output]
    }

    /// Passes `axis` of `d` through the channel.
    pub fn apply(&self, d: &JointDistribution<T>, axis: &str) -> Result<JointDistribution<T>> {
        if d.alphabet(axis)? != &self.input {
            return Err(Error::AlphabetMismatch(format!(
                "channel input does not match the alphabet of axis `{axis}`"
            )));
        }
        d.push_through(axis, &self.output, &self.rows)
    }

    /// Image of a probability vector over the input alphabet.
    pub fn apply_vec(&self, p: &[T]) -> Result<Vec<T>> {
        if p.len() != self.input.len() {
            return Err(Error::AlphabetMismatch(format!(
                "vector of length {} for an input alphabet of size {}",
                p.len(),
                self.input.len()
            )));
        }
        let mut out = vec![T::zero(); self.output.len()];
        for (row, &w) in self.rows.iter().zip(p) {
            for (o, &t) in out.iter_mut().zip(row) {
                *o = *o + w * t;
            }
        }
        Ok(out)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Channel<T>) -> Result<Channel<T>> {
        if self.output != next.input {
            return Err(Error::AlphabetMismatch(
                "output of the first channel is not the input of the second".into(),
            ));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| next.apply_vec(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Channel {
            input: self.input.clone(),
            output: next.output.clone(),
            rows,
        })
    }

    /// Row-wise lift to a larger output alphabet: `self` output symbol `j`
    /// becomes symbol `j` of `output` and the extra symbols get zero mass.
    pub fn embed_outputs(&self, output: Alphabet) -> Result<Channel<T>> {
        if output.len() < self.output.len() {
            return Err(Error::InvalidArgument("embedding target is smaller".into()));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut v = r.clone();
                v.resize(output.len(), T::zero());
                v
            })
            .collect();
        Ok(Channel {
            input: self.input.clone(),
            output,
            rows,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ChannelJson {
            input: self.input.symbols().to_vec(),
            output: self.output.symbols().to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| v.as_f64()).collect())
                .collect(),
        })
        .expect("channel serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: ChannelJson = serde_json::from_str(text)?;
        Self::new(
            Alphabet::new(raw.input)?,
            Alphabet::new(raw.output)?,
            raw.rows
                .into_iter()
                .map(|r| r.into_iter().map(T::lit).collect())
                .collect(),
        )
    }
}

/// Binary-output channel stored as the per-input probability of output `"0"`.
#[derive(Clone, Debug, PartialEq)]
pub struct Binarization<T> {
    input: Alphabet,
    p0: Vec<T>,
}

impl<T: Real> Binarization<T> {
    pub fn new(input: Alphabet, p0: Vec<T>) -> Result<Self> {
        if p0.len() != input.len() {
            return Err(Error::ShapeMismatch {
                expected: input.len(),
                got: p0.len(),
            });
        }
        for (i, &p) in p0.iter().enumerate() {
            if !(p >= T::zero() && p <= T::one()) {
                return Err(Error::NotStochastic {
                    row: i,
                    reason: format!("p0 = {p} outside [0,1]"),
                });
            }
        }
        Ok(Self { input, p0 })
    }

    pub fn constant(input: &Alphabet, p: T) -> Result<Self> {
        Self::new(input.clone(), vec![p; input.len()])
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn p0(&self) -> &[T] {
        &self.p0
    }

    pub fn to_channel(&self) -> Channel<T> {
        Channel {
            input: self.input.clone(),
            output: Alphabet::binary(),
            rows: self.p0.iter().map(|&p| vec![p, T::one() - p]).collect(),
        }
    }

    /// Replaces `axis` of `d` by its binarized value.
    pub fn apply(&self, d: &JointDistribution<T>, axis: &str) -> Result<JointDistribution<T>> {
        self.to_channel().apply(d, axis)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(BinarizationJson {
            input: self.input.symbols().to_vec(),
            p0: self.p0.iter().map(|v| v.as_f64()).collect(),
        })
        .expect("binarization serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: BinarizationJson = serde_json::from_str(text)?;
        Self::new(
            Alphabet::new(raw.input)?,
            raw.p0.into_iter().map(T::lit).collect(),
        )
    }
}

/// Binarizes `axis` of `d`.
pub fn binarize<T: Real>(
    d: &JointDistribution<T>,
    axis: &str,
    b: &Binarization<T>,
) -> Result<JointDistribution<T>> {
    b.apply(d, axis)
}

/// Tensor product of per-component binarizations: the probability of output
/// `"0"` on a tuple is the product of the component probabilities.
pub fn product_binarization<T: Real>(components: &[Binarization<T>]) -> Result<Binarization<T>> {
    let (first, rest) = components
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("need at least one component".into()))?;
    if rest.is_empty() {
        return Ok(first.clone());
    }
    let alphas: Vec<&Alphabet> = components.iter().map(|c| &c.input).collect();
    let input = Alphabet::product(&alphas);
    let mut p0 = vec![T::one()];
    for c in components {
        p0 = p0
            .iter()
            .flat_map(|&a| c.p0.iter().map(move |&b| a * b))
            .collect();
    }
    Binarization::new(input, p0)
}

/// A binary channel written as a fair coin used with probability
/// `coin_probability` and a Z-shaped channel otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct ZShapeDecomposition<T> {
    pub coin_probability: T,
    pub z_channel: Channel<T>,
}

impl<T: Real> ZShapeDecomposition<T> {
    /// `coin * uniform + (1 - coin) * z_channel`, entrywise.
    pub fn recombine(&self) -> Vec<Vec<T>> {
        let half = T::lit(0.5);
        self.z_channel
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&v| self.coin_probability * half + (T::one() - self.coin_probability) * v)
                    .collect()
            })
            .collect()
    }

    pub fn is_z_shaped(&self) -> bool {
        self.z_channel.rows.iter().flatten().any(|&v| v == T::zero())
    }
}

/// Splits a binary-input binary-output channel into a fair coin (probability
/// `2m`, `m` the smallest entry) and the Z-shaped residual `(t - m)/(1 - 2m)`.
pub fn zshape_decompose<T: Real>(c: &Channel<T>) -> Result<ZShapeDecomposition<T>> {
    if c.input.len() != 2 || c.output.len() != 2 {
        return Err(Error::InvalidArgument("Z-shape decomposition needs a 2x2 channel".into()));
    }
    let m = c.rows.iter().flatten().copied().fold(T::infinity(), T::min);
    let two = T::lit(2.0);
    let rest = T::one() - two * m;
    let rows = if rest > T::zero() {
        c.rows
            .iter()
            .map(|r| {
                let mut out: Vec<T> = r.iter().map(|&v| ((v - m) / rest).max(T::zero()).min(T::one())).collect();
                // the minimal entry maps to an exact zero; its row partner is the complement
                if let Some(k) = r.iter().position(|&v| v == m) {
                    out[k] = T::zero();
                    out[1 - k] = T::one();
                }
                out
            })
            .collect()
    } else {
        // fair coin: the residual is never used, any Z-shaped channel will do
        vec![vec![T::one(), T::zero()], vec![T::zero(), T::one()]]
    };
    Ok(ZShapeDecomposition {
        coin_probability: (two * m).min(T::one()),
        z_channel: Channel {
            input: c.input.clone(),
            output: c.output.clone(),
            rows,
        },
    })
}
