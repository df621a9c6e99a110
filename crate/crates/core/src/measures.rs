//! Shannon measures in bits, distances between distributions, and the
//! division-free conditional independence residual.

use crate::channel::Channel;
use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::scalar::{xlog2x, Real};

/// Joint entropy of all axes, `-sum p log2 p`.
pub fn entropy<T: Real>(d: &JointDistribution<T>) -> T {
    entropy_of_weights(d.weights(), d.normalizer())
}

/// Entropy of a probability vector (or of weights with the given normalizer).
pub fn entropy_of_weights<T: Real>(weights: &[T], normalizer: T) -> T {
    -weights.iter().map(|&w| xlog2x(w / normalizer)).sum::<T>()
}

/// Joint entropy of a subset of axes.
pub fn entropy_of<T: Real>(d: &JointDistribution<T>, axes: &[&str]) -> Result<T> {
    Ok(entropy(&d.marginal(axes)?))
}

/// `H(A) + H(B) - H(AB)`.
pub fn mutual_information<T: Real>(d: &JointDistribution<T>, a: &str, b: &str) -> Result<T> {
    let ab = d.marginal(&[a, b])?;
    Ok(entropy(&ab.marginal(&[a])?) + entropy(&ab.marginal(&[b])?) - entropy(&ab))
}

/// `I(A:B|C)` accumulated per conditioning symbol as `sum_c P(c) I(A:B|C=c)`.
/// Symbols with zero probability contribute nothing.
pub fn conditional_mutual_information<T: Real>(
    d: &JointDistribution<T>,
    a: &str,
    b: &str,
    c: &str,
) -> Result<T> {
    let m = d.marginal(&[a, b, c])?;
    let shape = m.shape();
    Ok(cmi_dense(m.weights(), m.normalizer(), shape[0], shape[1], shape[2]))
}

/// CMI of a dense `[a][b][c]` weight table.
pub(crate) fn cmi_dense<T: Real>(w: &[T], normalizer: T, na: usize, nb: usize, nc: usize) -> T {
    let at = |i: usize, j: usize, k: usize| w[(i * nb + j) * nc + k];
    let mut total = T::zero();
    let mut pa = vec![T::zero(); na];
    let mut pb = vec![T::zero(); nb];
    for k in 0..nc {
        pa.iter_mut().for_each(|v| *v = T::zero());
        pb.iter_mut().for_each(|v| *v = T::zero());
        let mut pc = T::zero();
        for i in 0..na {
            for j in 0..nb {
                let v = at(i, j, k);
                pa[i] = pa[i] + v;
                pb[j] = pb[j] + v;
                pc = pc + v;
            }
        }
        if !(pc > T::zero()) {
            continue;
        }
        let mut slice = T::zero();
        for i in 0..na {
            for j in 0..nb {
                let v = at(i, j, k);
                if v > T::zero() {
                    slice = slice + v * (v * pc / (pa[i] * pb[j])).log2();
                }
            }
        }
        total = total + slice;
    }
    total / normalizer
}

/// `H(AC) + H(BC) - H(ABC) - H(C)`; cross-check for
/// [`conditional_mutual_information`].
pub fn cmi_four_entropy<T: Real>(d: &JointDistribution<T>, a: &str, b: &str, c: &str) -> Result<T> {
    let m = d.marginal(&[a, b, c])?;
    Ok(entropy_of(&m, &[a, c])? + entropy_of(&m, &[b, c])? - entropy(&m) - entropy_of(&m, &[c])?)
}

/// `max |P(a,b,c) P(c) - P(a,c) P(b,c)|` over all cells, in probabilities.
///
/// Zero exactly when `A` and `B` are independent given `C`; no division is
/// involved, so zero-probability conditioning symbols are harmless.
pub fn independence_residual<T: Real>(d: &JointDistribution<T>, a: &str, b: &str, c: &str) -> Result<T> {
    let m = d.marginal(&[a, b, c])?.normalized();
    let s = m.shape();
    Ok(residual_dense(m.weights(), s[0], s[1], s[2]))
}

pub(crate) fn residual_dense<T: Real>(p: &[T], na: usize, nb: usize, nc: usize) -> T {
    let at = |i: usize, j: usize, k: usize| p[(i * nb + j) * nc + k];
    let mut worst = T::zero();
    for k in 0..nc {
        let pc: T = (0..na).flat_map(|i| (0..nb).map(move |j| (i, j))).map(|(i, j)| at(i, j, k)).sum();
        for i in 0..na {
            let pac: T = (0..nb).map(|j| at(i, j, k)).sum();
            for j in 0..nb {
                let pbc: T = (0..na).map(|ii| at(ii, j, k)).sum();
                worst = worst.max((at(i, j, k) * pc - pac * pbc).abs());
            }
        }
    }
    worst
}

/// [`independence_residual`] divided by the largest cell probability of the
/// `(A, B, C)` marginal. Used by falsification searches.
pub fn normalized_violation<T: Real>(d: &JointDistribution<T>, a: &str, b: &str, c: &str) -> Result<T> {
    let m = d.marginal(&[a, b, c])?.normalized();
    let s = m.shape();
    let peak = m.weights().iter().copied().fold(T::zero(), T::max);
    if !(peak > T::zero()) {
        return Ok(T::zero());
    }
    Ok(residual_dense(m.weights(), s[0], s[1], s[2]) / peak)
}

/// Half the l1 distance between two probability vectors.
pub fn trace_distance_vec<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(format!(
            "index sets of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<T>() / T::lit(2.0))
}

/// Trace distance between two distributions with identical axes.
pub fn trace_distance<T: Real>(p: &JointDistribution<T>, q: &JointDistribution<T>) -> Result<T> {
    if p.axes() != q.axes() {
        return Err(Error::AlphabetMismatch(
            "distributions are not indexed by the same axes".into(),
        ));
    }
    trace_distance_vec(&p.probabilities(), &q.probabilities())
}

/// `sum P log2(P/Q)`; `+inf` when `P` charges a point where `Q` vanishes.
pub fn kl_divergence_vec<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(format!(
            "index sets of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut total = T::zero();
    for (&a, &b) in p.iter().zip(q) {
        if a > T::zero() {
            if !(b > T::zero()) {
                return Ok(T::infinity());
            }
            total = total + a * (a / b).log2();
        }
    }
    Ok(total)
}

pub fn kl_divergence<T: Real>(p: &JointDistribution<T>, q: &JointDistribution<T>) -> Result<T> {
    if p.axes() != q.axes() {
        return Err(Error::AlphabetMismatch(
            "distributions are not indexed by the same axes".into(),
        ));
    }
    kl_divergence_vec(&p.probabilities(), &q.probabilities())
}

/// Replaces axis `u` by the constant variable `K` that takes the first symbol
/// of the same alphabet with probability one.
pub fn constant_replacement<T: Real>(d: &JointDistribution<T>, u: &str) -> Result<JointDistribution<T>> {
    let alpha = d.alphabet(u)?.clone();
    let rows: Vec<Vec<T>> = (0..alpha.len())
        .map(|_| {
            let mut r = vec![T::zero(); alpha.len()];
            r[0] = T::one();
            r
        })
        .collect();
    let to_first = Channel::new(alpha.clone(), alpha, rows)?;
    to_first.apply(d, u)
}

/// `I(X:Y | c(ZU)) - I(X:Y | c(ZK))` for a channel `c` acting on the merged
/// `(Z, U)` axis, where `K` is the constant stand-in for `U`.
pub fn cmi_gap<T: Real>(
    d: &JointDistribution<T>,
    c: &Channel<T>,
    x: &str,
    y: &str,
    z: &str,
    u: &str,
) -> Result<T> {
    const MERGED: &str = "__ZU";
    let zu = d.merge_axes(z, u, MERGED)?;
    if zu.alphabet(MERGED)? != c.input() {
        return Err(Error::AlphabetMismatch(
            "channel input must be the Z x U alphabet".into(),
        ));
    }
    let zk = constant_replacement(d, u)?.merge_axes(z, u, MERGED)?;
    let with_u = c.apply(&zu, MERGED)?;
    let with_k = c.apply(&zk, MERGED)?;
    Ok(conditional_mutual_information(&with_u, x, y, MERGED)?
        - conditional_mutual_information(&with_k, x, y, MERGED)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::grw;
    use crate::dist::{Alphabet, Axis};

    fn vector(ws: &[f64]) -> JointDistribution<f64> {
        JointDistribution::from_weights(
            vec![Axis::new("V", Alphabet::numeric(0, ws.len() as i64 - 1))],
            ws.to_vec(),
        )
        .unwrap()
    }

    fn xy(ws: &[f64], na: i64, nb: i64) -> JointDistribution<f64> {
        JointDistribution::from_weights(
            vec![
                Axis::new("A", Alphabet::numeric(0, na - 1)),
                Axis::new("B", Alphabet::numeric(0, nb - 1)),
            ],
            ws.to_vec(),
        )
        .unwrap()
    }

    /// Brute force over every `(x, y)` cell straight from the definition.
    fn brute_mi(p: &[[f64; 3]; 3]) -> f64 {
        let total: f64 = p.iter().flatten().sum();
        let mut mi = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let pij = p[i][j] / total;
                if pij == 0.0 {
                    continue;
                }
                let pi: f64 = p[i].iter().sum::<f64>() / total;
                let pj: f64 = (0..3).map(|k| p[k][j]).sum::<f64>() / total;
                mi += pij * (pij / (pi * pj)).log2();
            }
        }
        mi
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&vector(&[0.0, 1.0, 0.0])), 0.0);
        assert!((entropy(&vector(&[1.0; 4])) - 2.0).abs() < 1e-15);
        let h = entropy(&vector(&[0.9, 0.1]));
        assert!((h - 0.468_995_593_589_281_2).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_examples() {
        let indep = xy(&[0.06, 0.14, 0.24, 0.56], 2, 2);
        assert!(mutual_information(&indep, "A", "B").unwrap().abs() < 1e-15);
        let copy = xy(&[1.0, 0.0, 0.0, 1.0], 2, 2);
        assert!((mutual_information(&copy, "A", "B").unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn candidate_mutual_information_matches_brute_force() {
        // rows X, columns Y
        let p = [[2.0, 1.0, 4.0], [4.0, 2.0, 1.0], [1.0, 4.0, 2.0]];
        let expected = brute_mi(&p);
        let got = mutual_information(&grw::<f64>(), "X", "Y").unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn candidate_cmi_matches_brute_force() {
        // Only Z = 0 carries uncertainty: the diagonal, weight 2 each, X = Y.
        // I(X:Y|Z) = P(Z=0) * log2(3).
        let expected = 6.0 / 21.0 * 3f64.log2();
        let d = grw::<f64>();
        let got = conditional_mutual_information(&d, "X", "Y", "Z").unwrap();
        assert!((got - expected).abs() < 1e-14);
        let four = cmi_four_entropy(&d, "X", "Y", "Z").unwrap();
        assert!((got - four).abs() < 1e-9);
    }

    #[test]
    fn cmi_with_constant_condition_is_mi() {
        let d = grw::<f64>()
            .marginal(&["X", "Y"])
            .unwrap()
            .product(&vector(&[1.0]))
            .unwrap();
        let cmi = conditional_mutual_information(&d, "X", "Y", "V").unwrap();
        let mi = mutual_information(&d, "X", "Y").unwrap();
        assert!((cmi - mi).abs() < 1e-14);
    }

    #[test]
    fn trace_distance_examples() {
        let p = [0.2f64, 0.3, 0.5];
        assert_eq!(trace_distance_vec(&p, &p).unwrap(), 0.0);
        let u = [0.9f64, 0.1, 0.0];
        let k = [1.0, 0.0, 0.0];
        assert!((trace_distance_vec(&u, &k).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(trace_distance_vec(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(trace_distance_vec(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn coin_counterexample_distances() {
        // Z fair coin, A = Z, B an independent fair coin.
        let za = xy(&[0.5, 0.0, 0.0, 0.5], 2, 2);
        let zb = xy(&[0.25; 4], 2, 2);
        let a = za.marginal(&["B"]).unwrap();
        let b = zb.marginal(&["B"]).unwrap();
        assert_eq!(trace_distance(&a, &b).unwrap(), 0.0);
        assert_eq!(trace_distance(&za, &zb).unwrap(), 0.5);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence_vec(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(kl_divergence_vec(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(
            kl_divergence_vec(&[0.5, 0.5], &[1.0, 0.0]).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn residual_zero_iff_independent() {
        let indep = grw::<f64>()
            .marginal(&["X"])
            .unwrap()
            .product(&grw::<f64>().marginal(&["Y"]).unwrap())
            .unwrap()
            .product(&vector(&[1.0, 2.0]))
            .unwrap();
        assert!(independence_residual(&indep, "X", "Y", "V").unwrap() < 1e-16);
        assert!(independence_residual(&grw::<f64>(), "X", "Y", "Z").unwrap() > 1e-3);
    }

    #[test]
    fn cmi_gap_zero_when_u_constant() {
        let d = grw::<f64>().product(&vector(&[1.0, 0.0])).unwrap().rename_axis("V", "U").unwrap();
        let zu = Alphabet::product(&[d.alphabet("Z").unwrap(), d.alphabet("U").unwrap()]);
        let n = zu.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..3).map(|j| ((i * 7 + j * 3) % 5 + 1) as f64).collect())
            .map(|r: Vec<f64>| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let c = Channel::new(zu, Alphabet::numeric(0, 2), rows).unwrap();
        assert!(cmi_gap(&d, &c, "X", "Y", "Z", "U").unwrap().abs() < 1e-15);
    }
}
