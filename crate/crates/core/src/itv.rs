//! Independence target values: the median-of-averages target for three
//! values, the explicit single-copy Eve channel it yields, recursive targets
//! for tuple alphabets, and weighted-average targets on 4-ary tables with
//! their line transformations.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::channel::{Binarization, Channel};
use crate::dist::Alphabet;
use crate::error::{Error, Result};
use crate::scalar::{median3, Real};

/// Median of `(2r+s)/3`, `(r+2t)/3` and `(2s+t)/3`.
pub fn tau<T: Real>(r: T, s: T, t: T) -> T {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    median3((two * r + s) / three, (r + two * t) / three, (two * s + t) / three)
}

/// Transition pair `(a, b)` in `[0,1]^2` with
/// `(2r + a s + 4 b t) / (2 + a + 4b) = tau(r, s, t)`.
///
/// The triple is rescaled to `[0,1]` and matched to one of the shapes
/// `(0,x,1)`, `(1,0,x)`, `(x,1,0)`, reflecting with `v -> 1 - v` for the
/// other three orders.
pub fn construct_ab<T: Real>(r: T, s: T, t: T) -> (T, T) {
    let v = [r, s, t];
    let (mut imin, mut imax) = (0, 0);
    for k in 1..3 {
        if v[k] < v[imin] {
            imin = k;
        }
        if v[k] > v[imax] {
            imax = k;
        }
    }
    let span = v[imax] - v[imin];
    if !(span > T::zero()) {
        return (T::zero(), T::zero());
    }
    let n: Vec<T> = v.iter().map(|&x| (x - v[imin]) / span).collect();
    let one = T::one();
    match (imin, imax) {
        (0, 2) => case_low_mid_high(n[1]),
        (2, 0) => case_low_mid_high(one - n[1]),
        (1, 0) => case_high_low_mid(n[2]),
        (0, 1) => case_high_low_mid(one - n[2]),
        (2, 1) => case_mid_high_low(n[0]),
        (1, 2) => case_mid_high_low(one - n[0]),
        _ => unreachable!("distinct argmin and argmax"),
    }
}

/// Shape `(0, x, 1)`.
fn case_low_mid_high<T: Real>(x: T) -> (T, T) {
    let half = T::lit(0.5);
    if x < half {
        let four = T::lit(4.0);
        (T::zero(), (T::one() + T::lit(2.0) * x) / (four - four * x))
    } else {
        (T::zero(), T::one())
    }
}

/// Shape `(1, 0, x)`.
fn case_high_low_mid<T: Real>(x: T) -> (T, T) {
    if x < T::lit(0.5) {
        (T::zero(), T::one())
    } else {
        (T::one(), T::zero())
    }
}

/// Shape `(x, 1, 0)`.
fn case_mid_high_low<T: Real>(x: T) -> (T, T) {
    if x < T::lit(0.5) {
        (T::one(), T::zero())
    } else {
        (T::one(), T::lit(3.0) * (T::lit(2.0) * x - T::one()) / T::lit(8.0))
    }
}

/// Left-hand side of the defining equation of [`construct_ab`].
pub fn ab_fraction<T: Real>(r: T, s: T, t: T, a: T, b: T) -> T {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    (two * r + a * s + four * b * t) / (two + a + four * b)
}

/// Eve channel on the 3x3 candidate that makes `X` and Bob's binarized bit
/// independent given Eve's output.
///
/// `Z = 0` stays `0`; `Z = 1..6` goes to `0` with probabilities
/// `c, e, a, f, b, d` and otherwise keeps its own symbol, where
/// `(a,b)`, `(d,c)`, `(e,f)` solve the target equation for the triple and
/// its two cyclic shifts.
pub fn construct_eve_channel_n1<T: Real>(bob: &Binarization<T>) -> Result<Channel<T>> {
    let p = bob.p0();
    if p.len() != 3 {
        return Err(Error::ShapeMismatch {
            expected: 3,
            got: p.len(),
        });
    }
    let (r, s, t) = (p[0], p[1], p[2]);
    let (a, b) = construct_ab(r, s, t);
    let (d, c) = construct_ab(s, t, r);
    let (e, f) = construct_ab(t, r, s);
    let to_zero = [T::one(), c, e, a, f, b, d];
    let z = Alphabet::numeric(0, 6);
    let rows = to_zero
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let mut row = vec![T::zero(); 7];
            row[0] = q;
            if i > 0 {
                row[i] = T::one() - q;
            }
            row
        })
        .collect();
    Channel::new(z.clone(), z, rows)
}

/// Target value per Eve output symbol.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetAssignment<T> {
    labels: Vec<String>,
    values: Vec<T>,
}

impl<T: Real> TargetAssignment<T> {
    pub fn new(labels: Vec<String>, values: Vec<T>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::ShapeMismatch {
                expected: labels.len(),
                got: values.len(),
            });
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<T> {
        self.labels.iter().position(|l| l == label).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.labels.iter().map(String::as_str).zip(self.values.iter().copied())
    }

    /// Same targets under new labels, `rename(old) -> new`.
    pub fn relabel(&self, rename: impl Fn(&str) -> String) -> Self {
        Self {
            labels: self.labels.iter().map(|l| rename(l)).collect(),
            values: self.values.clone(),
        }
    }
}

/// Bob's symbol (0-based) pinned by a nonzero Eve symbol of the 3x3 candidate.
fn pinned_bob(z: usize) -> usize {
    (z + 1) / 2 - 1
}

fn reduce_tau<T: Real>(table: &[T], n: usize, fixed: &mut [Option<usize>]) -> T {
    match fixed.iter().position(Option::is_none) {
        None => {
            let flat = fixed.iter().fold(0, |acc, y| acc * 3 + y.expect("all fixed"));
            table[flat]
        }
        Some(k) => {
            let mut vals = [T::zero(); 3];
            for (y, v) in vals.iter_mut().enumerate() {
                fixed[k] = Some(y);
                *v = reduce_tau(table, n, fixed);
            }
            fixed[k] = None;
            tau(vals[0], vals[1], vals[2])
        }
    }
}

/// Targets for `n` copies of the 3x3 candidate from Bob's table of
/// probabilities of the all-zero output, indexed row-major over `{1,2,3}^n`.
///
/// Every Eve tuple with at least one `0` gets a target: nonzero components
/// pin Bob's component, and the free components are reduced with [`tau`],
/// the first free index outermost.
pub fn tau_n_targets<T: Real>(n: usize, table: &[T]) -> Result<TargetAssignment<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let cells = 3usize.pow(n as u32);
    if table.len() != cells {
        return Err(Error::ShapeMismatch {
            expected: cells,
            got: table.len(),
        });
    }
    let z = Alphabet::numeric(0, 6).power(n);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for flat in 0..7usize.pow(n as u32) {
        let mut digits = vec![0usize; n];
        let mut rest = flat;
        for k in (0..n).rev() {
            digits[k] = rest % 7;
            rest /= 7;
        }
        if digits.iter().all(|&d| d != 0) {
            continue;
        }
        let mut fixed: Vec<Option<usize>> = digits
            .iter()
            .map(|&d| if d == 0 { None } else { Some(pinned_bob(d)) })
            .collect();
        labels.push(z.symbol(flat).to_string());
        values.push(reduce_tau(table, n, &mut fixed));
    }
    TargetAssignment::new(labels, values)
}

/// Two-copy targets from the 3x3 matrix `a[y1][y2]`.
pub fn tau2_targets<T: Real>(a: &[[T; 3]; 3]) -> TargetAssignment<T> {
    let flat: Vec<T> = a.iter().flatten().copied().collect();
    tau_n_targets(2, &flat).expect("3x3 table")
}

/// `|tau(tau(b c0), tau(b c1), tau(b c2)) - tau(b) tau(c)|`.
pub fn itv_product_property_check<T: Real>(b: [T; 3], c: [T; 3]) -> T {
    let inner: Vec<T> = c.iter().map(|&ci| tau(b[0] * ci, b[1] * ci, b[2] * ci)).collect();
    let lhs = tau(inner[0], inner[1], inner[2]);
    (lhs - tau(b[0], b[1], b[2]) * tau(c[0], c[1], c[2])).abs()
}

/// Weighted-average target `w1 r + w2 s + w3 t + w4 u` with unit weight sum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedItv<T> {
    weights: [T; 4],
}

impl<T: Real> WeightedItv<T> {
    pub fn new(weights: [T; 4]) -> Result<Self> {
        let sum: T = weights.iter().copied().sum();
        if !weights.iter().all(|w| w.is_finite()) || (sum - T::one()).abs() > T::lit(crate::SUM_TOL) {
            return Err(Error::InvalidArgument(format!("weights must sum to 1, got {sum}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform() -> Self {
        Self {
            weights: [T::lit(0.25); 4],
        }
    }

    pub fn weights(&self) -> &[T; 4] {
        &self.weights
    }

    pub fn eval(&self, v: &[T]) -> T {
        debug_assert_eq!(v.len(), 4);
        self.weights.iter().zip(v).map(|(&w, &x)| w * x).sum()
    }
}

/// Table over `{0,1,2,3}^n`, row-major with the first index most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Table4<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Table4<T> {
    pub fn new(n: usize, data: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        let cells = 4usize.pow(n as u32);
        if data.len() != cells {
            return Err(Error::ShapeMismatch {
                expected: cells,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * 4 + i)
    }

    /// Flat indices of the line varying `coord` with the others taken from `fixed`.
    fn line(&self, coord: usize, fixed: &[usize]) -> [usize; 4] {
        let mut idx = fixed.to_vec();
        let mut out = [0; 4];
        for (j, o) in out.iter_mut().enumerate() {
            idx[coord] = j;
            *o = self.flat(&idx);
        }
        out
    }

    /// Nested target: `upsilon` over the first index of the targets of the
    /// sub-tables, recursively.
    pub fn upsilon(&self, ups: &WeightedItv<T>) -> T {
        fn go<T: Real>(data: &[T], ups: &WeightedItv<T>) -> T {
            if data.len() == 4 {
                return ups.eval(data);
            }
            let q = data.len() / 4;
            let parts: Vec<T> = data.chunks(q).map(|c| go(c, ups)).collect();
            ups.eval(&parts)
        }
        go(&self.data, ups)
    }

    /// Two-index table with its indices swapped.
    pub fn transpose2(&self) -> Result<Self> {
        if self.n != 2 {
            return Err(Error::InvalidArgument("transpose needs a two-index table".into()));
        }
        let data = (0..16).map(|k| self.data[(k % 4) * 4 + k / 4]).collect();
        Ok(Self { n: 2, data })
    }
}

/// Replaces each entry `x` of one line by `u + d (x - u)`, `u` the line's target.
pub fn row_transform<T: Real>(
    table: &Table4<T>,
    coord: usize,
    fixed: &[usize],
    d: T,
    ups: &WeightedItv<T>,
) -> Result<Table4<T>> {
    if coord >= table.n || fixed.len() != table.n || fixed.iter().any(|&i| i >= 4) {
        return Err(Error::InvalidArgument("line selector out of range".into()));
    }
    let line = table.line(coord, fixed);
    let values: Vec<T> = line.iter().map(|&k| table.data[k]).collect();
    let u = ups.eval(&values);
    let mut data = table.data.clone();
    for (&k, &x) in line.iter().zip(&values) {
        data[k] = u + d * (x - u);
    }
    Table4::new(table.n, data)
}

/// Difference between the rows-first and columns-first nested targets of a 4x4 table.
pub fn rowcol_equivalence_check<T: Real>(ups: &WeightedItv<T>, table: &Table4<T>) -> Result<T> {
    Ok((table.upsilon(ups) - table.transpose2()?.upsilon(ups)).abs())
}

/// Linear dependence of the infinitesimal line transformations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub n: usize,
    /// Number of lines, `n 4^(n-1)`.
    pub lines: usize,
    /// Direction vectors, three per line.
    pub generators: usize,
    pub ambient_dim: usize,
    pub rank: usize,
    /// Lines whose directions already lie in the span of all other lines;
    /// computed for `n <= 3`.
    pub redundant_lines: Option<usize>,
}

/// Singular-value rank with threshold `1e-9` relative to the largest value.
pub fn numerical_rank(rows: &[Vec<f64>], cols: usize) -> usize {
    if rows.is_empty() || cols == 0 {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-9 * max).count()
}

/// Builds, for each of the `n 4^(n-1)` lines of a `4^n` table, a basis of the
/// directions that keep that line's target fixed (`e_j - (w_j / w_p) e_p`,
/// `p` the heaviest weight) and reports the rank of all of them together.
pub fn transform_generator_rank(n: usize, ups: &WeightedItv<f64>) -> Result<RankReport> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!("n must be in 1..=4, got {n}")));
    }
    let w = ups.weights();
    let p = (0..4).fold(0, |best, j| if w[j].abs() > w[best].abs() { j } else { best });
    if w[p] == 0.0 {
        return Err(Error::InvalidArgument("weights are all zero".into()));
    }
    let ambient = 4usize.pow(n as u32);
    let shape = Table4::new(n, vec![0.0; ambient])?;
    let mut per_line: Vec<Vec<Vec<f64>>> = Vec::new();
    for coord in 0..n {
        for other in 0..4usize.pow(n as u32 - 1) {
            let mut fixed = vec![0usize; n];
            let mut rest = other;
            for k in (0..n).rev().filter(|&k| k != coord) {
                fixed[k] = rest % 4;
                rest /= 4;
            }
            let line = shape.line(coord, &fixed);
            let dirs = (0..4)
                .filter(|&j| j != p)
                .map(|j| {
                    let mut v = vec![0.0; ambient];
                    v[line[j]] = 1.0;
                    v[line[p]] = -w[j] / w[p];
                    v
                })
                .collect();
            per_line.push(dirs);
        }
    }
    let all: Vec<Vec<f64>> = per_line.iter().flatten().cloned().collect();
    let rank = numerical_rank(&all, ambient);
    let redundant_lines = (n <= 3).then(|| {
        (0..per_line.len())
            .filter(|&skip| {
                let others: Vec<Vec<f64>> = per_line
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .flat_map(|(_, d)| d.iter().cloned())
                    .collect();
                numerical_rank(&others, ambient) == rank
            })
            .count()
    });
    Ok(RankReport {
        n,
        lines: per_line.len(),
        generators: all.len(),
        ambient_dim: ambient,
        rank,
        redundant_lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::grw;
    use crate::measures::{conditional_mutual_information, independence_residual};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // f64 views of the generic API, so float literals infer without suffixes
    fn tau(r: f64, s: f64, t: f64) -> f64 {
        super::tau(r, s, t)
    }
    fn construct_ab(r: f64, s: f64, t: f64) -> (f64, f64) {
        super::construct_ab(r, s, t)
    }
    fn ab_fraction(r: f64, s: f64, t: f64, a: f64, b: f64) -> f64 {
        super::ab_fraction(r, s, t, a, b)
    }
    fn tau2_targets(a: &[[f64; 3]; 3]) -> TargetAssignment<f64> {
        super::tau2_targets(a)
    }
    fn tau_n_targets(n: usize, t: &[f64]) -> Result<TargetAssignment<f64>> {
        super::tau_n_targets(n, t)
    }
    fn itv_product_property_check(b: [f64; 3], c: [f64; 3]) -> f64 {
        super::itv_product_property_check(b, c)
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau(0.3, 0.3, 0.3), 0.3);
        assert!((tau(0.0, 0.25, 1.0) - 0.5).abs() < 1e-15);
        assert!((tau(2.0, 4.0, 1.0) - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn construct_ab_examples() {
        let (a, b) = construct_ab(0.0, 0.25, 1.0);
        assert_eq!(a, 0.0);
        assert!((b - 0.5).abs() < 1e-15);
        assert!((ab_fraction(0.0, 0.25, 1.0, a, b) - 0.5).abs() < 1e-15);
        assert_eq!(construct_ab(0.4, 0.4, 0.4), (0.0, 0.0));
        let (a, b) = construct_ab(0.8, 1.0, 0.0);
        assert_eq!(a, 1.0);
        assert!((b - 0.225).abs() < 1e-15);
    }

    #[test]
    fn construct_ab_all_orders_and_ties() {
        let cases = [
            [0.0, 0.3, 1.0],
            [0.0, 0.7, 1.0],
            [1.0, 0.0, 0.3],
            [1.0, 0.0, 0.7],
            [0.3, 1.0, 0.0],
            [0.7, 1.0, 0.0],
            [0.0, 1.0, 0.3],
            [0.0, 1.0, 0.7],
            [0.3, 0.0, 1.0],
            [0.7, 0.0, 1.0],
            [1.0, 0.3, 0.0],
            [1.0, 0.7, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 1.0],
            [1.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
        ];
        for [r, s, t] in cases {
            let (a, b) = construct_ab(r, s, t);
            assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            let err = (ab_fraction(r, s, t, a, b) - tau(r, s, t)).abs();
            assert!(err < 1e-12, "{r} {s} {t}: {err}");
        }
    }

    fn eve_check(r: f64, s: f64, t: f64) -> (f64, f64) {
        let d = grw::<f64>();
        let bob = Binarization::new(d.alphabet("Y").unwrap().clone(), vec![r, s, t]).unwrap();
        let eve = construct_eve_channel_n1(&bob).unwrap();
        let out = eve.apply(&bob.apply(&d, "Y").unwrap(), "Z").unwrap().normalized();
        (
            independence_residual(&out, "X", "Y", "Z").unwrap(),
            conditional_mutual_information(&out, "X", "Y", "Z").unwrap(),
        )
    }

    #[test]
    fn eve_channel_examples() {
        for (r, s, t) in [(0.5, 0.5, 0.5), (1.0, 0.0, 0.0), (0.9, 0.3, 0.6)] {
            let (res, cmi) = eve_check(r, s, t);
            assert!(res < 1e-12, "residual {res}");
            assert!(cmi < 1e-12, "cmi {cmi}");
        }
    }

    #[test]
    fn eve_channel_reproduces_displayed_entries() {
        // X = 1 column of the Z̄ = 0 slice: weight 2r + a s + 4 b t
        let (r, s, t) = (0.2, 0.9, 0.4);
        let d = grw::<f64>();
        let bob = Binarization::new(d.alphabet("Y").unwrap().clone(), vec![r, s, t]).unwrap();
        let eve = construct_eve_channel_n1(&bob).unwrap();
        let out = eve.apply(&bob.apply(&d, "Y").unwrap(), "Z").unwrap();
        let (a, b) = construct_ab(r, s, t);
        let got = out.weight_of(&["1", "0", "0"]).unwrap();
        assert!((got - (2.0 * r + a * s + 4.0 * b * t)).abs() < 1e-14);
        let (dd, c) = construct_ab(s, t, r);
        let got = out.weight_of(&["2", "0", "0"]).unwrap();
        assert!((got - (4.0 * c * r + 2.0 * s + dd * t)).abs() < 1e-14);
    }

    #[test]
    fn targets_two_copies() {
        let c = tau2_targets(&[[0.4; 3]; 3]);
        assert_eq!(c.len(), 13);
        assert!(c.values().iter().all(|&v| (v - 0.4).abs() < 1e-15));

        let b = [0.1, 0.8, 0.5];
        let cc = [0.6, 0.2, 0.9];
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = b[i] * cc[j];
            }
        }
        let t = tau2_targets(&a);
        let want = tau(b[0], b[1], b[2]) * tau(cc[0], cc[1], cc[2]);
        assert!((t.get("(0,0)").unwrap() - want).abs() < 1e-15);
        // (0,i): second component pins Bob to ceil(i/2)
        assert!((t.get("(0,3)").unwrap() - tau(a[0][1], a[1][1], a[2][1])).abs() < 1e-15);
        assert!((t.get("(5,0)").unwrap() - tau(a[2][0], a[2][1], a[2][2])).abs() < 1e-15);
        assert!(t.get("(1,1)").is_none());

        let counter = tau2_targets(&[[1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!((counter.get("(0,0)").unwrap() - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn targets_n_copies() {
        let one = tau_n_targets(1, &[0.1, 0.5, 0.3]).unwrap();
        assert_eq!(one.labels(), &["0".to_string()]);
        assert_eq!(one.values()[0], tau(0.1, 0.5, 0.3));
        let flat: Vec<f64> = (0..9).map(|k| (k as f64 * 0.37).fract()).collect();
        let mut a = [[0.0; 3]; 3];
        for k in 0..9 {
            a[k / 3][k % 3] = flat[k];
        }
        assert_eq!(tau_n_targets(2, &flat).unwrap(), tau2_targets(&a));
        let three = tau_n_targets(3, &[0.7; 27]).unwrap();
        assert_eq!(three.len(), 7usize.pow(3) - 6usize.pow(3));
        assert!(three.values().iter().all(|&v| (v - 0.7).abs() < 1e-15));
        assert!(tau_n_targets(2, &[0.0; 8]).is_err());
    }

    #[test]
    fn product_property_examples() {
        assert_eq!(itv_product_property_check([1.0; 3], [1.0; 3]), 0.0);
        assert!(itv_product_property_check([0.0, 0.25, 1.0], [0.3, 0.7, 0.5]) < 1e-15);
        assert!(itv_product_property_check([0.0, 0.6, 0.2], [0.9, 0.1, 0.4]) < 1e-15);
    }

    fn random_table(rng: &mut ChaCha8Rng, n: usize) -> Table4<f64> {
        Table4::new(n, (0..4usize.pow(n as u32)).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn row_transform_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ups = WeightedItv::uniform();
        let t = random_table(&mut rng, 2);
        assert_eq!(row_transform(&t, 0, &[0, 2], 1.0, &ups).unwrap(), t);
        let flat = row_transform(&t, 1, &[3, 0], 0.0, &ups).unwrap();
        let u = ups.eval(&t.data()[12..16]);
        assert!(flat.data()[12..16].iter().all(|&v| (v - u).abs() < 1e-15));
        for d in [-2.0, 0.3, 5.0] {
            let moved = row_transform(&t, 0, &[0, 1], d, &ups).unwrap();
            assert!((moved.upsilon(&ups) - t.upsilon(&ups)).abs() < 1e-12);
        }
    }

    #[test]
    fn rowcol_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sym = Table4::new(2, (0..16).map(|k| ((k / 4) + (k % 4)) as f64).collect()).unwrap();
        assert_eq!(rowcol_equivalence_check(&WeightedItv::uniform(), &sym).unwrap(), 0.0);
        let t = random_table(&mut rng, 2);
        assert!(rowcol_equivalence_check(&WeightedItv::uniform(), &t).unwrap() < 1e-12);
        let w = WeightedItv::new([0.4, 0.3, 0.2, 0.1]).unwrap();
        assert!(rowcol_equivalence_check(&w, &t).unwrap() < 1e-12);
        assert!(WeightedItv::new([0.5, 0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn nested_target_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = WeightedItv::new([0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = random_table(&mut rng, 3);
        let mut closed = 0.0;
        for k in 0..64 {
            closed += w.weights()[k / 16] * w.weights()[(k / 4) % 4] * w.weights()[k % 4] * t.data()[k];
        }
        assert!((t.upsilon(&w) - closed).abs() < 1e-14);
    }

    /// Rank by Gaussian elimination with partial pivoting.
    fn elimination_rank(rows: &[Vec<f64>]) -> usize {
        let mut m: Vec<Vec<f64>> = rows.to_vec();
        let cols = m.first().map_or(0, Vec::len);
        let mut rank = 0;
        for c in 0..cols {
            let Some(p) = (rank..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else {
                break;
            };
            if m[p][c].abs() < 1e-10 {
                continue;
            }
            m.swap(rank, p);
            for r in 0..m.len() {
                if r != rank {
                    let f = m[r][c] / m[rank][c];
                    if f != 0.0 {
                        for k in c..cols {
                            m[r][k] -= f * m[rank][k];
                        }
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn generator_rank_reports() {
        let ups = WeightedItv::uniform();
        let one = transform_generator_rank(1, &ups).unwrap();
        assert_eq!((one.lines, one.generators, one.ambient_dim, one.rank), (1, 3, 4, 3));
        let two = transform_generator_rank(2, &ups).unwrap();
        assert_eq!((two.lines, two.generators, two.ambient_dim), (8, 24, 16));
        assert_eq!(two.rank, 15);
        let four = transform_generator_rank(4, &ups).unwrap();
        assert_eq!((four.lines, four.ambient_dim), (256, 256));
        assert!(four.rank < four.generators);
        assert!(transform_generator_rank(5, &ups).is_err());
        assert!(transform_generator_rank(0, &ups).is_err());
    }

    #[test]
    fn svd_rank_agrees_with_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let r = rng.gen_range(1..8);
            let c = rng.gen_range(1..8);
            let k = rng.gen_range(1..=r.min(c));
            let left: Vec<Vec<f64>> = (0..r).map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let right: Vec<Vec<f64>> = (0..k).map(|_| (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let rows: Vec<Vec<f64>> = left
                .iter()
                .map(|l| (0..c).map(|j| (0..k).map(|i| l[i] * right[i][j]).sum()).collect())
                .collect();
            assert_eq!(numerical_rank(&rows, c), elimination_rank(&rows));
        }
        let w = WeightedItv::new([0.4, 0.3, 0.2, 0.1]).unwrap();
        let rep = transform_generator_rank(3, &w).unwrap();
        assert_eq!(rep.rank, 63);
    }

    proptest! {
        #[test]
        fn tau_cyclic_and_affine(r in -10.0..10.0f64, s in -10.0..10.0f64, t in -10.0..10.0f64,
                                 alpha in -5.0..5.0f64, beta in -5.0..5.0f64) {
            let v = tau(r, s, t);
            prop_assert!((v - tau(s, t, r)).abs() < 1e-12);
            prop_assert!((v - tau(t, r, s)).abs() < 1e-12);
            let moved = tau(alpha * r + beta, alpha * s + beta, alpha * t + beta);
            prop_assert!((moved - (alpha * v + beta)).abs() < 1e-11);
        }

        #[test]
        fn construct_ab_contract(r in -10.0..10.0f64, s in -10.0..10.0f64, t in -10.0..10.0f64) {
            let (a, b) = construct_ab(r, s, t);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert!(2.0 + a + 4.0 * b >= 2.0);
            prop_assert!((ab_fraction(r, s, t, a, b) - tau(r, s, t)).abs() < 1e-9);
        }

        #[test]
        fn product_property(b in proptest::array::uniform3(0.0..1.0f64), c in proptest::array::uniform3(0.0..1.0f64)) {
            prop_assert!(itv_product_property_check(b, c) < 1e-12);
        }

        #[test]
        fn eve_channel_independence(r in 0.0..1.0f64, s in 0.0..1.0f64, t in 0.0..1.0f64) {
            let (res, _) = eve_check(r, s, t);
            prop_assert!(res < 1e-9);
        }
    }
}
