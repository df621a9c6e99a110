//! The two candidate distributions, with Eve's variable a deterministic
//! function of Alice's and Bob's.

use crate::dist::{tuple_label, Alphabet, Axis, JointDistribution};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Unnormalized weights of the 3x3 table indexed `[y][x]`, with Eve's symbol.
const GRW_TABLE: [[(u32, usize); 3]; 3] = [
    [(2, 0), (4, 1), (1, 2)],
    [(1, 3), (2, 0), (4, 4)],
    [(4, 5), (1, 6), (2, 0)],
];

/// The 3x3 candidate: `X, Y` in `{1,2,3}`, `Z` in `{0..6}`, normalizer 21.
///
/// `Z = 0` on the diagonal; every other cell carries its own `Z` symbol,
/// and `Z = i` pins `Y = ceil(i/2)`.
pub fn grw<T: Real>() -> JointDistribution<T> {
    let axes = vec![
        Axis::new("X", Alphabet::numeric(1, 3)),
        Axis::new("Y", Alphabet::numeric(1, 3)),
        Axis::new("Z", Alphabet::numeric(0, 6)),
    ];
    JointDistribution::from_fn(axes, |idx| {
        let (w, z) = GRW_TABLE[idx[1]][idx[0]];
        if z == idx[2] {
            T::lit(f64::from(w))
        } else {
            T::zero()
        }
    })
    .expect("static table is valid")
}

/// Eve's symbol index in [`rw_z_alphabet`] for Alice's `x` and Bob's `y`.
pub fn rw_z_index(x: usize, y: usize) -> usize {
    match (x < 2, y < 2) {
        (true, true) => (x + y) % 2,
        (false, false) => x % 2,
        _ => {
            let pos = RW_PAIRS.iter().position(|&p| p == (x, y)).expect("mixed pair");
            2 + pos
        }
    }
}

/// Pair-valued symbols of the 4x4 family in alphabet order.
pub const RW_PAIRS: [(usize, usize); 8] = [
    (0, 2),
    (1, 2),
    (0, 3),
    (1, 3),
    (2, 0),
    (3, 0),
    (2, 1),
    (3, 1),
];

/// `{"0", "1", "(0,2)", "(1,2)", "(0,3)", "(1,3)", "(2,0)", "(3,0)", "(2,1)", "(3,1)"}`.
pub fn rw_z_alphabet() -> Alphabet {
    let mut symbols = vec!["0".to_string(), "1".to_string()];
    symbols.extend(RW_PAIRS.iter().map(|(x, y)| tuple_label(&[x.to_string(), y.to_string()])));
    Alphabet::new(symbols).expect("distinct symbols")
}

/// Unnormalized weight of cell `(x, y)` of the 4x4 family.
fn rw_weight<T: Real>(a: T, x: usize, y: usize) -> T {
    match (x < 2, y < 2) {
        (true, true) => T::lit(0.125),
        (false, false) if x == y => T::lit(0.25),
        (false, false) => T::zero(),
        _ => a,
    }
}

/// The 4x4 family with parameter `a > 0`; normalizer `1 + 8a`.
pub fn rw<T: Real>(a: T) -> Result<JointDistribution<T>> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("family parameter must be positive, got {a}")));
    }
    let axes = vec![
        Axis::new("X", Alphabet::numeric(0, 3)),
        Axis::new("Y", Alphabet::numeric(0, 3)),
        Axis::new("Z", rw_z_alphabet()),
    ];
    let d = JointDistribution::from_fn(axes, |idx| {
        if rw_z_index(idx[0], idx[1]) == idx[2] {
            rw_weight(a, idx[0], idx[1])
        } else {
            T::zero()
        }
    })?;
    JointDistribution::new(d.axes().to_vec(), d.weights().to_vec(), T::one() + T::lit(8.0) * a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::conditional_mutual_information;

    #[test]
    fn grw_cells() {
        let d = grw::<f64>();
        assert_eq!(d.normalizer(), 21.0);
        assert_eq!(d.total_weight(), 21.0);
        let xy = d.marginal(&["X", "Y"]).unwrap();
        assert!((xy.prob_of(&["2", "1"]).unwrap() - 4.0 / 21.0).abs() < 1e-15);
        let z = d.marginal(&["Z"]).unwrap();
        assert!((z.prob_of(&["0"]).unwrap() - 6.0 / 21.0).abs() < 1e-15);
        let slice = d.condition("Z", "5").unwrap().distribution;
        assert_eq!(slice.prob_of(&["1", "3"]).unwrap(), 1.0);
    }

    #[test]
    fn grw_nonzero_z_pins_bob() {
        let d = grw::<f64>();
        for i in 1..=6usize {
            let slice = d.condition("Z", &i.to_string()).unwrap().distribution;
            let y = slice.marginal(&["Y"]).unwrap();
            let want = ((i + 1) / 2).to_string();
            assert_eq!(y.prob_of(&[&want]).unwrap(), 1.0);
            let cmi = crate::measures::mutual_information(&slice, "X", "Y").unwrap();
            assert_eq!(cmi, 0.0);
        }
    }

    #[test]
    fn rw_cells() {
        let d = rw(0.125f64).unwrap();
        assert_eq!(d.total_weight(), 2.0);
        assert_eq!(d.normalizer(), 2.0);
        assert_eq!(d.marginal(&["X", "Y"]).unwrap().weight_of(&["2", "3"]).unwrap(), 0.0);
        assert_eq!(d.weight_of(&["0", "1", "1"]).unwrap(), 0.125);
        assert_eq!(d.weight_of(&["3", "3", "1"]).unwrap(), 0.25);
        assert_eq!(d.weight_of(&["2", "2", "0"]).unwrap(), 0.25);
        let slice = d.condition("Z", "(2,0)").unwrap().distribution;
        assert_eq!(slice.prob_of(&["2", "0"]).unwrap(), 1.0);
        assert!(rw(0.0f64).is_err());
        assert!(rw(-1.0f64).is_err());
    }

    #[test]
    fn rw_pair_symbols_are_point_masses() {
        let d = rw(0.3f64).unwrap();
        for (x, y) in RW_PAIRS {
            let label = tuple_label(&[x.to_string(), y.to_string()]);
            let slice = d.condition("Z", &label).unwrap().distribution;
            assert_eq!(slice.prob_of(&[&x.to_string(), &y.to_string()]).unwrap(), 1.0);
        }
        // only the two bit-valued symbols carry correlation
        let cmi = conditional_mutual_information(&d, "X", "Y", "Z").unwrap();
        assert!(cmi > 0.0);
    }
}
