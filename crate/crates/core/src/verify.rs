//! Named, seeded verifications with pinned tolerances. Each returns a report
//! of individual checks; the verification passes iff every check does.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::candidates::grw;
use crate::channel::{zshape_decompose, Binarization, Channel};
use crate::dist::{Alphabet, Axis, JointDistribution};
use crate::error::{Error, Result};
use crate::feasibility::{
    perturbation_epsilon, perturbation_verify, restricted_shape_n2_bound, restricted_shape_n2_check, sample_rng,
    solve_two_copy, verify_itvcounter, ybar_binarization, ybar_binarization_unscaled_weights, ybar_bound,
    ybar_falsification_search, ybar_threshold, ChannelShape, ITV_COUNTER_TABLE,
};
use crate::itv::{
    ab_fraction, construct_ab, construct_eve_channel_n1, itv_product_property_check, row_transform,
    rowcol_equivalence_check, tau, transform_generator_rank, Table4, WeightedItv,
};
use crate::lp::Status;
use crate::measures::{
    cmi_gap, conditional_mutual_information, constant_replacement, entropy, independence_residual, trace_distance,
    trace_distance_vec,
};

pub const NAMES: [&str; 12] = [
    "itv-construction",
    "itvprop",
    "itvcounter",
    "restricted-shape-n2",
    "ybar",
    "zshape",
    "lemma32",
    "lemma33",
    "lemma36",
    "lemma37-trend",
    "rowcol",
    "perturbation",
];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    /// `value < threshold`, `value > threshold`, `value == threshold`, ...
    pub condition: String,
    pub passed: bool,
}

impl Check {
    fn below(label: &str, value: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            value,
            condition: format!("< {limit:e}"),
            passed: value < limit,
        }
    }

    fn above(label: &str, value: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            value,
            condition: format!("> {limit:e}"),
            passed: value > limit,
        }
    }

    fn holds(label: &str, ok: bool, count: f64) -> Self {
        Self {
            label: label.into(),
            value: count,
            condition: "holds".into(),
            passed: ok,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub seed: u64,
    pub samples: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub details: serde_json::Value,
    pub seconds: f64,
}

impl VerificationReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides the main sample count of the verification.
    pub samples: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 7, samples: None }
    }
}

/// Main sample count of each verification.
pub fn default_samples(name: &str) -> Option<usize> {
    Some(match name {
        "itv-construction" => 1_000_000,
        "itvprop" => 100_000,
        "itvcounter" => 100,
        "restricted-shape-n2" => 1_000,
        "ybar" => 10_000,
        "zshape" => 100_000,
        "lemma32" | "lemma36" | "rowcol" => 10_000,
        "lemma33" => 10_000,
        "lemma37-trend" => 20,
        "perturbation" => 1_000,
        _ => return None,
    })
}

pub fn run(name: &str, opts: VerifyOptions) -> Result<VerificationReport> {
    let samples = opts
        .samples
        .or_else(|| default_samples(name))
        .ok_or_else(|| Error::InvalidArgument(format!("unknown verification `{name}`; valid: {}", NAMES.join(", "))))?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let started = Instant::now();
    let seed = opts.seed;
    let (checks, details) = match name {
        "itv-construction" => itv_construction(samples, seed)?,
        "itvprop" => itvprop(samples, seed),
        "itvcounter" => itvcounter(samples, seed)?,
        "restricted-shape-n2" => restricted_shape(samples, seed)?,
        "ybar" => ybar(samples, seed)?,
        "zshape" => zshape(samples, seed)?,
        "lemma32" => lemma32(samples, seed)?,
        "lemma33" => lemma33(samples, seed)?,
        "lemma36" => lemma36(samples, seed)?,
        "lemma37-trend" => lemma37(samples, seed)?,
        "rowcol" => rowcol(samples, seed)?,
        "perturbation" => perturbation(samples, seed)?,
        _ => unreachable!("sample table covers every name"),
    };
    Ok(VerificationReport {
        name: name.into(),
        seed,
        samples,
        passed: checks.iter().all(|c| c.passed),
        checks,
        details,
        seconds: started.elapsed().as_secs_f64(),
    })
}

type Outcome = (Vec<Check>, serde_json::Value);

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn random_channel(rng: &mut ChaCha8Rng, input: &Alphabet, outputs: usize) -> Result<Channel<f64>> {
    let rows = (0..input.len()).map(|_| dirichlet(rng, outputs)).collect();
    Channel::new(input.clone(), Alphabet::numeric(0, outputs as i64 - 1), rows)
}

fn vector_dist(name: &str, p: &[f64]) -> Result<JointDistribution<f64>> {
    JointDistribution::from_weights(vec![Axis::new(name, Alphabet::numeric(0, p.len() as i64 - 1))], p.to_vec())
}

/// Construction on random triples, then the single-copy channel on random
/// Bob binarizations (a hundredth as many).
fn itv_construction(samples: usize, seed: u64) -> Result<Outcome> {
    let mut rng = sample_rng(seed, 0);
    let mut worst = 0.0f64;
    let mut out_of_box = 0usize;
    for _ in 0..samples {
        let (r, s, t): (f64, f64, f64) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let (a, b) = construct_ab(r, s, t);
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            out_of_box += 1;
        }
        worst = worst.max((ab_fraction(r, s, t, a, b) - tau(r, s, t)).abs());
    }
    let bins = (samples / 100).max(1);
    let d = grw::<f64>();
    let y = d.alphabet("Y")?.clone();
    let mut rng = sample_rng(seed, 1);
    let (mut worst_res, mut worst_cmi) = (0.0f64, 0.0f64);
    for _ in 0..bins {
        let bob = Binarization::new(y.clone(), (0..3).map(|_| rng.gen()).collect())?;
        let out = construct_eve_channel_n1(&bob)?.apply(&bob.apply(&d, "Y")?, "Z")?;
        worst_res = worst_res.max(independence_residual(&out, "X", "Y", "Z")?);
        worst_cmi = worst_cmi.max(conditional_mutual_information(&out, "X", "Y", "Z")?);
    }
    Ok((
        vec![
            Check::holds("(a, b) in [0,1]^2", out_of_box == 0, out_of_box as f64),
            Check::below("max |fraction - tau| over triples", worst, 1e-9),
            Check::below("max independence residual over Bob binarizations", worst_res, 1e-9),
            Check::below("max I(X:Ybar|Zbar) over Bob binarizations", worst_cmi, 1e-8),
        ],
        json!({ "triples": samples, "binarizations": bins }),
    ))
}

fn itvprop(samples: usize, seed: u64) -> Outcome {
    let mut rng = sample_rng(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let b: [f64; 3] = rng.gen();
        let c: [f64; 3] = rng.gen();
        worst = worst.max(itv_product_property_check(b, c));
    }
    (vec![Check::below("max product-property residual", worst, 1e-12)], json!({}))
}

/// The counterexample table under the default channel shape, and random
/// product tables through the same pipeline.
fn itvcounter(samples: usize, seed: u64) -> Result<Outcome> {
    let shape = ChannelShape::default();
    let main = verify_itvcounter(shape)?;
    let rc = verify_itvcounter(ChannelShape::RowColumn)?;
    let d2 = grw::<f64>().n_fold(2)?;
    let mut products_ok = 0;
    for i in 0..samples as u64 {
        let mut rng = sample_rng(seed, i);
        let b: [f64; 3] = rng.gen();
        let c: [f64; 3] = rng.gen();
        let mut a = [[0.0; 3]; 3];
        for (r, row) in a.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = b[r] * c[k];
            }
        }
        let o = solve_two_copy(&d2, &a, shape)?;
        if o.status == Status::Feasible && o.verified {
            products_ok += 1;
        }
    }
    let margin = main.certificate_margin.unwrap_or(f64::NEG_INFINITY);
    Ok((
        vec![
            Check::holds("counterexample table infeasible", main.status == Status::Infeasible, 0.0),
            Check::above("certificate margin", margin, 1e-9),
            Check::holds(
                "every product table feasible with verified witness",
                products_ok == samples,
                products_ok as f64,
            ),
        ],
        json!({
            "shape": shape,
            "table": ITV_COUNTER_TABLE,
            "outcome": main.to_json(),
            "row_column_outcome": {
                "status": rc.status,
                "certificate_margin": rc.certificate_margin,
            },
        }),
    ))
}

fn restricted_shape(samples: usize, seed: u64) -> Result<Outcome> {
    let bound = restricted_shape_n2_bound();
    let rep = restricted_shape_n2_check(samples, seed)?;
    Ok((
        vec![
            Check::below("|bound - 1/6|", (bound - 1.0 / 6.0).abs(), 1e-12),
            Check::holds(
                "sampled P(Ybar=0 | X=(1,1), Zbar=(0,0)) >= 1/6",
                rep.min_first_fraction >= bound - 1e-12,
                rep.min_first_fraction,
            ),
            Check::holds(
                "sampled P(Ybar=0 | X=(2,2), Zbar=(0,0)) = 0",
                rep.max_zero_fraction == 0.0,
                rep.max_zero_fraction,
            ),
            Check::below("closed form vs pushed-forward table", rep.formula_error, 1e-12),
        ],
        serde_json::to_value(&rep)?,
    ))
}

fn ybar(samples: usize, seed: u64) -> Result<Outcome> {
    let grid: Vec<f64> = (1..=100).map(|k| k as f64 / 10.0).collect();
    let worst_bound = grid.iter().map(|&a| ybar_bound(a)).fold(0.0, f64::max);
    let worst_threshold = grid
        .iter()
        .map(|&a| ybar_threshold(8.0 * a, 2.0, 24.0 * a + 3.0))
        .fold(0.0, f64::max);
    let rep = ybar_falsification_search(1.0, &ybar_binarization(1.0)?, samples, seed)?;
    let unscaled = ybar_falsification_search(1.0, &ybar_binarization_unscaled_weights(1.0)?, samples, seed)?;
    Ok((
        vec![
            Check::below("max ybar_bound(a) on the grid", worst_bound, 0.5),
            Check::below("max threshold of the rescaled binarization on the grid", worst_threshold, 0.5),
            Check::above("min normalized violation at a = 1", rep.min_violation, 1e-6),
        ],
        json!({
            "search": rep,
            "unscaled_weight_binarization": {
                "p0": unscaled.p0,
                "min_violation": unscaled.min_violation,
                "threshold": ybar_threshold(8.0, 2.0, 6.0),
            },
        }),
    ))
}

fn zshape(samples: usize, seed: u64) -> Result<Outcome> {
    let mut rng = sample_rng(seed, 0);
    let bin = Alphabet::binary();
    let (mut worst, mut not_z, mut out_of_range) = (0.0f64, 0usize, 0usize);
    for _ in 0..samples {
        let (u, v): (f64, f64) = rng.gen();
        let c = Channel::new(bin.clone(), bin.clone(), vec![vec![u, 1.0 - u], vec![v, 1.0 - v]])?;
        let dec = zshape_decompose(&c)?;
        for (rr, cr) in dec.recombine().iter().zip(c.rows()) {
            for (a, b) in rr.iter().zip(cr) {
                worst = worst.max((a - b).abs());
            }
        }
        if !dec.is_z_shaped() {
            not_z += 1;
        }
        if dec.z_channel.rows().iter().flatten().any(|x| !(0.0..=1.0).contains(x))
            || !(0.0..=1.0).contains(&dec.coin_probability)
        {
            out_of_range += 1;
        }
    }
    Ok((
        vec![
            Check::below("max recombination error", worst, 1e-12),
            Check::holds("residual channel has a zero entry", not_z == 0, not_z as f64),
            Check::holds("entries in [0,1]", out_of_range == 0, out_of_range as f64),
        ],
        json!({}),
    ))
}

/// Random `U` on a dyadic grid, largest probability first, so `1 - a1` is exact.
fn lemma32(samples: usize, seed: u64) -> Result<Outcome> {
    let mut rng = sample_rng(seed, 0);
    let (mut inexact, mut entropy_fail) = (0usize, 0usize);
    for _ in 0..samples {
        let n = rng.gen_range(2..=8);
        let mut cuts: Vec<u32> = (0..n - 1).map(|_| rng.gen_range(0..=1024)).collect();
        cuts.push(0);
        cuts.push(1024);
        cuts.sort_unstable();
        let mut w: Vec<f64> = cuts.windows(2).map(|p| f64::from(p[1] - p[0]) / 1024.0).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        if w[0] == 0.0 {
            continue;
        }
        let u = vector_dist("U", &w)?;
        let mut k = vec![0.0; w.len()];
        k[0] = 1.0;
        let kd = vector_dist("U", &k)?;
        if trace_distance(&u, &kd)? != 1.0 - w[0] {
            inexact += 1;
        }
        if entropy(&u) < (1.0 / w[0]).log2() - 1e-12 {
            entropy_fail += 1;
        }
    }
    Ok((
        vec![
            Check::holds("D(U, K) = 1 - a1 exactly", inexact == 0, inexact as f64),
            Check::holds("H(U) >= log2(1/a1)", entropy_fail == 0, entropy_fail as f64),
        ],
        json!({}),
    ))
}

fn lemma33(samples: usize, seed: u64) -> Result<Outcome> {
    let mut rng = sample_rng(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let nz = rng.gen_range(2..=5);
        let nu = rng.gen_range(2..=5);
        let w = dirichlet(&mut rng, nz * nu);
        let zu = JointDistribution::from_weights(
            vec![
                Axis::new("Z", Alphabet::numeric(0, nz as i64 - 1)),
                Axis::new("U", Alphabet::numeric(0, nu as i64 - 1)),
            ],
            w,
        )?;
        let zk = constant_replacement(&zu, "U")?;
        let u = zu.marginal(&["U"])?;
        let k = zk.marginal(&["U"])?;
        worst = worst.max((trace_distance(&zu, &zk)? - trace_distance(&u, &k)?).abs());
    }
    // Z a fair coin, A = Z, B an independent fair coin
    let za = JointDistribution::from_weights(
        vec![Axis::new("Z", Alphabet::binary()), Axis::new("V", Alphabet::binary())],
        vec![0.5, 0.0, 0.0, 0.5],
    )?;
    let zb = JointDistribution::from_weights(
        vec![Axis::new("Z", Alphabet::binary()), Axis::new("V", Alphabet::binary())],
        vec![0.25; 4],
    )?;
    let d_ab = trace_distance(&za.marginal(&["V"])?, &zb.marginal(&["V"])?)?;
    let d_zab = trace_distance(&za, &zb)?;
    Ok((
        vec![
            Check::below("max |D(ZU, ZK) - D(U, K)|", worst, 1e-12),
            Check::below("coin example D(A, B)", d_ab, 1e-15),
            Check::below("coin example |D(ZA, ZB) - 0.5|", (d_zab - 0.5).abs(), 1e-15),
        ],
        json!({ "coin_example": { "d_a_b": d_ab, "d_za_zb": d_zab } }),
    ))
}

fn lemma36(samples: usize, seed: u64) -> Result<Outcome> {
    let mut rng = sample_rng(seed, 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(2..=6);
        let p = dirichlet(&mut rng, n);
        let q = dirichlet(&mut rng, n);
        let c = random_channel(&mut rng, &Alphabet::numeric(0, n as i64 - 1), m)?;
        let gap = trace_distance_vec(&c.apply_vec(&p)?, &c.apply_vec(&q)?)? - trace_distance_vec(&p, &q)?;
        worst = worst.max(gap);
    }
    Ok((
        vec![Check::below("max D(Cp, Cq) - D(p, q)", worst, 1e-12)],
        json!({}),
    ))
}

/// `U_i` independent of `XYZ` on the 3x3 candidate with `P(U_i = first) = 1 - 1/i`.
fn lemma37(samples: usize, seed: u64) -> Result<Outcome> {
    let base = grw::<f64>();
    let family = |i: f64| -> Result<JointDistribution<f64>> {
        let u = JointDistribution::from_weights(
            vec![Axis::new("U", Alphabet::numeric(1, 2))],
            vec![1.0 - 1.0 / i, 1.0 / i],
        )?;
        base.product(&u)
    };
    let zu = family(2.0)?.merge_axes("Z", "U", "ZU")?.alphabet("ZU")?.clone();
    let probe = [10.0, 1_000.0, 20_000.0, 100_000.0, 1_000_000.0];
    let dists: Vec<JointDistribution<f64>> = probe.iter().map(|&i| family(i)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut worst_tail = 0.0f64;
    for s in 0..samples as u64 {
        let mut rng = sample_rng(seed, s);
        let c = random_channel(&mut rng, &zu, zu.len())?;
        let gaps: Vec<f64> = dists
            .iter()
            .map(|d| cmi_gap(d, &c, "X", "Y", "Z", "U"))
            .collect::<Result<_>>()?;
        for (&i, g) in probe.iter().zip(&gaps) {
            if 1.0 / i < 1e-4 {
                worst_tail = worst_tail.max(g.abs());
            }
        }
        rows.push(gaps);
    }
    Ok((
        vec![Check::below("max |gap| once 1 - P(U=1) < 1e-4", worst_tail, 0.01)],
        json!({ "i": probe, "gaps_per_channel": rows }),
    ))
}

fn rowcol(samples: usize, seed: u64) -> Result<Outcome> {
    let mut rng = sample_rng(seed, 0);
    let (mut worst_row, mut worst_col, mut worst_eq) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let w = dirichlet(&mut rng, 4);
        let ups = WeightedItv::new([w[0], w[1], w[2], 1.0 - w[0] - w[1] - w[2]])?;
        let table = Table4::new(2, (0..16).map(|_| rng.gen()).collect())?;
        let before = table.upsilon(&ups);
        let fixed = [rng.gen_range(0..4), rng.gen_range(0..4)];
        let d: f64 = rng.gen_range(-2.0..2.0);
        let along_row = row_transform(&table, 1, &fixed, d, &ups)?;
        let along_col = row_transform(&table, 0, &fixed, d, &ups)?;
        worst_row = worst_row.max((along_row.upsilon(&ups) - before).abs());
        worst_col = worst_col.max((along_col.upsilon(&ups) - before).abs());
        worst_eq = worst_eq.max(rowcol_equivalence_check(&ups, &table)?);
    }
    let uniform = WeightedItv::uniform();
    let ranks: Vec<_> = (2..=4).map(|n| transform_generator_rank(n, &uniform)).collect::<Result<_>>()?;
    let r4 = &ranks[2];
    Ok((
        vec![
            Check::below("target change under row transformations", worst_row, 1e-12),
            Check::below("target change under column transformations", worst_col, 1e-12),
            Check::below("rows-first vs columns-first", worst_eq, 1e-12),
            Check::holds("n = 4 has 4 * 4^3 lines", r4.lines == 256 && r4.generators == 768, r4.lines as f64),
            Check::holds("n = 4 generators are linearly dependent", r4.rank < r4.generators, r4.rank as f64),
        ],
        json!({ "ranks": ranks }),
    ))
}

/// Alice and Bob binarizations agreeing on their last two symbols up to a
/// small offset, drawn until the transition stays in `[0,1]`.
fn perturbation(samples: usize, seed: u64) -> Result<Outcome> {
    let mut rng = sample_rng(seed, 0);
    let alpha = Alphabet::numeric(0, 3);
    let (mut accepted, mut drawn) = (0usize, 0usize);
    let (mut worst_eq, mut worst_res, mut max_zeta) = (0.0f64, 0.0f64, 0.0f64);
    while accepted < samples {
        drawn += 1;
        if drawn > 1000 * samples {
            return Err(Error::InvalidArgument("too few admissible perturbation draws".into()));
        }
        let mut pa: [f64; 4] = rng.gen();
        let mut pb: [f64; 4] = rng.gen();
        pa[3] = (pa[2] + rng.gen_range(-0.03..0.03)).clamp(0.0, 1.0);
        pb[3] = (pb[2] + rng.gen_range(-0.03..0.03)).clamp(0.0, 1.0);
        let alice = Binarization::new(alpha.clone(), pa.to_vec())?;
        let bob = Binarization::new(alpha.clone(), pb.to_vec())?;
        let rep = match perturbation_verify(&alice, &bob, 0.125) {
            Ok(r) => r,
            Err(Error::InadmissiblePerturbation { .. }) | Err(Error::DegenerateDenominator(_)) => continue,
            Err(e) => return Err(e),
        };
        if rep.zeta.abs() >= 1e-3 {
            continue;
        }
        let mean = |v: &[f64; 4]| v.iter().sum::<f64>() / 4.0;
        let (ma, mb) = (mean(&pa), mean(&pb));
        let x: Vec<f64> = pa.iter().map(|v| v - ma).collect();
        let y: Vec<f64> = pb.iter().map(|v| v - mb).collect();
        let (zeta, eps) = perturbation_epsilon([x[0], x[1], x[2], x[3]], [y[0], y[1], y[2], y[3]])?;
        worst_eq = worst_eq.max((16.0 * zeta + 16.0 * eps * x[0] * y[2] + eps * zeta).abs());
        worst_res = worst_res.max(rep.residual);
        max_zeta = max_zeta.max(zeta.abs());
        accepted += 1;
    }
    Ok((
        vec![
            Check::below("defining equation of epsilon", worst_eq, 1e-12),
            Check::below("max residual at Zbar = 0", worst_res, 1e-9),
        ],
        json!({ "accepted": accepted, "drawn": drawn, "max_abs_zeta": max_zeta, "a": 0.125 }),
    ))
}

/// Both directions of: `I(A:B|C) < 1e-10` iff the cross-multiplied residual
/// is below `1e-10`, on random and on conditionally independent tables.
#[derive(Clone, Debug, Serialize)]
pub struct IndependenceLemmaReport {
    pub random: usize,
    pub constructed: usize,
    pub counterexamples: usize,
    pub max_constructed_cmi: f64,
    pub min_random_cmi: f64,
}

pub fn independence_lemma_check(samples: usize, seed: u64) -> Result<IndependenceLemmaReport> {
    let mut rng = sample_rng(seed, 0);
    let mut counterexamples = 0;
    let (mut max_ci, mut min_rand) = (0.0f64, f64::INFINITY);
    for k in 0..2 * samples {
        let (na, nb, nc) = (rng.gen_range(2..=4), rng.gen_range(2..=4), rng.gen_range(1..=4));
        let w: Vec<f64> = if k < samples {
            dirichlet(&mut rng, na * nb * nc)
        } else {
            let pc = dirichlet(&mut rng, nc);
            let pa: Vec<Vec<f64>> = (0..nc).map(|_| dirichlet(&mut rng, na)).collect();
            let pb: Vec<Vec<f64>> = (0..nc).map(|_| dirichlet(&mut rng, nb)).collect();
            let mut w = vec![0.0; na * nb * nc];
            for a in 0..na {
                for b in 0..nb {
                    for c in 0..nc {
                        w[(a * nb + b) * nc + c] = pc[c] * pa[c][a] * pb[c][b];
                    }
                }
            }
            w
        };
        let d = JointDistribution::from_weights(
            vec![
                Axis::new("A", Alphabet::numeric(0, na as i64 - 1)),
                Axis::new("B", Alphabet::numeric(0, nb as i64 - 1)),
                Axis::new("C", Alphabet::numeric(0, nc as i64 - 1)),
            ],
            w,
        )?;
        let cmi = conditional_mutual_information(&d, "A", "B", "C")?;
        let res = independence_residual(&d, "A", "B", "C")?;
        if (cmi.abs() < 1e-10) != (res < 1e-10) {
            counterexamples += 1;
        }
        if k < samples {
            min_rand = min_rand.min(cmi);
        } else {
            max_ci = max_ci.max(cmi.abs());
        }
    }
    Ok(IndependenceLemmaReport {
        random: samples,
        constructed: samples,
        counterexamples,
        max_constructed_cmi: max_ci,
        min_random_cmi: min_rand,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str, n: usize) -> VerificationReport {
        run(name, VerifyOptions { seed: 3, samples: Some(n) }).unwrap()
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let err = run("nosuch", VerifyOptions::default()).unwrap_err().to_string();
        assert!(err.contains("itvcounter") && err.contains("perturbation"));
    }

    #[test]
    fn small_runs_pass() {
        for (name, n) in [
            ("itv-construction", 2000),
            ("itvprop", 2000),
            ("restricted-shape-n2", 30),
            ("ybar", 200),
            ("zshape", 2000),
            ("lemma32", 500),
            ("lemma33", 500),
            ("lemma36", 500),
            ("lemma37-trend", 2),
            ("perturbation", 50),
        ] {
            let rep = small(name, n);
            assert!(rep.passed, "{name}: {:?}", rep.checks);
        }
    }

    #[test]
    fn counterexample_report_names_the_shape() {
        let rep = small("itvcounter", 3);
        assert_eq!(rep.details["shape"], "coarsening");
        assert_eq!(rep.details["row_column_outcome"]["status"], "infeasible");
        assert_eq!(rep.checks.len(), 3);
    }

    #[test]
    fn independence_lemma_small() {
        let rep = independence_lemma_check(200, 1).unwrap();
        assert_eq!(rep.counterexamples, 0);
        assert!(rep.max_constructed_cmi < 1e-10);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = small("lemma36", 100);
        let b = small("lemma36", 100);
        assert_eq!(a.checks[0].value, b.checks[0].value);
    }
}
