//! Upper estimates of intrinsic information: the smallest `I(X:Y|Zbar)` found
//! over Eve channels `Z -> Zbar`, and searches over binarizations.
//!
//! Each restart runs exponentiated-gradient descent on the channel rows with
//! a backtracking step, so the objective never increases. Values are observed
//! upper bounds, never certified.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Binarization, Channel};
use crate::dist::{Alphabet, JointDistribution};
use crate::error::{Error, Result};
use crate::feasibility::sample_rng;
use crate::itv::construct_eve_channel_n1;
use crate::measures::conditional_mutual_information;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Size of Eve's output alphabet; `None` means `|Z|`.
    pub output_size: Option<usize>,
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Stop once the objective improves by less than this over `window` iterations.
    pub tolerance: f64,
    pub window: usize,
    /// Keep per-iteration objective traces in the report.
    pub traces: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            output_size: None,
            restarts: 32,
            max_iterations: 2000,
            seed: 0,
            tolerance: 1e-12,
            window: 50,
            traces: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RestartOutcome {
    pub index: usize,
    /// `identity`, `random` or `given`.
    pub start: String,
    pub initial_value: f64,
    pub value: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub config: EstimatorConfig,
    pub output_size: usize,
    /// `I(X:Y|Z)` of the input, the value of the identity channel.
    pub baseline: f64,
    pub best_value: f64,
    pub best_restart: usize,
    #[serde(serialize_with = "channel_json")]
    pub best_channel: Channel<f64>,
    pub per_restart_values: Vec<f64>,
    pub restarts: Vec<RestartOutcome>,
    /// Always `observed`: the value is an upper bound found by search.
    pub status: &'static str,
}

fn channel_json<S: serde::Serializer>(c: &Channel<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    c.to_json().serialize(s)
}

impl EstimateReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// `P(z, (x,y))` as a dense `[z][xy]` table with the marginal sizes.
struct Problem {
    p: Vec<Vec<f64>>,
    nx: usize,
    ny: usize,
}

impl Problem {
    fn new(d: &JointDistribution<f64>) -> Result<Self> {
        let m = d.marginal(&["X", "Y", "Z"])?.normalized();
        let s = m.shape();
        let (nx, ny, nz) = (s[0], s[1], s[2]);
        let w = m.weights();
        let p = (0..nz)
            .map(|z| (0..nx * ny).map(|xy| w[xy * nz + z]).collect())
            .collect();
        Ok(Self { p, nx, ny })
    }

    fn nz(&self) -> usize {
        self.p.len()
    }

    /// Output slices `q[k][xy]`.
    fn push(&self, c: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.nx * self.ny]; k];
        for (z, row) in c.iter().enumerate() {
            for (kk, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    for (qv, &pv) in q[kk].iter_mut().zip(&self.p[z]) {
                        *qv += w * pv;
                    }
                }
            }
        }
        q
    }

    /// `I(X:Y|Zbar)` and, per output, `log2(q q_k / (q_x q_y))` on the support.
    fn eval(&self, c: &[Vec<f64>], k: usize, want_logs: bool) -> (f64, Vec<Vec<f64>>) {
        let q = self.push(c, k);
        let (nx, ny) = (self.nx, self.ny);
        let mut total = 0.0;
        let mut logs = Vec::new();
        for slice in &q {
            let qk: f64 = slice.iter().sum();
            let mut l = vec![0.0; nx * ny];
            if qk > 0.0 {
                let qx: Vec<f64> = (0..nx).map(|x| slice[x * ny..(x + 1) * ny].iter().sum()).collect();
                let qy: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| slice[x * ny + y]).sum()).collect();
                for x in 0..nx {
                    for y in 0..ny {
                        let v = slice[x * ny + y];
                        if v > 0.0 {
                            let r = (v * qk / (qx[x] * qy[y])).log2();
                            total += v * r;
                            l[x * ny + y] = r;
                        }
                    }
                }
            }
            if want_logs {
                logs.push(l);
            }
        }
        (total, logs)
    }

    fn gradient(&self, c: &[Vec<f64>], logs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        c.iter()
            .enumerate()
            .map(|(z, row)| {
                row.iter()
                    .enumerate()
                    .map(|(k, &w)| {
                        if w > 0.0 {
                            self.p[z].iter().zip(&logs[k]).map(|(p, l)| p * l).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn eg_step(c: &[Vec<f64>], g: &[Vec<f64>], eta: f64) -> Vec<Vec<f64>> {
    c.iter()
        .zip(g)
        .map(|(row, grow)| {
            let lo = row
                .iter()
                .zip(grow)
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, g)| *g)
                .fold(f64::INFINITY, f64::min);
            let mut out: Vec<f64> = row
                .iter()
                .zip(grow)
                .map(|(&w, &gv)| if w > 0.0 { w * (-eta * (gv - lo)).exp() } else { 0.0 })
                .collect();
            let s: f64 = out.iter().sum();
            out.iter_mut().for_each(|v| *v /= s);
            out
        })
        .collect()
}

struct Descent {
    channel: Vec<Vec<f64>>,
    initial: f64,
    value: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn descend(prob: &Problem, start: Vec<Vec<f64>>, k: usize, cfg: &EstimatorConfig) -> Descent {
    let mut c = start;
    let (mut value, mut logs) = prob.eval(&c, k, true);
    let initial = value;
    let mut trace = vec![value];
    let mut eta = 1.0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let g = prob.gradient(&c, &logs);
        let mut accepted = false;
        while eta > 1e-12 {
            let cand = eg_step(&c, &g, eta);
            let (v, l) = prob.eval(&cand, k, true);
            if v < value {
                c = cand;
                value = v;
                logs = l;
                accepted = true;
                eta = (eta * 2.0).min(1e6);
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        trace.push(value);
        if trace.len() > cfg.window && trace[trace.len() - 1 - cfg.window] - value < cfg.tolerance {
            break;
        }
    }
    Descent {
        channel: c,
        initial,
        value,
        iterations,
        trace,
    }
}

fn identity_like(nz: usize, k: usize) -> Vec<Vec<f64>> {
    (0..nz)
        .map(|z| {
            let mut row = vec![0.0; k];
            row[z.min(k - 1)] = 1.0;
            row
        })
        .collect()
}

fn dirichlet_rows(nz: usize, k: usize, seed: u64, index: u64) -> Vec<Vec<f64>> {
    let mut rng = sample_rng(seed, index);
    (0..nz)
        .map(|_| {
            let mut row: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect()
}

fn output_alphabet(k: usize) -> Alphabet {
    Alphabet::numeric(0, k as i64 - 1)
}

/// Multi-restart minimization of `I(X:Y|c(Z))` over channels `c` with
/// `cfg.output_size` outputs.
pub fn estimate_intrinsic(d: &JointDistribution<f64>, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    estimate_intrinsic_with_starts(d, cfg, &[])
}

/// As [`estimate_intrinsic`], with extra deterministic starting channels
/// (their outputs must number `cfg.output_size`, or `|Z|` if unset).
///
/// Restart 0 is the identity-like channel, restarts `1..restarts` are seeded
/// random channels, and the given starts follow.
pub fn estimate_intrinsic_with_starts(
    d: &JointDistribution<f64>,
    cfg: &EstimatorConfig,
    starts: &[Channel<f64>],
) -> Result<EstimateReport> {
    let prob = Problem::new(d)?;
    let nz = prob.nz();
    let k = cfg.output_size.unwrap_or(nz);
    if k == 0 || cfg.restarts == 0 {
        return Err(Error::InvalidArgument("output size and restarts must be positive".into()));
    }
    let z = d.alphabet("Z")?;
    for s in starts {
        if s.input() != z || s.output().len() != k {
            return Err(Error::AlphabetMismatch(format!(
                "start channel must map Z to {k} outputs, got {} -> {}",
                s.input().len(),
                s.output().len()
            )));
        }
    }
    let baseline = conditional_mutual_information(d, "X", "Y", "Z")?;
    let total = cfg.restarts + starts.len();
    let runs: Vec<(String, Descent)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let (label, start) = if i == 0 {
                ("identity", identity_like(nz, k))
            } else if i < cfg.restarts {
                ("random", dirichlet_rows(nz, k, cfg.seed, i as u64))
            } else {
                ("given", starts[i - cfg.restarts].rows().to_vec())
            };
            (label.to_string(), descend(&prob, start, k, cfg))
        })
        .collect();
    let per_restart_values: Vec<f64> = runs.iter().map(|r| r.1.value).collect();
    let best_restart = (0..total)
        .min_by(|&a, &b| per_restart_values[a].total_cmp(&per_restart_values[b]).then(a.cmp(&b)))
        .expect("at least one restart");
    let best_channel = Channel::new(z.clone(), output_alphabet(k), runs[best_restart].1.channel.clone())?;
    let restarts = runs
        .into_iter()
        .enumerate()
        .map(|(index, (start, r))| RestartOutcome {
            index,
            start,
            initial_value: r.initial,
            value: r.value,
            iterations: r.iterations,
            trace: cfg.traces.then_some(r.trace),
        })
        .collect();
    Ok(EstimateReport {
        config: cfg.clone(),
        output_size: k,
        baseline,
        best_value: per_restart_values[best_restart],
        best_restart,
        best_channel,
        per_restart_values,
        restarts,
        status: "observed",
    })
}

/// Runs the estimator for each output size in increasing order, seeding each
/// run with the previous optimum padded by unused outputs, so the reported
/// values never increase with the size.
pub fn estimate_sweep(d: &JointDistribution<f64>, sizes: &[usize], cfg: &EstimatorConfig) -> Result<Vec<EstimateReport>> {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out: Vec<EstimateReport> = Vec::new();
    for &k in &sorted {
        let mut c = cfg.clone();
        c.output_size = Some(k);
        let starts = match out.last() {
            Some(prev) => vec![prev.best_channel.embed_outputs(output_alphabet(k))?],
            None => Vec::new(),
        };
        out.push(estimate_intrinsic_with_starts(d, &c, &starts)?);
    }
    Ok(out)
}

/// Which parties the binarization search processes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeMode {
    BobOnly,
    Both,
}

/// Extra start used for every sampled binarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartHint {
    None,
    /// The explicit single-copy channel on the 3x3 candidate (Bob-only).
    SingleCopyConstruction,
}

#[derive(Clone, Debug, Serialize)]
pub struct BinarizedSample {
    pub bob_p0: Vec<f64>,
    pub alice_p0: Option<Vec<f64>>,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BinarizedSearchReport {
    pub mode: BinarizeMode,
    pub seed: u64,
    pub samples: Vec<BinarizedSample>,
    /// Largest minimized value over the sampled binarizations.
    pub worst_value: f64,
    pub worst_index: usize,
}

/// Samples binarizations with i.i.d. uniform acceptance probabilities and
/// reports the largest estimated `I(Xbar:Ybar|Zbar)` among them.
pub fn binarized_independence_search(
    d: &JointDistribution<f64>,
    samples: usize,
    mode: BinarizeMode,
    hint: StartHint,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<BinarizedSearchReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one binarization sample".into()));
    }
    let xa = d.alphabet("X")?.clone();
    let ya = d.alphabet("Y")?.clone();
    let out: Vec<BinarizedSample> = (0..samples as u64)
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let bob = Binarization::new(ya.clone(), (0..ya.len()).map(|_| rng.gen()).collect())?;
            let alice = match mode {
                BinarizeMode::Both => Some(Binarization::new(xa.clone(), (0..xa.len()).map(|_| rng.gen()).collect())?),
                BinarizeMode::BobOnly => None,
            };
            let mut bd = bob.apply(d, "Y")?;
            if let Some(a) = &alice {
                bd = a.apply(&bd, "X")?;
            }
            let starts = match hint {
                StartHint::None => Vec::new(),
                StartHint::SingleCopyConstruction => vec![construct_eve_channel_n1(&bob)?],
            };
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(i);
            let rep = estimate_intrinsic_with_starts(&bd, &c, &starts)?;
            Ok(BinarizedSample {
                bob_p0: bob.p0().to_vec(),
                alice_p0: alice.map(|a| a.p0().to_vec()),
                value: rep.best_value,
            })
        })
        .collect::<Result<_>>()?;
    let worst_index = (0..out.len())
        .max_by(|&a, &b| out[a].value.total_cmp(&out[b].value).then(b.cmp(&a)))
        .expect("nonempty");
    Ok(BinarizedSearchReport {
        mode,
        seed,
        worst_value: out[worst_index].value,
        worst_index,
        samples: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::grw;
    use crate::dist::Axis;
    use crate::measures::conditional_mutual_information;

    fn quick() -> EstimatorConfig {
        EstimatorConfig {
            restarts: 6,
            max_iterations: 300,
            seed: 5,
            ..EstimatorConfig::default()
        }
    }

    fn dist3(nx: usize, ny: usize, nz: usize, w: Vec<f64>) -> JointDistribution<f64> {
        JointDistribution::from_weights(
            vec![
                Axis::new("X", Alphabet::numeric(0, nx as i64 - 1)),
                Axis::new("Y", Alphabet::numeric(0, ny as i64 - 1)),
                Axis::new("Z", Alphabet::numeric(0, nz as i64 - 1)),
            ],
            w,
        )
        .unwrap()
    }

    #[test]
    fn objective_matches_cmi() {
        let d = grw::<f64>();
        let prob = Problem::new(&d).unwrap();
        let c = dirichlet_rows(7, 4, 1, 2);
        let (v, _) = prob.eval(&c, 4, false);
        let ch = Channel::new(d.alphabet("Z").unwrap().clone(), output_alphabet(4), c).unwrap();
        let direct = conditional_mutual_information(&ch.apply(&d, "Z").unwrap(), "X", "Y", "Z").unwrap();
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = grw::<f64>();
        let prob = Problem::new(&d).unwrap();
        let c = dirichlet_rows(7, 3, 9, 0);
        let (_, logs) = prob.eval(&c, 3, true);
        let g = prob.gradient(&c, &logs);
        let h = 1e-6;
        for (z, k) in [(0, 0), (3, 2), (6, 1)] {
            let mut up = c.clone();
            up[z][k] += h;
            let mut dn = c.clone();
            dn[z][k] -= h;
            let fd = (prob.eval(&up, 3, false).0 - prob.eval(&dn, 3, false).0) / (2.0 * h);
            assert!((fd - g[z][k]).abs() < 1e-6, "{fd} vs {}", g[z][k]);
        }
    }

    #[test]
    fn conditionally_independent_input_is_zero() {
        // X and Y independent within each Z slice
        let px = [[0.2, 0.8], [0.6, 0.4]];
        let py = [[0.5, 0.5], [0.1, 0.9]];
        let mut w = vec![0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    w[(x * 2 + y) * 2 + z] = 0.5 * px[z][x] * py[z][y];
                }
            }
        }
        let rep = estimate_intrinsic(&dist3(2, 2, 2, w), &quick()).unwrap();
        assert!(rep.best_value < 1e-6);
        assert!(rep.restarts[0].initial_value < 1e-12);
    }

    #[test]
    fn useless_eve_keeps_one_bit() {
        // X = Y a fair bit, Z an independent fair coin
        let w = vec![0.25, 0.25, 0.0, 0.0, 0.0, 0.0, 0.25, 0.25];
        let rep = estimate_intrinsic(&dist3(2, 2, 2, w), &quick()).unwrap();
        for v in &rep.per_restart_values {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn report_contracts_on_candidate() {
        let d = grw::<f64>();
        let rep = estimate_intrinsic(&d, &quick()).unwrap();
        assert!(rep.best_value <= rep.baseline + 1e-9);
        assert!(rep.best_value > 1e-3);
        assert_eq!(rep.best_value, rep.per_restart_values.iter().copied().fold(f64::INFINITY, f64::min));
        for r in &rep.restarts {
            assert!(r.value <= r.initial_value);
        }
        let again = estimate_intrinsic(&d, &quick()).unwrap();
        assert_eq!(rep.to_json().to_string(), again.to_json().to_string());
    }

    #[test]
    fn traces_never_increase() {
        let mut cfg = quick();
        cfg.traces = true;
        let rep = estimate_intrinsic(&grw::<f64>(), &cfg).unwrap();
        for r in &rep.restarts {
            let t = r.trace.as_ref().unwrap();
            assert!(t.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn sweep_is_monotone() {
        let reps = estimate_sweep(&grw::<f64>(), &[4, 1, 2, 7], &quick()).unwrap();
        assert_eq!(reps.iter().map(|r| r.output_size).collect::<Vec<_>>(), vec![1, 2, 4, 7]);
        for w in reps.windows(2) {
            assert!(w[1].best_value <= w[0].best_value);
        }
        // one output: Zbar constant, so the value is I(X:Y)
        let mi = crate::measures::mutual_information(&grw::<f64>(), "X", "Y").unwrap();
        assert!((reps[0].best_value - mi).abs() < 1e-12);
    }

    #[test]
    fn single_copy_construction_start_is_exact() {
        let d = grw::<f64>();
        let bob = Binarization::new(Alphabet::numeric(1, 3), vec![0.3, 0.9, 0.05]).unwrap();
        let bd = bob.apply(&d, "Y").unwrap();
        let start = construct_eve_channel_n1(&bob).unwrap();
        let rep = estimate_intrinsic_with_starts(&bd, &quick(), &[start]).unwrap();
        let given = rep.restarts.last().unwrap();
        assert_eq!(given.start, "given");
        assert!(given.initial_value < 1e-9);
        assert!(rep.best_value < 1e-9);
    }

    #[test]
    fn rejects_bad_starts_and_configs() {
        let d = grw::<f64>();
        let wrong = Channel::identity(&Alphabet::numeric(0, 2));
        assert!(estimate_intrinsic_with_starts(&d, &quick(), &[wrong]).is_err());
        let mut cfg = quick();
        cfg.restarts = 0;
        assert!(estimate_intrinsic(&d, &cfg).is_err());
    }

    #[test]
    fn binarized_search_modes() {
        let d = grw::<f64>();
        let rep = binarized_independence_search(&d, 3, BinarizeMode::BobOnly, StartHint::SingleCopyConstruction, &quick(), 1).unwrap();
        assert!(rep.worst_value < 1e-6);
        assert_eq!(rep.samples.len(), 3);
        let both = binarized_independence_search(&d, 2, BinarizeMode::Both, StartHint::None, &quick(), 1).unwrap();
        assert!(both.samples.iter().all(|s| s.alice_p0.is_some()));
    }
}
