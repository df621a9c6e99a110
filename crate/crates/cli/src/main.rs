use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use boundsec::candidates::{grw, rw};
use boundsec::feasibility::{
    random_feasibility_rate, ybar_binarization, ybar_binarization_unscaled_weights, ybar_falsification_search,
    ChannelShape, MatrixSampler,
};
use boundsec::intrinsic::{
    binarized_independence_search, estimate_intrinsic, estimate_sweep, BinarizeMode, EstimatorConfig, StartHint,
};
use boundsec::itv::{transform_generator_rank, WeightedItv};
use boundsec::measures::{
    conditional_mutual_information, entropy_of, independence_residual, mutual_information, normalized_violation,
};
use boundsec::verify::{self, VerifyOptions, NAMES};
use boundsec::{Error, JointDistribution, EQ_TOL};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "boundsec", version, about = "Seeded verifications and searches for tripartite distributions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Global {
    /// Seed for every random draw; a random seed is drawn and logged when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print `{manifest, report}` as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Also write `{manifest, report}` to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Main sample count; overrides the documented default.
    #[arg(long, global = true, visible_alias = "n")]
    samples: Option<usize>,
    /// Exploratory tolerance; verifications keep their pinned tolerances.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one information measure of a distribution.
    Measures {
        /// Distribution JSON file, `builtin:grw` or `builtin:rw?a=<a>`.
        dist: String,
        measure: Measure,
        /// Axis names: one or more for entropy, two for mi, three for the conditional measures.
        axes: Vec<String>,
    },
    /// Run a named verification; exits nonzero if any check fails.
    Verify {
        /// One of the verification names, or `all`.
        name: String,
    },
    /// Seeded searches and experiments.
    Search {
        #[command(subcommand)]
        kind: Search,
    },
    /// Upper-bound `min_C I(X:Y|C(Z))` by multi-start descent.
    Estimate {
        dist: String,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 2000)]
        iterations: usize,
        /// Eve's output size; defaults to `|Z|`.
        #[arg(long)]
        output_size: Option<usize>,
        /// Comma-separated output sizes for a warm-started sweep.
        #[arg(long, value_delimiter = ',', conflicts_with = "output_size")]
        sizes: Vec<usize>,
        #[arg(long)]
        traces: bool,
    },
    /// Print a distribution in its JSON format.
    Show { dist: String },
}

#[derive(Subcommand, Debug)]
enum Search {
    /// Fraction of random two-copy Bob tables with a feasible Eve channel.
    Rate {
        #[arg(long, default_value = "uniform")]
        sampler: String,
        #[arg(long, default_value = "coarsening")]
        shape: String,
    },
    /// Largest estimated `I(Xbar:Ybar|Zbar)` over random binarizations.
    Binarized {
        #[arg(long, default_value = "builtin:grw")]
        dist: String,
        #[arg(long, value_enum, default_value_t = ModeArg::BobOnly)]
        mode: ModeArg,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        /// Add the explicit single-copy channel as a start (3x3 candidate, Bob only).
        #[arg(long)]
        single_copy_start: bool,
    },
    /// Smallest independence violation over the parameterized channels of the 4x4 family.
    Ybar {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, value_enum, default_value_t = YbarBin::Rescaled)]
        binarization: YbarBin,
    },
    /// Rank of the line-transformation generators on `4^N` tables.
    Rank {
        #[arg(long = "N")]
        n: usize,
        /// Four comma-separated weights of the averaging target; uniform by default.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Measure {
    Entropy,
    Mi,
    Cmi,
    Residual,
    Violation,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    BobOnly,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum YbarBin {
    Rescaled,
    Unscaled,
}

/// What a command produced: the JSON report, the human rendering, and
/// whether every assertion held.
struct Outcome {
    report: Value,
    summary: Value,
    text: String,
    passed: bool,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    parameters: Value,
    seed: u64,
    seed_source: &'static str,
    version: &'static str,
    wall_clock_seconds: f64,
    summary: Value,
}

fn load(source: &str) -> Result<JointDistribution, Error> {
    if let Some(name) = source.strip_prefix("builtin:") {
        let (base, query) = name.split_once('?').unwrap_or((name, ""));
        return match base {
            "grw" if query.is_empty() => Ok(grw()),
            "rw" => {
                let a = match query {
                    "" => 0.125,
                    q => q
                        .strip_prefix("a=")
                        .and_then(|v| v.parse::<f64>().ok())
                        .ok_or_else(|| Error::Parse(format!("bad builtin query `{q}`; expected a=<number>")))?,
                };
                rw(a)
            }
            _ => Err(Error::Parse(format!(
                "unknown builtin `{name}`; valid: builtin:grw, builtin:rw?a=<a>"
            ))),
        };
    }
    let text = fs::read_to_string(source).map_err(|e| Error::Parse(format!("{source}: {e}")))?;
    JointDistribution::from_json_str(&text).map_err(|e| Error::Parse(format!("{source}: {e}")))
}

fn measures(dist: &str, measure: Measure, axes: &[String], tol: f64) -> Result<Outcome, Error> {
    let d = load(dist)?;
    let ax: Vec<&str> = axes.iter().map(String::as_str).collect();
    let arity = |n: usize| -> Result<(), Error> {
        if ax.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{measure:?} takes {n} axes, got {}", ax.len())))
        }
    };
    let value = match measure {
        Measure::Entropy => {
            if ax.is_empty() {
                return Err(Error::InvalidArgument("entropy needs at least one axis".into()));
            }
            entropy_of(&d, &ax)?
        }
        Measure::Mi => {
            arity(2)?;
            mutual_information(&d, ax[0], ax[1])?
        }
        Measure::Cmi => {
            arity(3)?;
            conditional_mutual_information(&d, ax[0], ax[1], ax[2])?
        }
        Measure::Residual => {
            arity(3)?;
            independence_residual(&d, ax[0], ax[1], ax[2])?
        }
        Measure::Violation => {
            arity(3)?;
            normalized_violation(&d, ax[0], ax[1], ax[2])?
        }
    };
    let zero = value.abs() < tol;
    Ok(Outcome {
        report: json!({ "measure": format!("{measure:?}").to_lowercase(), "axes": axes, "value": value, "zero_within_tol": zero, "tol": tol }),
        summary: json!({ "value": value }),
        text: format!("{measure:?}({}) = {value:.15}", axes.join(", ")),
        passed: true,
    })
}

fn run_verify(name: &str, seed: u64, samples: Option<usize>) -> Result<Outcome, Error> {
    let names: Vec<&str> = if name == "all" { NAMES.to_vec() } else { vec![name] };
    let mut reports = Vec::new();
    let mut text = String::new();
    for n in names {
        let rep = verify::run(n, VerifyOptions { seed, samples })?;
        text.push_str(&format!(
            "{} {} ({} samples, {:.2} s)\n",
            if rep.passed { "PASS" } else { "FAIL" },
            rep.name,
            rep.samples,
            rep.seconds
        ));
        if let Some(status) = rep.details.pointer("/outcome/status").and_then(Value::as_str) {
            text.push_str(&format!("  status: {}\n", status.to_uppercase()));
        }
        for c in &rep.checks {
            text.push_str(&format!(
                "  [{}] {}: {:e} {}\n",
                if c.passed { "ok" } else { "FAIL" },
                c.label,
                c.value,
                c.condition
            ));
        }
        reports.push(rep);
    }
    let passed = reports.iter().all(|r| r.passed);
    let summary = json!(reports.iter().map(|r| json!({ "name": r.name, "passed": r.passed })).collect::<Vec<_>>());
    let report = if reports.len() == 1 {
        reports[0].to_json()
    } else {
        json!(reports.iter().map(|r| r.to_json()).collect::<Vec<_>>())
    };
    Ok(Outcome {
        report,
        summary,
        text: text.trim_end().to_string(),
        passed,
    })
}

fn search(kind: &Search, seed: u64, samples: Option<usize>, tol: Option<f64>) -> Result<Outcome, Error> {
    match kind {
        Search::Rate { sampler, shape } => {
            let rep = random_feasibility_rate(
                samples.unwrap_or(2000),
                seed,
                MatrixSampler::parse(sampler)?,
                ChannelShape::parse(shape)?,
            )?;
            let flag = rep.flag();
            let mut text = format!(
                "rate {:.4} ({} / {} feasible, {} unverified) sampler={} shape={}",
                rep.rate,
                rep.feasible,
                rep.samples,
                rep.unverified,
                rep.sampler.name(),
                rep.shape.name()
            );
            if let Some(f) = &flag {
                text.push_str(&format!("\nflag: {f}"));
            }
            let mut report = serde_json::to_value(&rep)?;
            report["flag"] = json!(flag);
            Ok(Outcome {
                summary: json!({ "rate": rep.rate, "unverified": rep.unverified, "flagged": flag.is_some() }),
                report,
                text,
                passed: true,
            })
        }
        Search::Binarized {
            dist,
            mode,
            restarts,
            iterations,
            single_copy_start,
        } => {
            let d = load(dist)?;
            let cfg = EstimatorConfig {
                restarts: *restarts,
                max_iterations: *iterations,
                seed,
                tolerance: tol.unwrap_or(EstimatorConfig::default().tolerance),
                ..EstimatorConfig::default()
            };
            let mode = match mode {
                ModeArg::BobOnly => BinarizeMode::BobOnly,
                ModeArg::Both => BinarizeMode::Both,
            };
            let hint = if *single_copy_start {
                StartHint::SingleCopyConstruction
            } else {
                StartHint::None
            };
            let rep = binarized_independence_search(&d, samples.unwrap_or(20), mode, hint, &cfg, seed)?;
            Ok(Outcome {
                text: format!(
                    "worst estimated I(Xbar:Ybar|Zbar) = {:.3e} at sample {} of {}",
                    rep.worst_value,
                    rep.worst_index,
                    rep.samples.len()
                ),
                summary: json!({ "worst_value": rep.worst_value, "worst_index": rep.worst_index }),
                report: serde_json::to_value(&rep)?,
                passed: true,
            })
        }
        Search::Ybar { a, binarization } => {
            let bob = match binarization {
                YbarBin::Rescaled => ybar_binarization(*a)?,
                YbarBin::Unscaled => ybar_binarization_unscaled_weights(*a)?,
            };
            let rep = ybar_falsification_search(*a, &bob, samples.unwrap_or(10_000), seed)?;
            Ok(Outcome {
                text: format!(
                    "a = {}, Bob p0 = {:?}: min normalized violation {:.6e} over {} channels",
                    rep.a, rep.p0, rep.min_violation, rep.samples
                ),
                summary: json!({ "min_violation": rep.min_violation }),
                report: serde_json::to_value(&rep)?,
                passed: true,
            })
        }
        Search::Rank { n, weights } => {
            let ups = match weights.as_slice() {
                [] => WeightedItv::uniform(),
                [a, b, c, d] => WeightedItv::new([*a, *b, *c, *d])?,
                w => {
                    return Err(Error::InvalidArgument(format!("--weights needs 4 values, got {}", w.len())));
                }
            };
            let rep = transform_generator_rank(*n, &ups)?;
            Ok(Outcome {
                text: format!(
                    "N={}: {} lines, {} generators, ambient {}, rank {}{}",
                    rep.n,
                    rep.lines,
                    rep.generators,
                    rep.ambient_dim,
                    rep.rank,
                    rep.redundant_lines
                        .map(|r| format!(", {r} lines redundant"))
                        .unwrap_or_default()
                ),
                summary: json!({ "rank": rep.rank, "generators": rep.generators }),
                report: serde_json::to_value(&rep)?,
                passed: true,
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    dist: &str,
    seed: u64,
    restarts: usize,
    iterations: usize,
    output_size: Option<usize>,
    sizes: &[usize],
    traces: bool,
    tol: Option<f64>,
) -> Result<Outcome, Error> {
    let d = load(dist)?;
    let cfg = EstimatorConfig {
        output_size,
        restarts,
        max_iterations: iterations,
        seed,
        tolerance: tol.unwrap_or(EstimatorConfig::default().tolerance),
        traces,
        ..EstimatorConfig::default()
    };
    let reports = if sizes.is_empty() {
        vec![estimate_intrinsic(&d, &cfg)?]
    } else {
        estimate_sweep(&d, sizes, &cfg)?
    };
    let text = reports
        .iter()
        .map(|r| {
            format!(
                "|Zbar| = {}: best {:.6e} (restart {}), I(X:Y|Z) = {:.6e}, status {}",
                r.output_size, r.best_value, r.best_restart, r.baseline, r.status
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let summary = json!(reports
        .iter()
        .map(|r| json!({ "output_size": r.output_size, "best_value": r.best_value }))
        .collect::<Vec<_>>());
    let report = if reports.len() == 1 {
        reports[0].to_json()
    } else {
        json!(reports.iter().map(|r| r.to_json()).collect::<Vec<_>>())
    };
    Ok(Outcome {
        report,
        summary,
        text,
        passed: true,
    })
}

fn dispatch(cli: &Cli, seed: u64) -> Result<(String, Value, Outcome), Error> {
    let g = &cli.global;
    Ok(match &cli.command {
        Command::Measures { dist, measure, axes } => (
            "measures".into(),
            json!({ "dist": dist, "measure": format!("{measure:?}").to_lowercase(), "axes": axes, "tol": g.tol }),
            measures(dist, *measure, axes, g.tol.unwrap_or(EQ_TOL))?,
        ),
        Command::Verify { name } => {
            if g.tol.is_some() {
                eprintln!("note: --tol is ignored by verify; tolerances are pinned");
            }
            if name != "all" && !NAMES.contains(&name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "unknown verification `{name}`; valid: {}, all",
                    NAMES.join(", ")
                )));
            }
            (
                "verify".into(),
                json!({ "name": name, "samples": g.samples }),
                run_verify(name, seed, g.samples)?,
            )
        }
        Command::Search { kind } => {
            let (name, params) = match kind {
                Search::Rate { sampler, shape } => ("search rate", json!({ "sampler": sampler, "shape": shape })),
                Search::Binarized {
                    dist,
                    mode,
                    restarts,
                    iterations,
                    single_copy_start,
                } => (
                    "search binarized",
                    json!({ "dist": dist, "mode": format!("{mode:?}"), "restarts": restarts,
                            "iterations": iterations, "single_copy_start": single_copy_start }),
                ),
                Search::Ybar { a, binarization } => {
                    ("search ybar", json!({ "a": a, "binarization": format!("{binarization:?}") }))
                }
                Search::Rank { n, weights } => ("search rank", json!({ "N": n, "weights": weights })),
            };
            let mut params = params;
            params["samples"] = json!(g.samples);
            params["tol"] = json!(g.tol);
            (name.into(), params, search(kind, seed, g.samples, g.tol)?)
        }
        Command::Estimate {
            dist,
            restarts,
            iterations,
            output_size,
            sizes,
            traces,
        } => (
            "estimate".into(),
            json!({ "dist": dist, "restarts": restarts, "iterations": iterations,
                    "output_size": output_size, "sizes": sizes, "traces": traces, "tol": g.tol }),
            estimate(dist, seed, *restarts, *iterations, *output_size, sizes, *traces, g.tol)?,
        ),
        Command::Show { dist } => {
            let d = load(dist)?;
            let v = d.to_json();
            (
                "show".into(),
                json!({ "dist": dist }),
                Outcome {
                    text: serde_json::to_string_pretty(&v)?,
                    summary: json!({ "cells": d.len() }),
                    report: v,
                    passed: true,
                },
            )
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (seed, seed_source) = match cli.global.seed {
        Some(s) => (s, "given"),
        None => {
            let s = rand::random::<u64>();
            eprintln!("seed: {s} (random)");
            (s, "random")
        }
    };
    let started = Instant::now();
    let (command, parameters, outcome) = match dispatch(&cli, seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let manifest = RunManifest {
        command,
        parameters,
        seed,
        seed_source,
        version: env!("CARGO_PKG_VERSION"),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        summary: outcome.summary.clone(),
    };
    let full = json!({ "manifest": manifest, "report": outcome.report, "passed": outcome.passed });
    if cli.global.json {
        println!("{}", serde_json::to_string_pretty(&full).expect("json"));
    } else {
        println!("{}", outcome.text);
        eprintln!("manifest: {}", serde_json::to_string(&manifest).expect("json"));
    }
    if let Some(path) = &cli.global.out {
        if let Err(e) = fs::write(path, serde_json::to_string_pretty(&full).expect("json")) {
            eprintln!("error: writing {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
