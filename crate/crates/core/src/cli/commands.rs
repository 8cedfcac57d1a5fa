//! The four subcommands as library functions returning their outputs.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Bound, DecoderKind, Prepared, Units};
use super::output::{csv_text, serialize_pmf, sig9, ExponentRow, EXPONENT_HEADER};
use super::svg::{Chart, Series};
use crate::error::{Error, Result};
use crate::gld::{self, DecodingMetric};
use crate::lab::{estimate_error, exact_error, Decoder, HccCode};
use crate::ml;
use crate::opt::ExponentResult;
use crate::prob::{RatePair, User};
use crate::rc;
use crate::verify::{inequality_suite, oracle_suite, Check, SuiteOptions};

/// Slack of the dominance checks drawn by `compare`.
pub const DOMINANCE_TOLERANCE: f64 = 5e-3;

/// Largest `trials x codewords^2 x n` a simulation may cost.
const SIMULATION_BUDGET: f64 = 1e11;

pub fn compute_bound(bound: Bound, rates: RatePair, p: &Prepared) -> Result<ExponentResult> {
    let (e, ch, cfg, g) = (&p.ensemble, &p.channel, &p.solver, &p.config.metric);
    match bound {
        Bound::RcWeak => rc::e_weak_rc(rates, e, ch, cfg),
        Bound::RcStrong => rc::e_strong_rc(rates, e, ch, cfg),
        Bound::Ml1Weak => ml::e_weak_ml1(rates, e, ch, cfg),
        Bound::Ml1Strong => ml::e_strong_ml1(rates, e, ch, cfg),
        Bound::Ml2Weak => ml::e_weak_ml2(rates, e, ch, cfg),
        Bound::Ml2Strong => ml::e_strong_ml2(rates, e, ch, cfg),
        Bound::GldWeak => gld::e_weak_gld(rates, e, ch, g, cfg),
        Bound::GldStrong => gld::e_strong_gld(rates, e, ch, g, cfg),
    }
}

/// One evaluated `(rates, bound)` cell of a sweep.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub rates: RatePair,
    pub bound: Bound,
    pub result: ExponentResult,
    pub wall_ms: u64,
}

/// Every bound at every rate point, computed on a pool of `jobs` threads
/// and returned in input order (points outer, bounds inner).
pub fn sweep(p: &Prepared, jobs: Option<usize>, timing: bool) -> Result<Vec<Evaluation>> {
    let tasks: Vec<(RatePair, Bound)> = p
        .points
        .iter()
        .flat_map(|&r| p.config.bounds.iter().map(move |&b| (r, b)))
        .collect();
    let run = || {
        tasks
            .par_iter()
            .map(|&(rates, bound)| {
                let t = Instant::now();
                let result = compute_bound(bound, rates, p)?;
                let wall_ms = if timing { t.elapsed().as_millis() as u64 } else { 0 };
                Ok(Evaluation {
                    rates,
                    bound,
                    result,
                    wall_ms,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::OutOfRange(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn rows(evals: &[Evaluation], components: bool) -> Vec<ExponentRow> {
    let mut out = Vec::new();
    for ev in evals {
        let r = &ev.result;
        let mut argmin = r.argmin.as_ref().map(serialize_pmf).unwrap_or_default();
        if let Some(t) = r.param {
            argmin = format!("param={} {argmin}", sig9(t)).trim_end().to_string();
        }
        out.push(ExponentRow {
            ry_nats: sig9(ev.rates.r_y),
            rz_nats: sig9(ev.rates.r_z),
            bound: ev.bound.name().into(),
            value_nats: sig9(r.value),
            value_clamped: sig9(r.clamped()),
            argmin_serialized: argmin,
            solver_status: r.status.to_string(),
            wall_ms: ev.wall_ms,
        });
        if components {
            for (name, v) in &r.components {
                out.push(ExponentRow {
                    ry_nats: sig9(ev.rates.r_y),
                    rz_nats: sig9(ev.rates.r_z),
                    bound: format!("{}:{name}", ev.bound),
                    value_nats: sig9(*v),
                    value_clamped: sig9(v.max(0.0)),
                    argmin_serialized: String::new(),
                    solver_status: r.status.to_string(),
                    wall_ms: 0,
                });
            }
        }
    }
    out
}

/// CSV of a sweep.
pub fn exponent_csv(p: &Prepared, evals: &[Evaluation]) -> Result<String> {
    csv_text(&EXPONENT_HEADER, &rows(evals, p.config.components))
}

pub fn cmd_exponent(p: &Prepared, jobs: Option<usize>, timing: bool) -> Result<String> {
    exponent_csv(p, &sweep(p, jobs, timing)?)
}

/// A dominance the theory guarantees: `upper >= lower` for the run's metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dominance {
    pub upper: Bound,
    pub lower: Bound,
}

/// Dominances that apply to the selected bounds and metric: the likelihood
/// GLD bound over ML1 and the unit mutual-information GLD bound over random
/// coding, both for the weak user.
pub fn declared_dominances(bounds: &[Bound], metric: &DecodingMetric) -> Vec<Dominance> {
    let mut out = Vec::new();
    let has = |b| bounds.contains(&b);
    if has(Bound::GldWeak) {
        if *metric == DecodingMetric::Likelihood && has(Bound::Ml1Weak) {
            out.push(Dominance {
                upper: Bound::GldWeak,
                lower: Bound::Ml1Weak,
            });
        }
        if *metric == (DecodingMetric::MutualInfo { beta: 1.0 }) && has(Bound::RcWeak) {
            out.push(Dominance {
                upper: Bound::GldWeak,
                lower: Bound::RcWeak,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub rates: RatePair,
    pub dominance: Dominance,
    pub upper: f64,
    pub lower: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub table: String,
    pub csv: String,
    pub svg: String,
    pub violations: Vec<Violation>,
}

pub fn cmd_compare(p: &Prepared, jobs: Option<usize>, timing: bool, units: Units) -> Result<Comparison> {
    let bounds = &p.config.bounds;
    let mut distinct = bounds.clone();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Parse("compare needs at least two distinct bounds".into()));
    }
    let evals = sweep(p, jobs, timing)?;
    let k = bounds.len();
    let scale = units.scale();
    let u = units.name();
    let dominances = declared_dominances(bounds, &p.config.metric);
    let mut table = String::new();
    let mut violations = Vec::new();
    for chunk in evals.chunks(k) {
        let r = chunk[0].rates;
        let mut order: Vec<&Evaluation> = chunk.iter().collect();
        order.sort_by(|a, b| b.result.value.total_cmp(&a.result.value).then(a.bound.cmp(&b.bound)));
        let cells: Vec<String> = order
            .iter()
            .map(|e| format!("{} {}", e.bound, sig9(e.result.value / scale)))
            .collect();
        let _ = writeln!(
            table,
            "R_y={} R_z={} {u}: {}",
            sig9(r.r_y / scale),
            sig9(r.r_z / scale),
            cells.join(" >= ")
        );
        let value = |b: Bound| chunk.iter().find(|e| e.bound == b).map(|e| e.result.value);
        for d in &dominances {
            if let (Some(hi), Some(lo)) = (value(d.upper), value(d.lower)) {
                if hi < lo - DOMINANCE_TOLERANCE {
                    let _ = writeln!(
                        table,
                        "  VIOLATION {} < {} by {} {u}",
                        d.upper,
                        d.lower,
                        sig9((lo - hi) / scale)
                    );
                    violations.push(Violation {
                        rates: r,
                        dominance: *d,
                        upper: hi,
                        lower: lo,
                    });
                }
            }
        }
    }
    let _ = writeln!(
        table,
        "{} rate points, {} declared dominances, {} violations",
        p.points.len(),
        dominances.len(),
        violations.len()
    );
    let chart = comparison_chart(p, &evals, &violations, units);
    Ok(Comparison {
        table,
        csv: exponent_csv(p, &evals)?,
        svg: chart.render(),
        violations,
    })
}

fn comparison_chart(p: &Prepared, evals: &[Evaluation], violations: &[Violation], units: Units) -> Chart {
    let scale = units.scale();
    let mut rzs: Vec<f64> = p.points.iter().map(|r| r.r_z).collect();
    rzs.dedup_by(|a, b| a == b);
    let mut series = Vec::new();
    for &rz in &rzs {
        for &b in &p.config.bounds {
            if series
                .iter()
                .any(|s: &Series| s.label == label(b, rz, rzs.len(), units))
            {
                continue;
            }
            let points = evals
                .iter()
                .filter(|e| e.bound == b && e.rates.r_z == rz)
                .map(|e| (e.rates.r_y / scale, e.result.value / scale))
                .collect();
            series.push(Series {
                label: label(b, rz, rzs.len(), units),
                points,
            });
        }
    }
    Chart {
        title: format!("Error exponents vs R_y, metric {}", p.config.metric.name()),
        x_label: format!("R_y ({})", units.name()),
        y_label: format!("exponent ({})", units.name()),
        series,
        marks: violations
            .iter()
            .map(|v| (v.rates.r_y / scale, v.upper / scale))
            .collect(),
    }
}

fn label(b: Bound, rz: f64, n_rz: usize, units: Units) -> String {
    if n_rz > 1 {
        format!("{b} R_z={}", (rz / units.scale() * 1e4).round() / 1e4)
    } else {
        b.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct SimulationRow {
    n: usize,
    ry_nats: String,
    rz_nats: String,
    ry_realized: String,
    rz_realized: String,
    m_z: usize,
    m_y: usize,
    decoder: String,
    user: String,
    mode: String,
    trials: u64,
    max_error: String,
    max_half_width: String,
    avg_error: String,
    avg_half_width: String,
}

const SIMULATION_HEADER: [&str; 15] = [
    "n",
    "ry_nats",
    "rz_nats",
    "ry_realized",
    "rz_realized",
    "m_z",
    "m_y",
    "decoder",
    "user",
    "mode",
    "trials",
    "max_error",
    "max_half_width",
    "avg_error",
    "avg_half_width",
];

/// Samples one code per `(n, rate point)` and estimates its error
/// probabilities; the CSV starts with a `# seed=` comment.
pub fn cmd_simulate(p: &Prepared, jobs: Option<usize>) -> Result<String> {
    let sim = &p.config.simulate;
    let decoder = match sim.decoder {
        DecoderKind::Ml => Decoder::MlStrong,
        DecoderKind::Bin => Decoder::BinWeak,
        DecoderKind::Gld => Decoder::Gld {
            metric: p.config.metric.clone(),
            user: sim.user,
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut rows = Vec::new();
    let body = |rows: &mut Vec<SimulationRow>, rng: &mut ChaCha8Rng| -> Result<()> {
        for &n in &sim.n {
            for &rates in &p.points {
                let mut sub = ChaCha8Rng::seed_from_u64(rng.gen());
                let code = HccCode::sample(&p.ensemble, rates, n, &mut sub)?;
                let words = (code.m_z() * code.m_y()) as f64;
                let est = if sim.exhaustive {
                    exact_error(&code, &p.channel, &decoder)?
                } else {
                    let cost = sim.trials as f64 * words * words * n as f64;
                    if cost > SIMULATION_BUDGET {
                        return Err(Error::BudgetExceeded(format!(
                            "{} trials on {words} codewords at n = {n}",
                            sim.trials
                        )));
                    }
                    estimate_error(&code, &p.channel, &decoder, sim.trials, &mut sub)?
                };
                let real = code.realized_rates();
                rows.push(SimulationRow {
                    n,
                    ry_nats: sig9(rates.r_y),
                    rz_nats: sig9(rates.r_z),
                    ry_realized: sig9(real.r_y),
                    rz_realized: sig9(real.r_z),
                    m_z: code.m_z(),
                    m_y: code.m_y(),
                    decoder: format!("{:?}", sim.decoder).to_lowercase(),
                    user: match decoder.user() {
                        User::Strong => "strong".into(),
                        User::Weak => "weak".into(),
                    },
                    mode: if sim.exhaustive {
                        "exact".into()
                    } else {
                        "monte-carlo".into()
                    },
                    trials: if sim.exhaustive { 0 } else { sim.trials },
                    max_error: sig9(est.max_error),
                    max_half_width: sig9(est.max_half_width),
                    avg_error: sig9(est.avg_error),
                    avg_half_width: sig9(est.avg_half_width),
                });
            }
        }
        Ok(())
    };
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::OutOfRange(format!("thread pool: {e}")))?
            .install(|| body(&mut rows, &mut rng))?,
        None => body(&mut rows, &mut rng)?,
    }
    Ok(format!("# seed={}\n{}", p.seed, csv_text(&SIMULATION_HEADER, &rows)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpSummary {
    pub op: String,
    pub checks: usize,
    pub failed: usize,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifySummary {
    pub passed: bool,
    pub seed: u64,
    pub total: usize,
    pub failed: usize,
    pub ops: Vec<OpSummary>,
    pub failures: Vec<Check>,
}

/// Oracle suite on random binary instances plus the dominance checks on the
/// configured channel and rate grid.
pub fn cmd_verify(p: &Prepared) -> Result<VerifySummary> {
    let binary = p.channel.nx() == 2 && p.channel.w1().n_to() == 2 && p.channel.w2().n_to() == 2;
    if !binary {
        return Err(Error::Parse("verify needs binary input and output alphabets".into()));
    }
    let v = &p.config.verify;
    let opts = SuiteOptions {
        instances: v.instances,
        seed: p.seed,
        tolerance: v.tolerance,
        ops: v.ops.clone(),
    };
    let mut checks = oracle_suite(&opts, &p.solver)?;
    let slack = v.tolerance.unwrap_or(v.dominance_tolerance);
    checks.extend(inequality_suite(&p.ensemble, &p.channel, &p.points, slack, &p.solver)?);
    let mut ops: Vec<OpSummary> = Vec::new();
    for c in &checks {
        let err = if c.value == c.reference {
            0.0
        } else {
            (c.value - c.reference).abs()
        };
        let err = if c.suite == "inequality" {
            (c.reference - c.value).max(0.0)
        } else {
            err
        };
        match ops.iter_mut().find(|o| o.op == c.op) {
            Some(o) => {
                o.checks += 1;
                o.failed += usize::from(!c.passed);
                o.max_abs_error = o.max_abs_error.max(err);
            }
            None => ops.push(OpSummary {
                op: c.op.clone(),
                checks: 1,
                failed: usize::from(!c.passed),
                max_abs_error: err,
            }),
        }
    }
    let failures: Vec<Check> = checks.iter().filter(|c| !c.passed).cloned().collect();
    Ok(VerifySummary {
        passed: failures.is_empty(),
        seed: p.seed,
        total: checks.len(),
        failed: failures.len(),
        ops,
        failures,
    })
}
