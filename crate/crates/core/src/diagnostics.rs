//! Empirical checks on finished runs: reverse Hölder estimates, the filter
//! bound, the linear oracle for `p = 2`, and the benchmark harness.

use std::io::{Read, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::Discretization;
use crate::barrier::Barrier;
use crate::config::RunConfig;
use crate::femspace::Sampler;
use crate::pathfollow::{run, PathTrace, RunStatus};
use crate::problems::{build_problem, solve_linear_fem, Problem};

#[derive(Debug, Error)]
pub enum DiagnosticError {
    #[error("iterate is outside the barrier domain")]
    Infeasible,
    #[error("trace has no iterate on the finest grid")]
    MissingData,
    #[error("linear oracle needs p = 2, got p = {0}")]
    NotQuadratic(f64),
    #[error("trace ended on level {got}, expected the finest level {want}")]
    WrongLevel { got: usize, want: usize },
    #[error(transparent)]
    Problem(#[from] crate::problems::ProblemError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Largest sampled reverse Hölder ratio over the elements of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct RhEstimate {
    /// 0-based level of the coarse elements `K`.
    pub level: usize,
    pub max_ratio: f64,
    pub samples: usize,
}

/// `|K| · max_j g_j / Σ_j ω_j g_j` with `g_j = √(F''(Dz)[(Dv)²])` over the
/// fine quadrature nodes inside each element `K` of every level, for
/// `samples` random local polynomials `v` per element. A sampled lower
/// bound on the reverse Hölder constant.
pub fn rh_constant_estimate(
    disc: &Discretization,
    z: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<RhEstimate>, DiagnosticError> {
    let fine = disc.fine_level();
    let fine_sampler = disc.sampler(fine);
    let rows = fine_sampler.rows();
    let arity = rows - 1;
    let nq = fine_sampler.nodes_per_element();
    let w = disc.samples(z);
    let barrier = disc.barrier();
    // Hessians at all fine nodes
    let mut hess = vec![0.0; fine_sampler.num_nodes() * arity * arity];
    let mut grad = vec![0.0; arity];
    for n in 0..fine_sampler.num_nodes() {
        barrier
            .eval_into(&w[n * rows + 1..(n + 1) * rows], &mut grad, &mut hess[n * arity * arity..][..arity * arity])
            .ok_or(DiagnosticError::Infeasible)?;
    }
    let weights = fine_sampler.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for level in 0..=fine {
        let sampler = disc.sampler(level);
        let n_loc = sampler.local_len();
        let coarse = disc.hierarchy().space(level).mesh().num_elements();
        // fine elements grouped by coarse ancestor
        let mut members = vec![Vec::new(); coarse];
        for k in 0..sampler.num_elements() {
            members[sampler.source_element(k)].push(k);
        }
        let mut v = vec![0.0; n_loc];
        let mut dv = vec![0.0; arity];
        let mut best: f64 = 0.0;
        for ks in &members {
            for _ in 0..samples {
                v.iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
                let (mut gmax, mut l1, mut vol) = (0.0f64, 0.0, 0.0);
                for &k in ks {
                    for q in 0..nq {
                        let n = k * nq + q;
                        let block = sampler.block(k, q);
                        for (r, d) in dv.iter_mut().enumerate() {
                            *d = block[(r + 1) * n_loc..(r + 2) * n_loc].iter().zip(&v).map(|(a, b)| a * b).sum();
                        }
                        let h = &hess[n * arity * arity..][..arity * arity];
                        let mut quad = 0.0;
                        for a in 0..arity {
                            for b in 0..arity {
                                quad += dv[a] * h[a * arity + b] * dv[b];
                            }
                        }
                        let g = quad.max(0.0).sqrt();
                        gmax = gmax.max(g);
                        l1 += weights[n] * g;
                        vol += weights[n];
                    }
                }
                if l1 > 0.0 {
                    best = best.max(vol * gmax / l1);
                }
            }
        }
        out.push(RhEstimate {
            level,
            max_ratio: best,
            samples: samples * coarse,
        });
    }
    Ok(out)
}

/// Suboptimality of one recorded iterate against the last one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterGap {
    pub k: usize,
    pub t: f64,
    pub gap: f64,
    /// `2ν|Ω|/t`.
    pub bound: f64,
}

impl FilterGap {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound
    }
}

/// `∫c[z_k] − ∫c[z_ref]` for every finest-grid record, with `z_ref` the
/// iterate at the largest `t` reached.
pub fn filter_gap(trace: &PathTrace, nu: f64, measure: f64) -> Result<Vec<FilterGap>, DiagnosticError> {
    let finest: Vec<_> = trace.records.iter().filter(|r| r.on_finest).collect();
    let reference = finest
        .iter()
        .max_by(|a, b| a.t.total_cmp(&b.t))
        .ok_or(DiagnosticError::MissingData)?
        .cost_integral;
    Ok(finest
        .iter()
        .map(|r| FilterGap {
            k: r.k,
            t: r.t,
            gap: r.cost_integral - reference,
            bound: 2.0 * nu * measure / r.t,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleError {
    /// Max over the Lagrange nodes.
    pub linf: f64,
    /// Discrete `L²` over the fine quadrature.
    pub l2: f64,
}

/// Compares the final `u` of a `p = 2` run with the linear finite element
/// solution of `2∇·∇u = f` sharing its boundary values.
pub fn p2_oracle_error(prob: &Problem, trace: &PathTrace) -> Result<OracleError, DiagnosticError> {
    if prob.spec.p != 2.0 {
        return Err(DiagnosticError::NotQuadratic(prob.spec.p));
    }
    let finest = prob.num_levels();
    if trace.level != finest {
        return Err(DiagnosticError::WrongLevel { got: trace.level, want: finest });
    }
    let space = prob.hierarchy.finest();
    let f = prob.spec.forcing;
    let oracle = solve_linear_fem(space, &prob.rule, 1.0, |_| f, &trace.z)?;
    let nu = space.num_u_nodes();
    let mut diff = vec![0.0; space.full_len()];
    for i in 0..nu {
        diff[i] = trace.z[i] - oracle[i];
    }
    let linf = diff[..nu].iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let sampler = Sampler::own(space, &prob.rule);
    let vals = sampler.sample_full(space, &diff);
    let rows = sampler.rows();
    let l2 = sampler
        .weights()
        .iter()
        .enumerate()
        .map(|(n, w)| w * vals[n * rows] * vals[n * rows])
        .sum::<f64>()
        .sqrt();
    Ok(OracleError { linf, l2 })
}

/// One benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub p: f64,
    pub alpha: usize,
    pub cells0: usize,
    pub levels: usize,
    pub theta: f64,
    pub h: f64,
    /// `converged`, `budget` or `solver-failure`.
    pub status: String,
    pub reason: String,
    pub total_newton: usize,
    pub t_steps: usize,
    pub max_step_newton: usize,
    pub min_rho: f64,
    pub final_t: f64,
    pub wall_s: f64,
}

fn status_fields(status: &RunStatus) -> (String, String) {
    match status {
        RunStatus::Converged => ("converged".into(), String::new()),
        RunStatus::BudgetExhausted => ("budget".into(), "wall-clock budget exhausted".into()),
        RunStatus::SolverFailure(e) => ("solver-failure".into(), e.clone()),
    }
}

fn bench_cell(cfg: &RunConfig) -> Result<BenchRow, DiagnosticError> {
    let spec = cfg.problem_spec()?;
    let path = cfg.path_config()?;
    let start = Instant::now();
    let (status, reason, h, trace) = match build_problem(&spec) {
        Ok(prob) => {
            let trace = run(&prob, &path);
            let (s, r) = status_fields(&trace.status);
            (s, r, prob.h(prob.num_levels() - 1), Some(trace))
        }
        Err(e) => ("solver-failure".into(), e.to_string(), f64::NAN, None),
    };
    Ok(BenchRow {
        algorithm: cfg.algorithm.clone(),
        p: cfg.p,
        alpha: cfg.alpha,
        cells0: cfg.cells0,
        levels: cfg.levels,
        theta: cfg.theta,
        h,
        status,
        reason,
        total_newton: trace.as_ref().map_or(0, |t| t.total_newton),
        t_steps: trace.as_ref().map_or(0, |t| t.t_steps().count()),
        max_step_newton: trace.as_ref().map_or(0, |t| t.max_step_newton()),
        min_rho: trace.as_ref().map_or(f64::NAN, |t| t.min_rho()),
        final_t: trace.as_ref().map_or(f64::NAN, |t| t.t),
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every cell of the configuration's `[bench]` matrix concurrently.
/// Rows come back in matrix order; failures are rows, not errors.
pub fn bench(cfg: &RunConfig) -> Result<Vec<BenchRow>, DiagnosticError> {
    let cells = cfg.bench_cells()?;
    cells.par_iter().map(bench_cell).collect()
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<(), DiagnosticError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_bench_csv<R: Read>(r: R) -> Result<Vec<BenchRow>, DiagnosticError> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Outcome of one self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn check_barrier_gradient(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for p in [1.0, 1.5, 2.0, 3.0] {
        let b = crate::barrier::PLapBarrier::<f64>::new(p, 2).expect("valid p");
        for _ in 0..50 {
            let q: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let s = b.lambda(&q) + rng.gen_range(0.01..1.0);
            let w = [q[0], q[1], s];
            let (mut g, mut h) = ([0.0f64; 3], [0.0f64; 9]);
            b.eval_into(&w, &mut g, &mut h).expect("interior point");
            for i in 0..3 {
                let eps = 1e-6 * w[i].abs().max(1e-2);
                let (mut a, mut c) = (w, w);
                a[i] += eps;
                c[i] -= eps;
                let fd = (b.value(&a).unwrap() - b.value(&c).unwrap()) / (2.0 * eps);
                worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
            }
        }
    }
    outcome("barrier gradient vs finite differences", worst < 1e-6, format!("max rel err {worst:.2e}"))
}

fn check_slack_bounds(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let b = crate::barrier::PLapBarrier::<f64>::new(1.5, 2).expect("valid p");
    let mut ok = true;
    for _ in 0..100 {
        let q = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let t = 10f64.powf(rng.gen_range(0.0..6.0));
        let gap = b.slack_for_t(&q, t).expect("valid t") - b.lambda(&q);
        ok &= gap >= (1.0 - 1e-9) / t && gap <= 4.0 * (1.0 + 1e-9) / t;
    }
    let p2 = crate::barrier::PLapBarrier::<f64>::new(2.0, 2).expect("valid p");
    let s0 = p2.slack_for_t(&[0.0, 0.0], 7.0).expect("valid t");
    ok &= (s0 - 3.0 / 7.0).abs() < 1e-10;
    outcome("central slack within [1/t, ν/t] of Λ", ok, format!("s(0) at t = 7: {s0}"))
}

fn check_adaptation() -> CheckOutcome {
    use crate::pathfollow::adapt_stepsize;
    let got = [adapt_stepsize(1.5, 2), adapt_stepsize(1.5, 4), adapt_stepsize(1.5, 7)];
    let ok = got[0] == 2.25 && got[1] == 1.5 && got[2] == 1.5f64.sqrt();
    outcome("step-size adaptation table", ok, format!("{got:?}"))
}

fn check_substrate(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let prob = match build_problem(&crate::problems::ProblemSpec { levels: 3, ..Default::default() }) {
        Ok(p) => p,
        Err(e) => return outcome("mesh, quadrature and prolongation", false, e.to_string()),
    };
    let mut vol_err: f64 = 0.0;
    let mut min_w = f64::INFINITY;
    for l in 0..prob.num_levels() {
        let mesh = prob.hierarchy.meshes().level(l);
        vol_err = vol_err.max((mesh.total_volume() - 1.0).abs());
        min_w = prob.rule.node_weights(mesh).into_iter().fold(min_w, f64::min);
    }
    let disc = prob.discretization(1);
    let coarse = prob.hierarchy.space(0);
    let mut err: f64 = 0.0;
    for _ in 0..10 {
        let z: Vec<f64> = (0..coarse.full_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let direct = disc.sampler(0).sample_full(coarse, &z);
        let prolonged = disc.samples(&prob.hierarchy.prolong_full(0, 1, &z));
        err = direct.iter().zip(&prolonged).fold(err, |m, (a, b)| m.max((a - b).abs()));
    }
    outcome(
        "mesh, quadrature and prolongation",
        vol_err < 1e-12 && min_w > 0.0 && err < 1e-12,
        format!("volume err {vol_err:.1e}, min weight {min_w:.2e}, prolongation err {err:.1e}"),
    )
}

fn check_small_run() -> Vec<CheckOutcome> {
    use crate::pathfollow::PathConfig;
    use crate::problems::{BoundaryData, ProblemSpec};
    let spec = ProblemSpec { p: 2.0, alpha: 1, levels: 2, boundary: BoundaryData::Sine, ..ProblemSpec::default() };
    let prob = match build_problem(&spec) {
        Ok(p) => p,
        Err(e) => return vec![outcome("small p = 2 run", false, e.to_string())],
    };
    let cfg = PathConfig::default();
    let trace = run(&prob, &cfg);
    let mut out = vec![outcome(
        "small p = 2 run converges",
        trace.converged(),
        format!("{:?}, {} Newton steps, t = {:.3e}", trace.status, trace.total_newton, trace.t),
    )];
    let feasible = trace.records.iter().all(|r| r.feasible) && trace.records.iter().all(|r| r.t <= cfg.t_cap);
    out.push(outcome("recorded iterates feasible, t within cap", feasible, String::new()));
    match filter_gap(&trace, prob.barrier.nu(), 1.0) {
        Ok(g) => {
            let worst = g.iter().map(|g| g.gap / g.bound).fold(0.0, f64::max);
            out.push(outcome("filter bound", g.iter().all(FilterGap::holds), format!("max gap/bound {worst:.3}")));
        }
        Err(e) => out.push(outcome("filter bound", false, e.to_string())),
    }
    let again = run(&prob, &cfg);
    out.push(outcome(
        "deterministic trace",
        trace.csv_string(false) == again.csv_string(false),
        String::new(),
    ));
    let linear = build_problem(&ProblemSpec { boundary: BoundaryData::Linear, ..spec });
    match linear.map(|p| (run(&p, &cfg), p)) {
        Ok((tr, p)) => match p2_oracle_error(&p, &tr) {
            Ok(e) => out.push(outcome("linear data reproduced", e.linf < 1e-8, format!("{e:?}"))),
            Err(e) => out.push(outcome("linear data reproduced", false, e.to_string())),
        },
        Err(e) => out.push(outcome("linear data reproduced", false, e.to_string())),
    }
    out
}

/// Fast invariant suite behind `mgb check`.
pub fn self_check() -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = vec![
        check_barrier_gradient(&mut rng),
        check_slack_bounds(&mut rng),
        check_adaptation(),
        check_substrate(&mut rng),
    ];
    out.extend(check_small_run());
    out
}
