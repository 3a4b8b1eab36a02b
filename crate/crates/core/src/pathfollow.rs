//! Path following in `t`: the naive schedules, the multigrid barrier step
//! and its practical wrapper with step-size adaptation.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::assembly::Discretization;
use crate::barrier::Barrier;
use crate::newton::{center_with, CenteringResult, CenteringStatus};
use crate::problems::Problem;

/// Which path-following strategy to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Mgb,
    /// All grid refinements at `t0`, then `t` steps on the finest grid.
    NaiveHThenT,
    /// Grid level `⌈θ log₂ t⌉` clamped to `[1, L]`.
    NaiveTheta,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mgb" => Ok(Self::Mgb),
            "naive-h-then-t" => Ok(Self::NaiveHThenT),
            "naive-theta" => Ok(Self::NaiveTheta),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mgb => "mgb",
            Self::NaiveHThenT => "naive-h-then-t",
            Self::NaiveTheta => "naive-theta",
        })
    }
}

/// Initial value of `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartPolicy {
    Absolute(f64),
    /// `c · h^d` with `h` the finest mesh size.
    MeshScaled(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub algorithm: Algorithm,
    pub theta: f64,
    pub t0: StartPolicy,
    pub rho0: f64,
    pub c_stp: f64,
    pub t_cap: f64,
    /// Centering tolerance on intermediate `t`.
    pub tol: f64,
    /// Centering tolerance on the final `t`.
    pub tol_final: f64,
    pub max_newton: usize,
    /// Newton iterations allowed in the direct fine-grid step.
    pub direct_cap: usize,
    pub budget: Duration,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Mgb,
            theta: 0.25,
            t0: StartPolicy::MeshScaled(1.0),
            rho0: 2.0,
            c_stp: 1.0,
            t_cap: 1e8,
            tol: 1e-3,
            tol_final: 1e-6,
            max_newton: 100,
            direct_cap: 5,
            budget: Duration::from_secs(300),
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho0 > 1.0) || !self.rho0.is_finite() {
            return Err(format!("rho0 = {} must exceed 1", self.rho0));
        }
        if !(self.t_cap > 0.0) || !(self.c_stp > 0.0) {
            return Err("t_cap and c_stp must be positive".into());
        }
        if !(self.tol > 0.0) || !(self.tol_final > 0.0) {
            return Err("tolerances must be positive".into());
        }
        match self.t0 {
            StartPolicy::Absolute(t) | StartPolicy::MeshScaled(t) if !(t > 0.0) || !t.is_finite() => {
                Err(format!("t0 parameter {t} must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// `ρ²` after at most two Newton steps, `ρ` after three to five, `√ρ`
/// after six or more.
pub fn adapt_stepsize(rho: f64, m: usize) -> f64 {
    match m {
        0..=2 => rho * rho,
        3..=5 => rho,
        _ => rho.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Centering of the initial iterate on the coarsest grid.
    Initial,
    /// Prolongation to the next grid and re-centering at the same `t`.
    HRefine,
    /// Increase of `t`.
    TStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectStep {
    NotTried,
    Succeeded,
    Failed,
}

/// Newton work on one level within a step. Level 0 is the direct
/// fine-grid attempt; levels `1..=L` are one-based grid levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    pub iterations: usize,
    pub objective: f64,
    pub decrement: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub kind: StepKind,
    pub t: f64,
    /// `t_k / t_{k-1}` (1 for steps that keep `t`).
    pub ratio: f64,
    /// Step size after adaptation.
    pub rho: f64,
    /// One-based grid level of the iterate after the step.
    pub grid_level: usize,
    pub direct: DirectStep,
    pub levels: Vec<LevelRow>,
    /// `max_ℓ m_{k,ℓ}`.
    pub m: usize,
    pub cum_newton: usize,
    pub wall_ms: f64,
    /// `∫^{(h)} c[z]` on the iterate's grid.
    pub cost_integral: f64,
    pub on_finest: bool,
    /// `min (s - Λ(∇u))` over the quadrature nodes.
    pub margin: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    SolverFailure(String),
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct PathTrace {
    pub algorithm: Algorithm,
    pub records: Vec<StepRecord>,
    pub status: RunStatus,
    /// Final iterate (full layout) and its one-based level.
    pub z: Vec<f64>,
    pub level: usize,
    pub t: f64,
    pub t_stop: f64,
    pub total_newton: usize,
    pub wall: Duration,
}

pub const TRACE_HEADER: [&str; 10] = [
    "k",
    "t",
    "rho",
    "level",
    "newton_iters",
    "direct_step",
    "objective",
    "decrement",
    "cum_newton",
    "wall_ms",
];

impl PathTrace {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn t_steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.kind == StepKind::TStep)
    }

    pub fn max_step_newton(&self) -> usize {
        self.t_steps().map(|r| r.m).max().unwrap_or(0)
    }

    /// Smallest adapted step size over the `t` steps.
    pub fn min_rho(&self) -> f64 {
        self.t_steps().map(|r| r.rho).fold(f64::INFINITY, f64::min)
    }

    /// Trace CSV: one row per level per step, then a `max` summary row.
    /// With `timing = false` the wall clock column is zero, which makes
    /// the output reproducible bit for bit.
    pub fn write_csv<W: Write>(&self, w: W, timing: bool) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRACE_HEADER)?;
        for r in &self.records {
            let ms = if timing { r.wall_ms } else { 0.0 };
            let mut cum = r.cum_newton - r.levels.iter().map(|l| l.iterations).sum::<usize>();
            for l in &r.levels {
                cum += l.iterations;
                out.write_record([
                    r.k.to_string(),
                    r.t.to_string(),
                    r.ratio.to_string(),
                    l.level.to_string(),
                    l.iterations.to_string(),
                    u8::from(l.level == 0).to_string(),
                    l.objective.to_string(),
                    l.decrement.to_string(),
                    cum.to_string(),
                    ms.to_string(),
                ])?;
            }
            let last = r.levels.last();
            out.write_record([
                r.k.to_string(),
                r.t.to_string(),
                r.rho.to_string(),
                "max".to_string(),
                r.m.to_string(),
                u8::from(r.direct == DirectStep::Succeeded).to_string(),
                last.map_or(f64::NAN, |l| l.objective).to_string(),
                last.map_or(f64::NAN, |l| l.decrement).to_string(),
                r.cum_newton.to_string(),
                ms.to_string(),
            ])?;
        }
        out.flush()
    }

    pub fn csv_string(&self, timing: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timing).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Shifts the slack of every element with an infeasible node by the
/// smallest doubling of its deficit that restores feasibility. Returns the
/// number of elements touched.
pub fn inflate_slack(disc: &Discretization, z: &mut [f64]) -> usize {
    let space = disc.hierarchy().space(disc.fine_level());
    let sampler = disc.sampler(disc.fine_level());
    let rows = sampler.rows();
    let nq = sampler.nodes_per_element();
    let barrier = disc.barrier();
    let ns = space.s_local();
    let base = space.num_u_nodes();
    let w = disc.samples(z);
    let mut touched = 0;
    for k in 0..space.mesh().num_elements() {
        let nodes = &w[k * nq * rows..(k + 1) * nq * rows];
        let feasible = |shift: f64| {
            nodes.chunks(rows).all(|n| {
                let mut v = n[1..].to_vec();
                v[rows - 2] += shift;
                barrier.value(&v).is_some()
            })
        };
        if feasible(0.0) {
            continue;
        }
        let deficit = nodes
            .chunks(rows)
            .map(|n| barrier.lambda(&n[1..rows - 1]) - n[rows - 1])
            .fold(0.0, f64::max);
        let mut shift = deficit.max(f64::MIN_POSITIVE) * (1.0 + 1e-12) + 1e-14;
        while !feasible(shift) {
            shift *= 2.0;
        }
        for d in &mut z[base + k * ns..base + (k + 1) * ns] {
            *d += shift;
        }
        touched += 1;
    }
    touched
}

struct Runner<'a> {
    prob: &'a Problem,
    cfg: &'a PathConfig,
    discs: Vec<Option<Discretization>>,
    start: Instant,
    records: Vec<StepRecord>,
    cum: usize,
    t_stop: f64,
}

/// Budget interruptions end the run as such; anything else is a failure.
fn halt(res: &CenteringResult, msg: String) -> RunStatus {
    if res.status == CenteringStatus::Interrupted {
        RunStatus::BudgetExhausted
    } else {
        RunStatus::SolverFailure(msg)
    }
}

/// Result of centering at one level: the new full iterate and its row.
type Centered = (Vec<f64>, LevelRow, CenteringResult);

impl<'a> Runner<'a> {
    fn new(prob: &'a Problem, cfg: &'a PathConfig) -> Self {
        let last = prob.num_levels() - 1;
        let alpha = prob.spec.alpha as i32;
        Self {
            prob,
            cfg,
            discs: vec![None; prob.num_levels()],
            start: Instant::now(),
            records: Vec::new(),
            cum: 0,
            t_stop: cfg.c_stp * prob.h(last).powi(-2 * alpha),
        }
    }

    fn finest(&self) -> usize {
        self.prob.num_levels() - 1
    }

    fn disc(&mut self, level: usize) -> &Discretization {
        if self.discs[level].is_none() {
            self.discs[level] = Some(self.prob.discretization(level));
        }
        self.discs[level].as_ref().unwrap()
    }

    fn built(&self, level: usize) -> &Discretization {
        self.discs[level].as_ref().expect("discretization built")
    }

    fn t0(&self) -> f64 {
        match self.cfg.t0 {
            StartPolicy::Absolute(t) => t,
            StartPolicy::MeshScaled(c) => c * self.prob.h(self.finest()).powi(self.prob.spec.dim as i32),
        }
    }

    fn over_budget(&self) -> bool {
        self.start.elapsed() > self.cfg.budget
    }

    fn is_final(&self, t: f64) -> bool {
        t > self.t_stop || t >= self.cfg.t_cap
    }

    /// Next `t` on the finest grid: `ρ t`, clamped just past the stopping
    /// threshold and to the cap.
    fn next_t(&self, t: f64, rho: f64, clamp_to_stop: bool) -> f64 {
        let mut next = rho * t;
        if clamp_to_stop && next > self.t_stop {
            next = next.min(self.t_stop * (1.0 + 4.0 * f64::EPSILON)).max(t.next_up());
        }
        next.min(self.cfg.t_cap)
    }

    fn tol_for(&self, t: f64, level: usize) -> f64 {
        if level == self.finest() && self.is_final(t) {
            self.cfg.tol_final
        } else {
            self.cfg.tol
        }
    }

    /// Centers `f_h(z + P_ℓ y, t)` on disc `fine` over level `level`.
    fn center_level(&mut self, fine: usize, level: usize, z: &[f64], t: f64, tol: f64, cap: usize) -> Centered {
        self.disc(fine);
        let disc = self.discs[fine].as_ref().unwrap();
        let obj = disc.restrict(level, z, t).expect("level within discretization");
        let n = obj.base().len();
        debug_assert_eq!(n, disc.hierarchy().space(fine).full_len());
        let dim = disc.hierarchy().space(level).free_len();
        let (start, budget) = (self.start, self.cfg.budget);
        let res = center_with(&obj, &vec![0.0; dim], tol, cap, || start.elapsed() > budget);
        let z_new = if res.iterations > 0 { obj.lift(&res.y) } else { z.to_vec() };
        let row = LevelRow {
            level: level + 1,
            iterations: res.iterations,
            objective: res.value,
            decrement: res.decrement,
            converged: res.converged(),
        };
        self.cum += res.iterations;
        (z_new, row, res)
    }

    /// Levels `1..=L` in turn at `t`, each starting where the previous one
    /// ended.
    fn mgb_step(&mut self, z: &[f64], t: f64, tol: f64) -> Result<(Vec<f64>, Vec<LevelRow>), RunStatus> {
        let fine = self.finest();
        let mut z = z.to_vec();
        let mut rows = Vec::new();
        for level in 0..=fine {
            let (next, row, res) = self.center_level(fine, level, &z, t, tol, self.cfg.max_newton);
            let ok = row.converged;
            rows.push(row);
            if !ok {
                return Err(halt(&res, format!("level {} centering {:?} at t = {t:e}", level + 1, res.status)));
            }
            z = next;
        }
        Ok((z, rows))
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        kind: StepKind,
        t: f64,
        ratio: f64,
        rho: f64,
        level: usize,
        direct: DirectStep,
        levels: Vec<LevelRow>,
        z: &[f64],
    ) {
        let m = levels.iter().map(|l| l.iterations).max().unwrap_or(0);
        let on_finest = level == self.finest();
        self.disc(level);
        let disc = self.built(level);
        let cost_integral = disc.cost_integral(z);
        let margin = disc.feasibility_margin(z);
        let feasible = disc.is_feasible(z);
        self.records.push(StepRecord {
            k: self.records.len(),
            kind,
            t,
            ratio,
            rho,
            grid_level: level + 1,
            direct,
            levels,
            m,
            cum_newton: self.cum,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            cost_integral,
            on_finest,
            margin,
            feasible,
        });
    }

    /// Prolongs `z` from `level` to `level + 1`, restores feasibility if the
    /// new nodes require it, and re-centers at `t` with at most `cap` steps.
    fn h_refine(&mut self, z: &[f64], level: usize, t: f64, rho: f64, cap: usize) -> Result<Vec<f64>, RunStatus> {
        let mut zf = self.prob.hierarchy.prolong_full(level, level + 1, z);
        inflate_slack(self.disc(level + 1), &mut zf);
        let tol = self.tol_for(t, level + 1);
        let (zn, row, res) = self.center_level(level + 1, level + 1, &zf, t, tol, cap);
        let ok = row.converged;
        self.record(StepKind::HRefine, t, 1.0, rho, level + 1, DirectStep::NotTried, vec![row], &zn);
        if ok {
            Ok(zn)
        } else {
            Err(halt(&res, format!("h-refinement to level {} failed: {:?}", level + 2, res.status)))
        }
    }

    fn initial(&mut self, t0: f64, rho: f64) -> Result<Vec<f64>, RunStatus> {
        let z = self.prob.initial.clone();
        let tol = self.tol_for(t0, 0);
        let (zn, row, res) = self.center_level(0, 0, &z, t0, tol, self.cfg.max_newton);
        let ok = row.converged;
        self.record(StepKind::Initial, t0, 1.0, rho, 0, DirectStep::NotTried, vec![row], &zn);
        if ok {
            Ok(zn)
        } else {
            Err(halt(&res, format!("initial centering failed: {:?}", res.status)))
        }
    }

    fn finish(self, status: RunStatus, z: Vec<f64>, level: usize, t: f64) -> PathTrace {
        PathTrace {
            algorithm: self.cfg.algorithm,
            total_newton: self.cum,
            wall: self.start.elapsed(),
            records: self.records,
            status,
            z,
            level: level + 1,
            t,
            t_stop: self.t_stop,
        }
    }
}

/// Direct fine-grid centering capped at `direct_cap` iterations, falling
/// back to a multigrid step from `z` when it does not converge.
fn practical_step(run: &mut Runner<'_>, z: &[f64], t: f64, rho: f64) -> Result<(Vec<f64>, f64, f64), RunStatus> {
    let fine = run.finest();
    let t_new = run.next_t(t, rho, true);
    let tol = run.tol_for(t_new, fine);
    let (zd, row, _) = run.center_level(fine, fine, z, t_new, tol, run.cfg.direct_cap);
    let mut rows = vec![LevelRow { level: 0, ..row }];
    let (z_new, direct) = if rows[0].converged {
        (zd, DirectStep::Succeeded)
    } else {
        let (zm, more) = match run.mgb_step(z, t_new, tol) {
            Ok(v) => v,
            Err(e) => {
                run.record(StepKind::TStep, t_new, t_new / t, rho, fine, DirectStep::Failed, rows, z);
                return Err(e);
            }
        };
        rows.extend(more);
        (zm, DirectStep::Failed)
    };
    let m = rows.iter().map(|l| l.iterations).max().unwrap_or(0);
    let rho_new = adapt_stepsize(rho, m);
    run.record(StepKind::TStep, t_new, t_new / t, rho_new, fine, direct, rows, &z_new);
    Ok((z_new, t_new, rho_new))
}

/// Centers once at `t` per level, coarse to fine, then takes practical
/// multigrid steps in `t` on the finest grid until the stopping rule.
pub fn run_mgb(prob: &Problem, cfg: &PathConfig) -> PathTrace {
    let mut run = Runner::new(prob, cfg);
    let fine = run.finest();
    let t0 = run.t0();
    let mut rho = cfg.rho0;
    let mut z = match run.initial(t0, rho) {
        Ok(z) => z,
        Err(e) => {
            let z0 = prob.initial.clone();
            return run.finish(e, z0, 0, t0);
        }
    };
    for level in 0..fine {
        if run.over_budget() {
            return run.finish(RunStatus::BudgetExhausted, z, level, t0);
        }
        match run.h_refine(&z, level, t0, rho, cfg.max_newton) {
            Ok(zn) => z = zn,
            Err(e) => return run.finish(e, z, level, t0),
        }
    }
    let mut t = t0;
    while !run.is_final(t) {
        if run.over_budget() {
            return run.finish(RunStatus::BudgetExhausted, z, fine, t);
        }
        match practical_step(&mut run, &z, t, rho) {
            Ok((zn, tn, rn)) => {
                z = zn;
                t = tn;
                rho = rn;
            }
            Err(e) => return run.finish(e, z, fine, t),
        }
    }
    run.finish(RunStatus::Converged, z, fine, t)
}

/// One multigrid step at `t_next` from a fine-grid iterate, exposed for
/// diagnostics and tests. Returns the new iterate and per-level rows.
pub fn mgb_t_step(
    prob: &Problem,
    cfg: &PathConfig,
    z: &[f64],
    t_next: f64,
) -> Result<(Vec<f64>, Vec<LevelRow>), String> {
    let mut run = Runner::new(prob, cfg);
    run.mgb_step(z, t_next, cfg.tol).map_err(|e| match e {
        RunStatus::SolverFailure(msg) => msg,
        other => format!("{other:?}"),
    })
}

/// Naive path following with the configured schedule. `t` steps adapt the
/// step size; grid refinements re-center at the current `t`.
pub fn run_naive(prob: &Problem, cfg: &PathConfig) -> PathTrace {
    let mut run = Runner::new(prob, cfg);
    let fine = run.finest();
    let t0 = run.t0();
    let mut rho = cfg.rho0;
    let mut z = match run.initial(t0, rho) {
        Ok(z) => z,
        Err(e) => {
            let z0 = prob.initial.clone();
            return run.finish(e, z0, 0, t0);
        }
    };
    let mut level = 0;
    let mut t = t0;
    let target = |t: f64| match cfg.algorithm {
        Algorithm::NaiveTheta => {
            let l = (cfg.theta * t.log2()).ceil();
            (l.clamp(1.0, (fine + 1) as f64) as usize) - 1
        }
        _ => fine,
    };
    loop {
        if run.over_budget() {
            return run.finish(RunStatus::BudgetExhausted, z, level, t);
        }
        if level < fine && (level < target(t) || run.is_final(t)) {
            // no iteration cap: refining late is the naive scheme's known
            // weakness, and only the wall-clock budget ends it
            match run.h_refine(&z, level, t, rho, usize::MAX) {
                Ok(zn) => {
                    z = zn;
                    level += 1;
                    continue;
                }
                Err(e) => return run.finish(e, z, level, t),
            }
        }
        if run.is_final(t) {
            return run.finish(RunStatus::Converged, z, level, t);
        }
        let t_new = run.next_t(t, rho, level == fine);
        let tol = run.tol_for(t_new, level);
        let (zn, row, res) = run.center_level(level, level, &z, t_new, tol, cfg.max_newton);
        let ok = row.converged;
        let m = row.iterations;
        let rho_new = adapt_stepsize(rho, m);
        run.record(StepKind::TStep, t_new, t_new / t, rho_new, level, DirectStep::NotTried, vec![row], &zn);
        if !ok {
            return run.finish(halt(&res, format!("t step to {t_new:e}: {:?}", res.status)), z, level, t);
        }
        z = zn;
        t = t_new;
        rho = rho_new;
    }
}

/// Runs the configured algorithm.
pub fn run(prob: &Problem, cfg: &PathConfig) -> PathTrace {
    match cfg.algorithm {
        Algorithm::Mgb => run_mgb(prob, cfg),
        Algorithm::NaiveHThenT | Algorithm::NaiveTheta => run_naive(prob, cfg),
    }
}
