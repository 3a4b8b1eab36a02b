//! Damped Newton centering with feasibility backtracking.

use thiserror::Error;

/// Why a Newton direction could not be produced.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum StepFailure {
    #[error("point outside the barrier domain")]
    Infeasible,
    #[error("linear solve failed: {0}")]
    Solver(String),
}

/// Objective value, Newton direction `Δ = -H⁻¹g` and decrement
/// `λ = √(gᵀH⁻¹g)` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub value: f64,
    pub direction: Vec<f64>,
    pub decrement: f64,
}

/// Convex objective in free coordinates `y`. `value` returns `None`
/// outside the domain.
pub trait CenteringObjective {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> Option<f64>;
    fn newton_step(&self, y: &[f64]) -> Result<NewtonStep, StepFailure>;
}

/// `λ = √(gᵀ H⁻¹ g)` from a gradient and its Newton direction `Δ = -H⁻¹g`.
pub fn decrement_from(gradient: &[f64], direction: &[f64]) -> f64 {
    let s: f64 = gradient.iter().zip(direction).map(|(g, d)| -g * d).sum();
    s.max(0.0).sqrt()
}

/// Decrement below which the damped step becomes a full step.
pub const FULL_STEP_THRESHOLD: f64 = 0.25;
pub const MAX_HALVINGS: usize = 40;
/// Relative value change treated as roundoff once the predicted decrease
/// is itself below it.
const ROUNDOFF: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenteringStatus {
    Converged,
    IterationCap,
    InfeasibleStart,
    SolverFailure,
    /// Stopped by the caller's interrupt check (e.g. a wall-clock budget).
    Interrupted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenteringResult {
    pub y: Vec<f64>,
    /// Newton steps taken.
    pub iterations: usize,
    /// Last decrement computed (at the returned point).
    pub decrement: f64,
    /// Objective value at the returned point.
    pub value: f64,
    pub status: CenteringStatus,
    /// Decrement at every visited point, the returned one included.
    pub decrements: Vec<f64>,
    /// Objective value at every visited point.
    pub values: Vec<f64>,
}

impl CenteringResult {
    pub fn converged(&self) -> bool {
        self.status == CenteringStatus::Converged
    }
}

/// One damped step: `1/(1+λ)` while `λ ≥ 1/4`, else the full step, then
/// halve until feasible with decreased value. Returns the new point and
/// its value.
pub fn damped_step<O: CenteringObjective + ?Sized>(
    obj: &O,
    y: &[f64],
    step: &NewtonStep,
) -> Result<(Vec<f64>, f64), StepFailure> {
    let lambda = step.decrement;
    let mut tau = if lambda >= FULL_STEP_THRESHOLD { 1.0 / (1.0 + lambda) } else { 1.0 };
    let slack = ROUNDOFF * step.value.abs().max(1.0);
    let tiny_prediction = 0.5 * lambda * lambda <= slack;
    let mut trial = vec![0.0; y.len()];
    for _ in 0..=MAX_HALVINGS {
        for i in 0..y.len() {
            trial[i] = y[i] + tau * step.direction[i];
        }
        if let Some(v) = obj.value(&trial) {
            if v < step.value || (tiny_prediction && v <= step.value + slack) {
                return Ok((trial, v));
            }
        }
        tau *= 0.5;
    }
    Err(StepFailure::Solver(format!("backtracking exhausted at λ = {lambda:e}")))
}

/// Damped Newton iteration from `y0` until `λ ≤ tol` or `max_iters` steps.
pub fn center<O: CenteringObjective + ?Sized>(obj: &O, y0: &[f64], tol: f64, max_iters: usize) -> CenteringResult {
    center_with(obj, y0, tol, max_iters, || false)
}

/// As [`center`], but `interrupt` is polled before every step and ends the
/// iteration with [`CenteringStatus::Interrupted`] when it returns true.
pub fn center_with<O, I>(obj: &O, y0: &[f64], tol: f64, max_iters: usize, mut interrupt: I) -> CenteringResult
where
    O: CenteringObjective + ?Sized,
    I: FnMut() -> bool,
{
    let mut y = y0.to_vec();
    let mut decrements = Vec::new();
    let mut values = Vec::new();
    let finish = |y, it, dec: &Vec<f64>, val: &Vec<f64>, status| CenteringResult {
        y,
        iterations: it,
        decrement: dec.last().copied().unwrap_or(f64::INFINITY),
        value: val.last().copied().unwrap_or(f64::INFINITY),
        status,
        decrements: dec.clone(),
        values: val.clone(),
    };
    if obj.value(&y).is_none() {
        return finish(y, 0, &decrements, &values, CenteringStatus::InfeasibleStart);
    }
    let mut it = 0;
    loop {
        let step = match obj.newton_step(&y) {
            Ok(s) => s,
            Err(StepFailure::Infeasible) if it == 0 => {
                return finish(y, it, &decrements, &values, CenteringStatus::InfeasibleStart)
            }
            Err(_) => return finish(y, it, &decrements, &values, CenteringStatus::SolverFailure),
        };
        decrements.push(step.decrement);
        values.push(step.value);
        if step.decrement <= tol {
            return finish(y, it, &decrements, &values, CenteringStatus::Converged);
        }
        if it >= max_iters {
            return finish(y, it, &decrements, &values, CenteringStatus::IterationCap);
        }
        if interrupt() {
            return finish(y, it, &decrements, &values, CenteringStatus::Interrupted);
        }
        match damped_step(obj, &y, &step) {
            Ok((next, _)) => y = next,
            Err(_) => return finish(y, it, &decrements, &values, CenteringStatus::SolverFailure),
        }
        it += 1;
    }
}

/// `½ yᵀAy - bᵀy + Σ -log(c_i - y_i)` style test objective: a dense
/// quadratic, optionally with box barriers `y_i < cap`.
#[derive(Debug, Clone)]
pub struct DenseQuadratic {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cap: Option<f64>,
}

impl DenseQuadratic {
    fn n(&self) -> usize {
        self.b.len()
    }

    fn grad_hess(&self, y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let mut g: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.a[i * n + j] * y[j]).sum::<f64>() - self.b[i])
            .collect();
        let mut h = self.a.clone();
        if let Some(c) = self.cap {
            for i in 0..n {
                let gap = c - y[i];
                if !(gap > 0.0) {
                    return None;
                }
                g[i] += 1.0 / gap;
                h[i * n + i] += 1.0 / (gap * gap);
            }
        }
        Some((g, h))
    }
}

impl CenteringObjective for DenseQuadratic {
    fn dim(&self) -> usize {
        self.n()
    }

    fn value(&self, y: &[f64]) -> Option<f64> {
        let n = self.n();
        let mut v = 0.0;
        for i in 0..n {
            let ay: f64 = (0..n).map(|j| self.a[i * n + j] * y[j]).sum();
            v += 0.5 * y[i] * ay - self.b[i] * y[i];
            if let Some(c) = self.cap {
                let gap = c - y[i];
                if !(gap > 0.0) {
                    return None;
                }
                v -= gap.ln();
            }
        }
        Some(v)
    }

    fn newton_step(&self, y: &[f64]) -> Result<NewtonStep, StepFailure> {
        let n = self.n();
        let value = self.value(y).ok_or(StepFailure::Infeasible)?;
        let (g, mut h) = self.grad_hess(y).ok_or(StepFailure::Infeasible)?;
        crate::linalg::regularize_dense(&mut h, n);
        crate::linalg::dense_cholesky(&mut h, n).map_err(|e| StepFailure::Solver(e.to_string()))?;
        let mut direction: Vec<f64> = g.iter().map(|v| -v).collect();
        crate::linalg::dense_solve(&h, n, &mut direction);
        let decrement = decrement_from(&g, &direction);
        Ok(NewtonStep {
            value,
            direction,
            decrement,
        })
    }
}
