//! Self-concordant barriers on epigraphs `Q = {(q, s) : s ≥ Λ(q)}`.
//!
//! A point is `w = (q, s)` with the slack last. Evaluation outside the
//! open domain returns `None`; line searches rely on that signal.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum BarrierError {
    #[error("point outside the barrier domain")]
    OutsideDomain,
    #[error("argument out of range: {0}")]
    BadArgument(String),
}

/// Value, gradient and Hessian (row-major) at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEval<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess: Vec<T>,
}

pub trait Barrier<T: Scalar>: Send + Sync {
    /// Number of components of `w`, i.e. `d + 1`.
    fn arity(&self) -> usize;

    /// Barrier parameter `ν`.
    fn nu(&self) -> T;

    /// The integrand `Λ(q)` whose epigraph is the domain.
    fn lambda(&self, q: &[T]) -> T;

    fn value(&self, w: &[T]) -> Option<T>;

    /// Writes `F'(w)` and `F''(w)` into the buffers and returns `F(w)`.
    fn eval_into(&self, w: &[T], grad: &mut [T], hess: &mut [T]) -> Option<T>;

    /// `F'''(w)[u, u, u]`.
    fn third_directional(&self, w: &[T], u: &[T]) -> Option<T>;

    fn eval(&self, w: &[T]) -> Option<BarrierEval<T>> {
        let n = self.arity();
        let mut grad = vec![T::zero(); n];
        let mut hess = vec![T::zero(); n * n];
        let value = self.eval_into(w, &mut grad, &mut hess)?;
        Some(BarrierEval { value, grad, hess })
    }

    /// `∂F/∂s`.
    fn slack_derivative(&self, w: &[T]) -> Option<T> {
        self.eval(w).map(|e| e.grad[self.arity() - 1])
    }

    /// The slack `s` solving `F_s(q, s) + t = 0`. `F_s` increases in `s`,
    /// so the root is unique; it is bracketed by `Λ(q) + [1/t, ν/t]`.
    fn slack_for_t(&self, q: &[T], t: T) -> Result<T, BarrierError> {
        if !(t > T::zero()) || !t.is_finite() {
            return Err(BarrierError::BadArgument(format!("t = {t}")));
        }
        let base = self.lambda(q);
        let mut w: Vec<T> = q.to_vec();
        w.push(T::zero());
        let mut residual = |eps: T| {
            w[q.len()] = base + eps;
            self.slack_derivative(&w).map(|d| d + t)
        };
        let two = T::lit(2.0);
        let mut lo = t.recip();
        while !matches!(residual(lo), Some(r) if r <= T::zero()) {
            lo /= two;
            if lo < T::min_positive_value() {
                return Err(BarrierError::OutsideDomain);
            }
        }
        let mut hi = self.nu() / t;
        while !matches!(residual(hi), Some(r) if r >= T::zero()) {
            hi *= two;
            if !hi.is_finite() {
                return Err(BarrierError::BadArgument("no root bracket".into()));
            }
        }
        for _ in 0..400 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            match residual(mid) {
                Some(r) if r < T::zero() => lo = mid,
                Some(_) => hi = mid,
                None => lo = mid,
            }
        }
        Ok(base + (lo + hi) / two)
    }
}

/// `F(q, s) = -log(s^{2/p} - |q|²) - 2 log s`, a barrier for the epigraph
/// of `Λ(q) = |q|^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLapBarrier<T> {
    p: T,
    dim: usize,
    nu: T,
}

impl<T: Scalar> PLapBarrier<T> {
    /// Default parameter `ν = 4`.
    pub fn new(p: T, dim: usize) -> Result<Self, BarrierError> {
        Self::with_nu(p, dim, T::lit(4.0))
    }

    pub fn with_nu(p: T, dim: usize, nu: T) -> Result<Self, BarrierError> {
        if !(p >= T::one()) || !p.is_finite() {
            return Err(BarrierError::BadArgument(format!("p = {p} must be in [1, ∞)")));
        }
        if !(1..=2).contains(&dim) {
            return Err(BarrierError::BadArgument(format!("dimension {dim}")));
        }
        Ok(Self { p, dim, nu })
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(r, a, φ)` with `r = |q|²`, `a = s^{2/p}`, `φ = a - r`.
    #[inline]
    fn parts(&self, w: &[T]) -> Option<(T, T, T)> {
        let s = w[self.dim];
        if !(s > T::zero()) {
            return None;
        }
        let r: T = w[..self.dim].iter().map(|&x| x * x).sum();
        let a = s.powf(T::lit(2.0) / self.p);
        let phi = a - r;
        if !(phi > T::zero()) || !phi.is_finite() {
            return None;
        }
        Some((r, a, phi))
    }
}

impl<T: Scalar> Barrier<T> for PLapBarrier<T> {
    fn arity(&self) -> usize {
        self.dim + 1
    }

    fn nu(&self) -> T {
        self.nu
    }

    fn lambda(&self, q: &[T]) -> T {
        let r: T = q.iter().map(|&x| x * x).sum();
        r.sqrt().powf(self.p)
    }

    fn value(&self, w: &[T]) -> Option<T> {
        let (_, _, phi) = self.parts(w)?;
        Some(-phi.ln() - T::lit(2.0) * w[self.dim].ln())
    }

    fn eval_into(&self, w: &[T], grad: &mut [T], hess: &mut [T]) -> Option<T> {
        let (_, a, phi) = self.parts(w)?;
        let d = self.dim;
        let n = d + 1;
        let s = w[d];
        let two = T::lit(2.0);
        let k = two / self.p;
        let a1 = k * a / s;
        let a2 = k * (k - T::one()) * a / (s * s);
        let inv = phi.recip();
        let inv2 = inv * inv;
        for i in 0..d {
            grad[i] = two * w[i] * inv;
            for j in 0..d {
                let delta = if i == j { two * inv } else { T::zero() };
                hess[i * n + j] = delta + T::lit(4.0) * w[i] * w[j] * inv2;
            }
            let qs = -two * w[i] * a1 * inv2;
            hess[i * n + d] = qs;
            hess[d * n + i] = qs;
        }
        grad[d] = -a1 * inv - two / s;
        hess[d * n + d] = -a2 * inv + a1 * a1 * inv2 + two / (s * s);
        Some(-phi.ln() - two * s.ln())
    }

    fn third_directional(&self, w: &[T], u: &[T]) -> Option<T> {
        let (_, a, phi) = self.parts(w)?;
        let d = self.dim;
        let s = w[d];
        let sigma = u[d];
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let k = two / self.p;
        let a1 = k * a / s;
        let a2 = k * (k - T::one()) * a / (s * s);
        let a3 = k * (k - T::one()) * (k - two) * a / (s * s * s);
        let qv: T = (0..d).map(|i| w[i] * u[i]).sum();
        let vv: T = (0..d).map(|i| u[i] * u[i]).sum();
        let d1 = a1 * sigma - two * qv;
        let d2 = a2 * sigma * sigma - two * vv;
        let d3 = a3 * sigma * sigma * sigma;
        let log_part = -d3 / phi + three * d1 * d2 / (phi * phi) - two * d1 * d1 * d1 / (phi * phi * phi);
        let r = sigma / s;
        Some(log_part - T::lit(4.0) * r * r * r)
    }
}

/// `ψ(α) = α - log(1 + α)`.
pub fn psi<T: Scalar>(alpha: T) -> Result<T, BarrierError> {
    if !(alpha > -T::one()) {
        return Err(BarrierError::BadArgument(format!("ψ needs α > -1, got {alpha}")));
    }
    Ok(alpha - alpha.ln_1p())
}

/// Non-negative root of `ψ(α) = β`.
pub fn psi_inverse<T: Scalar>(beta: T) -> Result<T, BarrierError> {
    if !(beta >= T::zero()) || !beta.is_finite() {
        return Err(BarrierError::BadArgument(format!("ψ⁻¹ needs β ≥ 0, got {beta}")));
    }
    if beta == T::zero() {
        return Ok(T::zero());
    }
    // Newton from the right of the root converges monotonically (ψ convex).
    let mut alpha = beta + (T::lit(2.0) * beta).sqrt();
    for _ in 0..100 {
        let f = alpha - alpha.ln_1p() - beta;
        let df = alpha / (T::one() + alpha);
        let next = alpha - f / df;
        if !(next < alpha) {
            break;
        }
        alpha = next;
    }
    Ok(alpha)
}
