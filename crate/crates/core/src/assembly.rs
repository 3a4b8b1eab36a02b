//! The discrete functional `f_h(z, t) = ∫ t (f u + s) + F(∇u, s)` with
//! fine-grid quadrature, and its restriction to coarse levels.
//!
//! A [`LevelObjective`] lives on level `ℓ` of a [`SpaceHierarchy`] and is
//! evaluated at `z_base + P y` for free coarse coefficients `y`. Sampling
//! goes straight from level `ℓ` basis functions to the fine quadrature
//! nodes, which equals `Pᵀ H P` of the fine-grid Hessian without forming
//! `P`. The per-element slack block is condensed out before the banded
//! solve.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::barrier::{Barrier, PLapBarrier};
use crate::femspace::{Sampler, SpaceHierarchy};
use crate::linalg::{dense_cholesky, dense_solve, SymBand, REGULARIZATION};
use crate::newton::{decrement_from, CenteringObjective, NewtonStep, StepFailure};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("iterate infeasible at a quadrature node")]
    Infeasible,
    #[error("level {level} is finer than the discretization level {fine}")]
    LevelMismatch { level: usize, fine: usize },
    #[error("vector length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("linear solve failed: {0}")]
    Solver(String),
}

impl From<AssemblyError> for StepFailure {
    fn from(e: AssemblyError) -> Self {
        match e {
            AssemblyError::Infeasible => StepFailure::Infeasible,
            other => StepFailure::Solver(other.to_string()),
        }
    }
}

/// Fine level `j` of a hierarchy with its quadrature, barrier and forcing,
/// plus samplers from every level `ℓ ≤ j` to the level-`j` nodes.
#[derive(Debug, Clone)]
pub struct Discretization {
    hier: Arc<SpaceHierarchy>,
    fine: usize,
    rule: QuadratureRule<f64>,
    barrier: PLapBarrier<f64>,
    forcing: Vec<f64>,
    samplers: Vec<Sampler>,
    bandwidths: Vec<usize>,
}

impl Discretization {
    pub fn new<F>(
        hier: Arc<SpaceHierarchy>,
        fine: usize,
        rule: QuadratureRule<f64>,
        barrier: PLapBarrier<f64>,
        forcing: F,
    ) -> Self
    where
        F: Fn(&[f64]) -> f64,
    {
        let dim = hier.space(fine).dim();
        let target = hier.meshes().level(fine);
        let samplers: Vec<Sampler> = (0..=fine)
            .map(|l| Sampler::new(hier.space(l), target, &hier.ancestors(fine, l), &rule))
            .collect();
        let forcing = samplers[fine].points().iter().map(|x| forcing(&x[..dim])).collect();
        let bandwidths = (0..=fine).map(|l| hier.space(l).u_bandwidth()).collect();
        Self {
            hier,
            fine,
            rule,
            barrier,
            forcing,
            samplers,
            bandwidths,
        }
    }

    pub fn hierarchy(&self) -> &Arc<SpaceHierarchy> {
        &self.hier
    }

    pub fn fine_level(&self) -> usize {
        self.fine
    }

    pub fn rule(&self) -> &QuadratureRule<f64> {
        &self.rule
    }

    pub fn barrier(&self) -> &PLapBarrier<f64> {
        &self.barrier
    }

    pub fn sampler(&self, level: usize) -> &Sampler {
        &self.samplers[level]
    }

    /// `f` at the fine quadrature nodes.
    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    /// Samples `(u, ∇u, s)` of a full fine-level vector.
    pub fn samples(&self, z: &[f64]) -> Vec<f64> {
        self.samplers[self.fine].sample_full(self.hier.space(self.fine), z)
    }

    fn rows(&self) -> usize {
        self.samplers[self.fine].rows()
    }

    /// `∫^{(h)} c[z] = ∫^{(h)} f u + s`.
    pub fn cost_integral(&self, z: &[f64]) -> f64 {
        let w = self.samples(z);
        let r = self.rows();
        let om = self.samplers[self.fine].weights();
        (0..om.len())
            .map(|n| om[n] * (self.forcing[n] * w[n * r] + w[n * r + r - 1]))
            .sum()
    }

    /// `min (s - Λ(∇u))` over the fine quadrature nodes.
    pub fn feasibility_margin(&self, z: &[f64]) -> f64 {
        let w = self.samples(z);
        let r = self.rows();
        (0..w.len() / r)
            .map(|n| {
                let node = &w[n * r..(n + 1) * r];
                node[r - 1] - self.barrier.lambda(&node[1..r - 1])
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `true` if the barrier is finite at every fine quadrature node.
    pub fn is_feasible(&self, z: &[f64]) -> bool {
        let w = self.samples(z);
        let r = self.rows();
        (0..w.len() / r).all(|n| self.barrier.value(&w[n * r + 1..(n + 1) * r]).is_some())
    }

    /// `f_h(z, t)` of a full fine vector, `None` when infeasible.
    pub fn value(&self, z: &[f64], t: f64) -> Option<f64> {
        self.value_of_samples(&self.samples(z), t)
    }

    fn value_of_samples(&self, w: &[f64], t: f64) -> Option<f64> {
        let r = self.rows();
        let om = self.samplers[self.fine].weights();
        let nq = self.samplers[self.fine].nodes_per_element();
        let per_element: Vec<Option<f64>> = (0..om.len() / nq)
            .into_par_iter()
            .with_min_len(64)
            .map(|k| {
                let mut acc = 0.0;
                for n in k * nq..(k + 1) * nq {
                    let node = &w[n * r..(n + 1) * r];
                    let f = self.barrier.value(&node[1..])?;
                    acc += om[n] * (t * (self.forcing[n] * node[0] + node[r - 1]) + f);
                }
                Some(acc)
            })
            .collect();
        let mut total = 0.0;
        for v in per_element {
            total += v?;
        }
        Some(total)
    }

    /// Objective on level `level` around the full fine vector `base`.
    pub fn restrict(&self, level: usize, base: &[f64], t: f64) -> Result<LevelObjective<'_>, AssemblyError> {
        if level > self.fine {
            return Err(AssemblyError::LevelMismatch { level, fine: self.fine });
        }
        let expected = self.hier.space(self.fine).full_len();
        if base.len() != expected {
            return Err(AssemblyError::ShapeMismatch { expected, got: base.len() });
        }
        Ok(LevelObjective {
            disc: self,
            level,
            base: base.to_vec(),
            base_samples: self.samples(base),
            t,
        })
    }
}

/// Local gradient and Hessian of one coarse element.
struct LocalBlock {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

/// `y ↦ f_h(z_base + P_ℓ y, t)` on free coordinates of level `ℓ`.
#[derive(Debug, Clone)]
pub struct LevelObjective<'a> {
    disc: &'a Discretization,
    level: usize,
    base: Vec<f64>,
    base_samples: Vec<f64>,
    t: f64,
}

impl<'a> LevelObjective<'a> {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// `z_base + P_ℓ y` as a full fine vector.
    pub fn lift(&self, y: &[f64]) -> Vec<f64> {
        let p = self.disc.hier.prolong_free(self.level, self.disc.fine, y);
        self.base.iter().zip(&p).map(|(a, b)| a + b).collect()
    }

    fn samples_at(&self, y: &[f64]) -> Vec<f64> {
        let space = self.disc.hier.space(self.level);
        let mut w = self.disc.samplers[self.level].sample_free(space, y);
        for (a, b) in w.iter_mut().zip(&self.base_samples) {
            *a += b;
        }
        w
    }

    /// Per coarse element: value, gradient and Hessian over its local dofs,
    /// accumulated over its fine descendants.
    fn local_blocks(&self, y: &[f64]) -> Result<Vec<LocalBlock>, AssemblyError> {
        let w = self.samples_at(y);
        let sampler = &self.disc.samplers[self.level];
        let space = self.disc.hier.space(self.level);
        let rows = sampler.rows();
        let nb = rows - 1;
        let nl = sampler.local_len();
        let nq = sampler.nodes_per_element();
        let om = sampler.weights();
        let per = sampler.num_elements() / space.mesh().num_elements();
        let t = self.t;
        let barrier = &self.disc.barrier;
        let forcing = &self.disc.forcing;
        let blocks: Vec<Option<LocalBlock>> = (0..space.mesh().num_elements())
            .into_par_iter()
            .with_min_len(16)
            .map(|e| {
                let mut grad = vec![0.0; nl];
                let mut hess = vec![0.0; nl * nl];
                let mut value = 0.0;
                let mut bg = vec![0.0; nb];
                let mut bh = vec![0.0; nb * nb];
                let mut hb = vec![0.0; nb * nl];
                for k in e * per..(e + 1) * per {
                    debug_assert_eq!(sampler.source_element(k), e);
                    for q in 0..nq {
                        let n = k * nq + q;
                        let node = &w[n * rows..(n + 1) * rows];
                        let f = barrier.eval_into(&node[1..], &mut bg, &mut bh)?;
                        let wt = om[n];
                        value += wt * (t * (forcing[n] * node[0] + node[rows - 1]) + f);
                        let b = sampler.block(k, q);
                        let brow = |r: usize| &b[r * nl..(r + 1) * nl];
                        // gradient: cost on the u and s rows, barrier on rows 1..
                        for a in 0..nl {
                            let mut g = t * (forcing[n] * b[a] + b[(rows - 1) * nl + a]);
                            for r in 0..nb {
                                g += bg[r] * b[(1 + r) * nl + a];
                            }
                            grad[a] += wt * g;
                        }
                        // Hessian: Bᵀ F'' B over the barrier rows
                        for r in 0..nb {
                            let row = &mut hb[r * nl..(r + 1) * nl];
                            row.fill(0.0);
                            for c in 0..nb {
                                let h = bh[r * nb + c];
                                if h != 0.0 {
                                    for (x, bv) in row.iter_mut().zip(brow(1 + c)) {
                                        *x += h * bv;
                                    }
                                }
                            }
                        }
                        for r in 0..nb {
                            let br = brow(1 + r);
                            let hr = &hb[r * nl..(r + 1) * nl];
                            for a in 0..nl {
                                if br[a] == 0.0 {
                                    continue;
                                }
                                let s = wt * br[a];
                                let row = &mut hess[a * nl..(a + 1) * nl];
                                for (x, hv) in row.iter_mut().zip(hr) {
                                    *x += s * hv;
                                }
                            }
                        }
                    }
                }
                Some(LocalBlock { value, grad, hess })
            })
            .collect();
        blocks.into_iter().map(|b| b.ok_or(AssemblyError::Infeasible)).collect()
    }

    /// Gradient in free coordinates.
    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        let blocks = self.local_blocks(y)?;
        let space = self.disc.hier.space(self.level);
        let mut g = vec![0.0; space.free_len()];
        let mut dofs = Vec::new();
        for (e, b) in blocks.iter().enumerate() {
            space.local_free(e, &mut dofs);
            for (a, d) in dofs.iter().enumerate() {
                if let Some(i) = d {
                    g[*i] += b.grad[a];
                }
            }
        }
        Ok(g)
    }

    /// Dense Hessian in free coordinates (row-major), for small problems.
    pub fn hessian_dense(&self, y: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        let blocks = self.local_blocks(y)?;
        let space = self.disc.hier.space(self.level);
        let n = space.free_len();
        let nl = space.u_local() + space.s_local();
        let mut h = vec![0.0; n * n];
        let mut dofs = Vec::new();
        for (e, b) in blocks.iter().enumerate() {
            space.local_free(e, &mut dofs);
            for a in 0..nl {
                for c in 0..nl {
                    if let (Some(i), Some(j)) = (dofs[a], dofs[c]) {
                        h[i * n + j] += b.hess[a * nl + c];
                    }
                }
            }
        }
        Ok(h)
    }

    /// Newton direction from the regularized Hessian, with the element
    /// slack blocks eliminated first.
    pub fn newton(&self, y: &[f64]) -> Result<NewtonStep, AssemblyError> {
        let space = self.disc.hier.space(self.level);
        if y.len() != space.free_len() {
            return Err(AssemblyError::ShapeMismatch { expected: space.free_len(), got: y.len() });
        }
        let blocks = self.local_blocks(y)?;
        let nu = space.u_local();
        let ns = space.s_local();
        let nl = nu + ns;
        let nuf = space.num_u_free();
        let ne = space.mesh().num_elements();

        // assembled u-u block and exact row sums for the regularization
        let mut huu = SymBand::zeros(nuf, self.disc.bandwidths[self.level]);
        let mut gu = vec![0.0; nuf];
        let mut u_extra = vec![0.0; nuf];
        let mut s_rowsum: f64 = 0.0;
        let mut value = 0.0;
        let mut dofs = Vec::new();
        let mut locals: Vec<Vec<Option<usize>>> = Vec::with_capacity(ne);
        for (e, b) in blocks.iter().enumerate() {
            value += b.value;
            space.local_free(e, &mut dofs);
            for a in 0..nu {
                if let Some(i) = dofs[a] {
                    gu[i] += b.grad[a];
                    for c in 0..=a {
                        if let Some(j) = dofs[c] {
                            huu.add(i, j, b.hess[a * nl + c]);
                        }
                    }
                    u_extra[i] += (nu..nl).map(|c| b.hess[a * nl + c].abs()).sum::<f64>();
                }
            }
            for a in nu..nl {
                let row: f64 = (0..nl)
                    .filter(|&c| c >= nu || dofs[c].is_some())
                    .map(|c| b.hess[a * nl + c].abs())
                    .sum();
                s_rowsum = s_rowsum.max(row);
            }
            locals.push(dofs.clone());
        }
        let norm = huu
            .row_abs_sums()
            .iter()
            .zip(&u_extra)
            .map(|(a, b)| a + b)
            .fold(s_rowsum, f64::max);
        let delta = REGULARIZATION * norm;

        // eliminate the slack: S = Huu - Hus Hss⁻¹ Hsu, r = gu - Hus Hss⁻¹ gs
        let mut schur = huu;
        let mut factors: Vec<Vec<f64>> = Vec::with_capacity(ne);
        let mut rhs = gu;
        for (e, b) in blocks.iter().enumerate() {
            let mut hss = vec![0.0; ns * ns];
            for a in 0..ns {
                for c in 0..ns {
                    hss[a * ns + c] = b.hess[(nu + a) * nl + nu + c];
                }
                hss[a * ns + a] += delta;
            }
            dense_cholesky(&mut hss, ns).map_err(|err| AssemblyError::Solver(err.to_string()))?;
            let dofs = &locals[e];
            // X = Hss⁻¹ Hsu, column per local u dof
            let mut x = vec![0.0; ns * nu];
            for a in 0..nu {
                if dofs[a].is_none() {
                    continue;
                }
                let mut col: Vec<f64> = (0..ns).map(|c| b.hess[(nu + c) * nl + a]).collect();
                dense_solve(&hss, ns, &mut col);
                for c in 0..ns {
                    x[c * nu + a] = col[c];
                }
            }
            let mut gs: Vec<f64> = b.grad[nu..].to_vec();
            dense_solve(&hss, ns, &mut gs);
            for a in 0..nu {
                let Some(i) = dofs[a] else { continue };
                let hus = &b.hess[a * nl + nu..a * nl + nl];
                rhs[i] -= hus.iter().zip(&gs).map(|(h, g)| h * g).sum::<f64>();
                for c in 0..=a {
                    let Some(j) = dofs[c] else { continue };
                    let corr: f64 = (0..ns).map(|m| hus[m] * x[m * nu + c]).sum();
                    schur.add(i, j, -corr);
                }
            }
            factors.push(hss);
        }
        schur.add_diagonal(delta);
        schur.factor().map_err(|e| AssemblyError::Solver(e.to_string()))?;
        let neg: Vec<f64> = rhs.iter().map(|v| -v).collect();
        let du = schur.solve(&neg).map_err(|e| AssemblyError::Solver(e.to_string()))?;

        // back-substitute ds = -Hss⁻¹ (gs + Hsu du)
        let mut direction = vec![0.0; space.free_len()];
        direction[..nuf].copy_from_slice(&du);
        let mut grad = vec![0.0; space.free_len()];
        for (e, b) in blocks.iter().enumerate() {
            let dofs = &locals[e];
            let mut r: Vec<f64> = (0..ns)
                .map(|c| {
                    let mut v = b.grad[nu + c];
                    for a in 0..nu {
                        if let Some(i) = dofs[a] {
                            v += b.hess[(nu + c) * nl + a] * du[i];
                        }
                    }
                    v
                })
                .collect();
            dense_solve(&factors[e], ns, &mut r);
            for c in 0..ns {
                let i = dofs[nu + c].expect("slack dofs are free");
                direction[i] = -r[c];
                grad[i] = b.grad[nu + c];
            }
            for a in 0..nu {
                if let Some(i) = dofs[a] {
                    grad[i] += b.grad[a];
                }
            }
        }
        Ok(NewtonStep {
            value,
            decrement: decrement_from(&grad, &direction),
            direction,
        })
    }
}

impl CenteringObjective for LevelObjective<'_> {
    fn dim(&self) -> usize {
        self.disc.hier.space(self.level).free_len()
    }

    fn value(&self, y: &[f64]) -> Option<f64> {
        self.disc.value_of_samples(&self.samples_at(y), self.t)
    }

    fn newton_step(&self, y: &[f64]) -> Result<NewtonStep, StepFailure> {
        Ok(self.newton(y)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxDomain;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(levels: usize, alpha: usize, p: f64) -> Discretization {
        let hier = Arc::new(SpaceHierarchy::new(&BoxDomain::unit(2).unwrap(), 2, levels, alpha).unwrap());
        let rule = QuadratureRule::reference(2, 2 * alpha).unwrap();
        Discretization::new(hier, levels - 1, rule, PLapBarrier::new(p, 2).unwrap(), |x| x[0] - 0.3 * x[1])
    }

    /// Random full vector with small u and comfortably large s.
    fn random_point(disc: &Discretization, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let space = disc.hierarchy().space(disc.fine_level());
        let nu = space.num_u_nodes();
        (0..space.full_len())
            .map(|i| if i < nu { rng.gen_range(-0.01..0.01) } else { rng.gen_range(2.0..3.0) })
            .collect()
    }

    #[test]
    fn constant_state_value() {
        let disc = setup(1, 1, 2.0);
        let space = disc.hierarchy().space(0);
        let z = space.interpolate(|_| 0.0, |_| 1.0).unwrap();
        // F(0, 1) = 0 for p = 2
        assert!((disc.value(&z, 1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_in_t() {
        let disc = setup(2, 2, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_point(&disc, &mut rng);
        let (v1, v2) = (disc.value(&z, 1.5).unwrap(), disc.value(&z, 4.0).unwrap());
        assert!(((v2 - v1) - 2.5 * disc.cost_integral(&z)).abs() < 1e-12 * v2.abs().max(1.0));
    }

    #[test]
    fn infeasible_signal() {
        let disc = setup(1, 1, 2.0);
        let space = disc.hierarchy().space(0);
        let z = space.interpolate(|_| 0.0, |_| -1.0).unwrap();
        assert!(disc.value(&z, 1.0).is_none());
        let obj = disc.restrict(0, &z, 1.0).unwrap();
        assert_eq!(obj.newton(&vec![0.0; obj.dim()]).unwrap_err(), AssemblyError::Infeasible);
        assert!(matches!(disc.restrict(3, &z, 1.0), Err(AssemblyError::LevelMismatch { .. })));
    }

    #[test]
    fn convex_along_segments() {
        for p in [1.0, 1.5, 2.0, 4.0] {
            let disc = setup(2, 2, p);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..50 {
                let a = random_point(&disc, &mut rng);
                let b = random_point(&disc, &mut rng);
                let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                let (va, vb, vm) = (disc.value(&a, 3.0).unwrap(), disc.value(&b, 3.0).unwrap(), disc.value(&mid, 3.0).unwrap());
                assert!(vm <= 0.5 * (va + vb) + 1e-12);
            }
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        for (alpha, p) in [(1, 1.0), (2, 1.5), (2, 3.0)] {
            let disc = setup(2, alpha, p);
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let z = random_point(&disc, &mut rng);
            for level in 0..2 {
                let obj = disc.restrict(level, &z, 2.0).unwrap();
                let n = obj.dim();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.01..0.01)).collect();
                let g = obj.gradient(&y).unwrap();
                let h = obj.hessian_dense(&y).unwrap();
                for _ in 0..20 {
                    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let eps = 1e-5;
                    let shift = |s: f64| -> Vec<f64> { y.iter().zip(&d).map(|(a, b)| a + s * b).collect() };
                    let fd = (obj.value(&shift(eps)).unwrap() - obj.value(&shift(-eps)).unwrap()) / (2.0 * eps);
                    let an: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
                    assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "α={alpha} p={p}: {fd} vs {an}");
                    let gp = obj.gradient(&shift(eps)).unwrap();
                    let gm = obj.gradient(&shift(-eps)).unwrap();
                    let hd: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * d[j]).sum()).collect();
                    let err: f64 = (0..n).map(|i| ((gp[i] - gm[i]) / (2.0 * eps) - hd[i]).powi(2)).sum::<f64>().sqrt();
                    let scale: f64 = hd.iter().map(|v| v * v).sum::<f64>().sqrt();
                    assert!(err <= 1e-5 * scale.max(1.0), "Hessian fd {err} vs {scale}");
                }
            }
        }
    }

    #[test]
    fn newton_direction_matches_dense_solve() {
        let disc = setup(2, 2, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let z = random_point(&disc, &mut rng);
        for level in 0..2 {
            let obj = disc.restrict(level, &z, 5.0).unwrap();
            let n = obj.dim();
            let y = vec![0.0; n];
            let step = obj.newton(&y).unwrap();
            let mut h = obj.hessian_dense(&y).unwrap();
            crate::linalg::regularize_dense(&mut h, n);
            let g = obj.gradient(&y).unwrap();
            let oracle = DMatrix::from_row_slice(n, n, &h).lu().solve(&-DVector::from_vec(g.clone())).unwrap();
            let scale = oracle.norm();
            let err = (DVector::from_vec(step.direction.clone()) - &oracle).norm();
            assert!(err < 1e-9 * scale, "level {level}: {err}");
            let lam = g.iter().zip(oracle.iter()).map(|(a, b)| -a * b).sum::<f64>().sqrt();
            assert!((step.decrement - lam).abs() < 1e-9 * lam);
            assert!((step.value - obj.value(&y).unwrap()).abs() < 1e-12 * step.value.abs());
        }
    }

    #[test]
    fn slack_block_is_element_diagonal() {
        let disc = setup(1, 2, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = random_point(&disc, &mut rng);
        let obj = disc.restrict(0, &z, 1.0).unwrap();
        let n = obj.dim();
        let h = obj.hessian_dense(&vec![0.0; n]).unwrap();
        let space = disc.hierarchy().space(0);
        let (nuf, ns) = (space.num_u_free(), space.s_local());
        for i in nuf..n {
            for j in nuf..n {
                if (i - nuf) / ns != (j - nuf) / ns {
                    assert_eq!(h[i * n + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn restriction_identities() {
        let disc = setup(3, 1, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = random_point(&disc, &mut rng);
        let fine = disc.restrict(2, &z, 3.0).unwrap();
        let y0 = vec![0.0; fine.dim()];
        assert_eq!(fine.value(&y0).unwrap(), disc.value(&z, 3.0).unwrap());
        // finest level: the lift is the identity on free coordinates
        let y: Vec<f64> = (0..fine.dim()).map(|_| rng.gen_range(-0.01..0.01)).collect();
        let lifted = fine.lift(&y);
        let space = disc.hierarchy().space(2);
        let back = space.full_to_free(&lifted);
        let zf = space.full_to_free(&z);
        for i in 0..y.len() {
            assert!((back[i] - zf[i] - y[i]).abs() < 1e-15);
        }
        // coarse levels: Pᵀg and subspace decrement bound
        let lam_fine = fine.newton(&y0).unwrap().decrement;
        let gf = fine.gradient(&y0).unwrap();
        for level in 0..2 {
            let obj = disc.restrict(level, &z, 3.0).unwrap();
            let yc = vec![0.0; obj.dim()];
            assert!((obj.value(&yc).unwrap() - disc.value(&z, 3.0).unwrap()).abs() < 1e-12);
            let lam = obj.newton(&yc).unwrap().decrement;
            assert!(lam <= lam_fine * (1.0 + 1e-10));
            let gc = obj.gradient(&yc).unwrap();
            let hier = disc.hierarchy();
            for i in 0..obj.dim() {
                let mut e = vec![0.0; obj.dim()];
                e[i] = 1.0;
                let pe = hier.space(2).full_to_free(&hier.prolong_free(level, 2, &e));
                let ptg: f64 = pe.iter().zip(&gf).map(|(a, b)| a * b).sum();
                assert!((ptg - gc[i]).abs() < 1e-10 * gc[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn galerkin_hessian_matches_explicit_prolongation() {
        let disc = setup(2, 2, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let z = random_point(&disc, &mut rng);
        let fine = disc.restrict(1, &z, 2.0).unwrap();
        let coarse = disc.restrict(0, &z, 2.0).unwrap();
        let (nf, nc) = (fine.dim(), coarse.dim());
        let hf = DMatrix::from_row_slice(nf, nf, &fine.hessian_dense(&vec![0.0; nf]).unwrap());
        let hc = DMatrix::from_row_slice(nc, nc, &coarse.hessian_dense(&vec![0.0; nc]).unwrap());
        let hier = disc.hierarchy();
        let mut p = DMatrix::zeros(nf, nc);
        for j in 0..nc {
            let mut e = vec![0.0; nc];
            e[j] = 1.0;
            let col = hier.space(1).full_to_free(&hier.prolong_free(0, 1, &e));
            for i in 0..nf {
                p[(i, j)] = col[i];
            }
        }
        let galerkin = p.transpose() * hf * p;
        assert!((galerkin - &hc).norm() < 1e-10 * hc.norm());
    }
}
