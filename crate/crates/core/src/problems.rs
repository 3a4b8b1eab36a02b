//! p-Laplacian problems: data presets, the discrete harmonic initial
//! guess, slack initialization and wiring of the level structures.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::assembly::Discretization;
use crate::barrier::{Barrier, BarrierError, PLapBarrier};
use crate::femspace::{FeSpace, FemError, Sampler, SpaceHierarchy};
use crate::linalg::SymBand;
use crate::mesh::BoxDomain;
use crate::quadrature::{QuadratureError, QuadratureRule};

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("no feasible slack 2^m with m ≤ {0}")]
    SlackSearch(u32),
}

/// Dirichlet data presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryData {
    Zero,
    Constant(f64),
    /// `x + y` (or `x` on an interval).
    Linear,
    /// `x² - y²` (or `x²`).
    Quadratic,
    /// `sin(πx)(1 - y)`: `sin(πx)` on the bottom edge, vanishing on the
    /// other three. On an interval, `sin(πx/2)`.
    Sine,
}

impl BoundaryData {
    pub fn eval(&self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        let y = x.get(1).copied();
        match (self, y) {
            (Self::Zero, _) => 0.0,
            (Self::Constant(c), _) => *c,
            (Self::Linear, Some(y)) => x[0] + y,
            (Self::Linear, None) => x[0],
            (Self::Quadratic, Some(y)) => x[0] * x[0] - y * y,
            (Self::Quadratic, None) => x[0] * x[0],
            (Self::Sine, Some(y)) => (PI * x[0]).sin() * (1.0 - y),
            (Self::Sine, None) => (0.5 * PI * x[0]).sin(),
        }
    }
}

impl FromStr for BoundaryData {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(Self::Zero),
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            "sine" => Ok(Self::Sine),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|c| c.is_finite())
                .map(Self::Constant)
                .ok_or_else(|| ProblemError::Invalid(format!("unknown boundary data '{other}'"))),
        }
    }
}

impl fmt::Display for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Constant(c) => write!(f, "{c}"),
            Self::Linear => write!(f, "linear"),
            Self::Quadratic => write!(f, "quadratic"),
            Self::Sine => write!(f, "sine"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub dim: usize,
    pub p: f64,
    pub alpha: usize,
    pub levels: usize,
    pub cells0: usize,
    pub boundary: BoundaryData,
    /// Constant forcing `f`.
    pub forcing: f64,
    /// Quadrature degree; `2α` when absent.
    pub quad_degree: Option<usize>,
    pub nu: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            p: 1.5,
            alpha: 2,
            levels: 3,
            cells0: 2,
            boundary: BoundaryData::Sine,
            forcing: 0.0,
            quad_degree: None,
            nu: 4.0,
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(ProblemError::Invalid(format!("p = {} (need p ≥ 1)", self.p)));
        }
        if !(1..=2).contains(&self.dim) {
            return Err(ProblemError::Invalid(format!("dim = {}", self.dim)));
        }
        if self.levels == 0 || self.cells0 == 0 {
            return Err(ProblemError::Invalid("levels and cells0 must be positive".into()));
        }
        if !self.forcing.is_finite() {
            return Err(ProblemError::Invalid("forcing must be finite".into()));
        }
        Ok(())
    }
}

/// Minimizes `∫ c|∇u|² + f u` over `u` with the boundary values of
/// `boundary` (a full vector of `space`); the weak form is
/// `2c ∫∇u·∇φ + ∫ f φ = 0`. Returns a full vector with zero slack.
pub fn solve_linear_fem<F>(
    space: &FeSpace,
    rule: &QuadratureRule<f64>,
    diffusion: f64,
    forcing: F,
    boundary: &[f64],
) -> Result<Vec<f64>, ProblemError>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = space.dim();
    let sampler = Sampler::own(space, rule);
    let nl = sampler.local_len();
    let nu = space.u_local();
    let nq = sampler.nodes_per_element();
    let mut stiff = SymBand::zeros(space.num_u_free(), space.u_bandwidth());
    let mut rhs = vec![0.0; space.num_u_free()];
    let mut nodes = Vec::new();
    for e in 0..space.mesh().num_elements() {
        nodes.clear();
        nodes.extend_from_slice(space.element_u_nodes(e));
        let mut local = vec![0.0; nu * nu];
        let mut load = vec![0.0; nu];
        for q in 0..nq {
            let n = e * nq + q;
            let w = sampler.weights()[n];
            let b = sampler.block(e, q);
            let fx = forcing(&sampler.points()[n][..dim]);
            for a in 0..nu {
                load[a] += w * fx * b[a];
                for c in 0..nu {
                    let dot: f64 = (1..=dim).map(|r| b[r * nl + a] * b[r * nl + c]).sum();
                    local[a * nu + c] += 2.0 * diffusion * w * dot;
                }
            }
        }
        for a in 0..nu {
            let Some(i) = space.free_index_of_node(nodes[a]) else { continue };
            rhs[i] -= load[a];
            for c in 0..nu {
                match space.free_index_of_node(nodes[c]) {
                    Some(j) if c <= a => stiff.add(i, j, local[a * nu + c]),
                    Some(_) => {}
                    None => rhs[i] -= local[a * nu + c] * boundary[nodes[c]],
                }
            }
        }
    }
    let mut z = vec![0.0; space.full_len()];
    for n in 0..space.num_u_nodes() {
        if space.is_boundary_node(n) {
            z[n] = boundary[n];
        }
    }
    if space.num_u_free() > 0 {
        stiff.factor().map_err(|e| ProblemError::Solver(e.to_string()))?;
        let u = stiff.solve(&rhs).map_err(|e| ProblemError::Solver(e.to_string()))?;
        for n in 0..space.num_u_nodes() {
            if let Some(i) = space.free_index_of_node(n) {
                z[n] = u[i];
            }
        }
    }
    Ok(z)
}

/// Discrete harmonic function with boundary values `g` at the boundary
/// Lagrange nodes.
pub fn harmonic_extension<G>(space: &FeSpace, rule: &QuadratureRule<f64>, g: G) -> Result<Vec<f64>, ProblemError>
where
    G: Fn(&[f64]) -> f64,
{
    let dim = space.dim();
    let mut boundary = vec![0.0; space.full_len()];
    for n in 0..space.num_u_nodes() {
        if space.is_boundary_node(n) {
            let v = g(&space.u_node(n)[..dim]);
            if !v.is_finite() {
                return Err(FemError::NonFinite(space.u_node(n)).into());
            }
            boundary[n] = v;
        }
    }
    solve_linear_fem(space, rule, 1.0, |_| 0.0, &boundary)
}

/// Smallest `m ≥ 0` such that `s ≡ 2^m` makes `(∇u, s)` strictly feasible
/// at every node of every sampler. Writes `s` into `z` and returns `m`.
pub fn init_slack(
    space: &FeSpace,
    samplers: &[&Sampler],
    barrier: &PLapBarrier<f64>,
    z: &mut [f64],
) -> Result<u32, ProblemError> {
    const MAX_DOUBLINGS: u32 = 200;
    let rows = space.rows();
    let samples: Vec<Vec<f64>> = samplers
        .iter()
        .map(|s| {
            let mut zu = z.to_vec();
            zu[space.num_u_nodes()..].fill(0.0);
            s.sample_full(space, &zu)
        })
        .collect();
    let mut w = vec![0.0; rows - 1];
    for m in 0..=MAX_DOUBLINGS {
        let s = 2f64.powi(m as i32);
        let ok = samples.iter().all(|sm| {
            sm.chunks(rows).all(|node| {
                w[..rows - 2].copy_from_slice(&node[1..rows - 1]);
                w[rows - 2] = s;
                barrier.value(&w).is_some()
            })
        });
        if ok {
            z[space.num_u_nodes()..].fill(s);
            return Ok(m);
        }
    }
    Err(ProblemError::SlackSearch(MAX_DOUBLINGS))
}

/// Everything a path-following run needs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub hierarchy: Arc<SpaceHierarchy>,
    pub barrier: PLapBarrier<f64>,
    pub rule: QuadratureRule<f64>,
    /// Initial iterate on the coarsest level (full layout).
    pub initial: Vec<f64>,
    /// Exponent `m` of the initial slack `2^m`.
    pub slack_exponent: u32,
}

impl Problem {
    pub fn domain(&self) -> &BoxDomain<f64> {
        self.hierarchy.meshes().level(0).domain()
    }

    pub fn num_levels(&self) -> usize {
        self.hierarchy.num_levels()
    }

    /// Level `level` with its own quadrature: the objective the iterates on
    /// that level are centered against.
    pub fn discretization(&self, level: usize) -> Discretization {
        let f = self.spec.forcing;
        Discretization::new(self.hierarchy.clone(), level, self.rule.clone(), self.barrier, move |_| f)
    }

    /// Mesh size `max_K |||A_K|||` of a level.
    pub fn h(&self, level: usize) -> f64 {
        self.hierarchy.meshes().level(level).h()
    }
}

/// Hierarchy, barrier and initial iterate `(harmonic extension of g, 2^m)`
/// on the coarsest grid.
pub fn build_problem(spec: &ProblemSpec) -> Result<Problem, ProblemError> {
    spec.validate()?;
    let domain = BoxDomain::unit(spec.dim).map_err(FemError::from)?;
    let hierarchy = Arc::new(SpaceHierarchy::new(&domain, spec.cells0, spec.levels, spec.alpha)?);
    let rule = QuadratureRule::reference(spec.dim, spec.quad_degree.unwrap_or(2 * spec.alpha))?;
    let barrier = PLapBarrier::with_nu(spec.p, spec.dim, spec.nu)?;
    let coarse = hierarchy.space(0);
    let g = spec.boundary;
    let mut initial = harmonic_extension(coarse, &rule, |x| g.eval(x))?;
    // the initial slack must stay feasible wherever the iterate is prolonged
    let samplers: Vec<Sampler> = (0..hierarchy.num_levels())
        .map(|l| Sampler::new(coarse, hierarchy.meshes().level(l), &hierarchy.ancestors(l, 0), &rule))
        .collect();
    let refs: Vec<&Sampler> = samplers.iter().collect();
    let slack_exponent = init_slack(coarse, &refs, &barrier, &mut initial)?;
    Ok(Problem {
        spec: spec.clone(),
        hierarchy,
        barrier,
        rule,
        initial,
        slack_exponent,
    })
}
