//! Positive-weight quadrature on the reference simplex and the discrete
//! integral `∫^{(h)}` it induces on a mesh.

use thiserror::Error;

use crate::mesh::SimplicialMesh;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("no positive rule of degree {degree} in dimension {dim}")]
    Unsupported { dim: usize, degree: usize },
    #[error("expected {expected} samples, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("norm exponent must be at least 1, got {0}")]
    BadExponent(f64),
}

/// Nodes and weights on the reference simplex. Weights are strictly
/// positive and sum to the reference volume (1 or 1/2).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    dim: usize,
    points: Vec<[T; 2]>,
    weights: Vec<T>,
    degree: usize,
}

// Symmetric triangle rules, barycentric orbits with weights already scaled
// to the reference area 1/2. Digits refined against the moment equations.
const T3_A: f64 = 0.659_027_622_374_092_215_18;
const T3_B: f64 = 0.231_933_368_553_030_572_5;
const T4: [(f64, f64); 2] = [
    (0.091_576_213_509_770_743_46, 0.054_975_871_827_660_933_819),
    (0.445_948_490_915_964_886_32, 0.111_690_794_839_005_732_85),
];
const T5_CENTER: f64 = 0.1125;
const T5: [(f64, f64); 2] = [
    (0.470_142_064_105_115_089_77, 0.066_197_076_394_253_090_369),
    (0.101_286_507_323_456_338_8, 0.062_969_590_272_413_576_298),
];
const T6: [(f64, f64); 2] = [
    (0.249_286_745_170_910_421_29, 0.058_393_137_863_189_683_013),
    (0.063_089_014_491_502_228_34, 0.025_422_453_185_103_408_46),
];
const T6_MIXED: (f64, f64, f64) = (
    0.053_145_049_844_816_947_353,
    0.310_352_451_033_784_405_42,
    0.041_425_537_809_186_787_597,
);

fn orbit3(a: f64) -> [[f64; 3]; 3] {
    let b = 1.0 - 2.0 * a;
    [[b, a, a], [a, b, a], [a, a, b]]
}

fn orbit6(a: f64, b: f64) -> [[f64; 3]; 6] {
    let c = 1.0 - a - b;
    [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

impl<T: Scalar> QuadratureRule<T> {
    /// Positive rule on the reference simplex exact to `degree` (at most 6).
    pub fn reference(dim: usize, degree: usize) -> Result<Self, QuadratureError> {
        if degree > 6 || !(1..=2).contains(&dim) {
            return Err(QuadratureError::Unsupported { dim, degree });
        }
        let mut pts: Vec<([f64; 2], f64)> = Vec::new();
        if dim == 1 {
            let n = degree / 2 + 1;
            pts.extend(gauss_legendre(n).into_iter().map(|(x, w)| ([x, 0.0], w)));
        } else {
            let mut push = |l: [f64; 3], w: f64| pts.push(([l[1], l[2]], w));
            let third = 1.0 / 3.0;
            match degree {
                0 | 1 => push([third; 3], 0.5),
                2 => orbit3(1.0 / 6.0).into_iter().for_each(|l| push(l, 1.0 / 6.0)),
                3 => orbit6(T3_A, T3_B).into_iter().for_each(|l| push(l, 1.0 / 12.0)),
                4 => T4
                    .iter()
                    .for_each(|&(a, w)| orbit3(a).into_iter().for_each(|l| push(l, w))),
                5 => {
                    push([third; 3], T5_CENTER);
                    T5.iter()
                        .for_each(|&(a, w)| orbit3(a).into_iter().for_each(|l| push(l, w)));
                }
                _ => {
                    T6.iter()
                        .for_each(|&(a, w)| orbit3(a).into_iter().for_each(|l| push(l, w)));
                    let (a, b, w) = T6_MIXED;
                    orbit6(a, b).into_iter().for_each(|l| push(l, w));
                }
            }
        }
        let rule = Self {
            dim,
            points: pts.iter().map(|(p, _)| [T::lit(p[0]), T::lit(p[1])]).collect(),
            weights: pts.iter().map(|&(_, w)| T::lit(w)).collect(),
            degree: degree.max(1),
        };
        assert!(rule.weights.iter().all(|&w| w > T::zero()), "non-positive weight");
        Ok(rule)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn point(&self, j: usize) -> &[T] {
        &self.points[j][..self.dim]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Pushed-forward weights `ω_{K,j} = |det A_K| ω_j`, element-major.
    pub fn node_weights(&self, mesh: &SimplicialMesh<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(mesh.num_elements() * self.len());
        for e in 0..mesh.num_elements() {
            let det = mesh.map(e).det().abs();
            out.extend(self.weights.iter().map(|&w| det * w));
        }
        out
    }

    /// Physical nodes `x_{K,j} = A_K ξ_j + b_K`, element-major.
    pub fn node_points(&self, mesh: &SimplicialMesh<T>) -> Vec<[T; 2]> {
        let mut out = Vec::with_capacity(mesh.num_elements() * self.len());
        for e in 0..mesh.num_elements() {
            let map = mesh.map(e);
            out.extend(self.points.iter().map(|p| map.apply(p)));
        }
        out
    }

    fn check_shape(&self, mesh: &SimplicialMesh<T>, samples: &[T]) -> Result<(), QuadratureError> {
        let expected = mesh.num_elements() * self.len();
        if samples.len() != expected {
            return Err(QuadratureError::ShapeMismatch {
                expected,
                got: samples.len(),
            });
        }
        Ok(())
    }

    /// `∫^{(h)}` of the samples `y_{K,j}` (element-major), summed in
    /// element order.
    pub fn integrate(&self, mesh: &SimplicialMesh<T>, samples: &[T]) -> Result<T, QuadratureError> {
        self.check_shape(mesh, samples)?;
        let nq = self.len();
        Ok((0..mesh.num_elements())
            .map(|e| {
                let det = mesh.map(e).det().abs();
                let local: T = samples[e * nq..(e + 1) * nq]
                    .iter()
                    .zip(&self.weights)
                    .map(|(&y, &w)| w * y)
                    .sum();
                det * local
            })
            .sum())
    }

    /// Per-element `‖η‖_{L^p_h(K)}`; `p = ∞` gives the nodal maximum.
    pub fn element_norms(
        &self,
        mesh: &SimplicialMesh<T>,
        samples: &[T],
        p: T,
    ) -> Result<Vec<T>, QuadratureError> {
        self.check_shape(mesh, samples)?;
        if !(p >= T::one()) {
            return Err(QuadratureError::BadExponent(p.to_f64().unwrap_or(f64::NAN)));
        }
        let nq = self.len();
        Ok((0..mesh.num_elements())
            .map(|e| {
                let ys = &samples[e * nq..(e + 1) * nq];
                if p.is_infinite() {
                    ys.iter().fold(T::zero(), |m, y| m.max(y.abs()))
                } else {
                    let det = mesh.map(e).det().abs();
                    let s: T = ys.iter().zip(&self.weights).map(|(y, &w)| w * y.abs().powf(p)).sum();
                    (det * s).powf(p.recip())
                }
            })
            .collect())
    }

    /// Global `‖η‖_{L^p_h(Ω)}`.
    pub fn norm(&self, mesh: &SimplicialMesh<T>, samples: &[T], p: T) -> Result<T, QuadratureError> {
        let per = self.element_norms(mesh, samples, p)?;
        Ok(if p.is_infinite() {
            per.into_iter().fold(T::zero(), T::max)
        } else {
            per.into_iter().map(|v| v.powf(p)).sum::<T>().powf(p.recip())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoxDomain, MeshHierarchy, SimplicialMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn centroid_rule() {
        let r = QuadratureRule::<f64>::reference(2, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.weights()[0], 0.5);
    }

    #[test]
    fn triangle_monomials_exact() {
        for degree in 1..=6 {
            let r = QuadratureRule::<f64>::reference(2, degree).unwrap();
            assert!(r.weights().iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let q: f64 = (0..r.len())
                        .map(|j| r.weights()[j] * r.point(j)[0].powi(a as i32) * r.point(j)[1].powi(b as i32))
                        .sum();
                    assert!((q - exact).abs() < 1e-14, "deg {degree} x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn interval_rules() {
        let r = QuadratureRule::<f64>::reference(1, 3).unwrap();
        assert_eq!(r.len(), 2);
        for &w in r.weights() {
            assert!((w - 0.5).abs() < 1e-15);
        }
        for degree in 0..=6 {
            let r = QuadratureRule::<f64>::reference(1, degree).unwrap();
            for a in 0..=degree as i32 {
                let q: f64 = (0..r.len()).map(|j| r.weights()[j] * r.point(j)[0].powi(a)).sum();
                assert!((q - 1.0 / (a as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn unsupported_degree() {
        assert_eq!(
            QuadratureRule::<f64>::reference(2, 7).unwrap_err(),
            QuadratureError::Unsupported { dim: 2, degree: 7 }
        );
    }

    #[test]
    fn integrals_on_square() {
        let m = SimplicialMesh::rect(&BoxDomain::unit(2).unwrap(), 3).unwrap();
        let r = QuadratureRule::<f64>::reference(2, 2).unwrap();
        let ones = vec![1.0; m.num_elements() * r.len()];
        assert!((r.integrate(&m, &ones).unwrap() - 1.0).abs() < 1e-15);
        let xs: Vec<f64> = r.node_points(&m).iter().map(|p| p[0]).collect();
        assert!((r.integrate(&m, &xs).unwrap() - 0.5).abs() < 1e-14);
        assert!(matches!(
            r.integrate(&m, &xs[1..]),
            Err(QuadratureError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn smooth_integrand_against_tensor_gauss() {
        // reference value from a 12×12 tensor Gauss rule on the square
        let f = |x: f64, y: f64| (x * y).exp() * (1.0 + x * x).recip();
        let g = gauss_legendre(12);
        let reference: f64 = g
            .iter()
            .flat_map(|&(x, wx)| g.iter().map(move |&(y, wy)| wx * wy * f(x, y)))
            .sum();
        let mut err = Vec::new();
        for k in [16, 32] {
            let m = SimplicialMesh::rect(&BoxDomain::unit(2).unwrap(), k).unwrap();
            let r = QuadratureRule::<f64>::reference(2, 6).unwrap();
            let ys: Vec<f64> = r.node_points(&m).iter().map(|p| f(p[0], p[1])).collect();
            err.push((r.integrate(&m, &ys).unwrap() - reference).abs());
        }
        assert!(err[1] < 1e-10, "{err:?}");
    }

    #[test]
    fn weights_scale_like_h_d() {
        let h = MeshHierarchy::new(&BoxDomain::<f64>::unit(2).unwrap(), 1, 5).unwrap();
        let r = QuadratureRule::<f64>::reference(2, 4).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for l in 0..h.num_levels() {
            let m = h.level(l);
            let hd = m.h().powi(2);
            for w in r.node_weights(m) {
                lo = lo.min(w / hd);
                hi = hi.max(w / hd);
            }
            for e in 0..m.num_elements() {
                lo = lo.min(m.volume(e) / hd);
                hi = hi.max(m.volume(e) / hd);
            }
        }
        // identical ratios at every level: the bounds do not drift
        assert!(lo > 0.0 && hi / lo < 20.0, "{lo} {hi}");
    }

    #[test]
    fn norms() {
        let m = SimplicialMesh::rect(&BoxDomain::unit(2).unwrap(), 2).unwrap();
        let r = QuadratureRule::<f64>::reference(2, 2).unwrap();
        let n = m.num_elements() * r.len();
        let c = vec![-2.5; n];
        assert!((r.norm(&m, &c, 1.0).unwrap() - 2.5).abs() < 1e-14);
        let mut ys = vec![0.0; n];
        ys[0] = 1.0;
        ys[1] = -3.0;
        ys[2] = 2.0;
        assert_eq!(r.norm(&m, &ys, f64::INFINITY).unwrap(), 3.0);
        assert!(r.norm(&m, &ys, 0.5).is_err());
    }

    #[test]
    fn holder_and_jensen_on_random_samples() {
        let m = SimplicialMesh::rect(&BoxDomain::unit(2).unwrap(), 3).unwrap();
        let r = QuadratureRule::<f64>::reference(2, 4).unwrap();
        let n = m.num_elements() * r.len();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let omega = m.total_volume();
        for _ in 0..100 {
            let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p: f64 = rng.gen_range(1.0..6.0);
            let q = p / (p - 1.0);
            let abs: Vec<f64> = ys.iter().map(|y| y.abs()).collect();
            let lhs = r.integrate(&m, &abs).unwrap();
            let rhs = r.norm(&m, &ys, p).unwrap() * r.norm(&m, &ys, q.max(1.0)).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12));
            // Jensen with ψ = exp
            let avg = r.integrate(&m, &ys).unwrap() / omega;
            let e: Vec<f64> = ys.iter().map(|y| y.exp()).collect();
            assert!(avg.exp() <= r.integrate(&m, &e).unwrap() / omega * (1.0 + 1e-12));
        }
    }
}
