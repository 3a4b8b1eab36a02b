//! Simplicial meshes of boxes in one and two dimensions, uniform
//! refinement and nested hierarchies.
//!
//! Every element `K` carries its affine map `x = A_K ξ + b_K` from the
//! reference simplex (`[0,1]` or the triangle `(0,0),(1,0),(0,1)`).
//! Refinement cuts each triangle into four children whose maps are
//! `±A_K / 2`, so `h` halves exactly and the shape parameter is preserved.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("only dimensions 1 and 2 are supported, got {0}")]
    UnsupportedDimension(usize),
    #[error("degenerate box: side {axis} has length {length}")]
    DegenerateBox { axis: usize, length: f64 },
    #[error("cells_per_side must be at least 1")]
    NoCells,
    #[error("hierarchy needs at least one level")]
    NoLevels,
    #[error("mesh invariant violated: {0}")]
    Invalid(String),
}

/// Axis-aligned box `[lo_0, hi_0] × ... `.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> BoxDomain<T> {
    pub fn new(lo: &[T], hi: &[T]) -> Result<Self, MeshError> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 {
            return Err(MeshError::UnsupportedDimension(lo.len().max(hi.len())));
        }
        for axis in 0..lo.len() {
            let length = hi[axis] - lo[axis];
            if !(length > T::zero()) || !length.is_finite() {
                return Err(MeshError::DegenerateBox {
                    axis,
                    length: length.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        })
    }

    pub fn unit(dim: usize) -> Result<Self, MeshError> {
        Self::new(&vec![T::zero(); dim], &vec![T::one(); dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    /// Lebesgue measure `|Ω|`.
    pub fn measure(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(T::one(), |acc, (&l, &h)| acc * (h - l))
    }

    /// True when `x` lies on one of the faces (exact comparison).
    pub fn on_boundary(&self, x: &[T]) -> bool {
        (0..self.dim()).any(|i| x[i] == self.lo[i] || x[i] == self.hi[i])
    }
}

/// Affine map of an element, `x = A ξ + b`. `A` is stored row-major in a
/// 2×2 array; in one dimension only `a[0]` is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap<T> {
    dim: usize,
    a: [T; 4],
    b: [T; 2],
}

impl<T: Scalar> AffineMap<T> {
    fn from_vertices(dim: usize, v: &[[T; 2]]) -> Self {
        let z = T::zero();
        match dim {
            1 => Self {
                dim,
                a: [v[1][0] - v[0][0], z, z, z],
                b: [v[0][0], z],
            },
            _ => Self {
                dim,
                a: [
                    v[1][0] - v[0][0],
                    v[2][0] - v[0][0],
                    v[1][1] - v[0][1],
                    v[2][1] - v[0][1],
                ],
                b: v[0],
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries of `A` (`a[0]` only in 1D).
    pub fn matrix(&self) -> [T; 4] {
        self.a
    }

    pub fn offset(&self) -> [T; 2] {
        self.b
    }

    pub fn det(&self) -> T {
        match self.dim {
            1 => self.a[0],
            _ => self.a[0] * self.a[3] - self.a[1] * self.a[2],
        }
    }

    pub fn apply(&self, xi: &[T]) -> [T; 2] {
        match self.dim {
            1 => [self.a[0] * xi[0] + self.b[0], T::zero()],
            _ => [
                self.a[0] * xi[0] + self.a[1] * xi[1] + self.b[0],
                self.a[2] * xi[0] + self.a[3] * xi[1] + self.b[1],
            ],
        }
    }

    /// Reference coordinates of the physical point `x`.
    pub fn pull_back(&self, x: &[T]) -> [T; 2] {
        match self.dim {
            1 => [(x[0] - self.b[0]) / self.a[0], T::zero()],
            _ => {
                let det = self.det();
                let rx = x[0] - self.b[0];
                let ry = x[1] - self.b[1];
                [
                    (self.a[3] * rx - self.a[1] * ry) / det,
                    (-self.a[2] * rx + self.a[0] * ry) / det,
                ]
            }
        }
    }

    /// Maps a reference gradient to the physical gradient, `A^{-T} ĝ`.
    pub fn push_gradient(&self, g: &[T]) -> [T; 2] {
        match self.dim {
            1 => [g[0] / self.a[0], T::zero()],
            _ => {
                let det = self.det();
                [
                    (self.a[3] * g[0] - self.a[2] * g[1]) / det,
                    (-self.a[1] * g[0] + self.a[0] * g[1]) / det,
                ]
            }
        }
    }

    /// Singular values `(σ_max, σ_min)` of `A`.
    pub fn singular_values(&self) -> (T, T) {
        match self.dim {
            1 => (self.a[0].abs(), self.a[0].abs()),
            _ => {
                let [a, b, c, d] = self.a;
                let fro2 = a * a + b * b + c * c + d * d;
                let det = (a * d - b * c).abs();
                let two = T::lit(2.0);
                // σ_max ± σ_min = sqrt(fro² ± 2|det|)
                let sum = (fro2 + two * det).sqrt();
                let diff = (fro2 - two * det).max(T::zero()).sqrt();
                ((sum + diff) / two, (sum - diff) / two)
            }
        }
    }
}

/// Conforming simplicial mesh of a box.
#[derive(Debug, Clone)]
pub struct SimplicialMesh<T> {
    domain: BoxDomain<T>,
    vertices: Vec<[T; 2]>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    maps: Vec<AffineMap<T>>,
}

impl<T: Scalar> SimplicialMesh<T> {
    fn assemble(domain: BoxDomain<T>, vertices: Vec<[T; 2]>, elements: Vec<[usize; 3]>) -> Self {
        let dim = domain.dim();
        let boundary = vertices
            .iter()
            .map(|v| domain.on_boundary(&v[..dim]))
            .collect();
        let maps = elements
            .iter()
            .map(|e| {
                let vs: Vec<[T; 2]> = e[..=dim].iter().map(|&i| vertices[i]).collect();
                AffineMap::from_vertices(dim, &vs)
            })
            .collect();
        Self {
            domain,
            vertices,
            elements,
            boundary,
            maps,
        }
    }

    /// Uniform mesh with `cells_per_side` cells along every axis. Squares
    /// are split along the lower-left to upper-right diagonal.
    pub fn rect(domain: &BoxDomain<T>, cells_per_side: usize) -> Result<Self, MeshError> {
        if cells_per_side == 0 {
            return Err(MeshError::NoCells);
        }
        let k = cells_per_side;
        let kt = T::from_count(k);
        let coord = |axis: usize, i: usize| {
            if i == k {
                domain.hi[axis]
            } else {
                domain.lo[axis] + (domain.hi[axis] - domain.lo[axis]) * T::from_count(i) / kt
            }
        };
        let (vertices, elements) = match domain.dim() {
            1 => {
                let vertices = (0..=k).map(|i| [coord(0, i), T::zero()]).collect();
                let elements = (0..k).map(|i| [i, i + 1, usize::MAX]).collect();
                (vertices, elements)
            }
            2 => {
                let mut vertices = Vec::with_capacity((k + 1) * (k + 1));
                for j in 0..=k {
                    for i in 0..=k {
                        vertices.push([coord(0, i), coord(1, j)]);
                    }
                }
                let id = |i: usize, j: usize| j * (k + 1) + i;
                let mut elements = Vec::with_capacity(2 * k * k);
                for j in 0..k {
                    for i in 0..k {
                        let (ll, lr, ul, ur) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                        // right-angle vertex first, so |||A_K||| is the cell width
                        elements.push([lr, ur, ll]);
                        elements.push([ul, ll, ur]);
                    }
                }
                (vertices, elements)
            }
            d => return Err(MeshError::UnsupportedDimension(d)),
        };
        Ok(Self::assemble(domain.clone(), vertices, elements))
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain<T> {
        &self.domain
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex(&self, i: usize) -> &[T] {
        &self.vertices[i][..self.dim()]
    }

    /// Vertex indices of element `e` (`d + 1` of them).
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..=self.dim()]
    }

    pub fn map(&self, e: usize) -> &AffineMap<T> {
        &self.maps[e]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.boundary[v]).collect()
    }

    /// `|K|`.
    pub fn volume(&self, e: usize) -> T {
        let det = self.maps[e].det().abs();
        match self.dim() {
            1 => det,
            _ => det / T::lit(2.0),
        }
    }

    pub fn total_volume(&self) -> T {
        (0..self.num_elements()).map(|e| self.volume(e)).sum()
    }

    /// Edge list and, per element, its local edges `(0,1),(1,2),(2,0)` as
    /// indices into that list. In one dimension every element is an edge.
    pub fn edges(&self) -> (Vec<[usize; 2]>, Vec<[usize; 3]>) {
        if self.dim() == 1 {
            let edges = (0..self.num_elements())
                .map(|e| [self.elements[e][0], self.elements[e][1]])
                .collect();
            let local = (0..self.num_elements())
                .map(|e| [e, usize::MAX, usize::MAX])
                .collect();
            return (edges, local);
        }
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut local = Vec::with_capacity(self.num_elements());
        for el in &self.elements {
            let mut ids = [0; 3];
            for (slot, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                let (va, vb) = (el[a], el[b]);
                let key = (va.min(vb), va.max(vb));
                ids[slot] = *index.entry(key).or_insert_with(|| {
                    edges.push([va, vb]);
                    edges.len() - 1
                });
            }
            local.push(ids);
        }
        (edges, local)
    }

    /// Midpoint refinement. Returns the child mesh and its parent map.
    /// Children of element `e` are `2^d e .. 2^d (e + 1)`; coarse vertices
    /// keep their indices.
    pub fn refine_uniform(&self) -> (Self, Vec<usize>) {
        let dim = self.dim();
        let half = T::lit(0.5);
        let mut vertices = self.vertices.clone();
        let (edges, local) = self.edges();
        let mid: Vec<usize> = edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                vertices.push([(pa[0] + pb[0]) * half, (pa[1] + pb[1]) * half]);
                vertices.len() - 1
            })
            .collect();
        let children = 1 << dim;
        let mut elements = Vec::with_capacity(self.num_elements() * children);
        let mut parent = Vec::with_capacity(self.num_elements() * children);
        for (e, el) in self.elements.iter().enumerate() {
            if dim == 1 {
                let m = mid[local[e][0]];
                elements.push([el[0], m, usize::MAX]);
                elements.push([m, el[1], usize::MAX]);
            } else {
                let [v0, v1, v2] = *el;
                let m01 = mid[local[e][0]];
                let m12 = mid[local[e][1]];
                let m20 = mid[local[e][2]];
                elements.push([v0, m01, m20]);
                elements.push([m01, v1, m12]);
                elements.push([m20, m12, v2]);
                // ordered so that the map is -A/2
                elements.push([m12, m20, m01]);
            }
            parent.extend(std::iter::repeat_n(e, children));
        }
        (Self::assemble(self.domain.clone(), vertices, elements), parent)
    }

    /// `(h, ρ)` with `h = max |||A_K|||` and `ρ = min σ_min(A_K) / h`.
    pub fn quasi_uniformity(&self) -> (T, T) {
        let mut h = T::zero();
        let mut smin = T::infinity();
        for m in &self.maps {
            let (hi, lo) = m.singular_values();
            h = h.max(hi);
            smin = smin.min(lo);
        }
        (h, smin / h)
    }

    pub fn h(&self) -> T {
        self.quasi_uniformity().0
    }

    /// Checks positive volumes, the volume sum and the boundary flags.
    pub fn validate(&self) -> Result<(), MeshError> {
        for (e, m) in self.maps.iter().enumerate() {
            if !(m.det() > T::zero()) {
                return Err(MeshError::Invalid(format!("element {e} has det {}", m.det())));
            }
        }
        let total = self.total_volume();
        let omega = self.domain.measure();
        if ((total - omega) / omega).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) {
            return Err(MeshError::Invalid(format!("volume {total} != {omega}")));
        }
        for v in 0..self.num_vertices() {
            if self.domain.on_boundary(self.vertex(v)) != self.boundary[v] {
                return Err(MeshError::Invalid(format!("boundary flag of vertex {v}")));
            }
        }
        Ok(())
    }

    /// Plain text export: `d nv ne`, vertex rows, element rows, then the
    /// boundary vertex indices on one line.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.dim();
        writeln!(w, "{} {} {}", d, self.num_vertices(), self.num_elements())?;
        for v in 0..self.num_vertices() {
            let row: Vec<String> = self.vertex(v).iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        for e in 0..self.num_elements() {
            let row: Vec<String> = self.element(e).iter().map(|i| i.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        let b: Vec<String> = self.boundary_vertices().iter().map(|i| i.to_string()).collect();
        writeln!(w, "{}", b.join(" "))
    }
}

/// Nested meshes, coarsest first.
#[derive(Debug, Clone)]
pub struct MeshHierarchy<T> {
    levels: Vec<SimplicialMesh<T>>,
    parents: Vec<Vec<usize>>,
}

impl<T: Scalar> MeshHierarchy<T> {
    pub fn new(domain: &BoxDomain<T>, coarse_cells: usize, levels: usize) -> Result<Self, MeshError> {
        if levels == 0 {
            return Err(MeshError::NoLevels);
        }
        let mut meshes = vec![SimplicialMesh::rect(domain, coarse_cells)?];
        let mut parents = vec![Vec::new()];
        for _ in 1..levels {
            let (fine, parent) = meshes.last().unwrap().refine_uniform();
            meshes.push(fine);
            parents.push(parent);
        }
        Ok(Self {
            levels: meshes,
            parents,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Level `l`, zero-based (0 is the coarsest).
    pub fn level(&self, l: usize) -> &SimplicialMesh<T> {
        &self.levels[l]
    }

    pub fn finest(&self) -> &SimplicialMesh<T> {
        self.levels.last().unwrap()
    }

    /// Parent in level `l - 1` of each element of level `l`.
    pub fn parent_map(&self, l: usize) -> &[usize] {
        &self.parents[l]
    }

    /// Ancestor in level `coarse` of element `e` of level `fine`.
    pub fn ancestor(&self, fine: usize, coarse: usize, mut e: usize) -> usize {
        assert!(coarse <= fine);
        for l in (coarse + 1..=fine).rev() {
            e = self.parents[l][e];
        }
        e
    }

    pub fn h_values(&self) -> Vec<T> {
        self.levels.iter().map(|m| m.h()).collect()
    }
}
