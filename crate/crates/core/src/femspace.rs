//! Finite element spaces for `z = (u, s)`.
//!
//! `u` is continuous Lagrange of degree `α` and vanishes on the boundary
//! in the search space; `s` is discontinuous of degree `α - 1`. Coefficient
//! vectors come in two layouts:
//!
//! * full: every Lagrange node of `u` (boundary included), then all `s` dofs;
//! * free: interior `u` nodes only, then all `s` dofs.
//!
//! Boundary values live in the full layout and are never touched by
//! directions in the free layout.

use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{BoxDomain, MeshError, MeshHierarchy, SimplicialMesh};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Error, PartialEq)]
pub enum FemError {
    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    UnsupportedDegree(usize),
    #[error("meshes are not nested: {0}")]
    NotNested(String),
    #[error("non-finite value at {0:?}")]
    NonFinite([f64; 2]),
    #[error("vector length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Barycentric coordinates and their gradients on the reference simplex.
fn barycentric(dim: usize, xi: &[f64]) -> ([f64; 3], [[f64; 2]; 3]) {
    if dim == 1 {
        ([1.0 - xi[0], xi[0], 0.0], [[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    } else {
        (
            [1.0 - xi[0] - xi[1], xi[0], xi[1]],
            [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
        )
    }
}

/// Reference Lagrange basis for `u`. Local order: vertices, then edges
/// `(0,1), (1,2), (2,0)` (the single midpoint in 1D).
fn u_basis(dim: usize, alpha: usize, xi: &[f64], val: &mut [f64], grad: &mut [[f64; 2]]) {
    let (l, dl) = barycentric(dim, xi);
    let nv = dim + 1;
    if alpha == 1 {
        for i in 0..nv {
            val[i] = l[i];
            grad[i] = dl[i];
        }
        return;
    }
    for i in 0..nv {
        val[i] = l[i] * (2.0 * l[i] - 1.0);
        let c = 4.0 * l[i] - 1.0;
        grad[i] = [c * dl[i][0], c * dl[i][1]];
    }
    let pairs: &[(usize, usize)] = if dim == 1 { &[(0, 1)] } else { &[(0, 1), (1, 2), (2, 0)] };
    for (k, &(i, j)) in pairs.iter().enumerate() {
        val[nv + k] = 4.0 * l[i] * l[j];
        grad[nv + k] = [
            4.0 * (l[j] * dl[i][0] + l[i] * dl[j][0]),
            4.0 * (l[j] * dl[i][1] + l[i] * dl[j][1]),
        ];
    }
}

/// Reference basis for `s`: the constant (`α = 1`) or the barycentric
/// coordinates (`α = 2`).
fn s_basis(dim: usize, alpha: usize, xi: &[f64], val: &mut [f64]) {
    if alpha == 1 {
        val[0] = 1.0;
    } else {
        let (l, _) = barycentric(dim, xi);
        val[..=dim].copy_from_slice(&l[..=dim]);
    }
}

/// Snaps prolongation weights onto the dyadic grid they belong to, so that
/// zeros are exact zeros.
fn snap(w: f64) -> f64 {
    let r = (w * 64.0).round() / 64.0;
    if (w - r).abs() < 1e-9 {
        r
    } else {
        w
    }
}

/// Paired space `V_h` for `z = (u, s)` on one mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<SimplicialMesh<f64>>,
    alpha: usize,
    u_nodes: Vec<[f64; 2]>,
    elem_u: Vec<usize>,
    u_boundary: Vec<bool>,
    u_free: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Arc<SimplicialMesh<f64>>, alpha: usize) -> Result<Self, FemError> {
        if !(1..=2).contains(&alpha) {
            return Err(FemError::UnsupportedDegree(alpha));
        }
        let dim = mesh.dim();
        let nv = mesh.num_vertices();
        let mut u_nodes: Vec<[f64; 2]> = (0..nv)
            .map(|v| {
                let x = mesh.vertex(v);
                [x[0], if dim == 2 { x[1] } else { 0.0 }]
            })
            .collect();
        let n_loc = Self::u_local_count(dim, alpha);
        let mut elem_u = Vec::with_capacity(mesh.num_elements() * n_loc);
        if alpha == 1 {
            for e in 0..mesh.num_elements() {
                elem_u.extend_from_slice(mesh.element(e));
            }
        } else {
            let (edges, local) = mesh.edges();
            for &[a, b] in &edges {
                let (pa, pb) = (u_nodes[a], u_nodes[b]);
                u_nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
            for e in 0..mesh.num_elements() {
                elem_u.extend_from_slice(mesh.element(e));
                for k in 0..(if dim == 1 { 1 } else { 3 }) {
                    elem_u.push(nv + local[e][k]);
                }
            }
        }
        let domain = mesh.domain();
        let u_boundary: Vec<bool> = u_nodes.iter().map(|x| domain.on_boundary(&x[..dim])).collect();
        let mut free_nodes: Vec<usize> = (0..u_nodes.len()).filter(|&i| !u_boundary[i]).collect();
        // row-major lattice order keeps the Hessian bandwidth near one grid row
        free_nodes.sort_by(|&a, &b| {
            let (xa, xb) = (u_nodes[a], u_nodes[b]);
            xa[1].total_cmp(&xb[1]).then(xa[0].total_cmp(&xb[0]))
        });
        let mut u_free = vec![None; u_nodes.len()];
        for (k, &n) in free_nodes.iter().enumerate() {
            u_free[n] = Some(k);
        }
        Ok(Self {
            mesh,
            alpha,
            u_nodes,
            elem_u,
            u_boundary,
            u_free,
            free_nodes,
        })
    }

    fn u_local_count(dim: usize, alpha: usize) -> usize {
        match (dim, alpha) {
            (_, 1) => dim + 1,
            (1, _) => 3,
            _ => 6,
        }
    }

    pub fn mesh(&self) -> &SimplicialMesh<f64> {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<SimplicialMesh<f64>> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    /// Number of sampled rows per node: `u`, `∇u`, `s`.
    pub fn rows(&self) -> usize {
        self.dim() + 2
    }

    pub fn num_u_nodes(&self) -> usize {
        self.u_nodes.len()
    }

    pub fn num_u_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn u_local(&self) -> usize {
        Self::u_local_count(self.dim(), self.alpha)
    }

    pub fn s_local(&self) -> usize {
        if self.alpha == 1 {
            1
        } else {
            self.dim() + 1
        }
    }

    pub fn num_s(&self) -> usize {
        self.mesh.num_elements() * self.s_local()
    }

    pub fn full_len(&self) -> usize {
        self.num_u_nodes() + self.num_s()
    }

    /// Dimension `n` of the search space.
    pub fn free_len(&self) -> usize {
        self.num_u_free() + self.num_s()
    }

    pub fn u_node(&self, i: usize) -> [f64; 2] {
        self.u_nodes[i]
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.u_boundary[i]
    }

    pub fn element_u_nodes(&self, e: usize) -> &[usize] {
        let n = self.u_local();
        &self.elem_u[e * n..(e + 1) * n]
    }

    /// Full-layout indices of the local dofs of element `e` (u then s).
    pub fn local_full(&self, e: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend_from_slice(self.element_u_nodes(e));
        let ns = self.s_local();
        let base = self.num_u_nodes() + e * ns;
        out.extend(base..base + ns);
    }

    /// Free-layout indices of the local dofs of element `e`; `None` marks a
    /// boundary node of `u`.
    pub fn local_free(&self, e: usize, out: &mut Vec<Option<usize>>) {
        out.clear();
        out.extend(self.element_u_nodes(e).iter().map(|&n| self.u_free[n]));
        let ns = self.s_local();
        let base = self.num_u_free() + e * ns;
        out.extend((base..base + ns).map(Some));
    }

    /// Largest index distance between free `u` dofs sharing an element.
    pub fn u_bandwidth(&self) -> usize {
        let mut bw = 0;
        for e in 0..self.mesh.num_elements() {
            let free = self.element_u_nodes(e).iter().filter_map(|&n| self.u_free[n]);
            let (lo, hi) = free.fold((usize::MAX, 0), |(lo, hi), i| (lo.min(i), hi.max(i)));
            if lo <= hi {
                bw = bw.max(hi - lo);
            }
        }
        bw
    }

    pub fn free_index_of_node(&self, node: usize) -> Option<usize> {
        self.u_free[node]
    }

    /// Embeds free coefficients into the full layout with zero boundary.
    pub fn free_to_full(&self, y: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.full_len()];
        for (k, &n) in self.free_nodes.iter().enumerate() {
            z[n] = y[k];
        }
        z[self.num_u_nodes()..].copy_from_slice(&y[self.num_u_free()..]);
        z
    }

    /// Free part of a full vector.
    pub fn full_to_free(&self, z: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.free_nodes.iter().map(|&n| z[n]).collect();
        y.extend_from_slice(&z[self.num_u_nodes()..]);
        y
    }

    /// Reference positions of the `s` nodes: the centroid, or the vertices.
    fn s_reference_nodes(&self) -> Vec<[f64; 2]> {
        match (self.alpha, self.dim()) {
            (1, 1) => vec![[0.5, 0.0]],
            (1, _) => vec![[1.0 / 3.0, 1.0 / 3.0]],
            (_, 1) => vec![[0.0, 0.0], [1.0, 0.0]],
            _ => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Physical positions of the `s` dofs, in dof order.
    pub fn s_points(&self) -> Vec<[f64; 2]> {
        let refs = self.s_reference_nodes();
        let mut out = Vec::with_capacity(self.num_s());
        for e in 0..self.mesh.num_elements() {
            let map = self.mesh.map(e);
            out.extend(refs.iter().map(|r| map.apply(r)));
        }
        out
    }

    /// Nodal interpolation `Π_h` of `(u, s)` into the full layout.
    pub fn interpolate<U, S>(&self, u: U, s: S) -> Result<Vec<f64>, FemError>
    where
        U: Fn(&[f64]) -> f64,
        S: Fn(&[f64]) -> f64,
    {
        let dim = self.dim();
        let mut z = Vec::with_capacity(self.full_len());
        for x in &self.u_nodes {
            let v = u(&x[..dim]);
            if !v.is_finite() {
                return Err(FemError::NonFinite(*x));
            }
            z.push(v);
        }
        for x in self.s_points() {
            let v = s(&x[..dim]);
            if !v.is_finite() {
                return Err(FemError::NonFinite(x));
            }
            z.push(v);
        }
        Ok(z)
    }

    /// Evaluates `(u, ∇u, s)` of a full vector at a physical point inside
    /// element `e`.
    pub fn evaluate(&self, z: &[f64], e: usize, x: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let map = self.mesh.map(e);
        let xi = map.pull_back(x);
        let mut val = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        u_basis(dim, self.alpha, &xi, &mut val, &mut grad);
        let mut out = vec![0.0; dim + 2];
        for (k, &n) in self.element_u_nodes(e).iter().enumerate() {
            let g = map.push_gradient(&grad[k]);
            out[0] += val[k] * z[n];
            for c in 0..dim {
                out[1 + c] += g[c] * z[n];
            }
        }
        let mut sv = [0.0; 3];
        s_basis(dim, self.alpha, &xi, &mut sv);
        let base = self.num_u_nodes() + e * self.s_local();
        for k in 0..self.s_local() {
            out[dim + 1] += sv[k] * z[base + k];
        }
        out
    }

    /// Mean of `s` over each element.
    pub fn s_means(&self, z: &[f64]) -> Vec<f64> {
        let ns = self.s_local();
        let base = self.num_u_nodes();
        (0..self.mesh.num_elements())
            .map(|e| z[base + e * ns..base + (e + 1) * ns].iter().sum::<f64>() / ns as f64)
            .collect()
    }

    /// Plain text solution export: `x [y] u` per mesh vertex, then one line
    /// per element with the mean of `s`.
    pub fn write_solution<W: Write>(&self, z: &[f64], mut w: W) -> io::Result<()> {
        let dim = self.dim();
        for v in 0..self.mesh.num_vertices() {
            let x = self.mesh.vertex(v);
            let coords: Vec<String> = x.iter().map(|c| format!("{c:e}")).collect();
            writeln!(w, "{} {:e}", coords.join(" "), z[v])?;
        }
        debug_assert!(dim >= 1);
        for m in self.s_means(z) {
            writeln!(w, "{m:e}")?;
        }
        Ok(())
    }
}

/// Linear map from the local dofs of a source element to `(u, ∇u, s)` at
/// the quadrature nodes of a target mesh. The source space may live on a
/// coarser level of the same hierarchy; the nodes always belong to the
/// target mesh.
#[derive(Debug, Clone)]
pub struct Sampler {
    rows: usize,
    n_loc: usize,
    nq: usize,
    source: Vec<usize>,
    table: Vec<f64>,
    weights: Vec<f64>,
    points: Vec<[f64; 2]>,
}

impl Sampler {
    /// `ancestors[k]` is the source element containing target element `k`.
    pub fn new(
        space: &FeSpace,
        target: &SimplicialMesh<f64>,
        ancestors: &[usize],
        rule: &QuadratureRule<f64>,
    ) -> Self {
        let dim = space.dim();
        let rows = dim + 2;
        let nu = space.u_local();
        let ns = space.s_local();
        let n_loc = nu + ns;
        let nq = rule.len();
        let ne = target.num_elements();
        let mut table = vec![0.0; ne * nq * rows * n_loc];
        let weights = rule.node_weights(target);
        let points = rule.node_points(target);
        let mut val = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        let mut sv = [0.0; 3];
        for k in 0..ne {
            let map = space.mesh().map(ancestors[k]);
            for q in 0..nq {
                let xi = map.pull_back(&points[k * nq + q]);
                u_basis(dim, space.alpha, &xi, &mut val, &mut grad);
                s_basis(dim, space.alpha, &xi, &mut sv);
                let block = &mut table[(k * nq + q) * rows * n_loc..][..rows * n_loc];
                for a in 0..nu {
                    let g = map.push_gradient(&grad[a]);
                    block[a] = val[a];
                    for c in 0..dim {
                        block[(1 + c) * n_loc + a] = g[c];
                    }
                }
                for b in 0..ns {
                    block[(dim + 1) * n_loc + nu + b] = sv[b];
                }
            }
        }
        Self {
            rows,
            n_loc,
            nq,
            source: ancestors.to_vec(),
            table,
            weights,
            points,
        }
    }

    /// Sampler of a space on its own mesh.
    pub fn own(space: &FeSpace, rule: &QuadratureRule<f64>) -> Self {
        let ids: Vec<usize> = (0..space.mesh().num_elements()).collect();
        Self::new(space, space.mesh(), &ids, rule)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn local_len(&self) -> usize {
        self.n_loc
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nq
    }

    pub fn num_elements(&self) -> usize {
        self.source.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn source_element(&self, k: usize) -> usize {
        self.source[k]
    }

    /// `ω_{K,j}`, element-major.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Row-major `rows × n_loc` block at node `q` of target element `k`.
    #[inline]
    pub fn block(&self, k: usize, q: usize) -> &[f64] {
        &self.table[(k * self.nq + q) * self.rows * self.n_loc..][..self.rows * self.n_loc]
    }

    /// Samples of a full vector: `rows` values per node, node-major.
    pub fn sample_full(&self, space: &FeSpace, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes() * self.rows];
        let mut dofs = Vec::new();
        let mut local = vec![0.0; self.n_loc];
        for k in 0..self.num_elements() {
            space.local_full(self.source[k], &mut dofs);
            for (l, &d) in dofs.iter().enumerate() {
                local[l] = z[d];
            }
            self.apply_local(k, &local, &mut out);
        }
        out
    }

    /// Samples of a free-layout direction (zero on the boundary).
    pub fn sample_free(&self, space: &FeSpace, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes() * self.rows];
        let mut dofs = Vec::new();
        let mut local = vec![0.0; self.n_loc];
        for k in 0..self.num_elements() {
            space.local_free(self.source[k], &mut dofs);
            for (l, d) in dofs.iter().enumerate() {
                local[l] = d.map_or(0.0, |i| y[i]);
            }
            self.apply_local(k, &local, &mut out);
        }
        out
    }

    fn apply_local(&self, k: usize, local: &[f64], out: &mut [f64]) {
        for q in 0..self.nq {
            let block = self.block(k, q);
            let dst = &mut out[(k * self.nq + q) * self.rows..][..self.rows];
            for (r, d) in dst.iter_mut().enumerate() {
                *d = block[r * self.n_loc..(r + 1) * self.n_loc]
                    .iter()
                    .zip(local)
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
    }
}

/// Exact embedding `V_H ⊂ V_h` between adjacent levels, acting on full
/// vectors. Stored as sparse rows over the coarse full layout.
#[derive(Debug, Clone)]
pub struct Prolongation {
    coarse_len: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Prolongation {
    pub fn new(coarse: &FeSpace, fine: &FeSpace, parent: &[usize]) -> Result<Self, FemError> {
        let dim = coarse.dim();
        if fine.dim() != dim || fine.alpha != coarse.alpha {
            return Err(FemError::NotNested("dimension or degree differ".into()));
        }
        let children = 1 << dim;
        let (cm, fm) = (coarse.mesh(), fine.mesh());
        if parent.len() != fm.num_elements() || fm.num_elements() != cm.num_elements() * children {
            return Err(FemError::NotNested("element counts".into()));
        }
        for v in 0..cm.num_vertices() {
            if v >= fm.num_vertices() || cm.vertex(v) != fm.vertex(v) {
                return Err(FemError::NotNested(format!("vertex {v} moved")));
            }
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); fine.full_len()];
        let mut done = vec![false; fine.num_u_nodes()];
        let mut val = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        let mut sv = [0.0; 3];
        let mut coarse_dofs = Vec::new();
        let s_refs = fine.s_reference_nodes();
        for k in 0..fm.num_elements() {
            let e = parent[k];
            let cmap = cm.map(e);
            coarse.local_full(e, &mut coarse_dofs);
            for &node in fine.element_u_nodes(k) {
                if done[node] {
                    continue;
                }
                done[node] = true;
                let x = fine.u_nodes[node];
                let xi = cmap.pull_back(&x);
                if xi.iter().take(dim).any(|&c| c < -1e-10) || xi[0] + xi[1] > 1.0 + 1e-10 {
                    return Err(FemError::NotNested(format!("node {x:?} outside parent {e}")));
                }
                u_basis(dim, coarse.alpha, &xi, &mut val, &mut grad);
                for a in 0..coarse.u_local() {
                    let w = snap(val[a]);
                    if w != 0.0 {
                        rows[node].push((coarse_dofs[a], w));
                    }
                }
            }
            let fmap = fm.map(k);
            let nu = coarse.u_local();
            for (b, r) in s_refs.iter().enumerate() {
                let xi = cmap.pull_back(&fmap.apply(r));
                s_basis(dim, coarse.alpha, &xi, &mut sv);
                let row = fine.num_u_nodes() + k * fine.s_local() + b;
                for c in 0..coarse.s_local() {
                    let w = snap(sv[c]);
                    if w != 0.0 {
                        rows[row].push((coarse_dofs[nu + c], w));
                    }
                }
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in rows {
            for (c, w) in r {
                cols.push(c);
                vals.push(w);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            coarse_len: coarse.full_len(),
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn fine_len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn coarse_len(&self) -> usize {
        self.coarse_len
    }

    pub fn apply(&self, coarse: &[f64]) -> Vec<f64> {
        (0..self.fine_len())
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|i| self.vals[i] * coarse[self.cols[i]])
                    .sum()
            })
            .collect()
    }

    pub fn apply_transpose(&self, fine: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.coarse_len];
        for (r, &f) in fine.iter().enumerate() {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.cols[i]] += self.vals[i] * f;
            }
        }
        out
    }
}

/// Nested meshes with their spaces and the prolongations between
/// adjacent levels. Level 0 is the coarsest.
#[derive(Debug, Clone)]
pub struct SpaceHierarchy {
    meshes: MeshHierarchy<f64>,
    spaces: Vec<FeSpace>,
    prolong: Vec<Prolongation>,
}

impl SpaceHierarchy {
    pub fn new(domain: &BoxDomain<f64>, coarse_cells: usize, levels: usize, alpha: usize) -> Result<Self, FemError> {
        let meshes = MeshHierarchy::new(domain, coarse_cells, levels)?;
        let spaces = (0..levels)
            .map(|l| FeSpace::new(Arc::new(meshes.level(l).clone()), alpha))
            .collect::<Result<Vec<_>, _>>()?;
        let prolong = (1..levels)
            .map(|l| Prolongation::new(&spaces[l - 1], &spaces[l], meshes.parent_map(l)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { meshes, spaces, prolong })
    }

    pub fn num_levels(&self) -> usize {
        self.spaces.len()
    }

    pub fn meshes(&self) -> &MeshHierarchy<f64> {
        &self.meshes
    }

    pub fn space(&self, l: usize) -> &FeSpace {
        &self.spaces[l]
    }

    pub fn finest(&self) -> &FeSpace {
        self.spaces.last().unwrap()
    }

    /// Prolongation from level `l` to level `l + 1`.
    pub fn prolongation(&self, l: usize) -> &Prolongation {
        &self.prolong[l]
    }

    /// Ancestor in level `coarse` of every element of level `fine`.
    pub fn ancestors(&self, fine: usize, coarse: usize) -> Vec<usize> {
        (0..self.meshes.level(fine).num_elements())
            .map(|e| self.meshes.ancestor(fine, coarse, e))
            .collect()
    }

    /// Maps a full vector from level `from` up to level `to`.
    pub fn prolong_full(&self, from: usize, to: usize, z: &[f64]) -> Vec<f64> {
        assert!(from <= to);
        let mut v = z.to_vec();
        for l in from..to {
            v = self.prolong[l].apply(&v);
        }
        v
    }

    /// Maps a free vector of level `from` to a full vector of level `to`
    /// with zero boundary values.
    pub fn prolong_free(&self, from: usize, to: usize, y: &[f64]) -> Vec<f64> {
        self.prolong_full(from, to, &self.spaces[from].free_to_full(y))
    }
}
