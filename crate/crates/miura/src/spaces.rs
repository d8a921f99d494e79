//! Lagrange finite-element spaces on structured triangle meshes.
//!
//! Two spaces drive the discretization: the gradient unknown lives in the
//! vector quadratic space (one scalar dof per vertex and per edge midpoint,
//! six components for the two columns of a 3x2 gradient), and the
//! cross-derivative multiplier lives in the vector linear space (vertex dofs,
//! three components).  A `DofMap` numbers the scalar dofs of one space;
//! vector dofs interleave components fastest, so component `c` of scalar dof
//! `s` is global dof `s * n_components + c`.
//!
//! Boundary conditions enter through [`BoundaryData`]: a total evaluator for
//! the prescribed gradient columns on the active sides.  Interpolation
//! samples it at boundary vertex and midpoint dofs; validation checks the
//! admissibility constraints that the continuous theory imposes on such data.

use std::sync::Arc;

use nalgebra::Vector3;
use thiserror::Error;

use crate::mesh::{Mesh, Rect, Side};

/// Scalar dof numbering of one Lagrange space over a fixed mesh.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Polynomial degree: 1 (vertex dofs) or 2 (vertex + edge-midpoint dofs).
    pub degree: u8,
    /// Number of interleaved vector components.
    pub n_components: usize,
    /// Number of scalar dofs (all components share this numbering).
    pub n_scalar: usize,
    /// Scalar dofs of each triangle: 3 vertex dofs, then for degree 2 the
    /// dofs of local edges (0,1), (1,2), (2,0).  Only `n_local` entries used.
    pub tri_dofs: Vec<[usize; 6]>,
    /// Number of scalar dofs per triangle (3 or 6).
    pub n_local: usize,
    /// Geometric location of each scalar dof.
    pub dof_coords: Vec<[f64; 2]>,
    /// Scalar dofs lying on each rectangle side, ascending; empty for sides
    /// along a periodic axis.
    pub side_dofs: [Vec<usize>; 4],
}

/// Space construction and boundary-data failures.
#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("unsupported polynomial degree {0}; only 1 and 2 are implemented")]
    UnsupportedDegree(u8),
    #[error("boundary data evaluator failed at ({x}, {y})")]
    BoundaryEval { x: f64, y: f64 },
}

pub(crate) fn side_index(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
        Side::Bottom => 2,
        Side::Top => 3,
    }
}

/// Numbers the scalar dofs of the degree-1 or degree-2 Lagrange space on
/// `mesh` with `n_components` interleaved components.
pub fn build_space(mesh: &Mesh, degree: u8, n_components: usize) -> Result<DofMap, SpaceError> {
    if degree != 1 && degree != 2 {
        return Err(SpaceError::UnsupportedDegree(degree));
    }
    let nv = mesh.n_vertices();
    let n_scalar = if degree == 1 { nv } else { nv + mesh.n_edges() };
    let n_local = if degree == 1 { 3 } else { 6 };

    let mut tri_dofs = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let v = mesh.triangles[t];
        let mut dofs = [0usize; 6];
        dofs[..3].copy_from_slice(&v);
        if degree == 2 {
            for k in 0..3 {
                dofs[3 + k] = nv + mesh.tri_edges[t][k];
            }
        }
        tri_dofs.push(dofs);
    }

    let mut dof_coords = Vec::with_capacity(n_scalar);
    dof_coords.extend_from_slice(&mesh.vertices);
    if degree == 2 {
        dof_coords.extend(mesh.edges.iter().map(|e| e.midpoint));
    }

    // Side membership: vertices via their canonical grid position, edge dofs
    // via the mesh boundary tags.  Periodic sides never appear (the mesh
    // reports no boundary there, and seam vertices are canonically interior).
    let mut side_dofs: [Vec<usize>; 4] = Default::default();
    let on_side = |i: usize, j: usize, side: Side| -> bool {
        use crate::mesh::Axis;
        match side {
            Side::Left => mesh.periodic != Some(Axis::X) && i == 0,
            Side::Right => mesh.periodic != Some(Axis::X) && i == mesh.nx,
            Side::Bottom => mesh.periodic != Some(Axis::Y) && j == 0,
            Side::Top => mesh.periodic != Some(Axis::Y) && j == mesh.ny,
        }
    };
    for (v, &[i, j]) in mesh.vertex_grid.iter().enumerate() {
        for side in Side::ALL {
            if on_side(i, j, side) {
                side_dofs[side_index(side)].push(v);
            }
        }
    }
    if degree == 2 {
        for &(edge, side) in &mesh.boundary {
            side_dofs[side_index(side)].push(nv + edge);
        }
    }
    for dofs in &mut side_dofs {
        dofs.sort_unstable();
    }

    Ok(DofMap {
        degree,
        n_components,
        n_scalar,
        tri_dofs,
        n_local,
        dof_coords,
        side_dofs,
    })
}

impl DofMap {
    /// Total number of vector dofs.
    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.n_components
    }

    /// Global vector dof of component `comp` at scalar dof `scalar`.
    pub fn global(&self, scalar: usize, comp: usize) -> usize {
        debug_assert!(comp < self.n_components);
        scalar * self.n_components + comp
    }

    /// Ascending scalar dofs on the union of `sides`.
    pub fn dofs_on_sides(&self, sides: &[Side]) -> Vec<usize> {
        let mut dofs: Vec<usize> = sides
            .iter()
            .flat_map(|&s| self.side_dofs[side_index(s)].iter().copied())
            .collect();
        dofs.sort_unstable();
        dofs.dedup();
        dofs
    }
}

/// Both columns of a prescribed boundary gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradPair {
    /// First column: the derivative of the surface along the first parameter.
    pub gx: Vector3<f64>,
    /// Second column: the derivative along the second parameter.
    pub gy: Vector3<f64>,
}

impl GradPair {
    pub fn new(gx: Vector3<f64>, gy: Vector3<f64>) -> Self {
        GradPair { gx, gy }
    }

    /// Component layout used throughout: the three `gx` components, then the
    /// three `gy` components.
    pub fn components(&self) -> [f64; 6] {
        [
            self.gx[0], self.gx[1], self.gx[2], self.gy[0], self.gy[1], self.gy[2],
        ]
    }
}

/// Prescribed gradient data on part of the rectangle boundary.
///
/// The evaluator must be total on the active sides; returning `None` there is
/// treated as a hard error by interpolation, not as a value to skip.
#[derive(Clone)]
pub struct BoundaryData {
    /// Sides on which the data applies.
    pub sides: Vec<Side>,
    /// Pointwise evaluator for the prescribed gradient columns.
    pub eval: Arc<dyn Fn(f64, f64) -> Option<GradPair> + Send + Sync>,
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryData")
            .field("sides", &self.sides)
            .finish_non_exhaustive()
    }
}

/// Nodal interpolant of boundary data: the prescribed values at every scalar
/// dof on the active sides, `None` elsewhere.
#[derive(Debug, Clone)]
pub struct BoundaryValues {
    /// Per scalar dof: the six prescribed component values, or `None` when
    /// the dof is not on an active side.
    pub per_scalar: Vec<Option<[f64; 6]>>,
}

impl BoundaryValues {
    pub fn pinned(&self, scalar: usize) -> Option<&[f64; 6]> {
        self.per_scalar[scalar].as_ref()
    }

    pub fn n_pinned(&self) -> usize {
        self.per_scalar.iter().filter(|v| v.is_some()).count()
    }
}

/// Samples the boundary evaluator at every vertex and edge-midpoint dof on
/// the active sides, producing the nodal interpolant of the data.
pub fn interpolate_boundary(
    dofmap: &DofMap,
    bc: &BoundaryData,
) -> Result<BoundaryValues, SpaceError> {
    let mut per_scalar = vec![None; dofmap.n_scalar];
    for scalar in dofmap.dofs_on_sides(&bc.sides) {
        let [x, y] = dofmap.dof_coords[scalar];
        let pair = (bc.eval)(x, y).ok_or(SpaceError::BoundaryEval { x, y })?;
        per_scalar[scalar] = Some(pair.components());
    }
    Ok(BoundaryValues { per_scalar })
}

/// Quadratic trace basis along one edge, parametrized by `t` in `[0, 1]`
/// from the first endpoint to the second; order: endpoint 0, endpoint 1,
/// midpoint.  These are exactly the restrictions of the triangle quadratic
/// shape functions to an edge.
pub fn edge_trace_basis(t: f64) -> [f64; 3] {
    [
        (1.0 - t) * (1.0 - 2.0 * t),
        t * (2.0 * t - 1.0),
        4.0 * t * (1.0 - t),
    ]
}

/// Admissibility report for boundary gradient data, maximized over uniform
/// samples of the active sides.
///
/// The constraints checked are the ones a folded-surface gradient satisfies:
/// orthogonal columns, the norm identity `|gy|^2 (4 - |gx|^2) / 4 = 1`, and
/// the bounds `0 < |gx|^2 <= 3`, `|gy|^2 <= 4`.
#[derive(Debug, Clone, Copy)]
pub struct HypothesisReport {
    /// Largest `|gx . gy|`.
    pub max_orthogonality: f64,
    /// Largest `| |gy|^2 (4 - |gx|^2) / 4 - 1 |`.
    pub max_norm_identity: f64,
    /// Largest excess of `|gx|^2` over 3.
    pub max_x_bound_violation: f64,
    /// Largest excess of `|gy|^2` over 4.
    pub max_y_bound_violation: f64,
    /// Smallest `|gx|^2` seen; the data must keep this strictly positive.
    pub min_x_norm_sq: f64,
    /// Number of samples inspected.
    pub n_samples: usize,
}

impl HypothesisReport {
    /// Largest of the four violation measures.
    pub fn max_violation(&self) -> f64 {
        self.max_orthogonality
            .max(self.max_norm_identity)
            .max(self.max_x_bound_violation)
            .max(self.max_y_bound_violation)
    }

    /// True when all constraints hold within `tol` and `|gx|^2` stays
    /// strictly positive.
    pub fn satisfied(&self, tol: f64) -> bool {
        self.max_violation() <= tol && self.min_x_norm_sq > 0.0
    }
}

/// Checks boundary data admissibility on `n_per_side` uniform samples
/// (including endpoints) of each active side of `rect`.
pub fn validate_hypothesis(
    bc: &BoundaryData,
    rect: &Rect,
    n_per_side: usize,
) -> Result<HypothesisReport, SpaceError> {
    let mut report = HypothesisReport {
        max_orthogonality: 0.0,
        max_norm_identity: 0.0,
        max_x_bound_violation: 0.0,
        max_y_bound_violation: 0.0,
        min_x_norm_sq: f64::INFINITY,
        n_samples: 0,
    };
    let n = n_per_side.max(2);
    for &side in &bc.sides {
        for k in 0..n {
            let t = k as f64 / (n - 1) as f64;
            let (x, y) = match side {
                Side::Left => (rect.x_min, rect.y_min + t * rect.height()),
                Side::Right => (rect.x_max, rect.y_min + t * rect.height()),
                Side::Bottom => (rect.x_min + t * rect.width(), rect.y_min),
                Side::Top => (rect.x_min + t * rect.width(), rect.y_max),
            };
            let pair = (bc.eval)(x, y).ok_or(SpaceError::BoundaryEval { x, y })?;
            let gx_sq = pair.gx.norm_squared();
            let gy_sq = pair.gy.norm_squared();
            report.max_orthogonality = report.max_orthogonality.max(pair.gx.dot(&pair.gy).abs());
            report.max_norm_identity = report
                .max_norm_identity
                .max((gy_sq * (4.0 - gx_sq) / 4.0 - 1.0).abs());
            report.max_x_bound_violation = report.max_x_bound_violation.max(gx_sq - 3.0).max(0.0);
            report.max_y_bound_violation = report.max_y_bound_violation.max(gy_sq - 4.0).max(0.0);
            report.min_x_norm_sq = report.min_x_norm_sq.min(gx_sq);
            report.n_samples += 1;
        }
    }
    Ok(report)
}

/// Mesh plus the two discrete spaces of the mixed gradient system, with the
/// global unknown layout `[gradient | multiplier | means]`.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub mesh: Mesh,
    /// Gradient space: degree 2, six components.
    pub w: DofMap,
    /// Cross-derivative multiplier space: degree 1, three components.
    pub r: DofMap,
}

impl Spaces {
    pub fn new(mesh: Mesh) -> Spaces {
        let w = build_space(&mesh, 2, 6).expect("degree 2 is supported");
        let r = build_space(&mesh, 1, 3).expect("degree 1 is supported");
        Spaces { mesh, w, r }
    }

    /// Vector dofs of the gradient block.
    pub fn n_g(&self) -> usize {
        self.w.n_dofs()
    }

    /// Vector dofs of the multiplier block.
    pub fn n_r(&self) -> usize {
        self.r.n_dofs()
    }

    /// Total unknowns including the three multiplier means.
    pub fn n_total(&self) -> usize {
        self.n_g() + self.n_r() + 3
    }

    /// Global index of gradient component `comp` at scalar dof `scalar`.
    pub fn g_index(&self, scalar: usize, comp: usize) -> usize {
        self.w.global(scalar, comp)
    }

    /// Global index of multiplier component `comp` at scalar dof `scalar`.
    pub fn r_index(&self, scalar: usize, comp: usize) -> usize {
        self.n_g() + self.r.global(scalar, comp)
    }

    /// Global index of the `k`-th multiplier mean.
    pub fn mu_index(&self, k: usize) -> usize {
        debug_assert!(k < 3);
        self.n_g() + self.n_r() + k
    }
}

/// Discrete unknowns of the mixed gradient system: gradient coefficients,
/// multiplier coefficients, and the three multiplier means.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub g: Vec<f64>,
    pub r: Vec<f64>,
    pub mu: [f64; 3],
}

impl State {
    pub fn zeros(spaces: &Spaces) -> State {
        State {
            g: vec![0.0; spaces.n_g()],
            r: vec![0.0; spaces.n_r()],
            mu: [0.0; 3],
        }
    }

    /// Concatenation in the global layout `[gradient | multiplier | means]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.g.len() + self.r.len() + 3);
        flat.extend_from_slice(&self.g);
        flat.extend_from_slice(&self.r);
        flat.extend_from_slice(&self.mu);
        flat
    }

    pub fn from_flat(spaces: &Spaces, flat: &[f64]) -> State {
        assert_eq!(flat.len(), spaces.n_total());
        let (g, rest) = flat.split_at(spaces.n_g());
        let (r, mu) = rest.split_at(spaces.n_r());
        State {
            g: g.to_vec(),
            r: r.to_vec(),
            mu: [mu[0], mu[1], mu[2]],
        }
    }

    /// `self += alpha * delta` with `delta` in the flat global layout.
    pub fn add_scaled(&mut self, alpha: f64, delta: &[f64]) {
        let ng = self.g.len();
        let nr = self.r.len();
        assert_eq!(delta.len(), ng + nr + 3);
        for (x, &d) in self.g.iter_mut().zip(&delta[..ng]) {
            *x += alpha * d;
        }
        for (x, &d) in self.r.iter_mut().zip(&delta[ng..ng + nr]) {
            *x += alpha * d;
        }
        for k in 0..3 {
            self.mu[k] += alpha * delta[ng + nr + k];
        }
    }
}
