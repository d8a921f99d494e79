//! Variational forms of the mixed gradient system: coefficient cut-offs,
//! nonlinear residual, Jacobians, and the companion linear systems.
//!
//! With `G = (G^x, G^y)` the two quadratic gradient columns, `r` the linear
//! multiplier field and `mu` its three means, the discrete residual tested
//! against `(Gt, rt)` reads
//!
//! ```text
//!   F(G, r, mu)[Gt] = integral  A(G)G . A(G)Gt
//!                   + eta * integral  curl(G) . curl(Gt)
//!                   + integral  curl(Gt) . r                     (+ boundary)
//!   F(G, r, mu)[rt] = integral  curl(G) . rt + mu . integral rt
//!   F(G, r, mu)[k]  = integral  r_k
//! ```
//!
//! where `A(G)G = pbar(G^x) G^x_x + qbar(G^y) G^y_y` and
//! `curl(G) = G^x_y - G^y_x`.  The cut-off coefficients `pbar`, `qbar`
//! extend the physical ones Lipschitz-continuously outside the folded
//! regime, which keeps the problem well-posed for iterates that wander out
//! of bounds.  Strong boundary conditions replace the gradient rows on
//! pinned dofs by `g_i - gD_i`; weak conditions add a scaled boundary mass
//! penalty against the nodal interpolant of the data.
//!
//! The Newton Jacobian differentiates both occurrences of `G` inside the
//! least-squares product; the Picard variant freezes the coefficients, which
//! reproduces the classical fixed-point linearization as a special case of
//! the same Newton loop.

use std::sync::{Arc, OnceLock};

use nalgebra::Vector3;
use thiserror::Error;

use crate::mesh::Mesh;
use crate::quadrature::{EdgeQuadrature, TriQuadrature};
use crate::sparse::{CscMatrix, Pattern};
use crate::spaces::{
    interpolate_boundary, BoundaryData, BoundaryValues, SpaceError, Spaces, State,
};

/// How boundary data enters the discrete system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcMode {
    /// Interpolate the data at boundary dofs and eliminate those unknowns.
    Strong,
    /// Penalize the deviation from the interpolated data edge by edge.
    Weak,
}

/// Which derivative the Jacobian assembly uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearization {
    /// Full derivative, including coefficient variations.
    Newton,
    /// Frozen coefficients; the fixed-point (Kachanov-style) linearization.
    Picard,
}

// ---------------------------------------------------------------------------
// Coefficient cut-offs
// ---------------------------------------------------------------------------

/// Cut-off first-column coefficient `pbar` and its gradient.
///
/// `pbar(g) = 4 / (4 - |g|^2)` for `|g|^2 < 3`, clamped to its boundary value
/// 4 beyond; the clamped branch (including the threshold itself) reports a
/// zero gradient.
pub fn coefficient_x(gx: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let s = gx.norm_squared();
    if s >= 3.0 {
        (4.0, Vector3::zeros())
    } else {
        let d = 4.0 - s;
        (4.0 / d, gx * (8.0 / (d * d)))
    }
}

/// Cut-off second-column coefficient `qbar` and its gradient.
///
/// `qbar(g) = 4 / |g|^2` for `1 < |g|^2 < 4`, clamped to 4 below and 1 above;
/// clamped branches (including thresholds) report a zero gradient.
pub fn coefficient_y(gy: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let s = gy.norm_squared();
    if s <= 1.0 {
        (4.0, Vector3::zeros())
    } else if s >= 4.0 {
        (1.0, Vector3::zeros())
    } else {
        (4.0 / s, gy * (-8.0 / (s * s)))
    }
}

/// Both cut-off coefficients at one point, with the ellipticity indicator
/// `gamma = (pbar + qbar) / (pbar^2 + qbar^2)`.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientEval {
    pub p: f64,
    pub q: f64,
    pub grad_p: Vector3<f64>,
    pub grad_q: Vector3<f64>,
    pub gamma: f64,
}

impl CoefficientEval {
    pub fn at(gx: &Vector3<f64>, gy: &Vector3<f64>) -> CoefficientEval {
        let (p, grad_p) = coefficient_x(gx);
        let (q, grad_q) = coefficient_y(gy);
        CoefficientEval {
            p,
            q,
            grad_p,
            grad_q,
            gamma: (p + q) / (p * p + q * q),
        }
    }
}

// ---------------------------------------------------------------------------
// Reference basis and element geometry
// ---------------------------------------------------------------------------

/// Quadratic shape functions on the reference triangle at `(xi, zeta)`;
/// order: vertices 0..2, then midpoints of local edges (0,1), (1,2), (2,0).
pub fn p2_shapes(xi: f64, zeta: f64) -> [f64; 6] {
    let lam = 1.0 - xi - zeta;
    [
        lam * (2.0 * lam - 1.0),
        xi * (2.0 * xi - 1.0),
        zeta * (2.0 * zeta - 1.0),
        4.0 * lam * xi,
        4.0 * xi * zeta,
        4.0 * zeta * lam,
    ]
}

/// Reference gradients of [`p2_shapes`].
pub fn p2_ref_grads(xi: f64, zeta: f64) -> [[f64; 2]; 6] {
    let lam = 1.0 - xi - zeta;
    [
        [1.0 - 4.0 * lam, 1.0 - 4.0 * lam],
        [4.0 * xi - 1.0, 0.0],
        [0.0, 4.0 * zeta - 1.0],
        [4.0 * (lam - xi), -4.0 * xi],
        [4.0 * zeta, 4.0 * xi],
        [-4.0 * zeta, 4.0 * (lam - zeta)],
    ]
}

/// Linear shape functions (barycentric coordinates) at `(xi, zeta)`.
pub fn p1_shapes(xi: f64, zeta: f64) -> [f64; 3] {
    [1.0 - xi - zeta, xi, zeta]
}

/// Reference gradients of [`p1_shapes`] (constant).
pub const P1_REF_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Shape values and reference gradients tabulated at the volume rule points.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub rule: TriQuadrature,
    pub p2: Vec<[f64; 6]>,
    pub p2_dref: Vec<[[f64; 2]; 6]>,
    pub p1: Vec<[f64; 3]>,
}

impl BasisTable {
    pub fn new(rule: TriQuadrature) -> BasisTable {
        let p2 = rule.points.iter().map(|&[x, z]| p2_shapes(x, z)).collect();
        let p2_dref = rule
            .points
            .iter()
            .map(|&[x, z]| p2_ref_grads(x, z))
            .collect();
        let p1 = rule.points.iter().map(|&[x, z]| p1_shapes(x, z)).collect();
        BasisTable {
            rule,
            p2,
            p2_dref,
            p1,
        }
    }
}

/// Affine map data of one triangle: determinant and inverse-transpose
/// Jacobian action for pushing reference gradients to physical ones.
#[derive(Debug, Clone, Copy)]
pub struct ElemGeom {
    pub det: f64,
    jinv_t: [[f64; 2]; 2],
}

impl ElemGeom {
    pub fn of(mesh: &Mesh, t: usize) -> ElemGeom {
        let [a, b, c] = mesh.tri_coords[t];
        let (bx, by) = (b[0] - a[0], b[1] - a[1]);
        let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
        let det = bx * cy - cx * by;
        ElemGeom {
            det,
            jinv_t: [
                [cy / det, -by / det],
                [-cx / det, bx / det],
            ],
        }
    }

    /// Physical gradient from a reference gradient.
    pub fn phys_grad(&self, dref: [f64; 2]) -> [f64; 2] {
        [
            self.jinv_t[0][0] * dref[0] + self.jinv_t[0][1] * dref[1],
            self.jinv_t[1][0] * dref[0] + self.jinv_t[1][1] * dref[1],
        ]
    }
}

/// Gradient unknown evaluated at one quadrature point: both columns and
/// their physical derivatives.
#[derive(Debug, Clone, Copy)]
pub struct GradEval {
    pub gx: Vector3<f64>,
    pub gy: Vector3<f64>,
    /// `d_gx[0] = gx_x`, `d_gx[1] = gx_y`.
    pub d_gx: [Vector3<f64>; 2],
    pub d_gy: [Vector3<f64>; 2],
}

impl GradEval {
    /// Cross-derivative defect `gx_y - gy_x`.
    pub fn curl(&self) -> Vector3<f64> {
        self.d_gx[1] - self.d_gy[0]
    }
}

/// Evaluates the gradient coefficients `g` on triangle `t` at rule point `q`.
pub fn eval_gradient(
    spaces: &Spaces,
    table: &BasisTable,
    geom: &ElemGeom,
    t: usize,
    q: usize,
    g: &[f64],
) -> GradEval {
    let sdofs = &spaces.w.tri_dofs[t];
    let mut val = [0.0f64; 6];
    let mut ddx = [0.0f64; 6];
    let mut ddy = [0.0f64; 6];
    for i in 0..6 {
        let [dx, dy] = geom.phys_grad(table.p2_dref[q][i]);
        let n = table.p2[q][i];
        for c in 0..6 {
            let coeff = g[spaces.g_index(sdofs[i], c)];
            val[c] += coeff * n;
            ddx[c] += coeff * dx;
            ddy[c] += coeff * dy;
        }
    }
    GradEval {
        gx: Vector3::new(val[0], val[1], val[2]),
        gy: Vector3::new(val[3], val[4], val[5]),
        d_gx: [
            Vector3::new(ddx[0], ddx[1], ddx[2]),
            Vector3::new(ddy[0], ddy[1], ddy[2]),
        ],
        d_gy: [
            Vector3::new(ddx[3], ddx[4], ddx[5]),
            Vector3::new(ddy[3], ddy[4], ddy[5]),
        ],
    }
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

/// Failures while setting up a discretization.
#[derive(Debug, Error)]
pub enum FormsError {
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// One boundary-value problem discretized on a fixed mesh: spaces, boundary
/// data, penalty weight and boundary mode, plus cached sparsity patterns.
pub struct Discretization {
    pub spaces: Spaces,
    pub bc: BoundaryData,
    /// Nodal interpolant of the boundary data on active sides.
    pub bc_values: BoundaryValues,
    /// Cross-derivative penalty weight.
    pub eta: f64,
    pub bc_mode: BcMode,
    basis: BasisTable,
    edge_rule: EdgeQuadrature,
    jac_pattern: OnceLock<Arc<Pattern>>,
    init_pattern: OnceLock<Arc<Pattern>>,
}

/// Local dense block: 36 gradient dofs, 9 multiplier dofs, 3 means.
const N_LOC: usize = 48;

impl Discretization {
    pub fn new(
        spaces: Spaces,
        bc: BoundaryData,
        eta: f64,
        bc_mode: BcMode,
    ) -> Result<Discretization, FormsError> {
        let bc_values = interpolate_boundary(&spaces.w, &bc)?;
        Ok(Discretization {
            spaces,
            bc,
            bc_values,
            eta,
            bc_mode,
            basis: BasisTable::new(TriQuadrature::degree6()),
            edge_rule: EdgeQuadrature::gauss3(),
            jac_pattern: OnceLock::new(),
            init_pattern: OnceLock::new(),
        })
    }

    pub fn basis(&self) -> &BasisTable {
        &self.basis
    }

    /// Global dofs that remain unknowns.  With strong boundary conditions the
    /// gradient dofs on active sides are pinned; weak mode keeps everything.
    pub fn free_mask(&self) -> Vec<bool> {
        let mut free = vec![true; self.spaces.n_total()];
        if self.bc_mode == BcMode::Strong {
            for scalar in 0..self.spaces.w.n_scalar {
                if self.bc_values.pinned(scalar).is_some() {
                    for c in 0..6 {
                        free[self.spaces.g_index(scalar, c)] = false;
                    }
                }
            }
        }
        free
    }

    /// Prescribed values on pinned dofs (zero elsewhere and in weak mode).
    pub fn pinned_values(&self) -> Vec<f64> {
        let mut pinned = vec![0.0; self.spaces.n_total()];
        if self.bc_mode == BcMode::Strong {
            for scalar in 0..self.spaces.w.n_scalar {
                if let Some(vals) = self.bc_values.pinned(scalar) {
                    for c in 0..6 {
                        pinned[self.spaces.g_index(scalar, c)] = vals[c];
                    }
                }
            }
        }
        pinned
    }

    /// A state satisfying the strong boundary conditions exactly (zero
    /// elsewhere); in weak mode simply zero.
    pub fn boundary_state(&self) -> State {
        let mut state = State::zeros(&self.spaces);
        let pinned = self.pinned_values();
        state.g.copy_from_slice(&pinned[..self.spaces.n_g()]);
        state
    }

    /// Scalar dofs of one boundary edge: both endpoints, then the midpoint.
    fn edge_scalar_dofs(&self, edge_id: usize) -> [usize; 3] {
        let edge = &self.spaces.mesh.edges[edge_id];
        [
            edge.vertices[0],
            edge.vertices[1],
            self.spaces.mesh.n_vertices() + edge_id,
        ]
    }

    /// Boundary edges on active sides.
    fn active_boundary_edges(&self) -> Vec<usize> {
        crate::mesh::boundary_edges(&self.spaces.mesh, &self.bc.sides)
    }

    // -- residual ----------------------------------------------------------

    /// Full-length nonlinear residual at `state`.  With strong boundary
    /// conditions, pinned rows carry the interpolation defect `g_i - gD_i`.
    pub fn assemble_residual(&self, state: &State) -> Vec<f64> {
        let spaces = &self.spaces;
        let mut res = vec![0.0; spaces.n_total()];
        let nq = self.basis.rule.points.len();

        for t in 0..spaces.mesh.n_triangles() {
            let geom = ElemGeom::of(&spaces.mesh, t);
            let wdofs = &spaces.w.tri_dofs[t];
            let rdofs = &spaces.r.tri_dofs[t];
            for q in 0..nq {
                let weight = self.basis.rule.weights[q] * geom.det.abs();
                let ge = eval_gradient(spaces, &self.basis, &geom, t, q, &state.g);
                let (p, _) = coefficient_x(&ge.gx);
                let (qc, _) = coefficient_y(&ge.gy);
                let a_val = ge.d_gx[0] * p + ge.d_gy[1] * qc;
                let curl = ge.curl();
                let mut r_val = Vector3::zeros();
                for j in 0..3 {
                    let lam = self.basis.p1[q][j];
                    for k in 0..3 {
                        r_val[k] += state.r[spaces.r.global(rdofs[j], k)] * lam;
                    }
                }
                let stress = curl * self.eta + r_val;
                for i in 0..6 {
                    let [dx, dy] = geom.phys_grad(self.basis.p2_dref[q][i]);
                    for k in 0..3 {
                        res[spaces.g_index(wdofs[i], k)] +=
                            weight * (p * dx * a_val[k] + dy * stress[k]);
                        res[spaces.g_index(wdofs[i], 3 + k)] +=
                            weight * (qc * dy * a_val[k] - dx * stress[k]);
                    }
                }
                for j in 0..3 {
                    let lam = self.basis.p1[q][j];
                    for k in 0..3 {
                        res[spaces.r_index(rdofs[j], k)] +=
                            weight * (curl[k] + state.mu[k]) * lam;
                    }
                }
                for k in 0..3 {
                    res[spaces.mu_index(k)] += weight * r_val[k];
                }
            }
        }

        match self.bc_mode {
            BcMode::Strong => {
                for scalar in 0..spaces.w.n_scalar {
                    if let Some(vals) = self.bc_values.pinned(scalar) {
                        for c in 0..6 {
                            let d = spaces.g_index(scalar, c);
                            res[d] = state.g[d] - vals[c];
                        }
                    }
                }
            }
            BcMode::Weak => {
                for edge_id in self.active_boundary_edges() {
                    let sdofs = self.edge_scalar_dofs(edge_id);
                    for (tq, &wq) in self.edge_rule.points.iter().zip(&self.edge_rule.weights) {
                        let basis = crate::spaces::edge_trace_basis(*tq);
                        // Edge length and the 1/h_e scaling cancel.
                        let weight = self.eta * wq;
                        for c in 0..6 {
                            let mut defect = 0.0;
                            for b in 0..3 {
                                let data = self.bc_values.pinned(sdofs[b]).expect(
                                    "active boundary edge dofs carry interpolated data",
                                );
                                defect +=
                                    (state.g[spaces.g_index(sdofs[b], c)] - data[c]) * basis[b];
                            }
                            for a in 0..3 {
                                res[spaces.g_index(sdofs[a], c)] += weight * defect * basis[a];
                            }
                        }
                    }
                }
            }
        }
        res
    }

    // -- sparsity patterns -------------------------------------------------

    fn build_pattern(&self, initial: bool) -> Arc<Pattern> {
        let spaces = &self.spaces;
        let free = self.free_mask();
        let n = spaces.n_total();
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        let mut push = |row: usize, col: usize| {
            if free[row] {
                pairs.push((row as u32, col as u32));
            }
        };

        for t in 0..spaces.mesh.n_triangles() {
            let wdofs = &spaces.w.tri_dofs[t];
            let rdofs = &spaces.r.tri_dofs[t];
            for i in 0..6 {
                for j in 0..6 {
                    if initial {
                        // Component-diagonal blocks only: Laplacian plus the
                        // axis-coupled penalty.
                        for k in 0..3 {
                            for (ai, aj) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
                                push(
                                    spaces.g_index(wdofs[i], ai + k),
                                    spaces.g_index(wdofs[j], aj + k),
                                );
                            }
                        }
                    } else {
                        // Newton couples all six components pairwise.
                        for ci in 0..6 {
                            for cj in 0..6 {
                                push(
                                    spaces.g_index(wdofs[i], ci),
                                    spaces.g_index(wdofs[j], cj),
                                );
                            }
                        }
                    }
                }
            }
            for i in 0..6 {
                for j in 0..3 {
                    for k in 0..3 {
                        for axis in [0, 3] {
                            let gd = spaces.g_index(wdofs[i], axis + k);
                            let rd = spaces.r_index(rdofs[j], k);
                            push(gd, rd);
                            push(rd, gd);
                        }
                    }
                }
            }
            for j in 0..3 {
                for k in 0..3 {
                    let rd = spaces.r_index(rdofs[j], k);
                    push(rd, spaces.mu_index(k));
                    push(spaces.mu_index(k), rd);
                }
            }
        }

        if self.bc_mode == BcMode::Weak {
            for edge_id in self.active_boundary_edges() {
                let sdofs = self.edge_scalar_dofs(edge_id);
                for a in 0..3 {
                    for b in 0..3 {
                        for c in 0..6 {
                            push(
                                spaces.g_index(sdofs[a], c),
                                spaces.g_index(sdofs[b], c),
                            );
                        }
                    }
                }
            }
        }

        // Identity rows for pinned dofs.
        for (d, &is_free) in free.iter().enumerate() {
            if !is_free {
                pairs.push((d as u32, d as u32));
            }
        }

        Arc::new(Pattern::from_pairs(n, n, &mut pairs))
    }

    fn jacobian_pattern(&self) -> Arc<Pattern> {
        self.jac_pattern
            .get_or_init(|| self.build_pattern(false))
            .clone()
    }

    fn initial_pattern(&self) -> Arc<Pattern> {
        self.init_pattern
            .get_or_init(|| self.build_pattern(true))
            .clone()
    }

    // -- Jacobian ----------------------------------------------------------

    /// Jacobian of [`Self::assemble_residual`] at `state`.  `Picard` freezes
    /// the coefficients; `Newton` adds their derivatives in both slots of
    /// the least-squares product.  Pinned rows are identity rows.
    pub fn assemble_jacobian(&self, state: &State, lin: Linearization) -> CscMatrix {
        let spaces = &self.spaces;
        let mut mat = CscMatrix::zeros(self.jacobian_pattern());
        let free = self.free_mask();
        let nq = self.basis.rule.points.len();

        // Local dense block indexed by [row][col]; layout: gradient dofs
        // (i * 6 + c), multiplier dofs (36 + j * 3 + k), means (45 + k).
        let mut local = vec![[0.0f64; N_LOC]; N_LOC];
        let mut global = [0usize; N_LOC];

        for t in 0..spaces.mesh.n_triangles() {
            let geom = ElemGeom::of(&spaces.mesh, t);
            let wdofs = &spaces.w.tri_dofs[t];
            let rdofs = &spaces.r.tri_dofs[t];
            for row in local.iter_mut() {
                row.fill(0.0);
            }
            for i in 0..6 {
                for c in 0..6 {
                    global[i * 6 + c] = spaces.g_index(wdofs[i], c);
                }
            }
            for j in 0..3 {
                for k in 0..3 {
                    global[36 + j * 3 + k] = spaces.r_index(rdofs[j], k);
                }
            }
            for k in 0..3 {
                global[45 + k] = spaces.mu_index(k);
            }

            for q in 0..nq {
                let weight = self.basis.rule.weights[q] * geom.det.abs();
                let ge = eval_gradient(spaces, &self.basis, &geom, t, q, &state.g);
                let coeffs = CoefficientEval::at(&ge.gx, &ge.gy);
                let a_val = ge.d_gx[0] * coeffs.p + ge.d_gy[1] * coeffs.q;

                let mut dx = [0.0f64; 6];
                let mut dy = [0.0f64; 6];
                for i in 0..6 {
                    [dx[i], dy[i]] = geom.phys_grad(self.basis.p2_dref[q][i]);
                }
                let nvals = &self.basis.p2[q];
                let lam = &self.basis.p1[q];

                for i in 0..6 {
                    // Test operator factors: x-tests apply p * d/dx, y-tests
                    // q * d/dy; curl factors dy and -dx.
                    let tx = coeffs.p * dx[i];
                    let ty = coeffs.q * dy[i];
                    for j in 0..6 {
                        let sx = coeffs.p * dx[j];
                        let sy = coeffs.q * dy[j];
                        // Frozen-coefficient least-squares block plus the
                        // penalty, diagonal in components.
                        let aa_xx = weight * (tx * sx + self.eta * dy[i] * dy[j]);
                        let aa_xy = weight * (tx * sy - self.eta * dy[i] * dx[j]);
                        let aa_yx = weight * (ty * sx - self.eta * dx[i] * dy[j]);
                        let aa_yy = weight * (ty * sy + self.eta * dx[i] * dx[j]);
                        for k in 0..3 {
                            local[i * 6 + k][j * 6 + k] += aa_xx;
                            local[i * 6 + k][j * 6 + 3 + k] += aa_xy;
                            local[i * 6 + 3 + k][j * 6 + k] += aa_yx;
                            local[i * 6 + 3 + k][j * 6 + 3 + k] += aa_yy;
                        }
                        if lin == Linearization::Newton {
                            // Coefficient derivatives: variation of pbar/qbar
                            // inside A(G)G against the frozen test operator,
                            // plus the variation of the test-side operator
                            // against A(G)G.
                            let nj = nvals[j];
                            for k in 0..3 {
                                for l in 0..3 {
                                    let dpx = coeffs.grad_p[l] * nj * ge.d_gx[0][k];
                                    let dqy = coeffs.grad_q[l] * nj * ge.d_gy[1][k];
                                    local[i * 6 + k][j * 6 + l] += weight * tx * dpx;
                                    local[i * 6 + k][j * 6 + 3 + l] += weight * tx * dqy;
                                    local[i * 6 + 3 + k][j * 6 + l] += weight * ty * dpx;
                                    local[i * 6 + 3 + k][j * 6 + 3 + l] += weight * ty * dqy;

                                    local[i * 6 + k][j * 6 + l] +=
                                        weight * a_val[k] * dx[i] * coeffs.grad_p[l] * nj;
                                    local[i * 6 + 3 + k][j * 6 + 3 + l] +=
                                        weight * a_val[k] * dy[i] * coeffs.grad_q[l] * nj;
                                }
                            }
                        }
                    }
                    // Gradient rows against multiplier columns.
                    for j in 0..3 {
                        let w_lam = weight * lam[j];
                        for k in 0..3 {
                            local[i * 6 + k][36 + j * 3 + k] += w_lam * dy[i];
                            local[i * 6 + 3 + k][36 + j * 3 + k] -= w_lam * dx[i];
                        }
                    }
                }
                // Multiplier rows against gradient columns, and the mean
                // coupling both ways.
                for j2 in 0..3 {
                    let w_lam = weight * lam[j2];
                    for j in 0..6 {
                        for k in 0..3 {
                            local[36 + j2 * 3 + k][j * 6 + k] += w_lam * dy[j];
                            local[36 + j2 * 3 + k][j * 6 + 3 + k] -= w_lam * dx[j];
                        }
                    }
                    for k in 0..3 {
                        local[36 + j2 * 3 + k][45 + k] += w_lam;
                        local[45 + k][36 + j2 * 3 + k] += w_lam;
                    }
                }
            }

            for (li, row) in local.iter().enumerate() {
                let gi = global[li];
                if !free[gi] {
                    continue;
                }
                for (lj, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        mat.add(gi as u32, global[lj] as u32, v);
                    }
                }
            }
        }

        if self.bc_mode == BcMode::Weak {
            self.add_weak_boundary_matrix(&mut mat);
        }
        for (d, &is_free) in free.iter().enumerate() {
            if !is_free {
                mat.add(d as u32, d as u32, 1.0);
            }
        }
        mat
    }

    fn add_weak_boundary_matrix(&self, mat: &mut CscMatrix) {
        let spaces = &self.spaces;
        for edge_id in self.active_boundary_edges() {
            let sdofs = self.edge_scalar_dofs(edge_id);
            for (tq, &wq) in self.edge_rule.points.iter().zip(&self.edge_rule.weights) {
                let basis = crate::spaces::edge_trace_basis(*tq);
                let weight = self.eta * wq;
                for a in 0..3 {
                    for b in 0..3 {
                        let v = weight * basis[a] * basis[b];
                        for c in 0..6 {
                            mat.add(
                                spaces.g_index(sdofs[a], c) as u32,
                                spaces.g_index(sdofs[b], c) as u32,
                                v,
                            );
                        }
                    }
                }
            }
        }
    }

    // -- initial linear system ---------------------------------------------

    /// The linear surrogate system solved for the starting state: a vector
    /// Laplacian in place of the least-squares block, the same penalty,
    /// multiplier coupling and boundary treatment.  Returns the matrix and
    /// right-hand side in the full layout (pinned rows are identity rows
    /// with the data on the right-hand side).
    pub fn assemble_initial_system(&self) -> (CscMatrix, Vec<f64>) {
        let spaces = &self.spaces;
        let mut mat = CscMatrix::zeros(self.initial_pattern());
        let mut rhs = vec![0.0; spaces.n_total()];
        let free = self.free_mask();
        let nq = self.basis.rule.points.len();

        for t in 0..spaces.mesh.n_triangles() {
            let geom = ElemGeom::of(&spaces.mesh, t);
            let wdofs = &spaces.w.tri_dofs[t];
            let rdofs = &spaces.r.tri_dofs[t];
            for q in 0..nq {
                let weight = self.basis.rule.weights[q] * geom.det.abs();
                let mut dx = [0.0f64; 6];
                let mut dy = [0.0f64; 6];
                for i in 0..6 {
                    [dx[i], dy[i]] = geom.phys_grad(self.basis.p2_dref[q][i]);
                }
                let lam = &self.basis.p1[q];

                for i in 0..6 {
                    let row_base = wdofs[i];
                    for j in 0..6 {
                        let lap = weight * (dx[i] * dx[j] + dy[i] * dy[j]);
                        let pen_xx = weight * self.eta * dy[i] * dy[j];
                        let pen_xy = -weight * self.eta * dy[i] * dx[j];
                        let pen_yx = -weight * self.eta * dx[i] * dy[j];
                        let pen_yy = weight * self.eta * dx[i] * dx[j];
                        for k in 0..3 {
                            let rx = spaces.g_index(row_base, k);
                            let ry = spaces.g_index(row_base, 3 + k);
                            let cx = spaces.g_index(wdofs[j], k);
                            let cy = spaces.g_index(wdofs[j], 3 + k);
                            if free[rx] {
                                mat.add(rx as u32, cx as u32, lap + pen_xx);
                                mat.add(rx as u32, cy as u32, pen_xy);
                            }
                            if free[ry] {
                                mat.add(ry as u32, cy as u32, lap + pen_yy);
                                mat.add(ry as u32, cx as u32, pen_yx);
                            }
                        }
                    }
                    for j in 0..3 {
                        let w_lam = weight * lam[j];
                        for k in 0..3 {
                            let rx = spaces.g_index(row_base, k);
                            let ry = spaces.g_index(row_base, 3 + k);
                            let rd = spaces.r_index(rdofs[j], k);
                            if free[rx] {
                                mat.add(rx as u32, rd as u32, w_lam * dy[i]);
                            }
                            if free[ry] {
                                mat.add(ry as u32, rd as u32, -w_lam * dx[i]);
                            }
                            mat.add(rd as u32, rx as u32, w_lam * dy[i]);
                            mat.add(rd as u32, ry as u32, -w_lam * dx[i]);
                        }
                    }
                }
                for j2 in 0..3 {
                    let w_lam = weight * lam[j2];
                    for k in 0..3 {
                        let rd = spaces.r_index(rdofs[j2], k);
                        mat.add(rd as u32, spaces.mu_index(k) as u32, w_lam);
                        mat.add(spaces.mu_index(k) as u32, rd as u32, w_lam);
                    }
                }
            }
        }

        match self.bc_mode {
            BcMode::Strong => {
                let pinned = self.pinned_values();
                for (d, &is_free) in free.iter().enumerate() {
                    if !is_free {
                        mat.add(d as u32, d as u32, 1.0);
                        rhs[d] = pinned[d];
                    }
                }
            }
            BcMode::Weak => {
                self.add_weak_boundary_matrix(&mut mat);
                for edge_id in self.active_boundary_edges() {
                    let sdofs = self.edge_scalar_dofs(edge_id);
                    for (tq, &wq) in self.edge_rule.points.iter().zip(&self.edge_rule.weights) {
                        let basis = crate::spaces::edge_trace_basis(*tq);
                        let weight = self.eta * wq;
                        for c in 0..6 {
                            let mut data = 0.0;
                            for b in 0..3 {
                                data += self
                                    .bc_values
                                    .pinned(sdofs[b])
                                    .expect("active boundary edge dofs carry interpolated data")
                                    [c]
                                    * basis[b];
                            }
                            for a in 0..3 {
                                rhs[spaces.g_index(sdofs[a], c)] += weight * data * basis[a];
                            }
                        }
                    }
                }
            }
        }
        (mat, rhs)
    }

    /// Scalar quadratic-space matrix `integral (u v + grad u . grad v)`,
    /// the inner product behind the dual residual norm.
    pub fn assemble_scalar_h1(&self) -> CscMatrix {
        let spaces = &self.spaces;
        let n = spaces.w.n_scalar;
        let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
        let nq = self.basis.rule.points.len();
        for t in 0..spaces.mesh.n_triangles() {
            let geom = ElemGeom::of(&spaces.mesh, t);
            let wdofs = &spaces.w.tri_dofs[t];
            for q in 0..nq {
                let weight = self.basis.rule.weights[q] * geom.det.abs();
                let mut dx = [0.0f64; 6];
                let mut dy = [0.0f64; 6];
                for i in 0..6 {
                    [dx[i], dy[i]] = geom.phys_grad(self.basis.p2_dref[q][i]);
                }
                for i in 0..6 {
                    for j in 0..6 {
                        let v = weight
                            * (self.basis.p2[q][i] * self.basis.p2[q][j]
                                + dx[i] * dx[j]
                                + dy[i] * dy[j]);
                        triplets.push((wdofs[i] as u32, wdofs[j] as u32, v));
                    }
                }
            }
        }
        CscMatrix::from_triplets(n, n, &mut triplets)
    }
}

/// Deterministic pseudo-random stream in `[-1, 1)` (splitmix64 driven).
pub fn deterministic_samples(seed: u64, n: usize) -> Vec<f64> {
    let mut state = seed;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

/// A reproducible random state whose coefficient arguments stay strictly
/// inside the smooth (unclamped) branches everywhere — the right regime for
/// finite-difference Jacobian checks, which would otherwise straddle the
/// cut-off kinks.
pub fn sample_test_state(spaces: &Spaces, seed: u64) -> State {
    let mut state = State::zeros(spaces);
    let ns = spaces.w.n_scalar;
    let noise = deterministic_samples(seed, 6 * ns + spaces.n_r() + 3);
    for s in 0..ns {
        for c in 0..3 {
            // First column: nodal values in [-0.4, 0.4] keep |gx|^2 well
            // below the cut-off at 3 even with quadratic overshoot.
            state.g[spaces.g_index(s, c)] = 0.4 * noise[s * 6 + c];
        }
        // Second column: values near (1.05, 1.05, 0) keep |gy|^2 inside
        // (1, 4) strictly.
        state.g[spaces.g_index(s, 3)] = 1.05 + 0.1 * noise[s * 6 + 3];
        state.g[spaces.g_index(s, 4)] = 1.05 + 0.1 * noise[s * 6 + 4];
        state.g[spaces.g_index(s, 5)] = 0.1 * noise[s * 6 + 5];
    }
    for (i, r) in state.r.iter_mut().enumerate() {
        *r = 0.5 * noise[6 * ns + i];
    }
    for k in 0..3 {
        state.mu[k] = 0.5 * noise[6 * ns + spaces.n_r() + k];
    }
    state
}
