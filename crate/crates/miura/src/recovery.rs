//! Surface reconstruction: a position field whose gradient best matches the
//! solved gradient columns.
//!
//! Each spatial component solves the zero-mean Poisson problem
//!
//! ```text
//!   integral  grad(phi_c) . grad(v)  =  integral  (G^x_c, G^y_c) . grad(v)
//!   integral  phi_c                  =  0
//! ```
//!
//! in the quadratic scalar space, i.e. the Ritz projection of any potential
//! of `G`.  When the discrete `G` is not exactly curl-free (it never is,
//! the cross-derivative constraint is only penalized), this is its
//! least-squares potential; the mean constraint enters as a scalar border
//! row, which pins the one-dimensional constant null space without
//! preferring any anchor point.  One factorization serves all three
//! components.

use crate::forms::{eval_gradient, Discretization, ElemGeom};
use crate::solver::{solve_linear_bordered, SolverError};
use crate::sparse::CscMatrix;
use crate::spaces::State;

/// Recovered surface positions, one point in space per scalar dof of the
/// quadratic space (vertices first, then edge midpoints).
#[derive(Debug, Clone)]
pub struct SurfaceField {
    pub positions: Vec<[f64; 3]>,
    /// Largest absolute row residual of the bordered projection system at the
    /// returned positions, over all rows and all three components.  A direct
    /// factorization should leave this near round-off; it certifies that the
    /// positions really are the least-squares potential of the gradient field.
    pub normal_residual: f64,
}

impl SurfaceField {
    /// Axis-aligned bounding box, `[min, max]` per component.
    pub fn bounds(&self) -> [[f64; 2]; 3] {
        let mut b = [[f64::INFINITY, f64::NEG_INFINITY]; 3];
        for p in &self.positions {
            for c in 0..3 {
                b[c][0] = b[c][0].min(p[c]);
                b[c][1] = b[c][1].max(p[c]);
            }
        }
        b
    }
}

/// Builds the bordered Poisson system and the three component loads for the
/// gradient field of `state`; returns `(matrix, [b_0, b_1, b_2])`.
fn projection_system(
    disc: &Discretization,
    state: &State,
) -> (CscMatrix, Vec<Vec<f64>>) {
    let spaces = &disc.spaces;
    let basis = disc.basis();
    let n = spaces.w.n_scalar;
    let nq = basis.rule.points.len();
    let mut trips: Vec<(u32, u32, f64)> = Vec::new();
    let mut rhs = vec![vec![0.0; n + 1]; 3];

    for t in 0..spaces.mesh.n_triangles() {
        let geom = ElemGeom::of(&spaces.mesh, t);
        let wdofs = &spaces.w.tri_dofs[t];
        for q in 0..nq {
            let weight = basis.rule.weights[q] * geom.det.abs();
            let ge = eval_gradient(spaces, basis, &geom, t, q, &state.g);
            let mut dx = [0.0f64; 6];
            let mut dy = [0.0f64; 6];
            for i in 0..6 {
                [dx[i], dy[i]] = geom.phys_grad(basis.p2_dref[q][i]);
            }
            for i in 0..6 {
                let row = wdofs[i] as u32;
                for j in 0..6 {
                    trips.push((
                        row,
                        wdofs[j] as u32,
                        weight * (dx[i] * dx[j] + dy[i] * dy[j]),
                    ));
                }
                let mass = weight * basis.p2[q][i];
                trips.push((row, n as u32, mass));
                trips.push((n as u32, row, mass));
                for c in 0..3 {
                    rhs[c][wdofs[i]] +=
                        weight * (ge.gx[c] * dx[i] + ge.gy[c] * dy[i]);
                }
            }
        }
    }
    (CscMatrix::from_triplets(n + 1, n + 1, &mut trips), rhs)
}

/// Recovers the surface positions from a solved gradient state.
pub fn recover_surface(
    disc: &Discretization,
    state: &State,
) -> Result<SurfaceField, SolverError> {
    let n = disc.spaces.w.n_scalar;
    let (mat, rhs) = projection_system(disc, state);
    let sols = solve_linear_bordered(&mat, &rhs, 1)?;
    let mut normal_residual = 0.0f64;
    for c in 0..3 {
        let ax = mat.matvec(&sols[c]);
        for (lhs, load) in ax.iter().zip(&rhs[c]) {
            normal_residual = normal_residual.max((lhs - load).abs());
        }
    }
    let positions = (0..n)
        .map(|s| [sols[0][s], sols[1][s], sols[2][s]])
        .collect();
    Ok(SurfaceField {
        positions,
        normal_residual,
    })
}
