//! Solution diagnostics: error norms against closed-form references,
//! convergence-rate estimation, the fold indicators `u` and `v`, and export
//! of meshes, surfaces, and tables to VTK / OBJ / CSV.
//!
//! The two pointwise indicators come from the constraint system satisfied by
//! an exact parametrization gradient `(g_x, g_y)`:
//!
//! ```text
//!   u = g_x . g_y                          (orthogonality defect)
//!   v = log( (1 - |g_x|^2 / 4) |g_y|^2 )   (unit-determinant defect)
//! ```
//!
//! Both vanish identically for an exact surface.  `v` only makes sense where
//! its argument is positive; points below a small floor are flagged undefined
//! and kept out of every supremum.  The region `omega'` where the solved
//! surface stays unfolded is detected per triangle: a triangle belongs to it
//! when `|g_y|^2 > 1` at all quadrature points.

use crate::cases::ExactSolution;
use crate::forms::{eval_gradient, Discretization, ElemGeom};
use crate::mesh::Mesh;
use crate::recovery::SurfaceField;
use crate::spaces::State;
use nalgebra::Vector3;
use std::io::{self, Write};

/// Arguments of the logarithm below this floor make `v` undefined.
const V_FLOOR: f64 = 1e-14;

/// Everything that can go wrong while tabulating convergence data.
#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    /// Rate estimation needs strictly positive errors on both meshes.
    #[error("convergence rate needs positive errors, got {e1:e} and {e2:e}")]
    NonpositiveError { e1: f64, e2: f64 },
    /// Rate estimation needs two distinct, nonzero cell counts.
    #[error("convergence rate needs distinct positive cell counts, got {n1} and {n2}")]
    BadCellCounts { n1: usize, n2: usize },
}

// ---------------------------------------------------------------------------
// Error norms
// ---------------------------------------------------------------------------

/// L2 and H1 distances between a discrete gradient field and a reference.
#[derive(Debug, Clone, Copy)]
pub struct ErrorNorms {
    pub l2: f64,
    /// Full H1 norm: the L2 part plus the first-derivative seminorm.
    pub h1: f64,
}

/// Maps a reference quadrature point to physical coordinates.
fn phys_point(coords: &[[f64; 2]; 3], point: [f64; 2]) -> [f64; 2] {
    let [a, b, c] = coords;
    let [xi, zeta] = point;
    [
        a[0] + (b[0] - a[0]) * xi + (c[0] - a[0]) * zeta,
        a[1] + (b[1] - a[1]) * xi + (c[1] - a[1]) * zeta,
    ]
}

/// Quadrature evaluation of `|G_h - grad(phi)|` in L2 and H1, using the
/// module's degree-6 rule.  The reference supplies first derivatives of the
/// surface (compared against the field values) and second derivatives
/// (compared against the field's first derivatives, with the mixed one
/// standing in for both cross terms).
pub fn error_norms(
    disc: &Discretization,
    state: &State,
    exact: &ExactSolution,
) -> ErrorNorms {
    let spaces = &disc.spaces;
    let basis = disc.basis();
    let nq = basis.rule.points.len();
    let mut l2_sq = 0.0;
    let mut semi_sq = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let geom = ElemGeom::of(&spaces.mesh, t);
        let coords = &spaces.mesh.tri_coords[t];
        for q in 0..nq {
            let w = basis.rule.weights[q] * geom.det.abs();
            let ge = eval_gradient(spaces, basis, &geom, t, q, &state.g);
            let [x, y] = phys_point(coords, basis.rule.points[q]);
            let grad = (exact.grad)(x, y);
            let [sxx, sxy, syy] = (exact.second)(x, y);
            l2_sq += w
                * ((ge.gx - grad.gx).norm_squared()
                    + (ge.gy - grad.gy).norm_squared());
            semi_sq += w
                * ((ge.d_gx[0] - sxx).norm_squared()
                    + (ge.d_gx[1] - sxy).norm_squared()
                    + (ge.d_gy[0] - sxy).norm_squared()
                    + (ge.d_gy[1] - syy).norm_squared());
        }
    }
    ErrorNorms {
        l2: l2_sq.sqrt(),
        h1: (l2_sq + semi_sq).sqrt(),
    }
}

// ---------------------------------------------------------------------------
// Convergence rates and tables
// ---------------------------------------------------------------------------

/// Estimated order from errors `e1, e2` on meshes with `n1, n2` cells:
///
/// ```text
///   rate = 2 log(e1 / e2) / |log(n2 / n1)|
/// ```
///
/// The cell ratio enters through the magnitude of its logarithm, so the sign
/// of the estimate follows the direction of the error change alone; a 4x cell
/// increase with a 4x error drop gives exactly 2, and swapping the two meshes
/// flips the sign.
pub fn convergence_rate(
    e1: f64,
    e2: f64,
    n1: usize,
    n2: usize,
) -> Result<f64, AnalysisError> {
    if !(e1 > 0.0) || !(e2 > 0.0) {
        return Err(AnalysisError::NonpositiveError { e1, e2 });
    }
    if n1 == 0 || n2 == 0 || n1 == n2 {
        return Err(AnalysisError::BadCellCounts { n1, n2 });
    }
    Ok(2.0 * (e1 / e2).ln() / (n2 as f64 / n1 as f64).ln().abs())
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dofs: usize,
    pub newton_iters: usize,
    pub h1_err: f64,
    pub h1_rate: Option<f64>,
    pub l2_err: f64,
    pub l2_rate: Option<f64>,
}

/// Accumulates refinement levels and fills in successive rates; rows after
/// the first carry rate estimates against the previous row.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    #[serde(skip)]
    cells: Vec<usize>,
}

impl ConvergenceTable {
    pub fn new() -> ConvergenceTable {
        ConvergenceTable::default()
    }

    /// Appends one level; `cells` is the triangle count used for the rate
    /// estimate, which is not itself a column of the table.
    pub fn add_row(
        &mut self,
        h: f64,
        dofs: usize,
        cells: usize,
        newton_iters: usize,
        h1_err: f64,
        l2_err: f64,
    ) -> Result<(), AnalysisError> {
        let (h1_rate, l2_rate) = match (self.rows.last(), self.cells.last()) {
            (Some(prev), Some(&prev_cells)) => (
                Some(convergence_rate(prev.h1_err, h1_err, prev_cells, cells)?),
                Some(convergence_rate(prev.l2_err, l2_err, prev_cells, cells)?),
            ),
            _ => (None, None),
        };
        self.rows.push(ConvergenceRow {
            h,
            dofs,
            newton_iters,
            h1_err,
            h1_rate,
            l2_err,
            l2_rate,
        });
        self.cells.push(cells);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Constraint diagnostics
// ---------------------------------------------------------------------------

/// Fold indicators at a single point: the orthogonality defect `u` and the
/// determinant defect `v`, the latter `None` where its logarithm argument
/// falls below the positivity floor.
pub fn point_constraints(
    gx: &Vector3<f64>,
    gy: &Vector3<f64>,
) -> (f64, Option<f64>) {
    let u = gx.dot(gy);
    let arg = (1.0 - 0.25 * gx.norm_squared()) * gy.norm_squared();
    let v = if arg > V_FLOOR { Some(arg.ln()) } else { None };
    (u, v)
}

/// Per-quadrature-point constraint defects of a gradient field, with the
/// unfolded region and its restricted suprema.
#[derive(Debug, Clone)]
pub struct ConstraintFields {
    /// Orthogonality defect per triangle and quadrature point.
    pub u: Vec<Vec<f64>>,
    /// Determinant defect per triangle and quadrature point; `None` where
    /// undefined.
    pub v: Vec<Vec<Option<f64>>>,
    /// Whether each triangle lies in the unfolded region (`|g_y|^2 > 1` at
    /// every quadrature point).
    pub omega_prime: Vec<bool>,
    /// Supremum of `|u|` over unfolded triangles only; zero if none.
    pub sup_u: f64,
    /// Supremum of `|v|` over unfolded triangles, skipping undefined points.
    pub sup_v: f64,
    /// Largest `|g_x|^2` anywhere, for checking the metric bound.
    pub max_gx_sq: f64,
    /// Largest `|g_y|^2` anywhere.
    pub max_gy_sq: f64,
    pub n_omega_prime: usize,
    /// Number of quadrature points with `v` undefined.
    pub n_undefined: usize,
}

impl ConstraintFields {
    /// Share of triangles in the unfolded region.
    pub fn omega_prime_fraction(&self) -> f64 {
        self.n_omega_prime as f64 / self.omega_prime.len() as f64
    }

    /// Number of triangles with `|g_y|^2 <= 1` somewhere, i.e. the fold
    /// candidates outside the unfolded region.
    pub fn n_folded(&self) -> usize {
        self.omega_prime.len() - self.n_omega_prime
    }
}

/// Evaluates both constraint defects of `state` at every quadrature point
/// and classifies triangles into unfolded and fold-candidate sets.
pub fn constraint_fields(disc: &Discretization, state: &State) -> ConstraintFields {
    let spaces = &disc.spaces;
    let basis = disc.basis();
    let nq = basis.rule.points.len();
    let nt = spaces.mesh.n_triangles();
    let mut u = Vec::with_capacity(nt);
    let mut v = Vec::with_capacity(nt);
    let mut omega_prime = Vec::with_capacity(nt);
    let mut max_gx_sq = 0.0f64;
    let mut max_gy_sq = 0.0f64;
    let mut n_undefined = 0;
    for t in 0..nt {
        let geom = ElemGeom::of(&spaces.mesh, t);
        let mut tri_u = Vec::with_capacity(nq);
        let mut tri_v = Vec::with_capacity(nq);
        let mut unfolded = true;
        for q in 0..nq {
            let ge = eval_gradient(spaces, basis, &geom, t, q, &state.g);
            let (pu, pv) = point_constraints(&ge.gx, &ge.gy);
            if pv.is_none() {
                n_undefined += 1;
            }
            max_gx_sq = max_gx_sq.max(ge.gx.norm_squared());
            max_gy_sq = max_gy_sq.max(ge.gy.norm_squared());
            unfolded &= ge.gy.norm_squared() > 1.0;
            tri_u.push(pu);
            tri_v.push(pv);
        }
        u.push(tri_u);
        v.push(tri_v);
        omega_prime.push(unfolded);
    }
    let mut sup_u = 0.0f64;
    let mut sup_v = 0.0f64;
    for t in 0..nt {
        if !omega_prime[t] {
            continue;
        }
        for q in 0..nq {
            sup_u = sup_u.max(u[t][q].abs());
            if let Some(pv) = v[t][q] {
                sup_v = sup_v.max(pv.abs());
            }
        }
    }
    let n_omega_prime = omega_prime.iter().filter(|&&b| b).count();
    ConstraintFields {
        u,
        v,
        omega_prime,
        sup_u,
        sup_v,
        max_gx_sq,
        max_gy_sq,
        n_omega_prime,
        n_undefined,
    }
}

/// L2 norm of the cross-derivative defect `d_y g_x - d_x g_y`; for a field
/// that is exactly a gradient this vanishes, and the penalty mechanism should
/// drive it to zero under refinement.
pub fn curl_l2(disc: &Discretization, state: &State) -> f64 {
    let spaces = &disc.spaces;
    let basis = disc.basis();
    let nq = basis.rule.points.len();
    let mut acc = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let geom = ElemGeom::of(&spaces.mesh, t);
        for q in 0..nq {
            let w = basis.rule.weights[q] * geom.det.abs();
            let ge = eval_gradient(spaces, basis, &geom, t, q, &state.g);
            acc += w * ge.curl().norm_squared();
        }
    }
    acc.sqrt()
}

/// L2 distance between the gradient of a recovered surface and the gradient
/// field it was recovered from: the optimality gap of the reconstruction.
pub fn gradient_mismatch(
    disc: &Discretization,
    state: &State,
    surface: &SurfaceField,
) -> f64 {
    let spaces = &disc.spaces;
    let basis = disc.basis();
    let nq = basis.rule.points.len();
    let mut acc = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let geom = ElemGeom::of(&spaces.mesh, t);
        let wdofs = &spaces.w.tri_dofs[t];
        for q in 0..nq {
            let w = basis.rule.weights[q] * geom.det.abs();
            let ge = eval_gradient(spaces, basis, &geom, t, q, &state.g);
            let mut dphi = [[0.0f64; 3]; 2];
            for i in 0..6 {
                let [dx, dy] = geom.phys_grad(basis.p2_dref[q][i]);
                let p = surface.positions[wdofs[i]];
                for c in 0..3 {
                    dphi[0][c] += dx * p[c];
                    dphi[1][c] += dy * p[c];
                }
            }
            for c in 0..3 {
                acc += w
                    * ((dphi[0][c] - ge.gx[c]).powi(2)
                        + (dphi[1][c] - ge.gy[c]).powi(2));
            }
        }
    }
    acc.sqrt()
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Fixed scientific formatting, `%.12e` style with a signed two-digit
/// exponent, so exported files are byte-stable across platforms.
fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let x = if x == 0.0 { 0.0 } else { x };
    let raw = format!("{x:.12e}");
    let (mantissa, exp) = raw.split_once('e').expect("exponent format");
    let e: i32 = exp.parse().expect("exponent digits");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", e.abs())
}

/// Writes the parameter-domain mesh with the constraint diagnostics as a
/// legacy VTK 2.0 ASCII unstructured grid.  Point data carries `u`, `v`, and
/// the squared column norms evaluated at the vertices (with `v` clamped at
/// the positivity floor so the file stays numeric); cell data carries the
/// unfolded-region indicator.
pub fn write_vtk<W: Write>(
    out: &mut W,
    disc: &Discretization,
    state: &State,
    fields: &ConstraintFields,
) -> io::Result<()> {
    let spaces = &disc.spaces;
    let mesh = &spaces.mesh;
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    writeln!(out, "# vtk DataFile Version 2.0")?;
    writeln!(out, "constraint diagnostics")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {nv} double")?;
    for v in &mesh.vertices {
        writeln!(out, "{} {} {}", sci(v[0]), sci(v[1]), sci(0.0))?;
    }
    writeln!(out, "CELLS {nt} {}", 4 * nt)?;
    for tri in &mesh.triangles {
        writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }

    // Vertex dofs are the first `nv` scalars of the quadratic space, so the
    // nodal gradient columns line up with the points written above.
    let nodal = |s: usize| -> (Vector3<f64>, Vector3<f64>) {
        let g = |c: usize| state.g[spaces.g_index(s, c)];
        (
            Vector3::new(g(0), g(1), g(2)),
            Vector3::new(g(3), g(4), g(5)),
        )
    };
    writeln!(out, "POINT_DATA {nv}")?;
    let scalars = |out: &mut W, name: &str| -> io::Result<()> {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")
    };
    scalars(out, "u")?;
    for s in 0..nv {
        let (gx, gy) = nodal(s);
        writeln!(out, "{}", sci(gx.dot(&gy)))?;
    }
    scalars(out, "v")?;
    for s in 0..nv {
        let (gx, gy) = nodal(s);
        let arg = (1.0 - 0.25 * gx.norm_squared()) * gy.norm_squared();
        writeln!(out, "{}", sci(arg.max(V_FLOOR).ln()))?;
    }
    scalars(out, "gx_norm_sq")?;
    for s in 0..nv {
        writeln!(out, "{}", sci(nodal(s).0.norm_squared()))?;
    }
    scalars(out, "gy_norm_sq")?;
    for s in 0..nv {
        writeln!(out, "{}", sci(nodal(s).1.norm_squared()))?;
    }
    writeln!(out, "CELL_DATA {nt}")?;
    writeln!(out, "SCALARS omega_prime int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for t in 0..nt {
        writeln!(out, "{}", u8::from(fields.omega_prime[t]))?;
    }
    Ok(())
}

/// Writes a recovered surface as a Wavefront OBJ: one `v` record per mesh
/// vertex (edge-midpoint positions are dropped) and one `f` record per
/// triangle, indices one-based.
pub fn write_obj<W: Write>(
    out: &mut W,
    mesh: &Mesh,
    surface: &SurfaceField,
) -> io::Result<()> {
    for s in 0..mesh.n_vertices() {
        let p = surface.positions[s];
        writeln!(out, "v {} {} {}", sci(p[0]), sci(p[1]), sci(p[2]))?;
    }
    for tri in &mesh.triangles {
        writeln!(out, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1)?;
    }
    Ok(())
}

/// Writes a convergence table as CSV with the fixed header
/// `h,dofs,newton_iters,h1_err,h1_rate,l2_err,l2_rate`; absent rates (first
/// row) are empty fields.
pub fn write_csv<W: Write>(out: &mut W, table: &ConvergenceTable) -> io::Result<()> {
    writeln!(out, "h,dofs,newton_iters,h1_err,h1_rate,l2_err,l2_rate")?;
    let opt = |r: Option<f64>| r.map(sci).unwrap_or_default();
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sci(row.h),
            row.dofs,
            row.newton_iters,
            sci(row.h1_err),
            opt(row.h1_rate),
            sci(row.l2_err),
            opt(row.l2_rate),
        )?;
    }
    Ok(())
}
