//! Benchmark problem definitions: domains, boundary data, and exact
//! surfaces where a closed form (or an integrated profile) exists.
//!
//! Four families are provided:
//!
//! * **hyperboloid** — a surface of revolution with an explicit formula;
//!   the only case with a fully closed-form solution, used for error and
//!   convergence measurement.
//! * **annulus** — gradient data along two concentric circles built from
//!   the polar frame; no known solution, the solver produces one.
//! * **axisymmetric** — a surface of revolution whose radial profile comes
//!   from an integrated second-order equation; the boundary data is imposed
//!   weakly since it is only known to integration accuracy.
//! * **deformed hyperboloid** — hyperboloid data with the outer rim rotated
//!   rigidly, which breaks the rotational symmetry of the solution.
//!
//! All data generators satisfy the admissibility constraints (orthogonal
//! columns, the fold-consistency norm identity, and the metric bounds)
//! pointwise, which is what the well-posedness of the continuous problem
//! asks of boundary data.

pub mod ode;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use thiserror::Error;

use crate::forms::{BcMode, Discretization, FormsError};
use crate::mesh::{build_rect_mesh, Axis, MeshError, Rect, Side};
use crate::spaces::{
    validate_hypothesis, BoundaryData, GradPair, HypothesisReport, SpaceError, Spaces,
};
use ode::{integrate_rho, OdeError, OdeSolution};

/// Failures while constructing a benchmark case.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("parameter {name} = {value} outside {expected}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("profile integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Closed-form (or profile-integrated) solution surface with the
/// derivatives needed for error norms.
#[derive(Clone)]
pub struct ExactSolution {
    /// Position in space.
    pub phi: Arc<dyn Fn(f64, f64) -> Vector3<f64> + Send + Sync>,
    /// First derivatives: the two gradient columns.
    pub grad: Arc<dyn Fn(f64, f64) -> GradPair + Send + Sync>,
    /// Second derivatives `(phi_xx, phi_xy, phi_yy)`.
    pub second: Arc<dyn Fn(f64, f64) -> [Vector3<f64>; 3] + Send + Sync>,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactSolution").finish_non_exhaustive()
    }
}

/// One benchmark instance: domain, mesh resolution, boundary data, and the
/// way that data enters the discrete system.
#[derive(Debug, Clone)]
pub struct CaseSpec {
    pub name: &'static str,
    pub rect: Rect,
    pub periodic: Option<Axis>,
    pub nx: usize,
    pub ny: usize,
    pub bc: BoundaryData,
    pub bc_mode: BcMode,
    pub exact: Option<ExactSolution>,
}

impl CaseSpec {
    /// Meshes the domain and sets up the discrete problem.
    pub fn discretize(&self, eta: f64) -> Result<Discretization, CaseError> {
        let mesh = build_rect_mesh(self.rect, self.nx, self.ny, self.periodic)?;
        Ok(Discretization::new(
            Spaces::new(mesh),
            self.bc.clone(),
            eta,
            self.bc_mode,
        )?)
    }

    /// Admissibility sweep of the boundary data.
    pub fn validate(&self, n_per_side: usize) -> Result<HypothesisReport, CaseError> {
        Ok(validate_hypothesis(&self.bc, &self.rect, n_per_side)?)
    }
}

// ---------------------------------------------------------------------------
// Hyperboloid
// ---------------------------------------------------------------------------

/// Closed-form geometry of the hyperboloid-of-revolution solution for a
/// fold angle `theta`.
#[derive(Debug, Clone, Copy)]
struct Hyperboloid {
    c0: f64,
    s0: f64,
    /// Angular speed of the parametrization, `1 / c0`.
    alpha: f64,
    /// Half-width of the admissible parameter strip.
    s_star: f64,
}

impl Hyperboloid {
    fn new(theta: f64) -> Result<Hyperboloid, CaseError> {
        if !(theta > 0.0 && theta < 2.0 * PI / 3.0) {
            return Err(CaseError::ParameterOutOfRange {
                name: "theta",
                value: theta,
                expected: "(0, 2*pi/3)",
            });
        }
        let c0 = (0.5 * theta).cos();
        let s0 = (0.5 * theta).sin();
        Ok(Hyperboloid {
            c0,
            s0,
            alpha: 1.0 / c0,
            s_star: (0.5 * (0.5 / c0).acos()).sin(),
        })
    }

    /// Radius of the waist profile with first and second derivatives.
    fn radius(&self, x: f64) -> (f64, f64, f64) {
        let r2 = 4.0 * self.c0 * self.c0 * x * x + 1.0;
        let r = r2.sqrt();
        (
            r,
            4.0 * self.c0 * self.c0 * x / r,
            4.0 * self.c0 * self.c0 / (r2 * r),
        )
    }

    fn phi(&self, x: f64, y: f64) -> Vector3<f64> {
        let (r, _, _) = self.radius(x);
        let (sin, cos) = (self.alpha * y).sin_cos();
        Vector3::new(r * cos, r * sin, 2.0 * self.s0 * x)
    }

    fn grad(&self, x: f64, y: f64) -> GradPair {
        let (r, dr, _) = self.radius(x);
        let (sin, cos) = (self.alpha * y).sin_cos();
        GradPair::new(
            Vector3::new(dr * cos, dr * sin, 2.0 * self.s0),
            Vector3::new(-self.alpha * r * sin, self.alpha * r * cos, 0.0),
        )
    }

    fn second(&self, x: f64, y: f64) -> [Vector3<f64>; 3] {
        let (r, dr, ddr) = self.radius(x);
        let (sin, cos) = (self.alpha * y).sin_cos();
        let a = self.alpha;
        [
            Vector3::new(ddr * cos, ddr * sin, 0.0),
            Vector3::new(-a * dr * sin, a * dr * cos, 0.0),
            Vector3::new(-a * a * r * cos, -a * a * r * sin, 0.0),
        ]
    }
}

/// Hyperboloid benchmark: the strip `(-s*, s*) x (0, 2 pi c0)`, periodic
/// in `y`, exact solution known in closed form, data pinned strongly on
/// both straight sides.
pub fn hyperboloid_case(theta: f64, nx: usize, ny: usize) -> Result<CaseSpec, CaseError> {
    let geo = Hyperboloid::new(theta)?;
    let rect = Rect::new(-geo.s_star, geo.s_star, 0.0, 2.0 * PI * geo.c0)?;
    Ok(CaseSpec {
        name: "hyperboloid",
        rect,
        periodic: Some(Axis::Y),
        nx,
        ny,
        bc: BoundaryData {
            sides: vec![Side::Left, Side::Right],
            eval: Arc::new(move |x, y| Some(geo.grad(x, y))),
        },
        bc_mode: BcMode::Strong,
        exact: Some(ExactSolution {
            phi: Arc::new(move |x, y| geo.phi(x, y)),
            grad: Arc::new(move |x, y| geo.grad(x, y)),
            second: Arc::new(move |x, y| geo.second(x, y)),
        }),
    })
}

// ---------------------------------------------------------------------------
// Annulus
// ---------------------------------------------------------------------------

/// Annulus benchmark: radially growing first-column data `(a x + 1) e_r`
/// along two concentric circles, with the second column's magnitude set by
/// the norm identity, `2 / sqrt(4 - (a x + 1)^2) e_theta`.  No exact
/// surface is known.
pub fn annulus_case(a: f64, nx: usize, ny: usize) -> Result<CaseSpec, CaseError> {
    let outer = 0.75 * a + 1.0;
    if !(outer > 0.0 && outer * outer <= 3.0) {
        return Err(CaseError::ParameterOutOfRange {
            name: "a",
            value: a,
            expected: "slope keeping (3a/4 + 1)^2 within (0, 3]",
        });
    }
    let rect = Rect::new(0.0, 0.75, 0.0, 2.0 * PI)?;
    Ok(CaseSpec {
        name: "annulus",
        rect,
        periodic: Some(Axis::Y),
        nx,
        ny,
        bc: BoundaryData {
            sides: vec![Side::Left, Side::Right],
            eval: Arc::new(move |x, y| {
                let m = a * x + 1.0;
                let (sin, cos) = y.sin_cos();
                let q = 2.0 / (4.0 - m * m).sqrt();
                Some(GradPair::new(
                    Vector3::new(m * cos, m * sin, 0.0),
                    Vector3::new(-q * sin, q * cos, 0.0),
                ))
            }),
        },
        bc_mode: BcMode::Strong,
        exact: None,
    })
}

// ---------------------------------------------------------------------------
// Axisymmetric profile case
// ---------------------------------------------------------------------------

/// Rotationally symmetric benchmark on `(0, 2 pi) x (0, 4)`, periodic in
/// `x`: the radial profile solves `rho'' = 4 rho / (4 - rho^2)^2` from
/// `rho(0) = 0.1`, `rho'(0) = 0`, and the height rate
/// `z' = sqrt(4/(4 - rho^2) - rho'^2)` closes the admissibility identity.
/// The data is known only to integration accuracy, so it is imposed weakly
/// on the bottom and top sides.
pub fn axisymmetric_case(nx: usize, ny: usize) -> Result<CaseSpec, CaseError> {
    let profile: Arc<OdeSolution> = Arc::new(integrate_rho(0.1, 0.0, 4.0)?);
    let rect = Rect::new(0.0, 2.0 * PI, 0.0, 4.0)?;

    let grad_of = |profile: &OdeSolution, x: f64, y: f64| -> GradPair {
        let (rho, drho) = profile.eval(y);
        let (sin, cos) = x.sin_cos();
        let zdot = (4.0 / (4.0 - rho * rho) - drho * drho).max(0.0).sqrt();
        GradPair::new(
            Vector3::new(-rho * sin, rho * cos, 0.0),
            Vector3::new(drho * cos, drho * sin, zdot),
        )
    };

    let p_bc = profile.clone();
    let p_phi = profile.clone();
    let p_grad = profile.clone();
    let p_second = profile;
    Ok(CaseSpec {
        name: "axisymmetric",
        rect,
        periodic: Some(Axis::X),
        nx,
        ny,
        bc: BoundaryData {
            sides: vec![Side::Bottom, Side::Top],
            eval: Arc::new(move |x, y| Some(grad_of(&p_bc, x, y))),
        },
        bc_mode: BcMode::Weak,
        exact: Some(ExactSolution {
            phi: Arc::new(move |x, y| {
                let (rho, _) = p_phi.eval(y);
                let (sin, cos) = x.sin_cos();
                Vector3::new(rho * cos, rho * sin, p_phi.eval_z(y))
            }),
            grad: Arc::new(move |x, y| grad_of(&p_grad, x, y)),
            second: Arc::new(move |x, y| {
                let (rho, drho) = p_second.eval(y);
                let ddrho = p_second.eval_ddrho(y);
                let (sin, cos) = x.sin_cos();
                [
                    Vector3::new(-rho * cos, -rho * sin, 0.0),
                    Vector3::new(-drho * sin, drho * cos, 0.0),
                    // The height rate is a conserved quantity, so z'' = 0.
                    Vector3::new(ddrho * cos, ddrho * sin, 0.0),
                ]
            }),
        }),
    })
}

// ---------------------------------------------------------------------------
// Deformed hyperboloid
// ---------------------------------------------------------------------------

/// Axis about which the outer-rim data of the deformed case rotates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationAxis {
    /// An axis orthogonal to the surface's symmetry axis; bends the
    /// surface sideways (the default).
    Transverse,
    /// The symmetry axis itself; acts as a twist.
    Symmetry,
}

/// Hyperboloid data with the right-hand rim rotated rigidly by `angle`
/// about the chosen axis.  Rotations preserve norms and inner products, so
/// the data stays admissible; the solution loses its symmetry and has no
/// closed form.
pub fn deformed_hyperboloid_case(
    theta: f64,
    angle: f64,
    axis: RotationAxis,
    nx: usize,
    ny: usize,
) -> Result<CaseSpec, CaseError> {
    let geo = Hyperboloid::new(theta)?;
    let rect = Rect::new(-geo.s_star, geo.s_star, 0.0, 2.0 * PI * geo.c0)?;
    let rot = match axis {
        RotationAxis::Transverse => Rotation3::from_axis_angle(&Vector3::x_axis(), angle),
        RotationAxis::Symmetry => Rotation3::from_axis_angle(&Vector3::z_axis(), angle),
    };
    Ok(CaseSpec {
        name: "deformed-hyperboloid",
        rect,
        periodic: Some(Axis::Y),
        nx,
        ny,
        bc: BoundaryData {
            sides: vec![Side::Left, Side::Right],
            eval: Arc::new(move |x, y| {
                let g = geo.grad(x, y);
                // The strip is symmetric about x = 0; positive x is the
                // rotated rim.
                if x > 0.0 {
                    Some(GradPair::new(rot * g.gx, rot * g.gy))
                } else {
                    Some(g)
                }
            }),
        },
        bc_mode: BcMode::Strong,
        exact: None,
    })
}

// ---------------------------------------------------------------------------
// Custom constant data
// ---------------------------------------------------------------------------

/// User-supplied constant gradient columns on the unit square, pinned on
/// all four sides.  An admissible pair is the gradient of the affine surface
/// `phi = x g_x + y g_y`, which is then the exact solution.  Admissibility is
/// deliberately *not* enforced here: an inadmissible pair still builds, so
/// that validation can report exactly which identity it breaks.
pub fn custom_case(
    gx: Vector3<f64>,
    gy: Vector3<f64>,
    nx: usize,
    ny: usize,
) -> Result<CaseSpec, CaseError> {
    let rect = Rect::new(0.0, 1.0, 0.0, 1.0)?;
    let exact = ExactSolution {
        phi: Arc::new(move |x, y| x * gx + y * gy),
        grad: Arc::new(move |_, _| GradPair::new(gx, gy)),
        second: Arc::new(|_, _| [Vector3::zeros(); 3]),
    };
    Ok(CaseSpec {
        name: "custom",
        rect,
        periodic: None,
        nx,
        ny,
        bc: BoundaryData {
            sides: vec![Side::Left, Side::Right, Side::Bottom, Side::Top],
            eval: Arc::new(move |_, _| Some(GradPair::new(gx, gy))),
        },
        bc_mode: BcMode::Strong,
        exact: Some(exact),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{coefficient_x, coefficient_y, deterministic_samples};

    #[test]
    fn hyperboloid_strip_dimensions_match_the_fold_angle() {
        let case = hyperboloid_case(PI / 2.0, 6, 36).unwrap();
        let width = case.rect.x_max - case.rect.x_min;
        let height = case.rect.y_max - case.rect.y_min;
        assert!((width - 2.0 * (PI / 8.0).sin()).abs() <= 1e-15);
        assert!((width - 0.7653668).abs() <= 1e-7);
        assert!((height - PI * 2.0f64.sqrt()).abs() <= 1e-13);
        assert!((height - 4.4428829).abs() <= 1e-7);
        assert_eq!(case.periodic, Some(Axis::Y));
        assert_eq!(case.bc_mode, BcMode::Strong);
    }

    #[test]
    fn hyperboloid_waist_norms_and_identity() {
        let case = hyperboloid_case(PI / 2.0, 6, 36).unwrap();
        let g = (case.bc.eval)(0.0, 0.3).unwrap();
        assert!((g.gx.norm_squared() - 2.0).abs() <= 1e-14);
        assert!((g.gy.norm_squared() - 2.0).abs() <= 1e-14);
        let identity = (1.0 - 0.25 * g.gx.norm_squared()) * g.gy.norm_squared();
        assert!((identity - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn hyperboloid_rim_norm_matches_the_closed_form() {
        // At the rim, |phi_y|^2 = 2 - 1/c0 + 1/c0^2 exactly; for the right
        // angle this is 4 - sqrt(2), comfortably under the admissible 4.
        let theta = PI / 2.0;
        let case = hyperboloid_case(theta, 6, 36).unwrap();
        let exact = case.exact.as_ref().unwrap();
        let x_rim = case.rect.x_max;
        let g = (exact.grad)(x_rim, 1.0);
        let c0 = (0.5 * theta).cos();
        let closed = 2.0 - 1.0 / c0 + 1.0 / (c0 * c0);
        assert!((g.gy.norm_squared() - closed).abs() <= 1e-12);
        assert!((closed - 2.5857864).abs() <= 1e-7);
        assert!(g.gy.norm_squared() <= 4.0);
    }

    #[test]
    fn hyperboloid_surface_solves_the_strong_equation_pointwise() {
        let case = hyperboloid_case(PI / 2.0, 6, 36).unwrap();
        let exact = case.exact.as_ref().unwrap();
        let samples = deterministic_samples(201, 80);
        for pair in samples.chunks(2) {
            let x = 0.5 * (case.rect.x_min + case.rect.x_max)
                + 0.5 * pair[0] * (case.rect.x_max - case.rect.x_min);
            let y = 0.5 * (case.rect.y_min + case.rect.y_max)
                + 0.5 * pair[1] * (case.rect.y_max - case.rect.y_min);
            let g = (exact.grad)(x, y);
            let [phi_xx, _, phi_yy] = (exact.second)(x, y);
            let (p, _) = coefficient_x(&g.gx);
            let (q, _) = coefficient_y(&g.gy);
            let residual = phi_xx * p + phi_yy * q;
            assert!(
                residual.norm() <= 1e-9,
                "strong residual {} at ({x}, {y})",
                residual.norm()
            );
        }
    }

    #[test]
    fn exact_gradients_are_consistent_with_position_differences() {
        // Central differences of phi against the stated gradient and second
        // derivatives, for both cases that provide them.
        let cases = [
            hyperboloid_case(PI / 2.0, 4, 12).unwrap(),
            axisymmetric_case(8, 6).unwrap(),
        ];
        let h = 1e-6;
        for case in &cases {
            let exact = case.exact.as_ref().unwrap();
            let xm = 0.5 * (case.rect.x_min + case.rect.x_max);
            let ym = 0.5 * (case.rect.y_min + case.rect.y_max);
            for (x, y) in [(xm, ym), (xm + 0.1, ym - 0.2), (xm - 0.05, ym + 0.3)] {
                let g = (exact.grad)(x, y);
                let fd_x = ((exact.phi)(x + h, y) - (exact.phi)(x - h, y)) / (2.0 * h);
                let fd_y = ((exact.phi)(x, y + h) - (exact.phi)(x, y - h)) / (2.0 * h);
                assert!((fd_x - g.gx).norm() <= 1e-7, "{}: gx", case.name);
                assert!((fd_y - g.gy).norm() <= 1e-7, "{}: gy", case.name);
                let [sxx, sxy, syy] = (exact.second)(x, y);
                let fd_xx =
                    ((exact.grad)(x + h, y).gx - (exact.grad)(x - h, y).gx) / (2.0 * h);
                let fd_xy =
                    ((exact.grad)(x, y + h).gx - (exact.grad)(x, y - h).gx) / (2.0 * h);
                let fd_yy =
                    ((exact.grad)(x, y + h).gy - (exact.grad)(x, y - h).gy) / (2.0 * h);
                assert!((fd_xx - sxx).norm() <= 1e-6, "{}: xx", case.name);
                assert!((fd_xy - sxy).norm() <= 1e-6, "{}: xy", case.name);
                assert!((fd_yy - syy).norm() <= 1e-6, "{}: yy", case.name);
            }
        }
    }

    #[test]
    fn all_cases_pass_the_admissibility_sweep() {
        let closed_form = [
            hyperboloid_case(PI / 2.0, 4, 12).unwrap(),
            annulus_case(0.675, 4, 12).unwrap(),
            deformed_hyperboloid_case(PI / 2.0, PI / 6.0, RotationAxis::Transverse, 4, 12)
                .unwrap(),
            deformed_hyperboloid_case(PI / 2.0, PI / 6.0, RotationAxis::Symmetry, 4, 12)
                .unwrap(),
        ];
        for case in &closed_form {
            let report = case.validate(1000).unwrap();
            assert!(
                report.max_violation() <= 1e-10,
                "{}: violation {}",
                case.name,
                report.max_violation()
            );
            assert!(report.min_x_norm_sq > 0.0);
        }
        // The profile case carries integration error of the dense output.
        let axis = axisymmetric_case(8, 6).unwrap();
        let report = axis.validate(1000).unwrap();
        assert!(
            report.max_violation() <= 1e-8,
            "axisymmetric violation {}",
            report.max_violation()
        );
    }

    #[test]
    fn annulus_circle_magnitudes() {
        let case = annulus_case(0.675, 4, 12).unwrap();
        let inner = (case.bc.eval)(0.0, 1.2).unwrap();
        assert!((inner.gx.norm_squared() - 1.0).abs() <= 1e-14);
        assert!((inner.gy.norm_squared() - 4.0 / 3.0).abs() <= 1e-14);
        let outer = (case.bc.eval)(0.75, 1.2).unwrap();
        let m2 = 1.50625f64 * 1.50625;
        assert!((outer.gx.norm_squared() - m2).abs() <= 1e-14);
        assert!((outer.gy.norm_squared() - 4.0 / (4.0 - m2)).abs() <= 1e-13);
        assert!((outer.gy.norm_squared() - 2.3105215).abs() <= 1e-7);
        assert!(outer.gx.dot(&outer.gy).abs() <= 1e-15);
    }

    #[test]
    fn axisymmetric_bottom_circle_values() {
        let case = axisymmetric_case(8, 6).unwrap();
        let g = (case.bc.eval)(0.7, 0.0).unwrap();
        assert!((g.gx.norm_squared() - 0.01).abs() <= 1e-10);
        assert!((g.gy.norm_squared() - 4.0 / 3.99).abs() <= 1e-9);
        assert!(g.gx.dot(&g.gy).abs() <= 1e-12);
        assert_eq!(case.bc_mode, BcMode::Weak);
        assert_eq!(case.periodic, Some(Axis::X));
    }

    #[test]
    fn zero_angle_deformation_reduces_to_the_hyperboloid() {
        let base = hyperboloid_case(PI / 2.0, 4, 12).unwrap();
        let deformed =
            deformed_hyperboloid_case(PI / 2.0, 0.0, RotationAxis::Transverse, 4, 12).unwrap();
        assert_eq!(base.rect, deformed.rect);
        for side_x in [base.rect.x_min, base.rect.x_max] {
            for k in 0..10 {
                let y = 0.4 * k as f64;
                let a = (base.bc.eval)(side_x, y).unwrap();
                let b = (deformed.bc.eval)(side_x, y).unwrap();
                assert!((a.gx - b.gx).norm() <= 1e-15);
                assert!((a.gy - b.gy).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn deformation_changes_only_the_positive_rim() {
        let base = hyperboloid_case(PI / 2.0, 4, 12).unwrap();
        let deformed =
            deformed_hyperboloid_case(PI / 2.0, PI / 6.0, RotationAxis::Transverse, 4, 12)
                .unwrap();
        let y = 0.8;
        let left_a = (base.bc.eval)(base.rect.x_min, y).unwrap();
        let left_b = (deformed.bc.eval)(base.rect.x_min, y).unwrap();
        assert!((left_a.gx - left_b.gx).norm() <= 1e-15);
        let right_a = (base.bc.eval)(base.rect.x_max, y).unwrap();
        let right_b = (deformed.bc.eval)(base.rect.x_max, y).unwrap();
        assert!((right_a.gx - right_b.gx).norm() > 0.1);
        // Rotation preserves the invariants used by admissibility.
        assert!(
            (right_a.gx.norm_squared() - right_b.gx.norm_squared()).abs() <= 1e-14
        );
        assert!(
            (right_a.gy.norm_squared() - right_b.gy.norm_squared()).abs() <= 1e-14
        );
        assert!(right_b.gx.dot(&right_b.gy).abs() <= 1e-14);
    }

    #[test]
    fn parameter_validation_rejects_out_of_range_input() {
        assert!(matches!(
            hyperboloid_case(0.0, 4, 12),
            Err(CaseError::ParameterOutOfRange { name: "theta", .. })
        ));
        assert!(matches!(
            hyperboloid_case(2.2, 4, 12),
            Err(CaseError::ParameterOutOfRange { name: "theta", .. })
        ));
        assert!(matches!(
            annulus_case(2.0, 4, 12),
            Err(CaseError::ParameterOutOfRange { name: "a", .. })
        ));
    }

    #[test]
    fn discretization_dof_count_follows_the_mesh_resolution() {
        // For an (nx, ny) mesh periodic in y the full system size is
        // ny (27 nx + 15) + 3: six quadratic components, three linear ones,
        // three means.
        let case = hyperboloid_case(PI / 2.0, 2, 6).unwrap();
        let disc = case.discretize(1.0).unwrap();
        assert_eq!(disc.spaces.n_total(), 6 * (27 * 2 + 15) + 3);
    }

    #[test]
    fn admissible_custom_pair_passes_validation() {
        // g_x = sqrt(2) e_1, g_y = sqrt(2) e_2: orthogonal, the norm
        // identity gives (1 - 1/2) * 2 = 1, and both bounds hold strictly.
        let s2 = 2.0f64.sqrt();
        let case = custom_case(
            Vector3::new(s2, 0.0, 0.0),
            Vector3::new(0.0, s2, 0.0),
            3,
            3,
        )
        .unwrap();
        let report = case.validate(200).unwrap();
        assert!(report.satisfied(1e-12), "{report:?}");
        let exact = case.exact.as_ref().unwrap();
        let phi = (exact.phi)(0.5, 0.25);
        assert!((phi - Vector3::new(0.5 * s2, 0.25 * s2, 0.0)).norm() <= 1e-15);
    }

    #[test]
    fn inadmissible_custom_pair_builds_but_fails_validation() {
        // An over-long transverse column must survive construction (so the
        // validator gets to see it) and then trip the norm bound.
        let case = custom_case(
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 3.0, 0.0),
            3,
            3,
        )
        .unwrap();
        let report = case.validate(200).unwrap();
        assert!(!report.satisfied(1e-8));
        assert!(report.max_y_bound_violation >= 4.9);
    }
}
