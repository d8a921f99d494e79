//! Fixed quadrature rules on the reference triangle and the unit interval.
//!
//! All volume integrals in the crate use one symmetric triangle rule that is
//! exact for polynomials of total degree 6.  That covers every bilinear-form
//! integrand built from quadratic shape functions and their gradients
//! (degree <= 4) with headroom for the mildly nonlinear coefficient factors,
//! and it keeps assembled matrices independent of any adaptive-quadrature
//! heuristics.  Boundary terms use a 3-point Gauss rule on the unit interval
//! (exact to degree 5).

/// Symmetric rule on the reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`.
///
/// Weights are scaled so that they sum to the reference area 1/2, i.e.
/// `integral_T f = sum_q weights[q] * f(points[q])` without any extra factor.
#[derive(Debug, Clone)]
pub struct TriQuadrature {
    /// Evaluation points `(x, y)` inside the reference triangle.
    pub points: Vec<[f64; 2]>,
    /// Weights, summing to the reference area 1/2.
    pub weights: Vec<f64>,
    /// Largest total polynomial degree integrated exactly.
    pub exactness: usize,
}

impl TriQuadrature {
    /// 12-point symmetric rule of exactness degree 6.
    ///
    /// Three symmetry orbits in barycentric coordinates: two 3-point orbits
    /// `(a, b, b)` and one 6-point orbit of all permutations of `(a, b, c)`.
    pub fn degree6() -> Self {
        // Orbit data: (weight w.r.t. unit total, barycentric coordinates).
        const W1: f64 = 0.116_786_275_726_379;
        const A1: f64 = 0.501_426_509_658_179;
        const B1: f64 = 0.249_286_745_170_910;
        const W2: f64 = 0.050_844_906_370_207;
        const A2: f64 = 0.873_821_971_016_996;
        const B2: f64 = 0.063_089_014_491_502;
        const W3: f64 = 0.082_851_075_618_374;
        const A3: f64 = 0.053_145_049_844_816;
        const B3: f64 = 0.310_352_451_033_785;
        const C3: f64 = 0.636_502_499_121_399;

        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        let mut push = |w: f64, bary: [f64; 3]| {
            // Reference coordinates are (x, y) = (lambda_1, lambda_2).
            points.push([bary[1], bary[2]]);
            weights.push(0.5 * w);
        };

        for perm in [[A1, B1, B1], [B1, A1, B1], [B1, B1, A1]] {
            push(W1, perm);
        }
        for perm in [[A2, B2, B2], [B2, A2, B2], [B2, B2, A2]] {
            push(W2, perm);
        }
        for perm in [
            [A3, B3, C3],
            [A3, C3, B3],
            [B3, A3, C3],
            [B3, C3, A3],
            [C3, A3, B3],
            [C3, B3, A3],
        ] {
            push(W3, perm);
        }

        TriQuadrature {
            points,
            weights,
            exactness: 6,
        }
    }
}

/// Gauss rule on the unit interval `[0, 1]`, weights summing to 1.
#[derive(Debug, Clone)]
pub struct EdgeQuadrature {
    /// Evaluation points in `[0, 1]`.
    pub points: Vec<f64>,
    /// Weights, summing to 1.
    pub weights: Vec<f64>,
    /// Largest polynomial degree integrated exactly.
    pub exactness: usize,
}

impl EdgeQuadrature {
    /// 3-point Gauss-Legendre rule, exact to degree 5.
    pub fn gauss3() -> Self {
        let offset = 0.5 * (0.6_f64).sqrt();
        EdgeQuadrature {
            points: vec![0.5 - offset, 0.5, 0.5 + offset],
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            exactness: 5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact monomial integrals over the reference triangle:
    /// `integral x^a y^b = a! b! / (a + b + 2)!`.
    fn exact_tri_monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn triangle_weights_positive_and_sum_to_reference_area() {
        let rule = TriQuadrature::degree6();
        assert_eq!(rule.points.len(), 12);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 0.5).abs() <= 1e-14, "weight sum {total}");
    }

    #[test]
    fn triangle_points_inside_reference_triangle() {
        let rule = TriQuadrature::degree6();
        for &[x, y] in &rule.points {
            assert!(x > 0.0 && y > 0.0 && x + y < 1.0, "point ({x}, {y})");
        }
    }

    #[test]
    fn triangle_rule_integrates_degree_6_monomials_exactly() {
        let rule = TriQuadrature::degree6();
        for a in 0..=6u32 {
            for b in 0..=(6 - a) {
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&[x, y], &w)| w * x.powi(a as i32) * y.powi(b as i32))
                    .sum();
                let exact = exact_tri_monomial(a, b);
                assert!(
                    (approx - exact).abs() <= 1e-14,
                    "x^{a} y^{b}: rule {approx} vs exact {exact}"
                );
            }
        }
    }

    #[test]
    fn triangle_rule_not_exact_beyond_design_degree() {
        // Degree-7 monomials should show a visible defect; this guards against
        // accidentally testing a weaker property than intended above.
        let rule = TriQuadrature::degree6();
        let approx: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(&[x, y], &w)| w * x.powi(4) * y.powi(3))
            .sum();
        let exact = exact_tri_monomial(4, 3);
        assert!((approx - exact).abs() > 1e-10);
    }

    #[test]
    fn edge_rule_exact_for_quintics() {
        let rule = EdgeQuadrature::gauss3();
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 1.0).abs() <= 1e-15);
        for k in 0..=5u32 {
            let approx: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&t, &w)| w * t.powi(k as i32))
                .sum();
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((approx - exact).abs() <= 1e-15, "t^{k}");
        }
    }
}
