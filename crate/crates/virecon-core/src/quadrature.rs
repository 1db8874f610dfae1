//! Fixed quadrature rules: a 6-point degree-4 triangle rule (exact for the
//! P2 mass matrix and all estimator element integrals) and 3-point Gauss on
//! edges (degree 5, exact for squared P2 flux jumps).

/// Barycentric points and weights of the degree-4 triangle rule.
/// Weights sum to 1; integrals are `|K| * sum_q w_q g(x_q)`.
pub const TRI_POINTS: [[f64; 3]; 6] = [
    [A1, B1, B1],
    [B1, A1, B1],
    [B1, B1, A1],
    [A2, B2, B2],
    [B2, A2, B2],
    [B2, B2, A2],
];

pub const TRI_WEIGHTS: [f64; 6] = [W1, W1, W1, W2, W2, W2];

const A1: f64 = 0.108_103_018_168_070_227_4;
const B1: f64 = 0.445_948_490_915_964_886_3;
const W1: f64 = 0.223_381_589_678_011_465_7;
const A2: f64 = 0.816_847_572_980_458_513_1;
const B2: f64 = 0.091_576_213_509_770_743_5;
const W2: f64 = 0.109_951_743_655_321_867_6;

/// 3-point Gauss-Legendre rule on `[-1, 1]`; weights sum to 2.
/// Edge integrals are `(h_e / 2) * sum_q w_q g(x_q)`.
pub const EDGE_POINTS: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];

pub const EDGE_WEIGHTS: [f64; 3] = [
    0.555_555_555_555_555_6,
    0.888_888_888_888_888_9,
    0.555_555_555_555_555_6,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_weights_sum_to_one() {
        let s: f64 = TRI_WEIGHTS.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        for p in &TRI_POINTS {
            assert!((p[0] + p[1] + p[2] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        // On the reference triangle, integral of l0^a l1^b is
        // a! b! / (a + b + 2)! * 2 * area; check monomials up to degree 4.
        let quad = |a: u32, b: u32| -> f64 {
            TRI_POINTS
                .iter()
                .zip(TRI_WEIGHTS.iter())
                .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                .sum()
        };
        let fact = |n: u32| -> f64 { (1..=n).map(|k| k as f64).product::<f64>().max(1.0) };
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let exact = 2.0 * fact(a) * fact(b) / fact(a + b + 2);
                assert!(
                    (quad(a, b) - exact).abs() < 5e-15,
                    "monomial l0^{a} l1^{b}"
                );
            }
        }
    }

    #[test]
    fn edge_rule_exact_to_degree_five() {
        for deg in 0..=5u32 {
            let got: f64 = EDGE_POINTS
                .iter()
                .zip(EDGE_WEIGHTS.iter())
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            let exact = if deg % 2 == 0 {
                2.0 / (deg as f64 + 1.0)
            } else {
                0.0
            };
            assert!((got - exact).abs() < 1e-14);
        }
    }
}
