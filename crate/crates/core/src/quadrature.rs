//! Gauss–Legendre rules on `[0,1]` and collapsed (Duffy) product rules on the
//! reference triangle `{x, y >= 0, x + y <= 1}`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Highest polynomial exactness served for triangles.
pub const MAX_TRIANGLE_DEGREE: usize = 20;
/// Highest polynomial exactness served for edges.
pub const MAX_EDGE_DEGREE: usize = 41;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRule {
    pub degree: usize,
    /// Abscissae in `[0,1]`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `m`-point Gauss–Legendre nodes and weights on `[-1,1]`, by Newton
/// iteration from Chebyshev guesses.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for i in 0..m {
        let mut t = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5));
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, t);
            let step = p / d;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(m, t);
        x.push(t);
        w.push(2.0 / ((1.0 - t * t) * dp * dp));
    }
    // ascending order
    x.reverse();
    w.reverse();
    (x, w)
}

/// `(P_m(t), P_m'(t))` by the three-term recurrence.
fn legendre_with_derivative(m: usize, t: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, t);
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule on `[0,1]` integrating polynomials of degree
/// `<= degree` exactly. Weights sum to 1.
pub fn edge_quadrature(degree: usize) -> Result<EdgeRule> {
    if degree > MAX_EDGE_DEGREE {
        return Err(Error::UnsupportedDegree { requested: degree, max: MAX_EDGE_DEGREE });
    }
    let m = degree / 2 + 1;
    let (x, w) = gauss_legendre(m);
    Ok(EdgeRule {
        degree,
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|wi| 0.5 * wi).collect(),
    })
}

/// Collapsed product rule on the reference triangle integrating polynomials
/// of total degree `<= degree` exactly. Weights sum to 1/2.
///
/// Uses `(s, t) ↦ (s, t(1 - s))` with Jacobian `1 - s`: the `s` factor needs
/// exactness `degree + 1`, the `t` factor `degree`.
pub fn triangle_quadrature(degree: usize) -> Result<TriangleRule> {
    if degree > MAX_TRIANGLE_DEGREE {
        return Err(Error::UnsupportedDegree { requested: degree, max: MAX_TRIANGLE_DEGREE });
    }
    let ms = (degree + 1) / 2 + 1;
    let mt = degree / 2 + 1;
    let (xs, ws) = gauss_legendre(ms);
    let (xt, wt) = gauss_legendre(mt);
    let mut points = Vec::with_capacity(ms * mt);
    let mut weights = Vec::with_capacity(ms * mt);
    for (s, wsi) in xs.iter().zip(&ws) {
        let s = 0.5 * (s + 1.0);
        for (t, wti) in xt.iter().zip(&wt) {
            let t = 0.5 * (t + 1.0);
            points.push([s, t * (1.0 - s)]);
            weights.push(0.25 * wsi * wti * (1.0 - s));
        }
    }
    Ok(TriangleRule { degree, points, weights })
}

/// `∫_T̂ x^a y^b = a! b! / (a + b + 2)!`.
pub fn reference_monomial_integral(a: u32, b: u32) -> f64 {
    let fact = |n: u32| (1..=n).fold(1.0f64, |acc, i| acc * i as f64);
    fact(a) * fact(b) / fact(a + b + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &TriangleRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.points.iter().zip(&rule.weights).map(|(p, w)| w * f(p[0], p[1])).sum()
    }

    #[test]
    fn weights_sum() {
        for d in 0..=MAX_TRIANGLE_DEGREE {
            let r = triangle_quadrature(d).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            assert!(r.points.iter().all(|p| p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0));
        }
        for d in 0..=MAX_EDGE_DEGREE {
            let r = edge_quadrature(d).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn triangle_exactness_against_factorial_formula() {
        for d in 0..=MAX_TRIANGLE_DEGREE {
            let r = triangle_quadrature(d).unwrap();
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let exact = reference_monomial_integral(a, b);
                    let got = integrate(&r, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert!((got - exact).abs() <= 1e-13 * exact.max(1e-3), "d={d} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn named_integrals() {
        let r2 = triangle_quadrature(2).unwrap();
        assert!((integrate(&r2, |x, y| x * y) - 1.0 / 24.0).abs() < 1e-14);
        let r5 = triangle_quadrature(5).unwrap();
        assert!((integrate(&r5, |x, y| x.powi(3) * y.powi(2)) - 1.0 / 420.0).abs() < 1e-14);
    }

    #[test]
    fn factorial_formula_agrees_with_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let samples = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let (mut x, mut y): (f64, f64) = (rng.random(), rng.random());
            if x + y > 1.0 {
                x = 1.0 - x;
                y = 1.0 - y;
            }
            acc += x.powi(3) * y.powi(2);
        }
        let mc = 0.5 * acc / samples as f64;
        assert!((mc - reference_monomial_integral(3, 2)).abs() < 2e-5);
    }

    #[test]
    fn edge_exactness() {
        for d in 0..=MAX_EDGE_DEGREE {
            let r = edge_quadrature(d).unwrap();
            for p in 0..=d as i32 {
                let got: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(p)).sum();
                assert!((got - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "d={d} p={p}");
            }
        }
    }

    #[test]
    fn unsupported() {
        assert_eq!(
            triangle_quadrature(21),
            Err(Error::UnsupportedDegree { requested: 21, max: MAX_TRIANGLE_DEGREE })
        );
        assert!(edge_quadrature(100).is_err());
    }
}
