//! Quadrature rules: Gauss-Legendre on intervals, a collapsed product rule on
//! the reference triangle (exact to total degree 8), and the edge rule used
//! for jump terms.

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence. Deterministic to machine precision.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule on [0, 1]; weights sum to 1.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|&t| 0.5 * t).collect(),
    )
}

/// Quadrature on the reference triangle {l1, l2 >= 0, l1 + l2 <= 1}.
///
/// Points carry barycentric coordinates (l0, l1, l2); weights sum to the
/// reference area 1/2. Built as a collapsed (Duffy) product of 1D
/// Gauss-Legendre rules: with m points per direction the rule integrates all
/// polynomials of total degree <= 2m - 2 exactly.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl TriangleRule {
    pub fn collapsed(m: usize) -> Self {
        let (u, wu) = gauss_legendre_unit(m);
        let (v, wv) = gauss_legendre_unit(m);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let xi = u[i];
                let eta = v[j] * (1.0 - u[i]);
                points.push([1.0 - xi - eta, xi, eta]);
                weights.push(wu[i] * wv[j] * (1.0 - u[i]));
            }
        }
        TriangleRule {
            points,
            weights,
            exactness: 2 * m - 2,
        }
    }

    /// The rule used throughout the crate (degree-8 exactness, 25 points).
    pub fn default_volume() -> Self {
        Self::collapsed(5)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Quadrature on the unit interval for edge integrals; exact to degree
/// 2m - 1. Weights sum to 1 (scale by edge length).
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl EdgeRule {
    pub fn gauss(m: usize) -> Self {
        let (points, weights) = gauss_legendre_unit(m);
        EdgeRule {
            points,
            weights,
            exactness: 2 * m - 1,
        }
    }

    /// Default edge rule (degree-5 exactness).
    pub fn default_edge() -> Self {
        Self::gauss(3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    /// int over reference triangle of l1^a * l2^b = a! b! / (a + b + 2)!
    fn exact_monomial(a: usize, b: usize) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn gauss_legendre_matches_known_nodes() {
        let (x, w) = gauss_legendre(5);
        // closed-form 5-point nodes
        let n1 = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        let n2 = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        assert!((x[2] - 0.0).abs() < 1e-15);
        assert!((x[3] - n1).abs() < 1e-14);
        assert!((x[4] - n2).abs() < 1e-14);
        assert!((w[2] - 128.0 / 225.0).abs() < 1e-14);
        let w1 = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
        assert!((w[3] - w1).abs() < 1e-14);
    }

    #[test]
    fn triangle_rule_weights_sum_to_reference_area() {
        for m in 2..=6 {
            let r = TriangleRule::collapsed(m);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 0.5).abs() < 1e-14, "m={m}: {s}");
        }
    }

    #[test]
    fn triangle_rule_exact_to_degree_8() {
        let r = TriangleRule::default_volume();
        assert!(r.exactness >= 8);
        for a in 0..=8usize {
            for b in 0..=(8 - a) {
                let num: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                    .sum();
                let exact = exact_monomial(a, b);
                assert!(
                    (num - exact).abs() < 1e-14,
                    "monomial l1^{a} l2^{b}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn edge_rule_exact_to_degree_5() {
        let r = EdgeRule::default_edge();
        for k in 0..=5usize {
            let num: f64 = r
                .points
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(k as i32))
                .sum();
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((num - exact).abs() < 1e-14, "x^{k}: {num} vs {exact}");
        }
    }
}
