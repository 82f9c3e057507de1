//! Gauss rules on the unit interval and collapsed (Duffy) rules on triangles.

/// Quadrature on a triangle in barycentric coordinates.
///
/// Weights sum to one, so `∫_T f ≈ |T| Σ w_q f(x_q)`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Gauss–Legendre rule on `[0, 1]` with weights summing to one.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl LineRule {
    pub fn gauss(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        Self {
            points,
            weights,
            exactness: 2 * n - 1,
        }
    }

    /// Smallest Gauss rule integrating polynomials of the given degree exactly.
    pub fn with_exactness(degree: usize) -> Self {
        Self::gauss(degree / 2 + 1)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl QuadratureRule {
    /// Collapsed Gauss rule exact for polynomials of total degree `exactness`.
    ///
    /// The square `(u, v) ∈ [0,1]²` maps to `x = u, y = v (1 - u)`; the extra
    /// Jacobian factor `(1 - u)` raises the degree in `u` by one.
    pub fn triangle(exactness: usize) -> Self {
        let ru = LineRule::with_exactness(exactness + 1);
        let rv = LineRule::with_exactness(exactness);
        let mut points = Vec::with_capacity(ru.points.len() * rv.points.len());
        let mut weights = Vec::with_capacity(points.capacity());
        for (&u, &wu) in ru.points.iter().zip(&ru.weights) {
            for (&v, &wv) in rv.points.iter().zip(&rv.weights) {
                let x = u;
                let y = v * (1.0 - u);
                points.push([1.0 - x - y, x, y]);
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        Self {
            points,
            weights,
            exactness,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn line_rule_integrates_monomials() {
        for n in 1..12 {
            let r = LineRule::gauss(n);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for k in 0..=r.exactness {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_rule_integrates_monomials() {
        // Normalized moments: 2 ∫_T x^i y^j = 2 i! j! / (i + j + 2)!.
        for e in 0..=20 {
            let r = QuadratureRule::triangle(e);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for i in 0..=e {
                for j in 0..=(e - i) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(l, w)| w * l[1].powi(i as i32) * l[2].powi(j as i32))
                        .sum();
                    let exact = 2.0 * factorial(i) * factorial(j) / factorial(i + j + 2);
                    assert!((q - exact).abs() < 1e-13, "e={e} i={i} j={j}: {q} vs {exact}");
                }
            }
        }
    }
}
