//! Lagrange shape functions of degree 1–3 written in barycentric coordinates.
//!
//! Node `n` with multi-index `(i, j, k)`, `i + j + k = p`, sits at barycentric
//! position `(i, j, k) / p`. Its shape function is
//! `ℓ_i(λ0) ℓ_j(λ1) ℓ_k(λ2)` with `ℓ_m(s) = Π_{l<m} (p s - l) / (l + 1)`.

/// Local node layout: three vertex nodes, then `p - 1` nodes on each local
/// edge (edge `k` is opposite vertex `k`), then interior nodes.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    pub degree: usize,
    pub nodes: Vec<[usize; 3]>,
}

/// Value and barycentric derivatives of one shape function.
#[derive(Clone, Copy, Debug, Default)]
pub struct ShapeEval {
    pub value: f64,
    pub d: [f64; 3],
    pub dd: [[f64; 3]; 3],
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Self {
        assert!((1..=3).contains(&degree), "Lagrange degree must be 1, 2 or 3");
        let p = degree;
        let mut nodes = Vec::new();
        for k in 0..3 {
            let mut m = [0; 3];
            m[k] = p;
            nodes.push(m);
        }
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            for s in 1..p {
                let mut m = [0; 3];
                m[a] = p - s;
                m[b] = s;
                nodes.push(m);
            }
        }
        for i in 1..p {
            for j in 1..p {
                if i + j < p {
                    nodes.push([i, j, p - i - j]);
                }
            }
        }
        Self { degree, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.len() - 3 * self.degree
    }

    pub fn node_position(&self, node: usize) -> [f64; 3] {
        let p = self.degree as f64;
        let m = self.nodes[node];
        [m[0] as f64 / p, m[1] as f64 / p, m[2] as f64 / p]
    }

    pub fn eval(&self, lambda: [f64; 3]) -> Vec<ShapeEval> {
        self.nodes.iter().map(|&m| self.eval_node(m, lambda)).collect()
    }

    fn eval_node(&self, m: [usize; 3], lambda: [f64; 3]) -> ShapeEval {
        let f: [[f64; 3]; 3] = std::array::from_fn(|a| factor(self.degree, m[a], lambda[a]));
        let mut out = ShapeEval {
            value: f[0][0] * f[1][0] * f[2][0],
            ..Default::default()
        };
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            out.d[a] = f[a][1] * f[b][0] * f[c][0];
            out.dd[a][a] = f[a][2] * f[b][0] * f[c][0];
            out.dd[a][b] = f[a][1] * f[b][1] * f[c][0];
            out.dd[b][a] = out.dd[a][b];
        }
        out
    }
}

/// `ℓ_m(s)` with its first and second derivatives.
fn factor(p: usize, m: usize, s: f64) -> [f64; 3] {
    let p = p as f64;
    let (mut v, mut d1, mut d2) = (1.0, 0.0, 0.0);
    for l in 0..m {
        let g = (p * s - l as f64) / (l as f64 + 1.0);
        let dg = p / (l as f64 + 1.0);
        d2 = d2 * g + 2.0 * d1 * dg;
        d1 = d1 * g + v * dg;
        v *= g;
    }
    [v, d1, d2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        assert_eq!(LagrangeBasis::new(1).len(), 3);
        assert_eq!(LagrangeBasis::new(2).len(), 6);
        assert_eq!(LagrangeBasis::new(3).len(), 10);
        assert_eq!(LagrangeBasis::new(3).n_interior(), 1);
    }

    #[test]
    fn kronecker_property_and_partition_of_unity() {
        for p in 1..=3 {
            let b = LagrangeBasis::new(p);
            for i in 0..b.len() {
                let e = b.eval(b.node_position(i));
                for (j, s) in e.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((s.value - want).abs() < 1e-14);
                }
            }
            let e = b.eval([0.2, 0.3, 0.5]);
            assert!((e.iter().map(|s| s.value).sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = LagrangeBasis::new(3);
        let l = [0.21, 0.33, 0.46];
        let h = 1e-6;
        let e = b.eval(l);
        for a in 0..3 {
            let mut lp = l;
            let mut lm = l;
            lp[a] += h;
            lm[a] -= h;
            let (ep, em) = (b.eval(lp), b.eval(lm));
            for n in 0..b.len() {
                let fd = (ep[n].value - em[n].value) / (2.0 * h);
                assert!((fd - e[n].d[a]).abs() < 1e-7);
                for c in 0..3 {
                    let fd2 = (ep[n].d[c] - em[n].d[c]) / (2.0 * h);
                    assert!((fd2 - e[n].dd[a][c]).abs() < 1e-6);
                }
            }
        }
    }
}
