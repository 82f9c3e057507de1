//! Compares the closure-based refinement against a recursive bisection
//! simulator that works on coordinates only.

use proptest::prelude::*;

use goafem::mesh::{Bisections, MarkedSet, Point, Triangulation};

type Tri = [Point; 3];

/// Recursive newest-vertex bisection on a soup of triangles `[a, b, c]` with
/// refinement edge `(b, c)`.
struct Simulator {
    tris: Vec<Option<Tri>>,
}

fn same_edge(e: (Point, Point), f: (Point, Point)) -> bool {
    (e.0 == f.0 && e.1 == f.1) || (e.0 == f.1 && e.1 == f.0)
}

fn has_vertex(t: &Tri, p: Point) -> bool {
    t.iter().any(|&q| q == p)
}

impl Simulator {
    fn new(mesh: &Triangulation) -> Self {
        let v = mesh.vertices();
        Self {
            tris: mesh.triangles().iter().map(|t| Some([v[t[0]], v[t[1]], v[t[2]]])).collect(),
        }
    }

    fn find(&self, t: &Tri) -> Option<usize> {
        self.tris.iter().position(|s| s.as_ref() == Some(t))
    }

    fn neighbour(&self, i: usize) -> Option<usize> {
        let t = self.tris[i].expect("alive");
        (0..self.tris.len()).find(|&j| {
            j != i && self.tris[j].is_some_and(|s| has_vertex(&s, t[1]) && has_vertex(&s, t[2]))
        })
    }

    fn bisect(&mut self, i: usize) {
        let [a, b, c] = self.tris[i].take().expect("alive");
        let m = [(b[0] + c[0]) / 2.0, (b[1] + c[1]) / 2.0];
        self.tris.push(Some([m, a, b]));
        self.tris.push(Some([m, c, a]));
    }

    /// Bisects triangle `i` and whatever is needed to keep the soup conforming.
    fn refine(&mut self, i: usize) {
        let t = self.tris[i].expect("alive");
        loop {
            match self.neighbour(i) {
                None => return self.bisect(i),
                Some(j) => {
                    let s = self.tris[j].expect("alive");
                    if same_edge((s[1], s[2]), (t[1], t[2])) {
                        self.bisect(i);
                        return self.bisect(j);
                    }
                    self.refine(j);
                }
            }
        }
    }

    fn refine_if_alive(&mut self, t: &Tri) {
        if let Some(i) = self.find(t) {
            self.refine(i);
        }
    }

    fn canonical(&self) -> Vec<[u64; 6]> {
        let key = |p: Point| [p[0].to_bits(), p[1].to_bits()];
        let mut out: Vec<[u64; 6]> = self
            .tris
            .iter()
            .flatten()
            .map(|t| {
                let (mut b, mut c) = (key(t[1]), key(t[2]));
                if c < b {
                    std::mem::swap(&mut b, &mut c);
                }
                let a = key(t[0]);
                [a[0], a[1], b[0], b[1], c[0], c[1]]
            })
            .collect();
        out.sort();
        out
    }
}

fn canonical(mesh: &Triangulation) -> Vec<[u64; 6]> {
    Simulator::new(mesh).canonical()
}

fn simulate(mesh: &Triangulation, marked: &[usize], bisections: Bisections) -> Vec<[u64; 6]> {
    let mut sim = Simulator::new(mesh);
    let originals: Vec<Tri> = sim.tris.iter().map(|t| t.unwrap()).collect();
    for &m in marked {
        let t = originals[m];
        sim.refine_if_alive(&t);
        if bisections == Bisections::Three {
            let [a, b, c] = t;
            let mid = [(b[0] + c[0]) / 2.0, (b[1] + c[1]) / 2.0];
            sim.refine_if_alive(&[mid, a, b]);
            sim.refine_if_alive(&[mid, c, a]);
        }
    }
    sim.canonical()
}

fn start(which: bool) -> Triangulation {
    if which {
        Triangulation::l_shape()
    } else {
        Triangulation::unit_square()
    }
}

#[test]
fn uniform_refinement_matches_simulator() {
    for mesh in [Triangulation::unit_square(), Triangulation::l_shape()] {
        let mut current = mesh.clone();
        for _ in 0..4 {
            let all: Vec<usize> = (0..current.n_elements()).collect();
            let expected = simulate(&current, &all, Bisections::One);
            current = current.uniform_refine(1);
            assert_eq!(canonical(&current), expected);
        }
    }
}

#[test]
fn single_corner_mark_on_two_triangles() {
    let square = Triangulation::unit_square();
    for bis in [Bisections::One, Bisections::Three] {
        let fine = square.refine_nvb(&MarkedSet::new(vec![0], 2).unwrap(), bis).unwrap();
        assert_eq!(canonical(&fine), simulate(&square, &[0], bis));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_markings_match_simulator(
        l_shape in any::<bool>(),
        rounds in prop::collection::vec((prop::collection::vec(any::<prop::sample::Index>(), 1..6), any::<bool>()), 1..6),
    ) {
        let mut mesh = start(l_shape);
        for (picks, three) in rounds {
            let n = mesh.n_elements();
            let mut idx: Vec<usize> = picks.iter().map(|p| p.index(n)).collect();
            idx.sort_unstable();
            idx.dedup();
            let bis = if three { Bisections::Three } else { Bisections::One };
            let expected = simulate(&mesh, &idx, bis);
            mesh = mesh.refine_nvb(&MarkedSet::new(idx, n).unwrap(), bis).unwrap();
            prop_assert_eq!(canonical(&mesh), expected);
        }
    }
}
