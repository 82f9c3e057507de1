//! Conforming triangulations of polygonal domains and newest-vertex bisection.
//!
//! Triangles are stored as vertex triples `[a, b, c]` in counterclockwise
//! order. The edge `(b, c)` opposite the first vertex is the refinement edge;
//! `a` is the newest vertex. Bisecting `[a, b, c]` at the midpoint `m` of
//! `(b, c)` yields the children `[m, a, b]` and `[m, c, a]`.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

pub type Point = [f64; 2];

/// Tolerance for signed-area predicates.
pub const AREA_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("element index {index} out of range for mesh with {len} elements")]
    ElementOutOfRange { index: usize, len: usize },
    #[error("element {0} listed twice in marked set")]
    DuplicateMarked(usize),
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {len} vertices")]
    VertexOutOfRange { triangle: usize, vertex: usize, len: usize },
    #[error("triangle {0} has non-positive signed area")]
    Degenerate(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("boundary edge ({0}, {1}) is not an edge of exactly one triangle")]
    BadBoundaryEdge(usize, usize),
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("fine mesh is not a refinement of the coarse mesh: {0}")]
    NotARefinement(String),
    #[error("bisection depth limit exceeded on element {0}")]
    DepthLimit(usize),
}

/// Position of an element in the bisection forest of the initial mesh.
///
/// `path` holds one bit per bisection (bit `k` selects the child at depth `k + 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lineage {
    pub root: u32,
    pub depth: u8,
    pub path: u128,
}

impl Lineage {
    fn root(index: usize) -> Self {
        Self {
            root: index as u32,
            depth: 0,
            path: 0,
        }
    }

    fn child(self, which: u8) -> Option<Self> {
        if self.depth as u32 >= u128::BITS {
            return None;
        }
        Some(Self {
            root: self.root,
            depth: self.depth + 1,
            path: self.path | ((which as u128) << self.depth),
        })
    }

    /// Ancestor at the given depth (`depth <= self.depth`).
    pub fn ancestor(self, depth: u8) -> Self {
        let mask = if depth as u32 >= u128::BITS {
            u128::MAX
        } else {
            (1u128 << depth) - 1
        };
        Self {
            root: self.root,
            depth,
            path: self.path & mask,
        }
    }
}

/// Number of bisections applied to each marked element in one refinement call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Bisections {
    /// Plain newest-vertex bisection of the refinement edge.
    #[default]
    One,
    /// Three bisections, so every edge of the marked element carries a new vertex.
    Three,
}

impl TryFrom<u32> for Bisections {
    type Error = String;
    fn try_from(n: u32) -> Result<Self, Self::Error> {
        match n {
            1 => Ok(Self::One),
            3 => Ok(Self::Three),
            other => Err(format!("bisections per marked element must be 1 or 3, got {other}")),
        }
    }
}

/// Sorted, duplicate-free set of element indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkedSet(Vec<usize>);

impl MarkedSet {
    pub fn new(mut indices: Vec<usize>, n_elements: usize) -> Result<Self, MeshError> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(MeshError::DuplicateMarked(w[0]));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n_elements {
                return Err(MeshError::ElementOutOfRange {
                    index: last,
                    len: n_elements,
                });
            }
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn all(n_elements: usize) -> Self {
        Self((0..n_elements).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn union(&self, other: &MarkedSet) -> MarkedSet {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        MarkedSet(v)
    }
}

/// Elements sharing at least one vertex with a center element.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub center: usize,
    pub members: Vec<usize>,
    pub area: f64,
}

/// Edge connectivity of a triangulation.
///
/// Local edge `k` of a triangle is the edge opposite its local vertex `k`.
#[derive(Clone, Debug)]
pub struct EdgeTopology {
    /// Edges as sorted vertex pairs, in lexicographic order.
    pub edges: Vec<[usize; 2]>,
    pub element_edges: Vec<[usize; 3]>,
    /// Adjacent elements; the second entry is `None` on the boundary.
    pub edge_elements: Vec<(usize, Option<usize>)>,
}

impl EdgeTopology {
    pub fn build(triangles: &[[usize; 3]]) -> Result<Self, MeshError> {
        let mut all: Vec<([usize; 2], usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                all.push(([a.min(b), a.max(b)], t, k));
            }
        }
        all.sort_unstable();
        let mut edges = Vec::new();
        let mut edge_elements = Vec::new();
        let mut element_edges = vec![[usize::MAX; 3]; triangles.len()];
        let mut i = 0;
        while i < all.len() {
            let key = all[i].0;
            let mut j = i;
            while j < all.len() && all[j].0 == key {
                j += 1;
            }
            if j - i > 2 {
                return Err(MeshError::NonManifoldEdge(key[0], key[1]));
            }
            let e = edges.len();
            edges.push(key);
            for &(_, t, k) in &all[i..j] {
                element_edges[t][k] = e;
            }
            let second = if j - i == 2 { Some(all[i + 1].1) } else { None };
            edge_elements.push((all[i].1, second));
            i = j;
        }
        Ok(Self {
            edges,
            element_edges,
            edge_elements,
        })
    }

    pub fn find(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&[a.min(b), a.max(b)]).ok()
    }

    pub fn is_interior(&self, edge: usize) -> bool {
        self.edge_elements[edge].1.is_some()
    }
}

/// A conforming triangulation with newest-vertex refinement-edge labels.
#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: BTreeSet<[usize; 2]>,
    lineage: Vec<Lineage>,
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    [a.min(b), a.max(b)]
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

impl Triangulation {
    /// Builds a mesh that keeps the given vertex order of every triangle, so the
    /// refinement edge is the one opposite the first listed vertex.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: impl IntoIterator<Item = [usize; 2]>,
    ) -> Result<Self, MeshError> {
        let lineage = (0..triangles.len()).map(Lineage::root).collect();
        let mesh = Self {
            vertices,
            triangles,
            boundary: boundary_edges
                .into_iter()
                .map(|[a, b]| sorted_pair(a, b))
                .collect(),
            lineage,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Builds an initial mesh whose refinement edges are the longest edges
    /// (ties broken by the lowest sorted vertex pair). Clockwise triangles are
    /// reoriented.
    pub fn with_longest_edge_labels(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: impl IntoIterator<Item = [usize; 2]>,
    ) -> Result<Self, MeshError> {
        let mut labelled = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.into_iter().enumerate() {
            for &v in &tri {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange {
                        triangle: t,
                        vertex: v,
                        len: vertices.len(),
                    });
                }
            }
            let mut tri = tri;
            if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) < 0.0 {
                tri.swap(1, 2);
            }
            let best = (0..3)
                .min_by(|&i, &j| {
                    let key = |k: usize| {
                        let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                        (-dist2(vertices[a], vertices[b]), sorted_pair(a, b))
                    };
                    let (li, pi) = key(i);
                    let (lj, pj) = key(j);
                    li.total_cmp(&lj).then(pi.cmp(&pj))
                })
                .unwrap_or(0);
            labelled.push([tri[best], tri[(best + 1) % 3], tri[(best + 2) % 3]]);
        }
        Self::new(vertices, labelled, boundary_edges)
    }

    /// Unit square `(0,1)^2` split along the diagonal into two triangles.
    pub fn unit_square() -> Self {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let triangles = vec![[0, 1, 2], [0, 2, 3]];
        let boundary = [[0, 1], [1, 2], [2, 3], [3, 0]];
        Self::with_longest_edge_labels(vertices, triangles, boundary).expect("valid square mesh")
    }

    /// L-shaped domain `(-1,1)^2 \ [-1,0]^2` with six triangles; all
    /// diagonals pass through the re-entrant corner.
    pub fn l_shape() -> Self {
        let vertices = vec![
            [0.0, -1.0],
            [1.0, -1.0],
            [1.0, 0.0],
            [0.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 0.0],
        ];
        let triangles = vec![
            [3, 0, 1],
            [3, 1, 2],
            [3, 2, 4],
            [3, 4, 5],
            [3, 5, 6],
            [3, 6, 7],
        ];
        let boundary = [[0, 1], [1, 2], [2, 4], [4, 5], [5, 6], [6, 7], [7, 3], [3, 0]];
        Self::with_longest_edge_labels(vertices, triangles, boundary).expect("valid L-shape mesh")
    }

    fn validate(&self) -> Result<(), MeshError> {
        let nv = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange {
                        triangle: t,
                        vertex: v,
                        len: nv,
                    });
                }
            }
            if self.area(t) <= AREA_TOL {
                return Err(MeshError::Degenerate(t));
            }
        }
        let topo = EdgeTopology::build(&self.triangles)?;
        for e in &self.boundary {
            match topo.find(e[0], e[1]) {
                Some(i) if !topo.is_interior(i) => {}
                _ => return Err(MeshError::BadBoundaryEdge(e[0], e[1])),
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &BTreeSet<[usize; 2]> {
        &self.boundary
    }

    pub fn is_boundary_edge(&self, a: usize, b: usize) -> bool {
        self.boundary.contains(&sorted_pair(a, b))
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn lineage(&self, element: usize) -> Lineage {
        self.lineage[element]
    }

    /// Number of bisections separating the element from its initial ancestor.
    pub fn generation(&self, element: usize) -> u32 {
        self.lineage[element].depth as u32
    }

    pub fn corners(&self, element: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[element];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, element: usize) -> f64 {
        let [a, b, c] = self.corners(element);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, element: usize) -> Point {
        let [a, b, c] = self.corners(element);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn diameter(&self, element: usize) -> f64 {
        let [a, b, c] = self.corners(element);
        dist2(a, b).max(dist2(b, c)).max(dist2(c, a)).sqrt()
    }

    /// Barycentric coordinates of `x` with respect to `element`.
    pub fn barycentric(&self, element: usize, x: Point) -> [f64; 3] {
        let [a, b, c] = self.corners(element);
        let area = signed_area(a, b, c);
        [
            signed_area(x, b, c) / area,
            signed_area(a, x, c) / area,
            signed_area(a, b, x) / area,
        ]
    }

    /// First element whose closure contains `x` (linear scan).
    pub fn locate(&self, x: Point) -> Option<usize> {
        (0..self.n_elements()).find(|&t| self.barycentric(t, x).iter().all(|&l| l >= -1e-12))
    }

    pub fn topology(&self) -> EdgeTopology {
        EdgeTopology::build(&self.triangles).expect("triangulation invariant: manifold edges")
    }

    pub fn vertex_elements(&self) -> Vec<Vec<usize>> {
        let mut map = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                map[v].push(t);
            }
        }
        map
    }

    /// Checks conformity: positive areas, manifold edges, no hanging nodes,
    /// and boundary edges equal to the edges with a single neighbour.
    pub fn check_conforming(&self) -> Result<(), MeshError> {
        self.validate()?;
        let topo = self.topology();
        for (e, &[a, b]) in topo.edges.iter().enumerate() {
            if topo.is_interior(e) {
                continue;
            }
            if !self.boundary.contains(&[a, b]) {
                return Err(MeshError::NonConforming(format!(
                    "edge ({a}, {b}) has one neighbour but is not on the boundary"
                )));
            }
        }
        // A hanging node lies strictly inside some edge.
        let (pa, pb) = (self.vertices.len(), topo.edges.len());
        if pa > 0 && pb > 0 {
            let on_edges = vertices_inside_edges(&self.vertices, &topo.edges);
            if let Some((v, [a, b])) = on_edges {
                return Err(MeshError::NonConforming(format!(
                    "vertex {v} hangs on edge ({a}, {b})"
                )));
            }
        }
        Ok(())
    }

    pub fn element_patch(&self, element: usize, vertex_elements: &[Vec<usize>]) -> Patch {
        let mut members: Vec<usize> = self.triangles[element]
            .iter()
            .flat_map(|&v| vertex_elements[v].iter().copied())
            .collect();
        members.sort_unstable();
        members.dedup();
        let area = members.iter().map(|&t| self.area(t)).sum();
        Patch {
            center: element,
            members,
            area,
        }
    }

    pub fn patch_of(&self, element: usize) -> Result<Patch, MeshError> {
        self.check_index(element)?;
        Ok(self.element_patch(element, &self.vertex_elements()))
    }

    fn check_index(&self, element: usize) -> Result<(), MeshError> {
        if element >= self.n_elements() {
            return Err(MeshError::ElementOutOfRange {
                index: element,
                len: self.n_elements(),
            });
        }
        Ok(())
    }

    /// max over elements of `diam(T) / |T|^{1/2}`.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.n_elements())
            .map(|t| self.diameter(t) / self.area(t).sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest patch cardinality and largest area ratio between two members of one patch.
    pub fn patch_bounds(&self) -> (usize, f64) {
        let ve = self.vertex_elements();
        let mut card = 0;
        let mut ratio: f64 = 1.0;
        for t in 0..self.n_elements() {
            let p = self.element_patch(t, &ve);
            card = card.max(p.members.len());
            let (lo, hi) = p.members.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &m| {
                let a = self.area(m);
                (lo.min(a), hi.max(a))
            });
            ratio = ratio.max(hi / lo);
        }
        (card, ratio)
    }

    /// Newest-vertex bisection of all marked elements followed by the conforming closure.
    pub fn refine_nvb(&self, marked: &MarkedSet, bisections: Bisections) -> Result<Triangulation, MeshError> {
        for &t in marked.indices() {
            self.check_index(t)?;
        }
        let topo = self.topology();
        let mut edge_marked = vec![false; topo.edges.len()];
        let mut queue = Vec::new();
        for &t in marked.indices() {
            let local: &[usize] = match bisections {
                Bisections::One => &[0],
                Bisections::Three => &[0, 1, 2],
            };
            for &k in local {
                let e = topo.element_edges[t][k];
                if !edge_marked[e] {
                    edge_marked[e] = true;
                    push_neighbours(&topo, e, &mut queue);
                }
            }
        }
        // Closure: an element with any marked edge must have its refinement edge marked.
        while let Some(t) = queue.pop() {
            let ref_edge = topo.element_edges[t][0];
            if edge_marked[ref_edge] {
                continue;
            }
            if topo.element_edges[t].iter().any(|&e| edge_marked[e]) {
                edge_marked[ref_edge] = true;
                push_neighbours(&topo, ref_edge, &mut queue);
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoints: HashMap<[usize; 2], usize> = HashMap::new();
        for (e, &[a, b]) in topo.edges.iter().enumerate() {
            if edge_marked[e] {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                midpoints.insert([a, b], vertices.len());
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
        }

        let mut triangles = Vec::with_capacity(self.n_elements() + 2 * midpoints.len());
        let mut lineage = Vec::with_capacity(triangles.capacity());
        for (t, &tri) in self.triangles.iter().enumerate() {
            bisect_into(tri, self.lineage[t], &midpoints, &mut triangles, &mut lineage)
                .ok_or(MeshError::DepthLimit(t))?;
        }

        let mut boundary = BTreeSet::new();
        for &[a, b] in &self.boundary {
            match midpoints.get(&[a, b]) {
                Some(&m) => {
                    boundary.insert(sorted_pair(a, m));
                    boundary.insert(sorted_pair(m, b));
                }
                None => {
                    boundary.insert([a, b]);
                }
            }
        }

        Ok(Triangulation {
            vertices,
            triangles,
            boundary,
            lineage,
        })
    }

    /// Refines every element `levels` times.
    pub fn uniform_refine(&self, levels: usize) -> Triangulation {
        let mut mesh = self.clone();
        for _ in 0..levels {
            mesh = mesh
                .refine_nvb(&MarkedSet::all(mesh.n_elements()), Bisections::One)
                .expect("all-marked refinement of a valid mesh");
        }
        mesh
    }

    /// Relates the elements of `self` (fine) to those of `coarse`.
    pub fn is_refinement_of(&self, coarse: &Triangulation) -> Result<RefinementMap, MeshError> {
        let index: HashMap<Lineage, usize> = coarse
            .lineage
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i))
            .collect();
        let mut parent = Vec::with_capacity(self.n_elements());
        let mut inherited = Vec::with_capacity(self.n_elements());
        let mut child_area = vec![0.0; coarse.n_elements()];
        let mut children = vec![Vec::new(); coarse.n_elements()];
        for t in 0..self.n_elements() {
            let lin = self.lineage[t];
            let hit = (0..=lin.depth)
                .rev()
                .find_map(|d| index.get(&lin.ancestor(d)).map(|&c| (c, d == lin.depth)));
            let Some((c, same)) = hit else {
                return Err(MeshError::NotARefinement(format!(
                    "element {t} has no ancestor in the coarse mesh"
                )));
            };
            let lambda = coarse.barycentric(c, self.centroid(t));
            if lambda.iter().any(|&l| l < -1e-12) {
                return Err(MeshError::NotARefinement(format!(
                    "element {t} lies outside its recorded ancestor {c}"
                )));
            }
            if same {
                let fc = self.corners(t);
                let cc = coarse.corners(c);
                if fc != cc {
                    return Err(MeshError::NotARefinement(format!(
                        "element {t} shares lineage with coarse element {c} but not its vertices"
                    )));
                }
            }
            parent.push(c);
            inherited.push(same);
            child_area[c] += self.area(t);
            children[c].push(t);
        }
        for c in 0..coarse.n_elements() {
            let a = coarse.area(c);
            if children[c].is_empty() || (child_area[c] - a).abs() > 1e-12 * a {
                return Err(MeshError::NotARefinement(format!(
                    "descendants of coarse element {c} cover area {} instead of {a}",
                    child_area[c]
                )));
            }
        }
        let refined = children
            .iter()
            .map(|ch| !(ch.len() == 1 && inherited[ch[0]]))
            .collect();
        Ok(RefinementMap {
            parent,
            inherited,
            refined,
            children,
        })
    }

    /// Parses the line-oriented mesh format (`v x y`, `t i j k`, `b i j`, `#` comments).
    pub fn parse(text: &str) -> Result<Triangulation, MeshError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut boundary = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut parts = content.split_whitespace();
            let tag = parts.next().unwrap_or_default();
            let fields: Vec<&str> = parts.collect();
            let err = |message: String| MeshError::Parse { line, message };
            let expect = |count: usize| {
                if fields.len() == count {
                    Ok(())
                } else {
                    Err(err(format!("'{tag}' expects {count} fields, found {}", fields.len())))
                }
            };
            let idx = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad index '{s}': {e}")));
            match tag {
                "v" => {
                    expect(2)?;
                    let c = |s: &str| s.parse::<f64>().map_err(|e| err(format!("bad coordinate '{s}': {e}")));
                    vertices.push([c(fields[0])?, c(fields[1])?]);
                }
                "t" => {
                    expect(3)?;
                    triangles.push([idx(fields[0])?, idx(fields[1])?, idx(fields[2])?]);
                }
                "b" => {
                    expect(2)?;
                    boundary.push([idx(fields[0])?, idx(fields[1])?]);
                }
                other => return Err(err(format!("unknown record '{other}'"))),
            }
        }
        Triangulation::new(vertices, triangles, boundary)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        for b in &self.boundary {
            let _ = writeln!(out, "b {} {}", b[0], b[1]);
        }
        out
    }
}

/// Element correspondence between a fine mesh and a coarse ancestor mesh.
#[derive(Clone, Debug)]
pub struct RefinementMap {
    /// Coarse ancestor of every fine element.
    pub parent: Vec<usize>,
    /// Fine elements that are also coarse elements.
    pub inherited: Vec<bool>,
    /// Coarse elements that were bisected at least once.
    pub refined: Vec<bool>,
    /// Fine descendants of every coarse element.
    pub children: Vec<Vec<usize>>,
}

impl RefinementMap {
    pub fn inherited_elements(&self) -> Vec<usize> {
        (0..self.inherited.len()).filter(|&t| self.inherited[t]).collect()
    }

    pub fn new_elements(&self) -> Vec<usize> {
        (0..self.inherited.len()).filter(|&t| !self.inherited[t]).collect()
    }

    pub fn refined_elements(&self) -> Vec<usize> {
        (0..self.refined.len()).filter(|&c| self.refined[c]).collect()
    }

    pub fn kept_elements(&self) -> Vec<usize> {
        (0..self.refined.len()).filter(|&c| !self.refined[c]).collect()
    }
}

fn push_neighbours(topo: &EdgeTopology, edge: usize, queue: &mut Vec<usize>) {
    let (a, b) = topo.edge_elements[edge];
    queue.push(a);
    if let Some(b) = b {
        queue.push(b);
    }
}

fn bisect_into(
    tri: [usize; 3],
    lin: Lineage,
    midpoints: &HashMap<[usize; 2], usize>,
    triangles: &mut Vec<[usize; 3]>,
    lineage: &mut Vec<Lineage>,
) -> Option<()> {
    let [a, b, c] = tri;
    match midpoints.get(&sorted_pair(b, c)) {
        None => {
            triangles.push(tri);
            lineage.push(lin);
        }
        Some(&m) => {
            bisect_into([m, a, b], lin.child(0)?, midpoints, triangles, lineage)?;
            bisect_into([m, c, a], lin.child(1)?, midpoints, triangles, lineage)?;
        }
    }
    Some(())
}

/// Finds a vertex lying strictly inside some edge, using a uniform bucket grid.
fn vertices_inside_edges(vertices: &[Point], edges: &[[usize; 2]]) -> Option<(usize, [usize; 2])> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in vertices {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let n = (vertices.len() as f64).sqrt().ceil().max(1.0) as usize;
    let span = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
    let cell = |p: Point, k: usize| (((p[k] - lo[k]) / span[k] * n as f64) as usize).min(n - 1);
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); n * n];
    for (i, &v) in vertices.iter().enumerate() {
        grid[cell(v, 0) * n + cell(v, 1)].push(i);
    }
    for &[a, b] in edges {
        let (pa, pb) = (vertices[a], vertices[b]);
        let len2 = dist2(pa, pb);
        let (x0, x1) = (cell(pa, 0).min(cell(pb, 0)), cell(pa, 0).max(cell(pb, 0)));
        let (y0, y1) = (cell(pa, 1).min(cell(pb, 1)), cell(pa, 1).max(cell(pb, 1)));
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                for &v in &grid[gx * n + gy] {
                    if v == a || v == b {
                        continue;
                    }
                    let p = vertices[v];
                    let cross = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
                    if cross.abs() > AREA_TOL * len2.sqrt().max(1.0) {
                        continue;
                    }
                    let t = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                    if t > 1e-12 && t < 1.0 - 1e-12 {
                        return Some((v, [a, b]));
                    }
                }
            }
        }
    }
    None
}
