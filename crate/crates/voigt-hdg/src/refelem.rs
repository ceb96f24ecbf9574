//! Reference elements, Lagrange shape functions and quadrature rules.
//!
//! Reference domains: segment [-1, 1], triangle with vertices (0,0), (1,0),
//! (0,1), quadrilateral [-1, 1]^2. Nodes are equispaced and ordered corners
//! first, then edge nodes per edge in edge order, then interior nodes.

use crate::error::{HdgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementType {
    Segment,
    Triangle,
    Quadrilateral,
}

impl ElementType {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "segment" | "line" => Ok(Self::Segment),
            "triangle" | "tri" | "simplex" => Ok(Self::Triangle),
            "quadrilateral" | "quad" | "parallelepiped" => Ok(Self::Quadrilateral),
            other => Err(HdgError::InvalidInput(format!("unknown element type '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Segment => "segment",
            Self::Triangle => "triangle",
            Self::Quadrilateral => "quadrilateral",
        }
    }

    pub fn num_vertices(self) -> usize {
        match self {
            Self::Segment => 2,
            Self::Triangle => 3,
            Self::Quadrilateral => 4,
        }
    }

    pub fn num_faces(self) -> usize {
        match self {
            Self::Segment => 2,
            Self::Triangle => 3,
            Self::Quadrilateral => 4,
        }
    }

    /// Number of nodes of the degree-`k` Lagrange element.
    pub fn num_nodes(self, k: usize) -> usize {
        match self {
            Self::Segment => k + 1,
            Self::Triangle => (k + 1) * (k + 2) / 2,
            Self::Quadrilateral => (k + 1) * (k + 1),
        }
    }

    fn vertices(self) -> Vec<[f64; 2]> {
        match self {
            Self::Segment => vec![[-1.0, 0.0], [1.0, 0.0]],
            Self::Triangle => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            Self::Quadrilateral => vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
        }
    }

    /// Vertex pairs of the local edges, oriented counterclockwise.
    pub fn edge_vertices(self, edge: usize) -> (usize, usize) {
        let nv = self.num_vertices();
        (edge, (edge + 1) % nv)
    }
}

/// Lagrange reference element of a given type and degree.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub elem_type: ElementType,
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    /// Integer lattice coordinates of the nodes.
    lattice: Vec<[usize; 2]>,
}

impl ReferenceElement {
    pub fn new(elem_type: ElementType, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(HdgError::InvalidInput("degree must be at least 1".into()));
        }
        let k = degree;
        let mut lattice: Vec<[usize; 2]> = Vec::new();
        match elem_type {
            ElementType::Segment => {
                lattice.push([0, 0]);
                lattice.push([k, 0]);
                for i in 1..k {
                    lattice.push([i, 0]);
                }
            }
            ElementType::Triangle => {
                lattice.extend_from_slice(&[[0, 0], [k, 0], [0, k]]);
                for i in 1..k {
                    lattice.push([i, 0]);
                }
                for i in 1..k {
                    lattice.push([k - i, i]);
                }
                for i in 1..k {
                    lattice.push([0, k - i]);
                }
                for j in 1..k {
                    for i in 1..k {
                        if i + j < k {
                            lattice.push([i, j]);
                        }
                    }
                }
            }
            ElementType::Quadrilateral => {
                lattice.extend_from_slice(&[[0, 0], [k, 0], [k, k], [0, k]]);
                for i in 1..k {
                    lattice.push([i, 0]);
                }
                for i in 1..k {
                    lattice.push([k, i]);
                }
                for i in 1..k {
                    lattice.push([k - i, k]);
                }
                for i in 1..k {
                    lattice.push([0, k - i]);
                }
                for j in 1..k {
                    for i in 1..k {
                        lattice.push([i, j]);
                    }
                }
            }
        }
        let kf = k as f64;
        let nodes = lattice
            .iter()
            .map(|&[i, j]| match elem_type {
                ElementType::Triangle => [i as f64 / kf, j as f64 / kf],
                ElementType::Segment => [-1.0 + 2.0 * i as f64 / kf, 0.0],
                ElementType::Quadrilateral => {
                    [-1.0 + 2.0 * i as f64 / kf, -1.0 + 2.0 * j as f64 / kf]
                }
            })
            .collect();
        Ok(Self {
            elem_type,
            degree,
            nodes,
            lattice,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_face_nodes(&self) -> usize {
        self.degree + 1
    }

    pub fn lattice_index(&self, node: usize) -> [usize; 2] {
        self.lattice[node]
    }

    /// Shape function values and reference gradients at `xi`.
    pub fn shape(&self, xi: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let k = self.degree;
        let n = self.num_nodes();
        let mut val = Vec::with_capacity(n);
        let mut grad = Vec::with_capacity(n);
        match self.elem_type {
            ElementType::Segment => {
                let t = 0.5 * (xi[0] + 1.0);
                for &[i, _] in &self.lattice {
                    let (v, d) = lagrange_1d(k, i, t);
                    val.push(v);
                    grad.push([0.5 * d, 0.0]);
                }
            }
            ElementType::Quadrilateral => {
                let tx = 0.5 * (xi[0] + 1.0);
                let ty = 0.5 * (xi[1] + 1.0);
                for &[i, j] in &self.lattice {
                    let (vx, dx) = lagrange_1d(k, i, tx);
                    let (vy, dy) = lagrange_1d(k, j, ty);
                    val.push(vx * vy);
                    grad.push([0.5 * dx * vy, 0.5 * vx * dy]);
                }
            }
            ElementType::Triangle => {
                let l1 = xi[0];
                let l2 = xi[1];
                let l0 = 1.0 - l1 - l2;
                for &[i, j] in &self.lattice {
                    let m = k - i - j;
                    let (r0, d0) = silvester(k, m, l0);
                    let (r1, d1) = silvester(k, i, l1);
                    let (r2, d2) = silvester(k, j, l2);
                    val.push(r0 * r1 * r2);
                    // d l0/d xi = (-1, -1), d l1 = (1, 0), d l2 = (0, 1).
                    grad.push([
                        -d0 * r1 * r2 + r0 * d1 * r2,
                        -d0 * r1 * r2 + r0 * r1 * d2,
                    ]);
                }
            }
        }
        (val, grad)
    }

    /// Reference coordinates of a point on local edge `edge` with parameter
    /// `s` in [-1, 1] running from the edge's first vertex to its second.
    pub fn edge_point(&self, edge: usize, s: f64) -> [f64; 2] {
        let verts = self.elem_type.vertices();
        let (a, b) = self.elem_type.edge_vertices(edge);
        let t = 0.5 * (s + 1.0);
        [
            verts[a][0] + t * (verts[b][0] - verts[a][0]),
            verts[a][1] + t * (verts[b][1] - verts[a][1]),
        ]
    }

    /// Local node indices on edge `edge`: first vertex, second vertex, then
    /// edge-interior nodes from the first vertex towards the second.
    pub fn edge_nodes(&self, edge: usize) -> Vec<usize> {
        let nv = self.elem_type.num_vertices();
        let (a, b) = self.elem_type.edge_vertices(edge);
        let mut out = vec![a, b];
        let per = self.degree - 1;
        out.extend((0..per).map(|i| nv + edge * per + i));
        out
    }

    /// Split the element into linear sub-cells through its nodes, for output.
    pub fn linear_subcells(&self) -> Vec<Vec<usize>> {
        let k = self.degree;
        let find = |i: usize, j: usize| -> usize {
            self.lattice
                .iter()
                .position(|&l| l == [i, j])
                .expect("lattice node")
        };
        let mut cells = Vec::new();
        match self.elem_type {
            ElementType::Segment => {
                for i in 0..k {
                    cells.push(vec![find(i, 0), find(i + 1, 0)]);
                }
            }
            ElementType::Triangle => {
                for j in 0..k {
                    for i in 0..(k - j) {
                        cells.push(vec![find(i, j), find(i + 1, j), find(i, j + 1)]);
                        if i + j + 1 < k {
                            cells.push(vec![find(i + 1, j), find(i + 1, j + 1), find(i, j + 1)]);
                        }
                    }
                }
            }
            ElementType::Quadrilateral => {
                for j in 0..k {
                    for i in 0..k {
                        cells.push(vec![find(i, j), find(i + 1, j), find(i + 1, j + 1), find(i, j + 1)]);
                    }
                }
            }
        }
        cells
    }

    /// Evenly spread sample points inside the element, `m` per direction.
    pub fn sample_points(&self, m: usize) -> Vec<[f64; 2]> {
        let m = m.max(2);
        let h = 1.0 / (m - 1) as f64;
        let mut pts = Vec::new();
        match self.elem_type {
            ElementType::Segment => {
                for i in 0..m {
                    pts.push([-1.0 + 2.0 * h * i as f64, 0.0]);
                }
            }
            ElementType::Triangle => {
                for j in 0..m {
                    for i in 0..(m - j) {
                        pts.push([h * i as f64, h * j as f64]);
                    }
                }
            }
            ElementType::Quadrilateral => {
                for j in 0..m {
                    for i in 0..m {
                        pts.push([-1.0 + 2.0 * h * i as f64, -1.0 + 2.0 * h * j as f64]);
                    }
                }
            }
        }
        pts
    }
}

/// 1D Lagrange polynomial on k+1 equispaced points of [0, 1], index `i`,
/// value and derivative at `t`.
fn lagrange_1d(k: usize, i: usize, t: f64) -> (f64, f64) {
    let kf = k as f64;
    let ti = i as f64 / kf;
    let mut val = 1.0;
    let mut der = 0.0;
    for m in 0..=k {
        if m == i {
            continue;
        }
        let tm = m as f64 / kf;
        let denom = ti - tm;
        let factor = (t - tm) / denom;
        der = der * factor + val / denom;
        val *= factor;
    }
    (val, der)
}

/// Silvester factor R_m(l) = prod_{s<m} (k l - s) / (s + 1), value and
/// derivative with respect to l.
fn silvester(k: usize, m: usize, l: f64) -> (f64, f64) {
    let kf = k as f64;
    let mut val = 1.0;
    let mut der = 0.0;
    for s in 0..m {
        let sf = s as f64;
        let factor = (kf * l - sf) / (sf + 1.0);
        der = der * factor + val * kf / (sf + 1.0);
        val *= factor;
    }
    (val, der)
}

/// Quadrature rule on a reference domain.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre points and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

impl Quadrature {
    /// Rule integrating polynomials up to `exactness` on the reference domain.
    pub fn new(elem_type: ElementType, exactness: usize) -> Self {
        match elem_type {
            ElementType::Segment => {
                let n = (exactness + 2) / 2;
                let (x, w) = gauss_legendre(n.max(1));
                Self {
                    points: x.iter().map(|&a| [a, 0.0]).collect(),
                    weights: w,
                }
            }
            ElementType::Quadrilateral => {
                let n = ((exactness + 2) / 2).max(1);
                let (x, w) = gauss_legendre(n);
                let mut points = Vec::with_capacity(n * n);
                let mut weights = Vec::with_capacity(n * n);
                for j in 0..n {
                    for i in 0..n {
                        points.push([x[i], x[j]]);
                        weights.push(w[i] * w[j]);
                    }
                }
                Self { points, weights }
            }
            ElementType::Triangle => {
                // Collapsed tensor rule; the Jacobian (1 - u) adds one degree.
                let n = ((exactness + 3) / 2).max(1);
                let (x, w) = gauss_legendre(n);
                let mut points = Vec::with_capacity(n * n);
                let mut weights = Vec::with_capacity(n * n);
                for i in 0..n {
                    let u = 0.5 * (x[i] + 1.0);
                    for j in 0..n {
                        let v = 0.5 * (x[j] + 1.0);
                        points.push([u, v * (1.0 - u)]);
                        weights.push(0.25 * w[i] * w[j] * (1.0 - u));
                    }
                }
                Self { points, weights }
            }
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
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn node_counts() {
        for k in 1..=5 {
            for t in [ElementType::Segment, ElementType::Triangle, ElementType::Quadrilateral] {
                let r = ReferenceElement::new(t, k).unwrap();
                assert_eq!(r.num_nodes(), t.num_nodes(k));
            }
        }
    }

    #[test]
    fn kronecker_property() {
        for k in 1..=5 {
            for t in [ElementType::Segment, ElementType::Triangle, ElementType::Quadrilateral] {
                let r = ReferenceElement::new(t, k).unwrap();
                for (a, &x) in r.nodes.iter().enumerate() {
                    let (n, _) = r.shape(x);
                    for (b, v) in n.iter().enumerate() {
                        let expect = if a == b { 1.0 } else { 0.0 };
                        assert!((v - expect).abs() < 1e-12, "{t:?} k={k} a={a} b={b} v={v}");
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        for k in 1..=4 {
            for t in [ElementType::Triangle, ElementType::Quadrilateral] {
                let r = ReferenceElement::new(t, k).unwrap();
                let x = if t == ElementType::Triangle { [0.21, 0.33] } else { [0.3, -0.45] };
                let (_, g) = r.shape(x);
                let (np, _) = r.shape([x[0] + h, x[1]]);
                let (nm, _) = r.shape([x[0] - h, x[1]]);
                let (mp, _) = r.shape([x[0], x[1] + h]);
                let (mm, _) = r.shape([x[0], x[1] - h]);
                for i in 0..r.num_nodes() {
                    let fx = (np[i] - nm[i]) / (2.0 * h);
                    let fy = (mp[i] - mm[i]) / (2.0 * h);
                    assert!((fx - g[i][0]).abs() < 1e-6);
                    assert!((fy - g[i][1]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn triangle_monomials_exact() {
        // int_T x^a y^b = a! b! / (a + b + 2)!
        for d in 0..=12 {
            let q = Quadrature::new(ElementType::Triangle, d);
            for a in 0..=d {
                let b = d - a;
                let num: f64 = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                assert!((num - exact).abs() < 1e-14, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn quad_and_segment_monomials_exact() {
        let m = |p: usize| if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
        for d in 0..=12 {
            let q = Quadrature::new(ElementType::Quadrilateral, d);
            for a in 0..=d {
                let b = d - a;
                let num: f64 = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                assert!((num - m(a) * m(b)).abs() < 1e-13);
            }
            let s = Quadrature::new(ElementType::Segment, d);
            let num: f64 = s
                .points
                .iter()
                .zip(&s.weights)
                .map(|(p, w)| w * p[0].powi(d as i32))
                .sum();
            assert!((num - m(d)).abs() < 1e-13);
        }
    }

    #[test]
    fn edge_nodes_lie_on_edges() {
        for k in 1..=4 {
            for t in [ElementType::Triangle, ElementType::Quadrilateral] {
                let r = ReferenceElement::new(t, k).unwrap();
                for e in 0..t.num_faces() {
                    let nodes = r.edge_nodes(e);
                    assert_eq!(nodes.len(), k + 1);
                    let seg = ReferenceElement::new(ElementType::Segment, k).unwrap();
                    for (a, &node) in nodes.iter().enumerate() {
                        let p = r.edge_point(e, seg.nodes[a][0]);
                        let x = r.nodes[node];
                        assert!((p[0] - x[0]).abs() < 1e-14 && (p[1] - x[1]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn subcells_cover_reference_area() {
        for k in 1..=4 {
            let r = ReferenceElement::new(ElementType::Triangle, k).unwrap();
            let area: f64 = r
                .linear_subcells()
                .iter()
                .map(|c| {
                    let (a, b, d) = (r.nodes[c[0]], r.nodes[c[1]], r.nodes[c[2]]);
                    0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
                })
                .sum();
            assert!((area - 0.5).abs() < 1e-14);
        }
    }
}
