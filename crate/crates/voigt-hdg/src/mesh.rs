//! Unstructured 2D meshes of Lagrange elements with face connectivity.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HdgError, Result};
use crate::refelem::{ElementType, ReferenceElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
    Outflow,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
            Self::Outflow => "outflow",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" | "d" => Ok(Self::Dirichlet),
            "neumann" | "n" => Ok(Self::Neumann),
            "outflow" | "o" => Ok(Self::Outflow),
            other => Err(HdgError::Parse(format!("unknown boundary tag '{other}'"))),
        }
    }
}

/// Diagonal layout of structured triangle meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrianglePattern {
    /// Every cell split from lower-left to upper-right.
    #[default]
    Diagonal,
    /// Split direction alternates in a checkerboard.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Boundary(Option<BoundaryTag>),
}

/// A mesh face (an edge in 2D). Nodes follow the orientation of the owning
/// element: first vertex, second vertex, then interior nodes.
#[derive(Debug, Clone)]
pub struct Face {
    pub nodes: Vec<usize>,
    /// (element, local face index); the first entry is the owner.
    pub elements: Vec<(usize, usize)>,
    pub kind: FaceKind,
}

impl Face {
    pub fn tag(&self) -> Option<BoundaryTag> {
        match self.kind {
            FaceKind::Boundary(t) => t,
            FaceKind::Interior => None,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        self.tag() == Some(BoundaryTag::Dirichlet)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub elem_type: ElementType,
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    /// Global face index of each local face.
    pub elem_faces: Vec<Vec<usize>>,
    /// Whether the local face runs opposite to the face's stored orientation.
    pub elem_face_reversed: Vec<Vec<bool>>,
}

impl Mesh {
    /// Build face connectivity from element node lists.
    pub fn from_elements(
        elem_type: ElementType,
        degree: usize,
        nodes: Vec<[f64; 2]>,
        elements: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if elem_type == ElementType::Segment {
            return Err(HdgError::Mesh("segment meshes are not supported".into()));
        }
        let re = ReferenceElement::new(elem_type, degree)?;
        let nen = re.num_nodes();
        let nfa = elem_type.num_faces();
        let mut faces: Vec<Face> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut elem_faces = Vec::with_capacity(elements.len());
        let mut elem_face_reversed = Vec::with_capacity(elements.len());
        for (e, conn) in elements.iter().enumerate() {
            if conn.len() != nen {
                return Err(HdgError::Mesh(format!(
                    "element {e} has {} nodes, expected {nen}",
                    conn.len()
                )));
            }
            if let Some(&bad) = conn.iter().find(|&&n| n >= nodes.len()) {
                return Err(HdgError::Mesh(format!("element {e} references missing node {bad}")));
            }
            let mut ef = Vec::with_capacity(nfa);
            let mut er = Vec::with_capacity(nfa);
            for l in 0..nfa {
                let local = re.edge_nodes(l);
                let global: Vec<usize> = local.iter().map(|&i| conn[i]).collect();
                let (a, b) = (global[0], global[1]);
                let key = if a < b { (a, b) } else { (b, a) };
                match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.elements.len() >= 2 {
                            return Err(HdgError::Mesh(format!("face {a}-{b} shared by more than two elements")));
                        }
                        let reversed = face.nodes[0] != a;
                        face.elements.push((e, l));
                        face.kind = FaceKind::Interior;
                        ef.push(f);
                        er.push(reversed);
                    }
                    None => {
                        let f = faces.len();
                        lookup.insert(key, f);
                        faces.push(Face {
                            nodes: global,
                            elements: vec![(e, l)],
                            kind: FaceKind::Boundary(None),
                        });
                        ef.push(f);
                        er.push(false);
                    }
                }
            }
            elem_faces.push(ef);
            elem_face_reversed.push(er);
        }
        let mesh = Self {
            elem_type,
            degree,
            nodes,
            elements,
            faces,
            elem_faces,
            elem_face_reversed,
        };
        for e in 0..mesh.elements.len() {
            let c = mesh.element_coords(e);
            let (a, b, d) = (c[0], c[1], c[2]);
            let area2 = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
            if area2 <= 0.0 {
                return Err(HdgError::Mesh(format!("element {e} is inverted or degenerate")));
            }
        }
        Ok(mesh)
    }

    /// Structured mesh of an axis-aligned rectangle with `nx` x `ny` cells.
    /// Triangles split each cell along the diagonal from its lower-left to
    /// its upper-right corner.
    pub fn structured(
        elem_type: ElementType,
        degree: usize,
        nx: usize,
        ny: usize,
        xr: [f64; 2],
        yr: [f64; 2],
    ) -> Result<Self> {
        Self::structured_pattern(elem_type, degree, nx, ny, xr, yr, TrianglePattern::Diagonal)
    }

    /// As [`Mesh::structured`], with a choice of diagonal layout for
    /// triangles. Quadrilateral meshes ignore `pattern`.
    pub fn structured_pattern(
        elem_type: ElementType,
        degree: usize,
        nx: usize,
        ny: usize,
        xr: [f64; 2],
        yr: [f64; 2],
        pattern: TrianglePattern,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(HdgError::Mesh("mesh needs at least one cell per direction".into()));
        }
        let k = degree;
        let re = ReferenceElement::new(elem_type, degree)?;
        let ni = k * nx + 1;
        let nj = k * ny + 1;
        let mut nodes = Vec::with_capacity(ni * nj);
        for j in 0..nj {
            for i in 0..ni {
                nodes.push([
                    xr[0] + (xr[1] - xr[0]) * i as f64 / (ni - 1) as f64,
                    yr[0] + (yr[1] - yr[0]) * j as f64 / (nj - 1) as f64,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * ni + i;
        let mut elements = Vec::new();
        for cj in 0..ny {
            for ci in 0..nx {
                let (bi, bj) = (ci * k, cj * k);
                match elem_type {
                    ElementType::Quadrilateral => {
                        elements.push(
                            (0..re.num_nodes())
                                .map(|n| {
                                    let [i, j] = re.lattice_index(n);
                                    id(bi + i, bj + j)
                                })
                                .collect(),
                        );
                    }
                    ElementType::Triangle if pattern == TrianglePattern::Alternating && (ci + cj) % 2 == 1 => {
                        elements.push(
                            (0..re.num_nodes())
                                .map(|n| {
                                    let [i, j] = re.lattice_index(n);
                                    id(bi + i, bj + j)
                                })
                                .collect(),
                        );
                        elements.push(
                            (0..re.num_nodes())
                                .map(|n| {
                                    let [i, j] = re.lattice_index(n);
                                    id(bi + k - j, bj + i + j)
                                })
                                .collect(),
                        );
                    }
                    ElementType::Triangle => {
                        elements.push(
                            (0..re.num_nodes())
                                .map(|n| {
                                    let [i, j] = re.lattice_index(n);
                                    id(bi + i + j, bj + j)
                                })
                                .collect(),
                        );
                        elements.push(
                            (0..re.num_nodes())
                                .map(|n| {
                                    let [i, j] = re.lattice_index(n);
                                    id(bi + i, bj + i + j)
                                })
                                .collect(),
                        );
                    }
                    ElementType::Segment => unreachable!(),
                }
            }
        }
        Self::from_elements(elem_type, degree, nodes, elements)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn element_coords(&self, e: usize) -> Vec<[f64; 2]> {
        self.elements[e].iter().map(|&n| self.nodes[n]).collect()
    }

    pub fn face_midpoint(&self, f: usize) -> [f64; 2] {
        let n = &self.faces[f].nodes;
        let (a, b) = (self.nodes[n[0]], self.nodes[n[1]]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Assign a tag to every boundary face. Each boundary face midpoint must
    /// satisfy exactly one rule.
    pub fn classify_boundary(&mut self, rules: &[(BoundaryTag, &dyn Fn([f64; 2]) -> bool)]) -> Result<()> {
        for f in 0..self.faces.len() {
            if self.faces[f].kind == FaceKind::Interior {
                continue;
            }
            let m = self.face_midpoint(f);
            let hits: Vec<BoundaryTag> = rules.iter().filter(|(_, p)| p(m)).map(|(t, _)| *t).collect();
            match hits.len() {
                1 => self.faces[f].kind = FaceKind::Boundary(Some(hits[0])),
                0 => {
                    return Err(HdgError::Mesh(format!(
                        "boundary face {f} at ({:.6}, {:.6}) is not covered by any rule",
                        m[0], m[1]
                    )))
                }
                _ => {
                    return Err(HdgError::Mesh(format!(
                        "boundary face {f} at ({:.6}, {:.6}) is covered by several rules",
                        m[0], m[1]
                    )))
                }
            }
        }
        Ok(())
    }

    /// Error unless every boundary face carries a tag.
    pub fn check_tagged(&self) -> Result<()> {
        for (f, face) in self.faces.iter().enumerate() {
            if face.kind == FaceKind::Boundary(None) {
                return Err(HdgError::Mesh(format!("boundary face {f} has no tag")));
            }
        }
        Ok(())
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.faces.iter().any(|f| f.tag() == Some(tag))
    }

    /// Longest side of the bounding box.
    pub fn bounding_box_length(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }

    /// Largest face length.
    pub fn h_max(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (a, b) = (self.nodes[f.nodes[0]], self.nodes[f.nodes[1]]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "NODES {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(s, "ELEMENTS {} {} {}", self.elements.len(), self.elem_type.name(), self.degree);
        for conn in &self.elements {
            let line: Vec<String> = conn.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        let tagged: Vec<&Face> = self.faces.iter().filter(|f| f.tag().is_some()).collect();
        let _ = writeln!(s, "BOUNDARY {}", tagged.len());
        for f in tagged {
            let _ = writeln!(s, "{} {} {}", f.tag().unwrap().name(), f.nodes[0], f.nodes[1]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let perr = |m: &str| HdgError::Parse(m.to_string());
        let header = lines.next().ok_or_else(|| perr("empty mesh file"))?;
        let mut h = header.split_whitespace();
        if h.next() != Some("NODES") {
            return Err(perr("expected NODES section"));
        }
        let nn: usize = h.next().and_then(|v| v.parse().ok()).ok_or_else(|| perr("bad node count"))?;
        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let l = lines.next().ok_or_else(|| perr("truncated NODES section"))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| perr(&format!("bad coordinate in '{l}'"))))
                .collect::<Result<_>>()?;
            if v.len() < 2 {
                return Err(perr(&format!("node line '{l}' needs two coordinates")));
            }
            nodes.push([v[0], v[1]]);
        }
        let header = lines.next().ok_or_else(|| perr("missing ELEMENTS section"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "ELEMENTS" {
            return Err(perr("expected 'ELEMENTS <count> <type> <degree>'"));
        }
        let ne: usize = h[1].parse().map_err(|_| perr("bad element count"))?;
        let et = ElementType::parse(h[2])?;
        let degree: usize = h[3].parse().map_err(|_| perr("bad degree"))?;
        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            let l = lines.next().ok_or_else(|| perr("truncated ELEMENTS section"))?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| perr(&format!("bad node id in '{l}'"))))
                .collect::<Result<_>>()?;
            elements.push(v);
        }
        let mut mesh = Self::from_elements(et, degree, nodes, elements)?;
        if let Some(header) = lines.next() {
            let mut h = header.split_whitespace();
            if h.next() != Some("BOUNDARY") {
                return Err(perr("expected BOUNDARY section"));
            }
            let nb: usize = h.next().and_then(|v| v.parse().ok()).ok_or_else(|| perr("bad boundary count"))?;
            let mut by_vertices: HashMap<(usize, usize), usize> = HashMap::new();
            for (f, face) in mesh.faces.iter().enumerate() {
                let (a, b) = (face.nodes[0], face.nodes[1]);
                by_vertices.insert(if a < b { (a, b) } else { (b, a) }, f);
            }
            for _ in 0..nb {
                let l = lines.next().ok_or_else(|| perr("truncated BOUNDARY section"))?;
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(perr(&format!("boundary line '{l}' needs 'tag a b'")));
                }
                let tag = BoundaryTag::parse(t[0])?;
                let a: usize = t[1].parse().map_err(|_| perr("bad boundary vertex"))?;
                let b: usize = t[2].parse().map_err(|_| perr("bad boundary vertex"))?;
                let key = if a < b { (a, b) } else { (b, a) };
                let f = *by_vertices
                    .get(&key)
                    .ok_or_else(|| perr(&format!("boundary face {a}-{b} not in mesh")))?;
                if mesh.faces[f].kind == FaceKind::Interior {
                    return Err(perr(&format!("face {a}-{b} is interior")));
                }
                mesh.faces[f].kind = FaceKind::Boundary(Some(tag));
            }
        }
        mesh.check_tagged()?;
        Ok(mesh)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(et: ElementType, k: usize, n: usize) -> Mesh {
        Mesh::structured(et, k, n, n, [0.0, 1.0], [0.0, 1.0]).unwrap()
    }

    #[test]
    fn counts_triangles() {
        let m = unit(ElementType::Triangle, 1, 2);
        assert_eq!(m.num_elements(), 8);
        // 3 * 2 horizontal + 3 * 2 vertical + 4 diagonal edges
        assert_eq!(m.num_faces(), 16);
        let boundary = m.faces.iter().filter(|f| f.kind != FaceKind::Interior).count();
        assert_eq!(boundary, 8);
    }

    #[test]
    fn interior_faces_owned_by_lower_element() {
        for et in [ElementType::Triangle, ElementType::Quadrilateral] {
            let m = unit(et, 2, 3);
            for f in &m.faces {
                if f.elements.len() == 2 {
                    assert!(f.elements[0].0 < f.elements[1].0);
                    let (e, l) = f.elements[1];
                    assert!(m.elem_face_reversed[e][l]);
                }
            }
        }
    }

    #[test]
    fn shared_high_order_nodes_match() {
        let m = unit(ElementType::Triangle, 3, 2);
        let re = ReferenceElement::new(ElementType::Triangle, 3).unwrap();
        for f in &m.faces {
            if f.elements.len() == 2 {
                let (e, l) = f.elements[1];
                let mut nodes: Vec<usize> = re.edge_nodes(l).iter().map(|&i| m.elements[e][i]).collect();
                // Reverse orientation: swap vertices and flip interior order.
                nodes.swap(0, 1);
                nodes[2..].reverse();
                assert_eq!(nodes, f.nodes);
            }
        }
    }

    #[test]
    fn classification_errors() {
        let mut m = unit(ElementType::Quadrilateral, 1, 2);
        let bottom = |p: [f64; 2]| p[1].abs() < 1e-12;
        assert!(m.classify_boundary(&[(BoundaryTag::Neumann, &bottom)]).is_err());
        let all = |_: [f64; 2]| true;
        assert!(m
            .classify_boundary(&[(BoundaryTag::Neumann, &bottom), (BoundaryTag::Dirichlet, &all)])
            .is_err());
        let rest = |p: [f64; 2]| p[1].abs() >= 1e-12;
        m.classify_boundary(&[(BoundaryTag::Neumann, &bottom), (BoundaryTag::Dirichlet, &rest)])
            .unwrap();
        m.check_tagged().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut m = unit(ElementType::Triangle, 2, 2);
        let all = |_: [f64; 2]| true;
        m.classify_boundary(&[(BoundaryTag::Dirichlet, &all)]).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back.elements, m.elements);
        assert_eq!(back.num_faces(), m.num_faces());
        assert!(back.faces.iter().all(|f| f.kind == FaceKind::Interior || f.is_dirichlet()));
    }

    #[test]
    fn untagged_file_rejected() {
        let m = unit(ElementType::Quadrilateral, 1, 1);
        assert!(Mesh::from_text(&m.to_text()).is_err());
    }
}
