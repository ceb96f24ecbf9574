//! Isoparametric maps from reference to physical elements.

use crate::error::{HdgError, Result};
use crate::refelem::ReferenceElement;

/// Geometry of one quadrature point on a mapped element.
#[derive(Debug, Clone)]
pub struct MappedPoint {
    pub x: [f64; 2],
    pub det: f64,
    pub n: Vec<f64>,
    /// Physical shape-function gradients.
    pub grad: Vec<[f64; 2]>,
}

/// Map the reference point `xi` through the element with node coordinates
/// `coords`, using the shape functions of `geo` for the geometry and `basis`
/// for the returned values and gradients.
pub fn map_point(
    coords: &[[f64; 2]],
    geo: &ReferenceElement,
    basis: &ReferenceElement,
    xi: [f64; 2],
) -> Result<MappedPoint> {
    let (gn, gd) = geo.shape(xi);
    let mut x = [0.0; 2];
    let mut j = [[0.0; 2]; 2];
    for (a, c) in coords.iter().enumerate() {
        x[0] += gn[a] * c[0];
        x[1] += gn[a] * c[1];
        for r in 0..2 {
            for s in 0..2 {
                j[r][s] += c[r] * gd[a][s];
            }
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(det > 1e-14) {
        return Err(HdgError::Mesh(format!("degenerate or inverted element (detJ = {det:e})")));
    }
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let (n, d) = if std::ptr::eq(geo, basis) { (gn, gd) } else { basis.shape(xi) };
    let grad = d
        .iter()
        .map(|g| [g[0] * inv[0][0] + g[1] * inv[1][0], g[0] * inv[0][1] + g[1] * inv[1][1]])
        .collect();
    Ok(MappedPoint { x, det, n, grad })
}

/// Physical position, outward unit normal and line Jacobian at parameter `s`
/// of local edge `edge`.
pub fn map_edge_point(coords: &[[f64; 2]], geo: &ReferenceElement, edge: usize, s: f64) -> ([f64; 2], [f64; 2], f64, [f64; 2]) {
    let xi = geo.edge_point(edge, s);
    let (gn, gd) = geo.shape(xi);
    let ends = (geo.edge_point(edge, -1.0), geo.edge_point(edge, 1.0));
    // d xi / d s along the edge
    let dxi = [0.5 * (ends.1[0] - ends.0[0]), 0.5 * (ends.1[1] - ends.0[1])];
    let mut x = [0.0; 2];
    let mut t = [0.0; 2];
    for (a, c) in coords.iter().enumerate() {
        x[0] += gn[a] * c[0];
        x[1] += gn[a] * c[1];
        let ds = gd[a][0] * dxi[0] + gd[a][1] * dxi[1];
        t[0] += c[0] * ds;
        t[1] += c[1] * ds;
    }
    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
    // Counterclockwise edges: outward normal is the tangent rotated clockwise.
    let n = [t[1] / len, -t[0] / len];
    (x, n, len, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refelem::{ElementType, Quadrature};

    #[test]
    fn identity_map() {
        let re = ReferenceElement::new(ElementType::Triangle, 1).unwrap();
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let m = map_point(&coords, &re, &re, [0.2, 0.3]).unwrap();
        assert!((m.det - 1.0).abs() < 1e-15);
        assert!((m.x[0] - 0.2).abs() < 1e-15 && (m.x[1] - 0.3).abs() < 1e-15);
        assert_eq!(m.grad[1], [1.0, 0.0]);
    }

    #[test]
    fn scaled_triangle() {
        let re = ReferenceElement::new(ElementType::Triangle, 1).unwrap();
        let coords = vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        let m = map_point(&coords, &re, &re, [0.2, 0.3]).unwrap();
        assert!((m.det - 4.0).abs() < 1e-14);
        assert!((m.grad[1][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn collapsed_rejected() {
        let re = ReferenceElement::new(ElementType::Triangle, 1).unwrap();
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        assert!(map_point(&coords, &re, &re, [0.2, 0.3]).is_err());
    }

    #[test]
    fn edge_length_and_closed_normals() {
        let re = ReferenceElement::new(ElementType::Quadrilateral, 2).unwrap();
        let corners = [[0.0, 0.0], [3.0, 0.5], [2.5, 2.0], [-0.5, 1.5]];
        // Bilinear placement of the biquadratic nodes.
        let coords: Vec<[f64; 2]> = re
            .nodes
            .iter()
            .map(|&[u, v]| {
                let w = [(1.0 - u) * (1.0 - v), (1.0 + u) * (1.0 - v), (1.0 + u) * (1.0 + v), (1.0 - u) * (1.0 + v)];
                let mut x = [0.0; 2];
                for a in 0..4 {
                    x[0] += 0.25 * w[a] * corners[a][0];
                    x[1] += 0.25 * w[a] * corners[a][1];
                }
                x
            })
            .collect();
        let q = Quadrature::new(ElementType::Segment, 6);
        let mut closed = [0.0; 2];
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            let exact = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let mut len = 0.0;
            for (p, w) in q.points.iter().zip(&q.weights) {
                let (_, n, j, _) = map_edge_point(&coords, &re, e, p[0]);
                len += w * j;
                closed[0] += w * j * n[0];
                closed[1] += w * j * n[1];
            }
            assert!((len - exact).abs() < 1e-12);
        }
        assert!(closed[0].abs() < 1e-12 && closed[1].abs() < 1e-12);
    }
}
