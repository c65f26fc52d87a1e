use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary-edge label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    /// Adhesive contact boundary.
    Contact,
    /// Prescribed-displacement boundary.
    Dirichlet,
    /// Traction-free boundary.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub label: EdgeLabel,
}

/// Which edge of the rectangle carries the Dirichlet loading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadingEdge {
    Top,
    Left,
    Right,
}

/// Rectangle `[0, width] x [0, height]` glued along the bottom edge.
///
/// The first `contact_nodes` bottom nodes, counted from `x = 0`, form the
/// adhesive contact boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleGeometry {
    pub width: f64,
    pub height: f64,
    pub contact_nodes: usize,
    pub loading_edge: LoadingEdge,
}

/// Triangulated two-dimensional body with labeled boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh2D {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    /// Contact nodes ordered along the contact boundary.
    contact_nodes: Vec<usize>,
    /// Outward unit normals at `contact_nodes`.
    contact_normals: Vec<[f64; 2]>,
    dirichlet_nodes: Vec<usize>,
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh2D {
    /// Builds a mesh from raw data, checking triangle orientation and
    /// computing contact-node order and normals.
    ///
    /// Labeling consistency (nonempty Dirichlet part, disjoint contact and
    /// Dirichlet nodes) is checked later by `partition_dofs`.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let n = nodes.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::InvalidGeometry(format!(
                    "triangle {t} references a missing node"
                )));
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "triangle {t} has non-positive signed area {area}"
                )));
            }
        }
        if boundary.iter().any(|e| e.nodes.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidGeometry(
                "boundary edge references a missing node".into(),
            ));
        }

        // third vertex of the (unique) triangle owning each boundary edge
        let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                owner.insert((a.min(b), a.max(b)), c);
            }
        }

        let contact: Vec<[usize; 2]> = boundary
            .iter()
            .filter(|e| e.label == EdgeLabel::Contact)
            .map(|e| e.nodes)
            .collect();
        let contact_nodes = order_chain(&contact);

        let mut normal_sum: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
        for &[a, b] in &contact {
            let c = *owner.get(&(a.min(b), a.max(b))).ok_or_else(|| {
                Error::InvalidGeometry(format!("contact edge ({a}, {b}) is not a triangle edge"))
            })?;
            let (pa, pb, pc) = (nodes[a], nodes[b], nodes[c]);
            let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
            let len = (dx * dx + dy * dy).sqrt();
            if len == 0.0 {
                return Err(Error::InvalidGeometry("zero-length contact edge".into()));
            }
            let mut nrm = [dy / len, -dx / len];
            if nrm[0] * (pc[0] - pa[0]) + nrm[1] * (pc[1] - pa[1]) > 0.0 {
                nrm = [-nrm[0], -nrm[1]];
            }
            for node in [a, b] {
                let s = normal_sum.entry(node).or_insert([0.0, 0.0]);
                s[0] += nrm[0];
                s[1] += nrm[1];
            }
        }
        let contact_normals = contact_nodes
            .iter()
            .map(|i| {
                let s = normal_sum[i];
                let len = (s[0] * s[0] + s[1] * s[1]).sqrt();
                [s[0] / len, s[1] / len]
            })
            .collect();

        let dirichlet_nodes: BTreeSet<usize> = boundary
            .iter()
            .filter(|e| e.label == EdgeLabel::Dirichlet)
            .flat_map(|e| e.nodes)
            .collect();

        Ok(Mesh2D {
            nodes,
            triangles,
            boundary,
            contact_nodes,
            contact_normals,
            dirichlet_nodes: dirichlet_nodes.into_iter().collect(),
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn contact_nodes(&self) -> &[usize] {
        &self.contact_nodes
    }

    pub fn contact_normals(&self) -> &[[f64; 2]] {
        &self.contact_normals
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet_nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    /// Contact edges as pairs of positions into `contact_nodes`, with lengths.
    pub fn contact_segments(&self) -> Vec<(usize, usize, f64)> {
        let pos: BTreeMap<usize, usize> = self
            .contact_nodes
            .iter()
            .enumerate()
            .map(|(p, &n)| (n, p))
            .collect();
        self.boundary
            .iter()
            .filter(|e| e.label == EdgeLabel::Contact)
            .map(|e| {
                let [a, b] = e.nodes;
                let (pa, pb) = (self.nodes[a], self.nodes[b]);
                let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                let (i, j) = (pos[&a], pos[&b]);
                (i.min(j), i.max(j), len)
            })
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .sum()
    }
}

/// Orders the nodes of a set of edges forming a simple chain (or cycle).
fn order_chain(edges: &[[usize; 2]]) -> Vec<usize> {
    if edges.is_empty() {
        return Vec::new();
    }
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &[a, b] in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let start = adj
        .iter()
        .find(|(_, nb)| nb.len() == 1)
        .map(|(&n, _)| n)
        .unwrap_or_else(|| *adj.keys().next().unwrap());
    let mut order = vec![start];
    let mut seen: BTreeSet<usize> = [start].into();
    let mut cur = start;
    while let Some(&next) = adj[&cur].iter().find(|n| !seen.contains(n)) {
        order.push(next);
        seen.insert(next);
        cur = next;
    }
    // disconnected pieces are appended in index order
    for &n in adj.keys() {
        if seen.insert(n) {
            order.push(n);
        }
    }
    order
}

/// Structured triangulation of a rectangle with `nx` nodes along x and `ny`
/// along y; every cell is split along its rising diagonal.
pub fn build_structured_mesh(nx: usize, ny: usize, geometry: &RectangleGeometry) -> Result<Mesh2D> {
    let RectangleGeometry {
        width,
        height,
        contact_nodes,
        loading_edge,
    } = *geometry;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidGeometry(format!(
            "need at least 2x2 nodes, got {nx}x{ny}"
        )));
    }
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::InvalidGeometry(format!(
            "rectangle extents must be positive, got {width} x {height}"
        )));
    }
    if contact_nodes > nx {
        return Err(Error::InvalidGeometry(format!(
            "contact span of {contact_nodes} nodes exceeds the {nx} bottom nodes"
        )));
    }
    if contact_nodes == 1 {
        return Err(Error::InvalidGeometry(
            "contact boundary needs at least two nodes".into(),
        ));
    }

    let id = |i: usize, j: usize| j * nx + i;
    let mut nodes = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            nodes.push([
                width * i as f64 / (nx - 1) as f64,
                height * j as f64 / (ny - 1) as f64,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }

    let mut boundary = Vec::new();
    for i in 0..nx - 1 {
        let label = if contact_nodes >= 2 && i + 1 < contact_nodes {
            EdgeLabel::Contact
        } else {
            EdgeLabel::Free
        };
        boundary.push(BoundaryEdge {
            nodes: [id(i, 0), id(i + 1, 0)],
            label,
        });
        let label = if loading_edge == LoadingEdge::Top {
            EdgeLabel::Dirichlet
        } else {
            EdgeLabel::Free
        };
        boundary.push(BoundaryEdge {
            nodes: [id(i + 1, ny - 1), id(i, ny - 1)],
            label,
        });
    }
    for j in 0..ny - 1 {
        let left = if loading_edge == LoadingEdge::Left {
            EdgeLabel::Dirichlet
        } else {
            EdgeLabel::Free
        };
        boundary.push(BoundaryEdge {
            nodes: [id(0, j + 1), id(0, j)],
            label: left,
        });
        let right = if loading_edge == LoadingEdge::Right {
            EdgeLabel::Dirichlet
        } else {
            EdgeLabel::Free
        };
        boundary.push(BoundaryEdge {
            nodes: [id(nx - 1, j), id(nx - 1, j + 1)],
            label: right,
        });
    }
    Mesh2D::new(nodes, triangles, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(w: f64, h: f64, c: usize, edge: LoadingEdge) -> RectangleGeometry {
        RectangleGeometry {
            width: w,
            height: h,
            contact_nodes: c,
            loading_edge: edge,
        }
    }

    #[test]
    fn full_sized_mesh() {
        let mesh = build_structured_mesh(14, 20, &geom(0.26, 0.38, 12, LoadingEdge::Right)).unwrap();
        assert_eq!(mesh.num_nodes(), 280);
        assert_eq!(mesh.contact_nodes().len(), 12);
        for (&n, nrm) in mesh.contact_nodes().iter().zip(mesh.contact_normals()) {
            assert_eq!(mesh.nodes()[n][1], 0.0);
            assert!((nrm[0]).abs() < 1e-15 && (nrm[1] + 1.0).abs() < 1e-15);
        }
        // ordered along the x-axis
        let xs: Vec<f64> = mesh.contact_nodes().iter().map(|&n| mesh.nodes()[n][0]).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(mesh.dirichlet_nodes().len(), 20);
    }

    #[test]
    fn smallest_mesh() {
        let mesh = build_structured_mesh(2, 2, &geom(1.0, 1.0, 2, LoadingEdge::Top)).unwrap();
        assert_eq!(mesh.num_nodes(), 4);
        assert_eq!(mesh.triangles().len(), 2);
        for t in mesh.triangles() {
            let n = mesh.nodes();
            assert!(signed_area(n[t[0]], n[t[1]], n[t[2]]) > 0.0);
        }
    }

    #[test]
    fn triangles_partition_the_rectangle() {
        let mesh = build_structured_mesh(3, 3, &geom(2.0, 1.5, 3, LoadingEdge::Top)).unwrap();
        assert!((mesh.total_area() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        for g in [geom(0.0, 1.0, 2, LoadingEdge::Top), geom(1.0, 0.0, 2, LoadingEdge::Top)] {
            assert!(matches!(
                build_structured_mesh(3, 3, &g),
                Err(Error::InvalidGeometry(_))
            ));
        }
        assert!(build_structured_mesh(1, 3, &geom(1.0, 1.0, 0, LoadingEdge::Top)).is_err());
        assert!(build_structured_mesh(3, 3, &geom(1.0, 1.0, 4, LoadingEdge::Top)).is_err());
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let nodes = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(Mesh2D::new(nodes, vec![[0, 1, 2]], vec![]).is_err());
    }

    #[test]
    fn contact_segments_have_mesh_spacing() {
        let mesh = build_structured_mesh(5, 3, &geom(2.0, 1.0, 4, LoadingEdge::Right)).unwrap();
        let seg = mesh.contact_segments();
        assert_eq!(seg.len(), 3);
        for (i, j, len) in seg {
            assert_eq!(j, i + 1);
            assert!((len - 0.5).abs() < 1e-15);
        }
    }
}
