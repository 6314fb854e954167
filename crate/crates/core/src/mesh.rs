//! Triangulated closed surfaces with fixed topology and movable vertices.
//!
//! A [`TriMesh`] stores the reference vertex positions (time zero), the
//! consistently oriented triangles, and an explicit edge list. Every edge
//! records the cell that traverses it forwards (`left`) and the cell that
//! traverses it backwards (`right`), so flux assembly can visit each
//! interface exactly once.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::triangle_area;
use crate::vec3::Vec3;

/// Deepest icosphere refinement we are willing to allocate (20·4⁹ cells).
pub const MAX_LEVEL: u32 = 9;

/// An interface between two cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints in the order traversed by `left`.
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: usize,
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Edges of each cell: `[v0v1, v1v2, v2v0]`.
    cell_edges: Vec<[usize; 3]>,
    level: u32,
}

impl TriMesh {
    /// Builds a mesh from raw triangles. Orientation is made consistent by
    /// breadth-first propagation from cell 0 and then flipped globally if the
    /// enclosed signed volume is negative, so normals point outward.
    pub fn from_triangles(vertices: Vec<Vec3>, mut triangles: Vec<[usize; 3]>, level: u32) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Topology("mesh has no triangles".into()));
        }
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Topology(format!("cell {k} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[2] == t[0] {
                return Err(Error::Topology(format!("cell {k} repeats a vertex")));
            }
        }

        let incidence = edge_incidence(&triangles)?;
        orient_consistently(&mut triangles, &incidence)?;

        let volume: f64 = triangles
            .iter()
            .map(|t| vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]])))
            .sum();
        if volume < 0.0 {
            for t in triangles.iter_mut() {
                t.swap(1, 2);
            }
        }

        let (edges, cell_edges) = build_edges(&triangles)?;
        Ok(TriMesh {
            vertices,
            triangles,
            edges,
            cell_edges,
            level,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn num_cells(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vertex positions of `cell` taken from `positions`.
    #[inline]
    pub fn cell_points(&self, cell: usize, positions: &[Vec3]) -> [Vec3; 3] {
        let t = self.triangles[cell];
        [positions[t[0]], positions[t[1]], positions[t[2]]]
    }

    /// The three cells sharing an edge with `cell`, in `cell_edges` order.
    pub fn neighbors(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell].map(|e| {
            let edge = &self.edges[e];
            if edge.left == cell {
                edge.right
            } else {
                edge.left
            }
        })
    }

    /// `+1` if `cell` is the left cell of `edge`, `-1` otherwise.
    #[inline]
    pub fn edge_sign(&self, cell: usize, edge: usize) -> f64 {
        if self.edges[edge].left == cell {
            1.0
        } else {
            -1.0
        }
    }

    /// Re-checks the structural invariants: two cells per edge, opposite
    /// traversal on each side, and consistent cell/edge cross references.
    pub fn check_structure(&self) -> Result<()> {
        for (i, e) in self.edges.iter().enumerate() {
            if e.left == e.right {
                return Err(Error::Topology(format!("edge {i} has a single incident cell")));
            }
            let [a, b] = e.vertices;
            if !traverses(&self.triangles[e.left], a, b) {
                return Err(Error::Topology(format!(
                    "edge {i}: left cell does not traverse {a}->{b}"
                )));
            }
            if !traverses(&self.triangles[e.right], b, a) {
                return Err(Error::Topology(format!(
                    "edge {i}: right cell does not traverse {b}->{a}"
                )));
            }
        }
        for (k, ce) in self.cell_edges.iter().enumerate() {
            for &e in ce {
                let edge = &self.edges[e];
                if edge.left != k && edge.right != k {
                    return Err(Error::Topology(format!("cell {k} lists foreign edge {e}")));
                }
            }
        }
        if 2 * self.edges.len() != 3 * self.triangles.len() {
            return Err(Error::Topology("edge count does not match a closed surface".into()));
        }
        Ok(())
    }

    /// Splits every triangle into four through its edge midpoints. When a
    /// projection is given the new vertices are mapped back onto the surface.
    pub fn refine(&self, project: Option<&dyn Fn(Vec3) -> Vec3>) -> Result<TriMesh> {
        if self.level >= MAX_LEVEL {
            return Err(Error::Capacity(format!("refinement beyond level {MAX_LEVEL}")));
        }
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.edges.len());
        for e in &self.edges {
            let m = self.vertices[e.vertices[0]].lerp(self.vertices[e.vertices[1]], 0.5);
            vertices.push(match project {
                Some(p) => p(m),
                None => m,
            });
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, ce) in self.triangles.iter().zip(&self.cell_edges) {
            let [a, b, c] = *t;
            let (ab, bc, ca) = (nv + ce[0], nv + ce[1], nv + ce[2]);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        TriMesh::from_triangles(vertices, triangles, self.level + 1)
    }
}

fn traverses(t: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|i| t[i] == a && t[(i + 1) % 3] == b)
}

type Incidence = HashMap<(usize, usize), Vec<usize>>;

fn edge_incidence(triangles: &[[usize; 3]]) -> Result<Incidence> {
    let mut map: Incidence = HashMap::with_capacity(triangles.len() * 3 / 2);
    for (k, t) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            map.entry((a.min(b), a.max(b))).or_default().push(k);
        }
    }
    for (&(a, b), cells) in &map {
        if cells.len() != 2 {
            return Err(Error::Topology(format!(
                "edge ({a}, {b}) has {} incident cells, expected 2",
                cells.len()
            )));
        }
    }
    Ok(map)
}

fn orient_consistently(triangles: &mut [[usize; 3]], incidence: &Incidence) -> Result<()> {
    let n = triangles.len();
    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        while let Some(k) = queue.pop_front() {
            let t = triangles[k];
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                let cells = &incidence[&(a.min(b), a.max(b))];
                let other = if cells[0] == k { cells[1] } else { cells[0] };
                let needs_flip = traverses(&triangles[other], a, b);
                if visited[other] {
                    if needs_flip {
                        return Err(Error::Topology("surface is not orientable".into()));
                    }
                    continue;
                }
                if needs_flip {
                    triangles[other].swap(1, 2);
                }
                visited[other] = true;
                queue.push_back(other);
            }
        }
    }
    Ok(())
}

fn build_edges(triangles: &[[usize; 3]]) -> Result<(Vec<Edge>, Vec<[usize; 3]>)> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3 / 2);
    let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2);
    let mut cell_edges = vec![[usize::MAX; 3]; triangles.len()];
    for (k, t) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let e = match index.get(&key) {
                Some(&e) => {
                    let edge = &mut edges[e];
                    if edge.vertices != [b, a] || edge.right != usize::MAX {
                        return Err(Error::Topology(format!("inconsistent orientation at edge ({a}, {b})")));
                    }
                    edge.right = k;
                    e
                }
                None => {
                    edges.push(Edge {
                        vertices: [a, b],
                        left: k,
                        right: usize::MAX,
                    });
                    index.insert(key, edges.len() - 1);
                    edges.len() - 1
                }
            };
            cell_edges[k][i] = e;
        }
    }
    Ok((edges, cell_edges))
}

/// Radial projection onto the unit sphere centred at the origin.
pub fn project_to_unit_sphere(x: Vec3) -> Vec3 {
    x / x.norm()
}

/// Regular icosahedron refined `level` times, every vertex on the unit sphere.
pub fn build_icosphere(level: u32) -> Result<TriMesh> {
    if level > MAX_LEVEL {
        return Err(Error::Capacity(format!(
            "icosphere level {level} exceeds the supported maximum {MAX_LEVEL}"
        )));
    }
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let vertices: Vec<Vec3> = raw.iter().map(|&p| project_to_unit_sphere(Vec3::from(p))).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut mesh = TriMesh::from_triangles(vertices, faces, 0)?;
    for _ in 0..level {
        mesh = mesh.refine(Some(&project_to_unit_sphere))?;
    }
    Ok(mesh)
}

/// Icospheres of levels `0..=max_level`, each obtained by refining the last.
pub fn icosphere_family(levels: std::ops::RangeInclusive<u32>) -> Result<Vec<TriMesh>> {
    let mut out = Vec::new();
    let mut mesh = build_icosphere(0)?;
    for level in 0..=*levels.end() {
        if level > 0 {
            mesh = mesh.refine(Some(&project_to_unit_sphere))?;
        }
        if levels.contains(&level) {
            out.push(mesh.clone());
        }
    }
    Ok(out)
}

/// Structured torus around the x₃ axis with `resolution = (around, tube)`
/// quads, each split into two triangles.
pub fn build_torus(major_radius: f64, minor_radius: f64, resolution: (usize, usize)) -> Result<TriMesh> {
    if !(minor_radius > 0.0 && minor_radius < major_radius && major_radius.is_finite()) {
        return Err(Error::Parameter(format!(
            "torus radii must satisfy 0 < minor < major, got major={major_radius}, minor={minor_radius}"
        )));
    }
    let (n, m) = resolution;
    if n < 4 || m < 4 {
        return Err(Error::Parameter(format!(
            "torus resolution must be at least 4 in each direction, got ({n}, {m})"
        )));
    }
    let mut vertices = Vec::with_capacity(n * m);
    for i in 0..n {
        let theta = std::f64::consts::TAU * i as f64 / n as f64;
        for j in 0..m {
            let phi = std::f64::consts::TAU * j as f64 / m as f64;
            let rho = major_radius + minor_radius * phi.cos();
            vertices.push(Vec3::new(
                rho * theta.cos(),
                rho * theta.sin(),
                minor_radius * phi.sin(),
            ));
        }
    }
    let id = |i: usize, j: usize| (i % n) * m + (j % m);
    let mut triangles = Vec::with_capacity(2 * n * m);
    for i in 0..n {
        for j in 0..m {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::from_triangles(vertices, triangles, 0)
}

/// Regularity of a triangulation: the largest `alpha` with
/// `alpha·h_K² ≤ |K|` and `alpha·|∂K| ≤ h_K` on every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshQuality {
    pub alpha: f64,
    /// Longest edge over the whole mesh.
    pub h: f64,
    pub per_cell_diameters: Vec<f64>,
}

/// Per-cell regularity constant `min(|K|/h_K², h_K/|∂K|)` of a flat triangle.
pub fn cell_alpha(p: [Vec3; 3]) -> (f64, f64) {
    let lengths = [p[0].distance(p[1]), p[1].distance(p[2]), p[2].distance(p[0])];
    let diam = lengths.iter().cloned().fold(0.0, f64::max);
    let perimeter: f64 = lengths.iter().sum();
    let area = triangle_area(p[0], p[1], p[2]);
    ((area / (diam * diam)).min(diam / perimeter), diam)
}

pub fn mesh_quality(mesh: &TriMesh, positions: &[Vec3]) -> Result<MeshQuality> {
    if positions.len() != mesh.num_vertices() {
        return Err(Error::Parameter(format!(
            "{} positions given for {} vertices",
            positions.len(),
            mesh.num_vertices()
        )));
    }
    let mut alpha = f64::INFINITY;
    let mut h: f64 = 0.0;
    let mut diameters = Vec::with_capacity(mesh.num_cells());
    for k in 0..mesh.num_cells() {
        let p = mesh.cell_points(k, positions);
        let area = triangle_area(p[0], p[1], p[2]);
        let (a, diam) = cell_alpha(p);
        if !(area > 0.0) || !(a > 0.0) {
            return Err(Error::DegenerateCell {
                cell: k,
                reason: format!("area {area:e}"),
            });
        }
        alpha = alpha.min(a);
        h = h.max(diam);
        diameters.push(diam);
    }
    Ok(MeshQuality {
        alpha,
        h,
        per_cell_diameters: diameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_counts() {
        let m = build_icosphere(0).unwrap();
        assert_eq!(m.num_cells(), 20);
        assert_eq!(m.num_vertices(), 12);
        assert_eq!(m.num_edges(), 30);
        m.check_structure().unwrap();
    }

    #[test]
    fn level_two_has_320_cells() {
        assert_eq!(build_icosphere(2).unwrap().num_cells(), 320);
    }

    #[test]
    fn level_one_vertices_on_unit_sphere() {
        let m = build_icosphere(1).unwrap();
        for v in m.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn level_above_bound_is_capacity_error() {
        assert!(matches!(build_icosphere(10), Err(Error::Capacity(_))));
    }

    #[test]
    fn refine_quadruples_and_keeps_structure() {
        let m = build_icosphere(0).unwrap();
        let r = m.refine(Some(&project_to_unit_sphere)).unwrap();
        assert_eq!(r.num_cells(), 80);
        assert_eq!(r.level(), 1);
        r.check_structure().unwrap();
    }

    #[test]
    fn refine_without_projection_keeps_flat_midpoints() {
        let m = build_icosphere(0).unwrap();
        let r = m.refine(None).unwrap();
        let e = m.edges()[0];
        let mid = m.vertices()[e.vertices[0]].lerp(m.vertices()[e.vertices[1]], 0.5);
        assert_eq!(r.vertices()[m.num_vertices()], mid);
    }

    #[test]
    fn icosphere_normals_point_outward() {
        let m = build_icosphere(2).unwrap();
        for k in 0..m.num_cells() {
            let [a, b, c] = m.cell_points(k, m.vertices());
            let n = (b - a).cross(c - a);
            assert!(n.dot(a + b + c) > 0.0);
        }
    }

    #[test]
    fn torus_counts_and_radii() {
        let m = build_torus(1.0, 0.4, (8, 4)).unwrap();
        assert_eq!(m.num_cells(), 64);
        m.check_structure().unwrap();
        for v in m.vertices() {
            let rho = (v.x * v.x + v.y * v.y).sqrt();
            let r2 = (rho - 1.0).powi(2) + v.z * v.z;
            assert!((r2 - 0.16).abs() < 1e-14);
        }
        assert_eq!(build_torus(1.0, 0.4, (64, 32)).unwrap().num_cells(), 4096);
    }

    #[test]
    fn torus_rejects_bad_parameters() {
        assert!(matches!(build_torus(1.0, 1.0, (8, 4)), Err(Error::Parameter(_))));
        assert!(matches!(build_torus(1.0, 1.5, (8, 4)), Err(Error::Parameter(_))));
        assert!(matches!(build_torus(1.0, 0.4, (3, 4)), Err(Error::Parameter(_))));
    }

    #[test]
    fn non_manifold_input_is_rejected() {
        let v = vec![Vec3::ZERO, Vec3::X, Vec3::Y];
        assert!(matches!(
            TriMesh::from_triangles(v, vec![[0, 1, 2]], 0),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn scrambled_orientation_is_repaired() {
        let m = build_icosphere(1).unwrap();
        let mut tris = m.triangles().to_vec();
        for (k, t) in tris.iter_mut().enumerate() {
            if k % 3 == 1 {
                t.swap(0, 2);
            }
        }
        let fixed = TriMesh::from_triangles(m.vertices().to_vec(), tris, 1).unwrap();
        fixed.check_structure().unwrap();
        for k in 0..fixed.num_cells() {
            let [a, b, c] = fixed.cell_points(k, fixed.vertices());
            assert!((b - a).cross(c - a).dot(a) > 0.0);
        }
    }

    #[test]
    fn equilateral_alpha_is_one_third() {
        let s = 2.5;
        let p = [
            Vec3::ZERO,
            Vec3::new(s, 0.0, 0.0),
            Vec3::new(s / 2.0, s * 3f64.sqrt() / 2.0, 0.0),
        ];
        let (a, d) = cell_alpha(p);
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
        assert!((d - s).abs() < 1e-15);
    }

    #[test]
    fn needle_alpha_vanishes() {
        let p = [Vec3::ZERO, Vec3::X, Vec3::new(0.5, 1e-9, 0.0)];
        assert!(cell_alpha(p).0 < 1e-8);
    }

    #[test]
    fn degenerate_cell_reported_with_index() {
        let m = build_icosphere(0).unwrap();
        let mut pos = m.vertices().to_vec();
        let t = m.triangles()[7];
        pos[t[2]] = pos[t[0]];
        match mesh_quality(&m, &pos) {
            Err(Error::DegenerateCell { cell, .. }) => assert!(m.triangles()[cell].contains(&t[2])),
            other => panic!("expected degenerate cell error, got {other:?}"),
        }
    }

    #[test]
    fn icosphere_quality_and_h_halving() {
        let fam = icosphere_family(0..=5).unwrap();
        let q: Vec<_> = fam.iter().map(|m| mesh_quality(m, m.vertices()).unwrap()).collect();
        // the first refinement is distorted by the projection of long chords
        for w in q[1..].windows(2) {
            let ratio = w[1].h / w[0].h;
            assert!((0.45..=0.55).contains(&ratio), "h ratio {ratio}");
        }
        for (l, qq) in q.iter().enumerate() {
            assert!(qq.alpha >= 0.2, "level {l} alpha {}", qq.alpha);
        }
    }
}
