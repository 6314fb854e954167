//! Computable geometry of the polyhedral surface: areas, lengths, oriented
//! normals, barycentres and the averaged edge conormals used by the flat
//! scheme.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::vec3::Vec3;

#[inline]
pub fn triangle_area(p0: Vec3, p1: Vec3, p2: Vec3) -> f64 {
    0.5 * (p1 - p0).cross(p2 - p0).norm()
}

#[inline]
pub fn barycenter(p: [Vec3; 3]) -> Vec3 {
    (p[0] + p[1] + p[2]) / 3.0
}

/// Unit normal of a triangle in the orientation of its vertex order.
#[inline]
pub fn triangle_normal(p: [Vec3; 3]) -> Option<Vec3> {
    (p[1] - p[0]).cross(p[2] - p[0]).normalized()
}

pub fn cell_normal(mesh: &TriMesh, cell: usize, positions: &[Vec3]) -> Result<Vec3> {
    triangle_normal(mesh.cell_points(cell, positions)).ok_or_else(|| Error::DegenerateCell {
        cell,
        reason: "zero area, normal undefined".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatCellGeom {
    pub area: f64,
    pub normal: Vec3,
    pub barycenter: Vec3,
    pub diameter: f64,
}

impl FlatCellGeom {
    pub fn new(cell: usize, p: [Vec3; 3]) -> Result<Self> {
        let area = triangle_area(p[0], p[1], p[2]);
        let normal = triangle_normal(p)
            .filter(|_| area > 0.0)
            .ok_or_else(|| Error::DegenerateCell {
                cell,
                reason: "zero area".into(),
            })?;
        let diameter = p[0].distance(p[1]).max(p[1].distance(p[2])).max(p[2].distance(p[0]));
        Ok(FlatCellGeom {
            area,
            normal,
            barycenter: barycenter(p),
            diameter,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatEdgeGeom {
    pub length: f64,
    pub midpoint: Vec3,
    /// Endpoints in the mesh edge order.
    pub endpoints: [Vec3; 2],
    /// Averaged conormal seen from the left cell.
    pub conormal_left: Vec3,
    /// Exactly `-conormal_left`.
    pub conormal_right: Vec3,
}

/// Averaged conormal `½(ν̄_K × t̄ + ν̄_{K_e} × t̄)` of an edge, with the tangent
/// `t̄` oriented so that `ν̄_K × t̄` points away from the left cell's barycentre.
pub fn averaged_conormal(mesh: &TriMesh, edge: usize, positions: &[Vec3]) -> Result<FlatEdgeGeom> {
    let e = mesh.edges()[edge];
    let left = FlatCellGeom::new(e.left, mesh.cell_points(e.left, positions))?;
    let right = FlatCellGeom::new(e.right, mesh.cell_points(e.right, positions))?;
    edge_geom(positions[e.vertices[0]], positions[e.vertices[1]], &left, &right)
}

pub(crate) fn edge_geom(a: Vec3, b: Vec3, left: &FlatCellGeom, right: &FlatCellGeom) -> Result<FlatEdgeGeom> {
    let length = a.distance(b);
    let mut tangent = (b - a)
        .normalized()
        .ok_or_else(|| Error::Geometry("zero-length edge".into()))?;
    let midpoint = a.lerp(b, 0.5);
    if left.normal.cross(tangent).dot(midpoint - left.barycenter) < 0.0 {
        tangent = -tangent;
    }
    let mu = (left.normal.cross(tangent) + right.normal.cross(tangent)) * 0.5;
    Ok(FlatEdgeGeom {
        length,
        midpoint,
        endpoints: [a, b],
        conormal_left: mu,
        conormal_right: -mu,
    })
}

/// All flat cell and edge quantities of a mesh at one set of vertex positions.
#[derive(Clone, Debug)]
pub struct FlatGeometry {
    pub cells: Vec<FlatCellGeom>,
    pub edges: Vec<FlatEdgeGeom>,
}

impl FlatGeometry {
    pub fn compute(mesh: &TriMesh, positions: &[Vec3]) -> Result<Self> {
        let cells = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| FlatCellGeom::new(k, mesh.cell_points(k, positions)))
            .collect::<Result<Vec<_>>>()?;
        let edges = mesh
            .edges()
            .par_iter()
            .map(|e| {
                edge_geom(
                    positions[e.vertices[0]],
                    positions[e.vertices[1]],
                    &cells[e.left],
                    &cells[e.right],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FlatGeometry { cells, edges })
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }
}

/// Flat cell areas only; cheaper than a full [`FlatGeometry`].
pub fn cell_areas(mesh: &TriMesh, positions: &[Vec3]) -> Result<Vec<f64>> {
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let p = mesh.cell_points(k, positions);
            let a = triangle_area(p[0], p[1], p[2]);
            if a > 0.0 {
                Ok(a)
            } else {
                Err(Error::DegenerateCell {
                    cell: k,
                    reason: "zero area".into(),
                })
            }
        })
        .collect()
}
