//! Linear reconstruction and Heun's method for the flat scheme on
//! stationary surfaces.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::FluxField;
use crate::geometry::FlatGeometry;
use crate::mesh::TriMesh;
use crate::solver::{first_order_traces, update, CellField, StepContext};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Reconstruction {
    /// When false the traces are the cell values and each stage is a
    /// first-order step.
    pub enabled: bool,
    /// Scale gradients so edge-midpoint values stay within the range of the
    /// cell and its neighbours.
    pub limiter: bool,
}

impl Default for Reconstruction {
    fn default() -> Self {
        Reconstruction {
            enabled: true,
            limiter: false,
        }
    }
}

/// Per-cell gradients in the planes of the flat cells, anchored at the
/// barycentres.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGradient {
    pub gradients: Vec<Vec3>,
}

fn plane_basis(n: Vec3) -> (Vec3, Vec3) {
    let a = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::X
    } else if n.y.abs() <= n.z.abs() {
        Vec3::Y
    } else {
        Vec3::Z
    };
    let e1 = (a - n * a.dot(n))
        .normalized()
        .expect("axis not parallel to a unit normal");
    (e1, n.cross(e1))
}

/// Least-squares gradients from the three edge neighbours, whose barycentres
/// are expressed in plane coordinates of the cell.
pub fn reconstruct(values: &[f64], mesh: &TriMesh, geom: &FlatGeometry, limiter: bool) -> CellGradient {
    let gradients = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let c = &geom.cells[k];
            let (e1, e2) = plane_basis(c.normal);
            let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let nb = mesh.neighbors(k);
            for &j in &nb {
                let d = geom.cells[j].barycenter - c.barycenter;
                let (x, y) = (d.dot(e1), d.dot(e2));
                let du = values[j] - values[k];
                a11 += x * x;
                a12 += x * y;
                a22 += y * y;
                b1 += x * du;
                b2 += y * du;
            }
            let det = a11 * a22 - a12 * a12;
            if !(det > 1e-12 * (a11 + a22) * (a11 + a22)) {
                log::debug!("cell {k}: rank-deficient neighbourhood, zero gradient");
                return Vec3::ZERO;
            }
            let g1 = (a22 * b1 - a12 * b2) / det;
            let g2 = (a11 * b2 - a12 * b1) / det;
            let mut g = e1 * g1 + e2 * g2;
            if limiter {
                let u = values[k];
                let lo = nb.iter().map(|&j| values[j]).fold(u, f64::min);
                let hi = nb.iter().map(|&j| values[j]).fold(u, f64::max);
                let mut phi: f64 = 1.0;
                for &e in &mesh.cell_edges()[k] {
                    let delta = g.dot(geom.edges[e].midpoint - c.barycenter);
                    if delta > 0.0 {
                        phi = phi.min((hi - u) / delta);
                    } else if delta < 0.0 {
                        phi = phi.min((lo - u) / delta);
                    }
                }
                g = g * phi.max(0.0);
            }
            g
        })
        .collect();
    CellGradient { gradients }
}

/// Reconstructed values at the edge midpoints from the left and right cell.
pub fn edge_traces(values: &[f64], mesh: &TriMesh, geom: &FlatGeometry, grad: &CellGradient) -> Vec<(f64, f64)> {
    mesh.edges()
        .par_iter()
        .zip(geom.edges.par_iter())
        .map(|(e, g)| {
            let side = |k: usize| values[k] + grad.gradients[k].dot(g.midpoint - geom.cells[k].barycenter);
            (side(e.left), side(e.right))
        })
        .collect()
}

/// One forward Euler stage `u + dt·L(u)` of the second-order scheme.
pub fn rk2_stage(
    mesh: &TriMesh,
    geom: &FlatGeometry,
    values: &[f64],
    ctx: &StepContext,
    flux: &FluxField,
    rec: &Reconstruction,
) -> Result<Vec<f64>> {
    let traces = if rec.enabled {
        let g = reconstruct(values, mesh, geom, rec.limiter);
        edge_traces(values, mesh, geom, &g)
    } else {
        first_order_traces(mesh, values)
    };
    update(mesh, values, &traces, ctx, flux)
}

/// Heun's method: `u* = uⁿ + dt·L(uⁿ)`, `uⁿ⁺¹ = ½(uⁿ + u* + dt·L(u*))`.
pub fn rk2_step(
    mesh: &TriMesh,
    geom: &FlatGeometry,
    state: &CellField,
    ctx: &StepContext,
    flux: &FluxField,
    rec: &Reconstruction,
) -> Result<CellField> {
    if ctx.areas_now != ctx.areas_next {
        return Err(Error::Unsupported("second-order steps on moving surfaces".into()));
    }
    let star = rk2_stage(mesh, geom, &state.values, ctx, flux, rec)?;
    let second = rk2_stage(mesh, geom, &star, ctx, flux, rec)?;
    let values = state.values.iter().zip(&second).map(|(u, w)| 0.5 * (u + w)).collect();
    Ok(CellField {
        values,
        time: ctx.t + ctx.dt,
    })
}
