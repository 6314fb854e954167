//! The curved and flat first-order finite volume schemes, CFL time stepping
//! and the run driver.
//!
//! Both schemes share one update kernel. A scheme only has to supply cell
//! areas at the step ends and, per edge, the integrals of `⟨Fₖ, μ⟩` for each
//! spatial flux term `Fₖ` (averaged over the time step and multiplied by the
//! edge length at `tₙ`). The kernel combines them with the state functions
//! `φₖ` and the viscosity term.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::flux::FluxField;
use crate::geometry::{cell_areas, edge_geom, FlatCellGeom};
use crate::initial::InitialData;
use crate::mesh::{mesh_quality, MeshQuality, TriMesh};
use crate::motion::SurfaceMotion;
use crate::quadrature::{quad_cell, IntervalRule, QuadratureSet};
use crate::second_order::{rk2_step, Reconstruction};
use crate::sphere::{
    arc_length, curved_cell_mean, curved_conormal, exact_edge_flux_integral, flat_half_space_mean,
    spherical_triangle_area, SphereSurface,
};
use crate::vec3::Vec3;

/// Piecewise constant values, one per cell, at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl CellField {
    pub fn new(values: Vec<f64>, time: f64) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite value in cell {k}")));
        }
        Ok(CellField { values, time })
    }

    pub fn constant(n: usize, value: f64, time: f64) -> Self {
        CellField {
            values: vec![value; n],
            time,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ |K|·u_K`.
    pub fn mass(&self, areas: &[f64]) -> f64 {
        self.values.iter().zip(areas).map(|(u, a)| u * a).sum()
    }

    /// `Σ |K|·|u_K|`.
    pub fn abs_mass(&self, areas: &[f64]) -> f64 {
        self.values.iter().zip(areas).map(|(u, a)| u.abs() * a).sum()
    }
}

/// Per-edge geometric data of one time step, seen from the left cell.
///
/// `integrals[e·n + k]` is `|e(tₙ)|` times the time and edge mean of
/// `⟨Fₖ, μ_left⟩`, stored as an unevaluated sum `hi + lo`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMoments {
    pub nterms: usize,
    pub integrals: Vec<(f64, f64)>,
    /// `|e(tₙ)|`
    pub lengths: Vec<f64>,
    /// Whether `hi + lo` is exact, so cell balances may be summed exactly.
    pub exact: bool,
}

impl EdgeMoments {
    pub fn row(&self, edge: usize) -> &[(f64, f64)] {
        &self.integrals[edge * self.nterms..(edge + 1) * self.nterms]
    }

    /// `|e(tₙ)|·f_{K,e}(u, v)` for the left cell `K` of `edge`.
    pub fn edge_flux(&self, flux: &FluxField, edge: usize, u: f64, v: f64) -> f64 {
        let mut s = flux.lambda * (u - v) * self.lengths[edge];
        for (t, &(hi, lo)) in flux.terms.iter().zip(self.row(edge)) {
            let c = 0.5 * (t.state.eval(u) + t.state.eval(v));
            s += c * hi + c * lo;
        }
        s
    }

    /// The numerical flux `f_{K,e}(u, v)` itself (per unit length).
    pub fn mean_flux(&self, flux: &FluxField, edge: usize, u: f64, v: f64) -> f64 {
        let len = self.lengths[edge];
        let mut s = 0.0;
        for (t, &(hi, lo)) in flux.terms.iter().zip(self.row(edge)) {
            let c = 0.5 * (t.state.eval(u) + t.state.eval(v));
            s += c * ((hi + lo) / len);
        }
        s + flux.lambda * (u - v)
    }
}

/// Everything one update needs besides the state.
#[derive(Clone, Copy, Debug)]
pub struct StepContext<'a> {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub areas_now: &'a [f64],
    pub areas_next: &'a [f64],
    pub moments: &'a EdgeMoments,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Flat,
    Curved,
}

/// Geometry provider of a finite volume scheme.
pub trait Discretization: Sync {
    fn kind(&self) -> SchemeKind;
    fn mesh(&self) -> &TriMesh;
    fn horizon(&self) -> f64;
    fn is_static(&self) -> bool;
    /// Vertex positions of the polyhedron at `t`.
    fn flat_positions(&self, t: f64) -> Result<Vec<Vec3>>;
    fn cell_areas(&self, t: f64) -> Result<Vec<f64>>;
    /// Writes the `nterms` integrals of `edge` over `[t0, t1]` into `out` and
    /// returns `|e(t0)|`.
    fn edge_moment_into(&self, flux: &FluxField, edge: usize, t0: f64, t1: f64, out: &mut [(f64, f64)]) -> Result<f64>;
    /// Whether [`Discretization::edge_moment_into`] is exact for `flux`.
    fn exact_moments(&self, flux: &FluxField) -> bool;
    fn init(&self, u0: &InitialData) -> Result<CellField>;

    fn edge_moments(&self, flux: &FluxField, t0: f64, t1: f64) -> Result<EdgeMoments> {
        let n = flux.terms.len();
        let ne = self.mesh().num_edges();
        let mut integrals = vec![(0.0, 0.0); ne * n];
        let mut lengths = vec![0.0; ne];
        if n > 0 {
            integrals
                .par_chunks_mut(n)
                .zip(lengths.par_iter_mut())
                .enumerate()
                .try_for_each(|(e, (out, len))| {
                    *len = self.edge_moment_into(flux, e, t0, t1, out)?;
                    Ok::<_, Error>(())
                })?;
        } else {
            lengths.par_iter_mut().enumerate().try_for_each(|(e, len)| {
                *len = self.edge_moment_into(flux, e, t0, t1, &mut [])?;
                Ok::<_, Error>(())
            })?;
        }
        Ok(EdgeMoments {
            nterms: n,
            integrals,
            lengths,
            exact: self.exact_moments(flux),
        })
    }

    /// Regularity of the polyhedron at `t`, used for the CFL bound.
    fn quality(&self, t: f64) -> Result<MeshQuality> {
        mesh_quality(self.mesh(), &self.flat_positions(t)?)
    }
}

fn check_interval(t0: f64, t1: f64, horizon: f64) -> Result<()> {
    if !(0.0 <= t0 && t0 <= t1 && t1 <= horizon) {
        return Err(Error::TimeOutOfRange {
            t: if t0 < 0.0 { t0 } else { t1 },
            horizon,
        });
    }
    Ok(())
}

/// Third vertex of `cell` opposite the edge `(a, b)`.
fn opposite_vertex(mesh: &TriMesh, cell: usize, a: usize, b: usize) -> usize {
    let t = mesh.triangles()[cell];
    t.into_iter()
        .find(|&v| v != a && v != b)
        .expect("cell contains its edge")
}

/// The flat scheme: polyhedral cells, averaged conormals and quadrature.
#[derive(Clone, Debug)]
pub struct FlatScheme<'a> {
    pub mesh: &'a TriMesh,
    pub motion: SurfaceMotion,
    pub quadrature: QuadratureSet,
}

impl<'a> FlatScheme<'a> {
    pub fn new(mesh: &'a TriMesh, motion: SurfaceMotion, quadrature: QuadratureSet) -> Self {
        FlatScheme {
            mesh,
            motion,
            quadrature,
        }
    }

    pub fn stationary(mesh: &'a TriMesh, horizon: f64) -> Self {
        Self::new(mesh, SurfaceMotion::identity(horizon), QuadratureSet::default())
    }

    fn edge_means_at(&self, flux: &FluxField, edge: usize, t: f64, acc: &mut [(f64, f64)], weight: f64) -> Result<f64> {
        let e = self.mesh.edges()[edge];
        let [a, b] = e.vertices;
        let c = opposite_vertex(self.mesh, e.left, a, b);
        let d = opposite_vertex(self.mesh, e.right, a, b);
        let mv = |i: usize| self.motion.move_point(self.mesh.vertices()[i], t);
        let (pa, pb, pc, pd) = (mv(a)?, mv(b)?, mv(c)?, mv(d)?);
        let left = FlatCellGeom::new(e.left, [pa, pb, pc])?;
        let right = FlatCellGeom::new(e.right, [pb, pa, pd])?;
        let g = edge_geom(pa, pb, &left, &right)?;
        let mu = g.conormal_left;
        for (slot, term) in acc.iter_mut().zip(&flux.terms) {
            let mean: f64 = self
                .quadrature
                .edge
                .iter()
                .map(|(&s, w)| w * term.field.eval(pa.lerp(pb, s)).dot(mu))
                .sum();
            slot.0 += weight * mean;
        }
        Ok(g.length)
    }
}

impl Discretization for FlatScheme<'_> {
    fn kind(&self) -> SchemeKind {
        SchemeKind::Flat
    }

    fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    fn horizon(&self) -> f64 {
        self.motion.horizon()
    }

    fn is_static(&self) -> bool {
        self.motion.is_static()
    }

    fn flat_positions(&self, t: f64) -> Result<Vec<Vec3>> {
        self.motion.positions(self.mesh.vertices(), t)
    }

    fn cell_areas(&self, t: f64) -> Result<Vec<f64>> {
        cell_areas(self.mesh, &self.flat_positions(t)?)
    }

    fn edge_moment_into(&self, flux: &FluxField, edge: usize, t0: f64, t1: f64, out: &mut [(f64, f64)]) -> Result<f64> {
        check_interval(t0, t1, self.horizon())?;
        out.fill((0.0, 0.0));
        let len0;
        if self.is_static() || t1 == t0 {
            len0 = self.edge_means_at(flux, edge, t0, out, 1.0)?;
        } else {
            let mut scratch = [(0.0, 0.0)];
            len0 = self.edge_means_at(flux, edge, t0, &mut scratch[..0], 0.0)?;
            for (&s, w) in self.quadrature.time.iter() {
                self.edge_means_at(flux, edge, t0 + s * (t1 - t0), out, w)?;
            }
        }
        for slot in out.iter_mut() {
            slot.0 *= len0;
        }
        Ok(len0)
    }

    fn exact_moments(&self, _flux: &FluxField) -> bool {
        false
    }

    fn init(&self, u0: &InitialData) -> Result<CellField> {
        let pos = self.flat_positions(0.0)?;
        let rule = &self.quadrature.cell;
        let values = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let p = self.mesh.cell_points(k, &pos);
                match u0 {
                    InitialData::Constant(c) => *c,
                    InitialData::HalfSpace {
                        normal,
                        offset,
                        inside,
                        outside,
                    } => flat_half_space_mean(p, *normal, *offset, *inside, *outside),
                    _ => {
                        let area = crate::geometry::triangle_area(p[0], p[1], p[2]);
                        quad_cell(rule, p, |x| u0.eval(x)) / area
                    }
                }
            })
            .collect();
        CellField::new(values, 0.0)
    }
}

/// The curved scheme on a sphere: exact spherical areas, arc lengths,
/// conormals, and endpoint-exact flux integrals.
#[derive(Clone, Debug)]
pub struct CurvedScheme<'a> {
    pub mesh: &'a TriMesh,
    pub motion: SurfaceMotion,
    pub sphere: SphereSurface,
    /// Time rule for moving surfaces.
    pub time_rule: IntervalRule,
    /// Tolerance of the initial cell means.
    pub mean_tol: f64,
    /// Gauss rule along arcs for flux terms without a stream function.
    pub arc_rule: Option<IntervalRule>,
}

impl<'a> CurvedScheme<'a> {
    pub fn new(mesh: &'a TriMesh, motion: SurfaceMotion, sphere: SphereSurface) -> Self {
        CurvedScheme {
            mesh,
            motion,
            sphere,
            time_rule: IntervalRule::gauss(4),
            mean_tol: 1e-10,
            arc_rule: None,
        }
    }

    /// Unit sphere, no motion.
    pub fn stationary(mesh: &'a TriMesh, horizon: f64) -> Self {
        Self::new(mesh, SurfaceMotion::identity(horizon), SphereSurface::unit())
    }

    /// Curved vertex `a(x̄(t), t)` relative to the sphere centre.
    fn vertex(&self, i: usize, t: f64) -> Result<Vec3> {
        let x = self.motion.move_point(self.mesh.vertices()[i], t)?;
        Ok(self.sphere.project(x, t)? - self.sphere.center())
    }

    /// Adds `weight·∫_e⟨Fₖ, μ⟩/|e|` at time `t` (or the raw integral when
    /// `mean` is false) and returns `|e(t)|`.
    fn edge_integrals_at(
        &self,
        flux: &FluxField,
        edge: usize,
        t: f64,
        acc: &mut [(f64, f64)],
        weight: f64,
        mean: bool,
    ) -> Result<f64> {
        let e = self.mesh.edges()[edge];
        let [a, b] = e.vertices;
        let c = opposite_vertex(self.mesh, e.left, a, b);
        let (p, q, r) = (self.vertex(a, t)?, self.vertex(b, t)?, self.vertex(c, t)?);
        let radius = self.sphere.radius(t);
        let len = arc_length(p, q, radius);
        if !(len > 0.0) {
            return Err(Error::Geometry(format!("edge {edge} has zero length")));
        }
        let mu = curved_conormal(p, q, r)?;
        let scale = if mean { weight / len } else { weight };
        for (slot, term) in acc.iter_mut().zip(&flux.terms) {
            let (hi, lo) = match term.field.stream() {
                Some(h) => exact_edge_flux_integral(h, p, q, mu),
                None => {
                    let rule = self.arc_rule.as_ref().ok_or(Error::UnsupportedFlux)?;
                    (arc_integral(rule, p, q, radius, |x| term.field.eval(x).dot(mu)), 0.0)
                }
            };
            if mean || weight != 1.0 {
                slot.0 += scale * (hi + lo);
            } else {
                slot.0 += hi;
                slot.1 += lo;
            }
        }
        Ok(len)
    }
}

/// `∫ g` along the minor great-circle arc from `p` to `q` on the sphere of
/// radius `r` about the origin.
pub fn arc_integral(rule: &IntervalRule, p: Vec3, q: Vec3, r: f64, g: impl Fn(Vec3) -> f64) -> f64 {
    let (pu, qu) = (p / p.norm(), q / q.norm());
    let theta = crate::sphere::central_angle(pu, qu);
    let Some(e) = (qu - pu * pu.dot(qu)).normalized() else {
        return 0.0;
    };
    r * theta
        * rule
            .iter()
            .map(|(&s, w)| w * g((pu * (s * theta).cos() + e * (s * theta).sin()) * r))
            .sum::<f64>()
}

impl Discretization for CurvedScheme<'_> {
    fn kind(&self) -> SchemeKind {
        SchemeKind::Curved
    }

    fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    fn horizon(&self) -> f64 {
        self.motion.horizon()
    }

    fn is_static(&self) -> bool {
        self.motion.is_static() && self.sphere.is_static()
    }

    fn flat_positions(&self, t: f64) -> Result<Vec<Vec3>> {
        self.motion.positions(self.mesh.vertices(), t)
    }

    fn cell_areas(&self, t: f64) -> Result<Vec<f64>> {
        let radius = self.sphere.radius(t);
        (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let [a, b, c] = self.mesh.triangles()[k];
                let area = spherical_triangle_area(self.vertex(a, t)?, self.vertex(b, t)?, self.vertex(c, t)?, radius)?;
                if area > 0.0 {
                    Ok(area)
                } else {
                    Err(Error::DegenerateCell {
                        cell: k,
                        reason: "zero spherical area".into(),
                    })
                }
            })
            .collect()
    }

    fn edge_moment_into(&self, flux: &FluxField, edge: usize, t0: f64, t1: f64, out: &mut [(f64, f64)]) -> Result<f64> {
        check_interval(t0, t1, self.horizon())?;
        out.fill((0.0, 0.0));
        if self.is_static() || t1 == t0 {
            return self.edge_integrals_at(flux, edge, t0, out, 1.0, false);
        }
        let len0 = self.edge_integrals_at(flux, edge, t0, &mut [], 0.0, true)?;
        for (&s, w) in self.time_rule.iter() {
            self.edge_integrals_at(flux, edge, t0 + s * (t1 - t0), out, w, true)?;
        }
        for slot in out.iter_mut() {
            slot.0 *= len0;
        }
        Ok(len0)
    }

    fn exact_moments(&self, flux: &FluxField) -> bool {
        self.is_static() && flux.has_stream()
    }

    fn init(&self, u0: &InitialData) -> Result<CellField> {
        let r0 = self.sphere.radius(0.0);
        let unit = u0.on_unit_sphere(r0);
        let values = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let [a, b, c] = self.mesh.triangles()[k];
                curved_cell_mean(
                    &unit,
                    [self.vertex(a, 0.0)?, self.vertex(b, 0.0)?, self.vertex(c, 0.0)?],
                    self.mean_tol,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        CellField::new(values, 0.0)
    }
}

/// `dt = cfl·α²h/(8L)` with `L = λ + ½·du_bound`; `horizon/16` when `L = 0`.
pub fn cfl_dt(quality: &MeshQuality, flux: &FluxField, cfl: f64, horizon: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::Parameter(format!("CFL factor must lie in (0, 1], got {cfl}")));
    }
    if !(quality.alpha > 0.0) {
        return Err(Error::Parameter(format!(
            "mesh regularity must be positive, got {}",
            quality.alpha
        )));
    }
    let l = flux.lipschitz();
    if l == 0.0 {
        return Ok(horizon / 16.0);
    }
    Ok(cfl * quality.alpha * quality.alpha * quality.h / (8.0 * l))
}

/// Left and right values entering each edge flux: the cell values themselves
/// for the first-order scheme.
pub fn first_order_traces(mesh: &TriMesh, values: &[f64]) -> Vec<(f64, f64)> {
    mesh.edges().iter().map(|e| (values[e.left], values[e.right])).collect()
}

/// The shared update `u' = (|K(tₙ)|/|K(tₙ₊₁)|)·u − dt/|K(tₙ₊₁)|·Σₑ |e|·f_{K,e}`,
/// with edge fluxes evaluated at the given traces.
pub fn update(
    mesh: &TriMesh,
    values: &[f64],
    traces: &[(f64, f64)],
    ctx: &StepContext,
    flux: &FluxField,
) -> Result<Vec<f64>> {
    let m = ctx.moments;
    if values.len() != mesh.num_cells() || traces.len() != mesh.num_edges() || m.lengths.len() != mesh.num_edges() {
        return Err(Error::Parameter(
            "state, traces and geometry sizes do not match the mesh".into(),
        ));
    }
    let new = if m.exact {
        // every component of every edge flux, summed exactly per cell
        let stride = 2 * m.nterms + 1;
        let mut parts = vec![0.0; mesh.num_edges() * stride];
        parts.par_chunks_mut(stride).enumerate().for_each(|(e, out)| {
            let (u, v) = traces[e];
            for (k, (t, &(hi, lo))) in flux.terms.iter().zip(m.row(e)).enumerate() {
                let c = 0.5 * (t.state.eval(u) + t.state.eval(v));
                out[2 * k] = c * hi;
                out[2 * k + 1] = c * lo;
            }
            out[stride - 1] = flux.lambda * (u - v) * m.lengths[e];
        });
        (0..mesh.num_cells())
            .into_par_iter()
            .map_init(ExactSum::new, |acc, k| {
                acc.clear();
                for &e in &mesh.cell_edges()[k] {
                    let sign = mesh.edge_sign(k, e);
                    for &p in &parts[e * stride..(e + 1) * stride] {
                        acc.add(sign * p);
                    }
                }
                cell_update(values[k], acc.value(), k, ctx)
            })
            .collect::<Vec<_>>()
    } else {
        let fluxes: Vec<f64> = (0..mesh.num_edges())
            .into_par_iter()
            .map(|e| m.edge_flux(flux, e, traces[e].0, traces[e].1))
            .collect();
        (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let mut s = 0.0;
                for &e in &mesh.cell_edges()[k] {
                    s += mesh.edge_sign(k, e) * fluxes[e];
                }
                cell_update(values[k], s, k, ctx)
            })
            .collect::<Vec<_>>()
    };
    if let Some(cell) = new.iter().position(|v| !v.is_finite()) {
        return Err(Error::BlowUp { cell, step: ctx.step });
    }
    Ok(new)
}

#[inline]
fn cell_update(u: f64, balance: f64, k: usize, ctx: &StepContext) -> f64 {
    let (a0, a1) = (ctx.areas_now[k], ctx.areas_next[k]);
    if a0 == a1 {
        u - ctx.dt / a1 * balance
    } else {
        (a0 / a1) * u - ctx.dt / a1 * balance
    }
}

fn step_first_order(mesh: &TriMesh, state: &CellField, ctx: &StepContext, flux: &FluxField) -> Result<CellField> {
    let traces = first_order_traces(mesh, &state.values);
    Ok(CellField {
        values: update(mesh, &state.values, &traces, ctx, flux)?,
        time: ctx.t + ctx.dt,
    })
}

/// One step of the flat scheme.
pub fn step_flat(scheme: &FlatScheme, state: &CellField, ctx: &StepContext, flux: &FluxField) -> Result<CellField> {
    step_first_order(scheme.mesh, state, ctx, flux)
}

/// One step of the curved scheme.
pub fn step_curved(scheme: &CurvedScheme, state: &CellField, ctx: &StepContext, flux: &FluxField) -> Result<CellField> {
    step_first_order(scheme.mesh, state, ctx, flux)
}

/// Flat initial cell means `Q_K̄(u₀)/|K̄|`; half-space indicators are clipped exactly.
pub fn init_flat(scheme: &FlatScheme, u0: &InitialData) -> Result<CellField> {
    scheme.init(u0)
}

/// Curved initial cell means by adaptive subdivision.
pub fn init_curved(scheme: &CurvedScheme, u0: &InitialData) -> Result<CellField> {
    scheme.init(u0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    pub cfl: f64,
    /// Cap on `max_K ||K(tₙ₊₁)|/|K(tₙ)| − 1|` on moving surfaces.
    pub max_area_change: f64,
    /// Heun's method with linear reconstruction instead of forward Euler.
    pub second_order: Option<Reconstruction>,
    /// Calls the observer every this many steps (and at the end).
    pub observe_every: Option<usize>,
}

impl RunOptions {
    pub fn new(t_end: f64) -> Self {
        RunOptions {
            t_end,
            cfl: 1.0,
            max_area_change: 0.05,
            second_order: None,
            observe_every: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub field: CellField,
    /// One record per step, starting with the initial state (`dt = 0`).
    pub log: Vec<StepRecord>,
    pub final_areas: Vec<f64>,
    /// Largest `Σ|K||u|` seen during the run.
    pub max_abs_mass: f64,
    /// Total flat area at the start.
    pub initial_area: f64,
}

impl RunOutput {
    pub fn steps(&self) -> usize {
        self.log.len() - 1
    }

    /// `|M(T) − M(0)|` relative to `max(|M(0)|, max_t Σ|K||u|, |Γ_h(0)|)`.
    /// The area term keeps data with near-zero mean from inflating round-off.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.log[0].mass;
        let m1 = self.log[self.log.len() - 1].mass;
        let scale = m0.abs().max(self.max_abs_mass).max(self.initial_area);
        if scale == 0.0 {
            (m1 - m0).abs()
        } else {
            (m1 - m0).abs() / scale
        }
    }
}

/// Writes the step log as CSV: `step,t,dt,mass,min,max`.
pub fn write_step_log_csv(log: &[StepRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "step,t,dt,mass,min,max")?;
    for r in log {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.step, r.t, r.dt, r.mass, r.min, r.max
        )?;
    }
    Ok(())
}

/// Initialises with `u0` and steps to `opts.t_end`.
pub fn run(scheme: &dyn Discretization, flux: &FluxField, u0: &InitialData, opts: &RunOptions) -> Result<RunOutput> {
    let init = scheme.init(u0)?;
    run_from(scheme, flux, init, opts, &mut |_, _| Ok(()))
}

/// Steps `init` to `opts.t_end`, landing exactly on it by shortening the
/// last step. `observer(field, step)` sees the initial field, every
/// `observe_every`-th step and the final field.
pub fn run_from(
    scheme: &dyn Discretization,
    flux: &FluxField,
    init: CellField,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&CellField, usize) -> Result<()>,
) -> Result<RunOutput> {
    let t_end = opts.t_end;
    if !(t_end >= 0.0 && t_end <= scheme.horizon()) {
        return Err(Error::TimeOutOfRange {
            t: t_end,
            horizon: scheme.horizon(),
        });
    }
    if init.len() != scheme.mesh().num_cells() {
        return Err(Error::Parameter("initial field does not match the mesh".into()));
    }
    if opts.second_order.is_some() && !(scheme.kind() == SchemeKind::Flat && scheme.is_static()) {
        return Err(Error::Unsupported(
            "the second-order scheme needs a flat discretisation of a stationary surface".into(),
        ));
    }
    let mesh = scheme.mesh();
    let stationary = scheme.is_static();
    let mut state = init;
    let mut areas_now = scheme.cell_areas(0.0)?;
    let mut log = vec![StepRecord {
        step: 0,
        t: 0.0,
        dt: 0.0,
        mass: state.mass(&areas_now),
        min: state.min(),
        max: state.max(),
    }];
    let mut max_abs_mass = state.abs_mass(&areas_now);
    let initial_area: f64 = areas_now.iter().sum();
    observer(&state, 0)?;

    // a stationary surface has fixed areas, moments and time step
    let fixed = if stationary {
        let q = scheme.quality(0.0)?;
        Some((
            cfl_dt(&q, flux, opts.cfl, t_end.max(f64::MIN_POSITIVE))?,
            scheme.edge_moments(flux, 0.0, 0.0)?,
        ))
    } else {
        None
    };
    let flat_geometry = match opts.second_order {
        Some(_) => Some(crate::geometry::FlatGeometry::compute(
            mesh,
            &scheme.flat_positions(0.0)?,
        )?),
        None => None,
    };

    let mut t = 0.0;
    let mut step = 0;
    while t < t_end {
        step += 1;
        let (dt, areas_next, moving_moments) = match &fixed {
            Some((dt, _)) => {
                let dt = if t + dt >= t_end * (1.0 - 1e-12) {
                    t_end - t
                } else {
                    *dt
                };
                (dt, None, None)
            }
            None => {
                let q = scheme.quality(t)?;
                let mut dt = cfl_dt(&q, flux, opts.cfl, t_end)?;
                if t + dt >= t_end * (1.0 - 1e-12) {
                    dt = t_end - t;
                }
                let next = loop {
                    let next = scheme.cell_areas(t + dt)?;
                    let change = areas_now
                        .iter()
                        .zip(&next)
                        .map(|(a, b)| (b / a - 1.0).abs())
                        .fold(0.0, f64::max);
                    if change <= opts.max_area_change {
                        break next;
                    }
                    dt *= 0.5;
                    if dt < 1e-14 * t_end {
                        return Err(Error::Parameter(format!(
                            "time step collapsed at t = {t}: the motion changes areas too fast"
                        )));
                    }
                };
                let m = scheme.edge_moments(flux, t, t + dt)?;
                (dt, Some(next), Some(m))
            }
        };
        let moments = match (&fixed, &moving_moments) {
            (Some((_, m)), _) => m,
            (None, Some(m)) => m,
            _ => unreachable!(),
        };
        let areas_next_ref: &[f64] = areas_next.as_deref().unwrap_or(&areas_now);
        let ctx = StepContext {
            step,
            t,
            dt,
            areas_now: &areas_now,
            areas_next: areas_next_ref,
            moments,
        };
        let mut next = match (&opts.second_order, &flat_geometry) {
            (Some(rec), Some(geom)) => rk2_step(mesh, geom, &state, &ctx, flux, rec)?,
            _ => step_first_order(mesh, &state, &ctx, flux)?,
        };
        t = if t + dt >= t_end { t_end } else { t + dt };
        next.time = t;
        state = next;
        if let Some(a) = areas_next {
            areas_now = a;
        }
        log.push(StepRecord {
            step,
            t,
            dt,
            mass: state.mass(&areas_now),
            min: state.min(),
            max: state.max(),
        });
        max_abs_mass = max_abs_mass.max(state.abs_mass(&areas_now));
        let due = opts.observe_every.is_some_and(|n| n > 0 && step % n == 0);
        if due || t >= t_end {
            observer(&state, step)?;
        }
        if step % 1000 == 0 {
            log::debug!("step {step}, t = {t:.6}, dt = {dt:.3e}");
        }
    }
    Ok(RunOutput {
        field: state,
        log,
        final_areas: areas_now,
        max_abs_mass,
        initial_area,
    })
}

/// `Σ_K w_K·|a_K − b_K|`.
pub fn l1_diff(a: &CellField, b: &CellField, weights: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != weights.len() {
        return Err(Error::Parameter(format!(
            "field sizes differ: {}, {}, {} weights",
            a.len(),
            b.len(),
            weights.len()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .zip(weights)
        .map(|((x, y), w)| w * (x - y).abs())
        .sum())
}
