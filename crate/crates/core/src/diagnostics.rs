//! Measured convergence orders of the geometric approximation errors:
//! normals, lengths and areas, conormals, numerical fluxes, and the area
//! quotients of moving cells.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::FluxField;
use crate::geometry::{FlatCellGeom, FlatGeometry};
use crate::mesh::{mesh_quality, TriMesh};
use crate::motion::SurfaceMotion;
use crate::quadrature::{IntervalRule, TriangleRule};
use crate::solver::{CurvedScheme, Discretization, FlatScheme};
use crate::sphere::{arc_length, arc_tangent, spherical_triangle_area, SphereSurface};
use crate::vec3::Vec3;

/// Exact geometry of a static surface, as seen from a polyhedral mesh.
pub trait SurfaceOracle: Sync {
    /// Closest point on the surface.
    fn project(&self, x: Vec3) -> Result<Vec3>;
    /// Unit normal at the closest point of `x`.
    fn normal(&self, x: Vec3) -> Result<Vec3>;
    /// Area of the lifted cell with vertices `p`.
    fn curved_area(&self, p: [Vec3; 3]) -> Result<f64>;
    /// Length of the lifted edge `p → q`.
    fn curved_length(&self, p: Vec3, q: Vec3) -> Result<f64>;
    /// Unit tangent of the lifted edge `p → q` at its point `x`.
    fn curved_tangent(&self, p: Vec3, q: Vec3, x: Vec3) -> Result<Vec3>;
}

impl SurfaceOracle for SphereSurface {
    fn project(&self, x: Vec3) -> Result<Vec3> {
        SphereSurface::project(self, x, 0.0)
    }

    fn normal(&self, x: Vec3) -> Result<Vec3> {
        SphereSurface::normal(self, x)
    }

    fn curved_area(&self, p: [Vec3; 3]) -> Result<f64> {
        let c = self.center();
        spherical_triangle_area(p[0] - c, p[1] - c, p[2] - c, self.radius(0.0))
    }

    fn curved_length(&self, p: Vec3, q: Vec3) -> Result<f64> {
        let c = self.center();
        Ok(arc_length(p - c, q - c, self.radius(0.0)))
    }

    fn curved_tangent(&self, p: Vec3, q: Vec3, x: Vec3) -> Result<Vec3> {
        let c = self.center();
        arc_tangent(p - c, q - c, x - c)
    }
}

/// The plane `⟨normal, x⟩ = offset`: its own polyhedral approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneOracle {
    pub normal: Vec3,
    pub offset: f64,
}

impl SurfaceOracle for PlaneOracle {
    fn project(&self, x: Vec3) -> Result<Vec3> {
        Ok(x - self.normal * (self.normal.dot(x) - self.offset))
    }

    fn normal(&self, _x: Vec3) -> Result<Vec3> {
        Ok(self.normal)
    }

    fn curved_area(&self, p: [Vec3; 3]) -> Result<f64> {
        Ok(crate::geometry::triangle_area(p[0], p[1], p[2]))
    }

    fn curved_length(&self, p: Vec3, q: Vec3) -> Result<f64> {
        Ok(p.distance(q))
    }

    fn curved_tangent(&self, p: Vec3, q: Vec3, _x: Vec3) -> Result<Vec3> {
        (q - p)
            .normalized()
            .ok_or_else(|| Error::Geometry("zero-length edge".into()))
    }
}

/// Per-level maxima of one error quantity and their fitted order.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderReport {
    pub quantity: String,
    /// Level, or sweep index for time-step sweeps.
    pub levels: Vec<u32>,
    /// Mesh width (or time step) per entry, strictly decreasing.
    pub h: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub expected: f64,
    /// Accepted slope interval.
    pub band: (f64, f64),
}

impl OrderReport {
    pub fn new(
        quantity: impl Into<String>,
        levels: Vec<u32>,
        h: Vec<f64>,
        values: Vec<f64>,
        expected: f64,
        band: (f64, f64),
    ) -> Result<Self> {
        if h.len() < 3 || h.len() != values.len() || h.len() != levels.len() {
            return Err(Error::TooFewLevels {
                needed: 3,
                got: h.len().min(values.len()),
            });
        }
        if h.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Parameter("mesh widths must decrease strictly".into()));
        }
        let slope = if values.iter().all(|&v| v == 0.0) {
            f64::NAN
        } else {
            fit_order(&h, &values)?
        };
        Ok(OrderReport {
            quantity: quantity.into(),
            levels,
            h,
            values,
            slope,
            expected,
            band,
        })
    }

    pub fn passed(&self) -> bool {
        self.slope >= self.band.0 && self.slope <= self.band.1
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "level,h,value")?;
        for ((l, h), v) in self.levels.iter().zip(&self.h).zip(&self.values) {
            writeln!(w, "{l},{h:.6e},{v:.6e}")?;
        }
        writeln!(
            w,
            "# {}: slope={:.3} expected={} band=[{}, {}] {}",
            self.quantity,
            self.slope,
            self.expected,
            self.band.0,
            self.band.1,
            if self.passed() { "pass" } else { "fail" }
        )?;
        Ok(())
    }
}

impl fmt::Display for OrderReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: slope {:.3} (expected {}, band [{}, {}]) {}",
            self.quantity,
            self.slope,
            self.expected,
            self.band.0,
            self.band.1,
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

/// Least-squares slope of `log e` against `log h`. Zero entries are exact
/// results and are left out with a warning.
pub fn fit_order(h: &[f64], e: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|&(_, &v)| {
            if v == 0.0 {
                log::warn!("fit_order: excluding an exact zero");
            }
            v != 0.0
        })
        .map(|(&x, &y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooFewLevels {
            needed: 2,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("all mesh widths are equal".into()));
    }
    Ok(sxy / sxx)
}

fn widths(family: &[TriMesh]) -> Result<Vec<f64>> {
    family.iter().map(|m| Ok(mesh_quality(m, m.vertices())?.h)).collect()
}

fn levels(family: &[TriMesh]) -> Vec<u32> {
    family.iter().map(|m| m.level()).collect()
}

fn par_max(it: impl ParallelIterator<Item = Result<f64>>) -> Result<f64> {
    it.try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Sample points of a cell: its vertices and the degree-five nodes.
fn cell_samples(p: [Vec3; 3]) -> impl Iterator<Item = Vec3> {
    let rule = TriangleRule::degree5();
    let nodes: Vec<Vec3> = rule
        .nodes
        .iter()
        .map(|l| p[0] * l[0] + p[1] * l[1] + p[2] * l[2])
        .collect();
    p.into_iter().chain(nodes)
}

/// `max ‖ν(a(y)) − ν̄_K‖` over cells and sampled `y ∈ K̄`; expected order 1.
pub fn normal_deviation(family: &[TriMesh], oracle: &dyn SurfaceOracle) -> Result<OrderReport> {
    let values = family
        .iter()
        .map(|m| {
            par_max((0..m.num_cells()).into_par_iter().map(|k| {
                let p = m.cell_points(k, m.vertices());
                let g = FlatCellGeom::new(k, p)?;
                let mut worst: f64 = 0.0;
                for y in cell_samples(p) {
                    worst = worst.max((oracle.normal(y)? - g.normal).norm());
                }
                Ok(worst)
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    OrderReport::new(
        "normal deviation",
        levels(family),
        widths(family)?,
        values,
        1.0,
        (0.85, 1.15),
    )
}

/// `max ||e|/|ē| − 1|` and `max ||K|/|K̄| − 1|`; expected order 2 each.
pub fn length_area_ratios(family: &[TriMesh], oracle: &dyn SurfaceOracle) -> Result<(OrderReport, OrderReport)> {
    let mut lengths = Vec::new();
    let mut areas = Vec::new();
    for m in family {
        let pos = m.vertices();
        lengths.push(par_max(m.edges().par_iter().map(|e| {
            let (a, b) = (pos[e.vertices[0]], pos[e.vertices[1]]);
            let curved = oracle.curved_length(oracle.project(a)?, oracle.project(b)?)?;
            Ok((curved / a.distance(b) - 1.0).abs())
        }))?);
        areas.push(par_max((0..m.num_cells()).into_par_iter().map(|k| {
            let p = m.cell_points(k, pos);
            let curved = oracle.curved_area([oracle.project(p[0])?, oracle.project(p[1])?, oracle.project(p[2])?])?;
            Ok((curved / crate::geometry::triangle_area(p[0], p[1], p[2]) - 1.0).abs())
        }))?);
    }
    let (lv, h) = (levels(family), widths(family)?);
    Ok((
        OrderReport::new("edge length ratio", lv.clone(), h.clone(), lengths, 2.0, (1.8, 2.2))?,
        OrderReport::new("cell area ratio", lv, h, areas, 2.0, (1.8, 2.2))?,
    ))
}

/// The three conormal estimates and the smallest `⟨μ̄, μ⟩` seen.
#[derive(Clone, Debug, PartialEq)]
pub struct ConormalReports {
    /// `|⟨μ̄, t⟩|`, expected order 2.
    pub tangential: OrderReport,
    /// `|⟨μ̄, ν⟩|`, expected order 1.
    pub normal: OrderReport,
    /// `|⟨μ̄, μ⟩ − 1|`, expected order 2.
    pub alignment: OrderReport,
    /// Per level, the minimum of `⟨μ̄, μ⟩`.
    pub min_alignment: Vec<f64>,
}

/// Compares the averaged conormal `μ̄` of every edge with the tangent `t`,
/// normal `ν` and conormal `μ` of the lifted edge at the lifts of the edge
/// quadrature nodes and endpoints.
pub fn conormal_estimates(family: &[TriMesh], oracle: &dyn SurfaceOracle) -> Result<ConormalReports> {
    let rule = IntervalRule::gauss(3);
    let params: Vec<f64> = [0.0, 1.0].into_iter().chain(rule.nodes.iter().copied()).collect();
    let mut vals = [Vec::new(), Vec::new(), Vec::new()];
    let mut mins = Vec::new();
    for m in family {
        let pos = m.vertices();
        let geom = FlatGeometry::compute(m, pos)?;
        let per_edge = m
            .edges()
            .par_iter()
            .zip(geom.edges.par_iter())
            .map(|(e, g)| {
                let (a, b) = (pos[e.vertices[0]], pos[e.vertices[1]]);
                let (pa, pb) = (oracle.project(a)?, oracle.project(b)?);
                let mu_bar = g.conormal_left;
                let outward = g.midpoint - geom.cells[e.left].barycenter;
                let mut w = [0.0f64, 0.0, 0.0, f64::INFINITY];
                for &s in &params {
                    let x = oracle.project(a.lerp(b, s))?;
                    let t = oracle.curved_tangent(pa, pb, x)?;
                    let nu = oracle.normal(x)?;
                    let mut mu = t.cross(nu);
                    if mu.dot(outward) < 0.0 {
                        mu = -mu;
                    }
                    let al = mu_bar.dot(mu);
                    w[0] = w[0].max(mu_bar.dot(t).abs());
                    w[1] = w[1].max(mu_bar.dot(nu).abs());
                    w[2] = w[2].max((al - 1.0).abs());
                    w[3] = w[3].min(al);
                }
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?;
        for i in 0..3 {
            vals[i].push(per_edge.iter().map(|w| w[i]).fold(0.0, f64::max));
        }
        mins.push(per_edge.iter().map(|w| w[3]).fold(f64::INFINITY, f64::min));
    }
    let (lv, h) = (levels(family), widths(family)?);
    let [t, n, a] = vals;
    Ok(ConormalReports {
        tangential: OrderReport::new("conormal vs tangent", lv.clone(), h.clone(), t, 2.0, (1.8, 2.2))?,
        normal: OrderReport::new("conormal vs normal", lv.clone(), h.clone(), n, 1.0, (0.85, 1.15))?,
        alignment: OrderReport::new("conormal alignment", lv, h, a, 2.0, (1.8, 2.2))?,
        min_alignment: mins,
    })
}

/// States `(u, v)` on a 5×5 grid over `box_`.
pub fn state_grid(box_: (f64, f64)) -> Vec<(f64, f64)> {
    let s: Vec<f64> = (0..5).map(|i| box_.0 + (box_.1 - box_.0) * i as f64 / 4.0).collect();
    s.iter().flat_map(|&u| s.iter().map(move |&v| (u, v))).collect()
}

/// `max |f_{K,e}(u, v) − f̄_{K̄,ē}(u, v)|` over edges and a state grid on the
/// unit sphere with the same `λ` in both fluxes; expected order 2.
pub fn flux_difference(family: &[TriMesh], flux: &FluxField, box_: (f64, f64)) -> Result<OrderReport> {
    let states = state_grid(box_);
    let values = family
        .iter()
        .map(|m| {
            let curved = CurvedScheme::stationary(m, 1.0).edge_moments(flux, 0.0, 0.0)?;
            let flat = FlatScheme::stationary(m, 1.0).edge_moments(flux, 0.0, 0.0)?;
            Ok((0..m.num_edges())
                .into_par_iter()
                .map(|e| {
                    states
                        .iter()
                        .map(|&(u, v)| (curved.mean_flux(flux, e, u, v) - flat.mean_flux(flux, e, u, v)).abs())
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    OrderReport::new(
        format!("flux difference ({}, lambda = {})", flux.kind, flux.lambda),
        levels(family),
        widths(family)?,
        values,
        2.0,
        (1.8, 2.2),
    )
}

/// The two area quotients of one step `[t0, t1]`:
/// `max | |K(t0)|/|K̄(t0)| − |K(t1)|/|K̄(t1)| |` and
/// `max | (|K̄(t0)|/|K̄(t1)|)·(|K(t1)|/|K(t0)|) − 1 |`.
pub fn area_quotients(curved: &CurvedScheme, flat: &FlatScheme, t0: f64, t1: f64) -> Result<(f64, f64)> {
    let (c0, c1) = (curved.cell_areas(t0)?, curved.cell_areas(t1)?);
    let (f0, f1) = (flat.cell_areas(t0)?, flat.cell_areas(t1)?);
    let mut q = (0.0f64, 0.0f64);
    for k in 0..c0.len() {
        q.0 = q.0.max((c0[k] / f0[k] - c1[k] / f1[k]).abs());
        q.1 = q.1.max(((f0[k] / f1[k]) * (c1[k] / c0[k]) - 1.0).abs());
    }
    Ok(q)
}

/// Start times at which the quotients are sampled.
pub const QUOTIENT_TIMES: [f64; 4] = [0.1, 0.3, 0.5, 0.7];

fn quotient_max(mesh: &TriMesh, motion: &SurfaceMotion, sphere: &SphereSurface, dt: f64) -> Result<(f64, f64)> {
    let curved = CurvedScheme::new(mesh, motion.clone(), sphere.clone());
    let flat = FlatScheme::new(mesh, motion.clone(), Default::default());
    let mut q = (0.0f64, 0.0f64);
    for &t in &QUOTIENT_TIMES {
        let (a, b) = area_quotients(&curved, &flat, t, t + dt)?;
        q = (q.0.max(a), q.1.max(b));
    }
    Ok(q)
}

/// Quotient reports: both quantities against `h` at fixed `dt` over the
/// family, then against `dt` on `family[sweep_mesh]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientReports {
    pub ratio_change_h: OrderReport,
    pub quotient_h: OrderReport,
    pub ratio_change_dt: OrderReport,
    pub quotient_dt: OrderReport,
}

/// The two quotients on a moving sphere of radius `sphere.radius(t)` whose
/// vertices follow `motion`, sampled at [`QUOTIENT_TIMES`]; expected to
/// scale like `h·Δt`.
pub fn quotient_lemma(
    family: &[TriMesh],
    motion: &SurfaceMotion,
    sphere: &SphereSurface,
    fixed_dt: f64,
    sweep_mesh: usize,
    dts: &[f64],
) -> Result<QuotientReports> {
    let (lv, h) = (levels(family), widths(family)?);
    let by_h = family
        .iter()
        .map(|m| quotient_max(m, motion, sphere, fixed_dt))
        .collect::<Result<Vec<_>>>()?;
    let m = family
        .get(sweep_mesh)
        .ok_or_else(|| Error::Parameter(format!("no mesh {sweep_mesh} in the family")))?;
    let by_dt = dts
        .iter()
        .map(|&dt| quotient_max(m, motion, sphere, dt))
        .collect::<Result<Vec<_>>>()?;
    let idx: Vec<u32> = (0..dts.len() as u32).collect();
    Ok(QuotientReports {
        ratio_change_h: OrderReport::new(
            "area ratio change vs h",
            lv.clone(),
            h.clone(),
            by_h.iter().map(|q| q.0).collect(),
            1.0,
            (0.8, 1.2),
        )?,
        quotient_h: OrderReport::new(
            "area quotient vs h",
            lv,
            h,
            by_h.iter().map(|q| q.1).collect(),
            1.0,
            (0.8, 1.2),
        )?,
        ratio_change_dt: OrderReport::new(
            "area ratio change vs dt",
            idx.clone(),
            dts.to_vec(),
            by_dt.iter().map(|q| q.0).collect(),
            1.0,
            (0.8, 1.2),
        )?,
        quotient_dt: OrderReport::new(
            "area quotient vs dt",
            idx,
            dts.to_vec(),
            by_dt.iter().map(|q| q.1).collect(),
            1.0,
            (0.8, 1.2),
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_icosphere, icosphere_family};

    #[test]
    fn fit_order_examples() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let e1: Vec<f64> = h.to_vec();
        let e2: Vec<f64> = h.iter().map(|x| x * x).collect();
        assert!((fit_order(&h, &e1).unwrap() - 1.0).abs() < 1e-12);
        assert!((fit_order(&h, &e2).unwrap() - 2.0).abs() < 1e-12);
        let mut z = e2.clone();
        z[1] = 0.0;
        assert!((fit_order(&h, &z).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn report_needs_three_levels() {
        let fam = icosphere_family(1..=2).unwrap();
        assert!(matches!(
            normal_deviation(&fam, &SphereSurface::unit()),
            Err(Error::TooFewLevels { .. })
        ));
    }

    #[test]
    fn plane_oracle_gives_zero_deviation() {
        let plane = PlaneOracle {
            normal: Vec3::Z,
            offset: 0.0,
        };
        let p = [Vec3::ZERO, Vec3::X, Vec3::Y];
        let g = FlatCellGeom::new(0, p).unwrap();
        for y in cell_samples(p) {
            assert_eq!((plane.normal(y).unwrap() - g.normal).norm(), 0.0);
        }
        assert_eq!(plane.curved_area(p).unwrap(), 0.5);
        assert_eq!(plane.curved_length(Vec3::ZERO, Vec3::X).unwrap(), 1.0);
    }

    #[test]
    fn octant_arc_chord_ratio() {
        let s = SphereSurface::unit();
        let r = s.curved_length(Vec3::X, Vec3::Y).unwrap() / Vec3::X.distance(Vec3::Y) - 1.0;
        assert!((r - 0.110_720_734_539_591_6).abs() < 1e-14);
    }

    #[test]
    fn static_quotients_vanish() {
        let m = build_icosphere(2).unwrap();
        let c = CurvedScheme::stationary(&m, 1.0);
        let f = FlatScheme::stationary(&m, 1.0);
        assert_eq!(area_quotients(&c, &f, 0.1, 0.2).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn uniform_scaling_keeps_quotient_at_round_off() {
        let m = build_icosphere(2).unwrap();
        let motion = SurfaceMotion::scaled_sphere(|t| 1.0 + t / 2.0, 1.0);
        let sphere = SphereSurface::scaled(|t| 1.0 + t / 2.0);
        let c = CurvedScheme::new(&m, motion.clone(), sphere);
        let f = FlatScheme::new(&m, motion, Default::default());
        let (q1, q2) = area_quotients(&c, &f, 0.1, 0.3).unwrap();
        assert!(q1 < 1e-13 && q2 < 1e-13, "{q1} {q2}");
    }
}
