//! Exact curved geometry on spheres of time-dependent radius.
//!
//! Everything the curved scheme needs is available in closed form here:
//! closest-point projection, signed distance, spherical triangle areas,
//! great-circle arc lengths, exact conormals, and edge integrals of
//! divergence-free fields written as `ν × ∇H` (which reduce to endpoint
//! differences of the stream function `H`).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::two_diff;
use crate::geometry::{barycenter, triangle_area};
use crate::initial::InitialData;
use crate::quadrature::TriangleRule;
use crate::vec3::Vec3;

/// Deepest subdivision allowed by [`curved_cell_mean`] before giving up.
pub const MAX_MEAN_DEPTH: u32 = 12;
/// Subdivision depth at which cells cut by a discontinuity are resolved by
/// linear interpolation of the level set.
pub const CUT_DEPTH: u32 = 10;

/// Sphere `{ x : |x − center| = R(t) }`.
#[derive(Clone)]
pub struct SphereSurface {
    center: Vec3,
    radius: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    constant: bool,
}

impl fmt::Debug for SphereSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereSurface")
            .field("center", &self.center)
            .field("R(0)", &self.radius(0.0))
            .field("constant", &self.constant)
            .finish()
    }
}

impl SphereSurface {
    pub fn unit() -> Self {
        Self::with_radius(1.0)
    }

    pub fn with_radius(r: f64) -> Self {
        assert!(r > 0.0, "sphere radius must be positive");
        SphereSurface {
            center: Vec3::ZERO,
            radius: Arc::new(move |_| r),
            constant: true,
        }
    }

    /// Sphere about the origin whose radius follows `radius(t) > 0`.
    pub fn scaled(radius: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SphereSurface {
            center: Vec3::ZERO,
            radius: Arc::new(radius),
            constant: false,
        }
    }

    pub fn with_center(mut self, center: Vec3) -> Self {
        self.center = center;
        self
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    #[inline]
    pub fn radius(&self, t: f64) -> f64 {
        (self.radius)(t)
    }

    pub fn is_static(&self) -> bool {
        self.constant
    }

    /// Closest point `a(x, t)` on the sphere.
    pub fn project(&self, x: Vec3, t: f64) -> Result<Vec3> {
        let d = x - self.center;
        let dir = d
            .normalized()
            .ok_or_else(|| Error::Geometry("projection of the sphere centre is undefined".into()))?;
        Ok(self.center + dir * self.radius(t))
    }

    /// `|x − center| − R(t)`: positive outside.
    pub fn signed_distance(&self, x: Vec3, t: f64) -> f64 {
        (x - self.center).norm() - self.radius(t)
    }

    /// Outward unit normal `ν(a(x, t))`, i.e. `∇d`.
    pub fn normal(&self, x: Vec3) -> Result<Vec3> {
        (x - self.center)
            .normalized()
            .ok_or_else(|| Error::Geometry("normal at the sphere centre is undefined".into()))
    }
}

/// Angle subtended at the origin by `p` and `q`.
#[inline]
pub fn central_angle(p: Vec3, q: Vec3) -> f64 {
    p.cross(q).norm().atan2(p.dot(q))
}

/// Great-circle distance between the directions `p`, `q` on a sphere of radius `r`.
#[inline]
pub fn arc_length(p: Vec3, q: Vec3, r: f64) -> f64 {
    r * central_angle(p, q)
}

/// Area of the spherical triangle with vertex directions `p0, p1, p2` on a
/// sphere of radius `r`, by l'Huilier's formula for the spherical excess.
pub fn spherical_triangle_area(p0: Vec3, p1: Vec3, p2: Vec3, r: f64) -> Result<f64> {
    let (u0, u1, u2) = match (p0.normalized(), p1.normalized(), p2.normalized()) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::Geometry("spherical triangle vertex at the centre".into())),
    };
    const ANTIPODAL: f64 = -1.0 + 1e-12;
    if u0.dot(u1) < ANTIPODAL || u1.dot(u2) < ANTIPODAL || u2.dot(u0) < ANTIPODAL {
        return Err(Error::Geometry("antipodal vertex pair in spherical triangle".into()));
    }
    Ok(r * r * lhuilier_excess(u0, u1, u2))
}

#[inline]
fn lhuilier_excess(u0: Vec3, u1: Vec3, u2: Vec3) -> f64 {
    let a = central_angle(u1, u2);
    let b = central_angle(u2, u0);
    let c = central_angle(u0, u1);
    let s = 0.5 * (a + b + c);
    let prod = (0.5 * s).tan() * (0.5 * (s - a)).tan() * (0.5 * (s - b)).tan() * (0.5 * (s - c)).tan();
    4.0 * prod.max(0.0).sqrt().atan()
}

/// Unit conormal of the great-circle arc through `p`, `q`, pointing away from
/// the cell whose third vertex is `r`. It is constant along the arc.
pub fn curved_conormal(p: Vec3, q: Vec3, r: Vec3) -> Result<Vec3> {
    let m = p
        .cross(q)
        .normalized()
        .ok_or_else(|| Error::Geometry("degenerate arc: endpoints parallel".into()))?;
    Ok(if m.dot(r) > 0.0 { -m } else { m })
}

/// Unit tangent of the great circle through `p`, `q` at the point `x` of it.
pub fn arc_tangent(p: Vec3, q: Vec3, x: Vec3) -> Result<Vec3> {
    let m = p
        .cross(q)
        .normalized()
        .ok_or_else(|| Error::Geometry("degenerate arc: endpoints parallel".into()))?;
    m.cross(x)
        .normalized()
        .ok_or_else(|| Error::Geometry("tangent at the centre is undefined".into()))
}

/// `∫_e ⟨ν × ∇H, μ⟩ de` over the arc `p → q` with conormal `mu`, as an exact
/// `(difference, rounding error)` pair of stream-function values. The
/// endpoints are taken in the order for which `μ × ν` is the forward tangent.
pub fn exact_edge_flux_integral(stream: impl Fn(Vec3) -> f64, p: Vec3, q: Vec3, mu: Vec3) -> (f64, f64) {
    let nu_mid = (p + q).normalized().unwrap_or(p);
    let forward = mu.cross(nu_mid);
    if forward.dot(q - p) >= 0.0 {
        two_diff(stream(q), stream(p))
    } else {
        two_diff(stream(p), stream(q))
    }
}

/// Mean of `⟨ν × ∇H, μ⟩` over the arc between `p` and `q` on the sphere of
/// radius `r` about the origin.
pub fn exact_edge_flux_average(stream: impl Fn(Vec3) -> f64, p: Vec3, q: Vec3, mu: Vec3, r: f64) -> Result<f64> {
    let len = arc_length(p, q, r);
    if !(len > 0.0) {
        return Err(Error::Geometry("zero-length arc".into()));
    }
    let (d, e) = exact_edge_flux_integral(stream, p, q, mu);
    Ok((d + e) / len)
}

/// Exact curved quantities of one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvedCellGeom {
    pub area: f64,
    /// Vertices scaled to the unit sphere.
    pub vertices: [Vec3; 3],
}

impl CurvedCellGeom {
    pub fn new(p: [Vec3; 3], r: f64) -> Result<Self> {
        let area = spherical_triangle_area(p[0], p[1], p[2], r)?;
        Ok(CurvedCellGeom {
            area,
            vertices: p.map(|x| x / x.norm()),
        })
    }
}

/// Mean of `u0` over the spherical triangle with vertex directions `p`
/// (unit sphere about the origin), by adaptive four-way subdivision.
///
/// Each sub-triangle is the radial image of a flat sub-triangle of the chord
/// triangle; its exact area comes from l'Huilier's formula and the integrand
/// mean from a degree-five rule weighted by the Jacobian of the radial
/// projection. Subdivision stops once the children agree with their parent
/// to `tol` relative to the parent's area. Half-space indicators are
/// classified exactly where the cut cannot reach and resolved by the linear
/// level set at depth [`CUT_DEPTH`] where it can.
pub fn curved_cell_mean(u0: &InitialData, p: [Vec3; 3], tol: f64) -> Result<f64> {
    if let InitialData::Constant(c) = u0 {
        return Ok(*c);
    }
    let q = [p[0] / p[0].norm(), p[1] / p[1].norm(), p[2] / p[2].norm()];
    let mut acc = MeanAcc::default();
    match u0 {
        InitialData::HalfSpace {
            normal,
            offset,
            inside,
            outside,
        } => {
            let cut = HalfSpaceCut {
                normal: *normal,
                offset: *offset,
                inside: *inside,
                outside: *outside,
            };
            integrate_cut(&cut, q, 0, &mut acc)?;
        }
        _ => {
            let rule = TriangleRule::degree5();
            let est = estimate(u0, &rule, q)?;
            integrate_smooth(u0, &rule, q, est, 0, tol, &mut acc)?;
        }
    }
    Ok(acc.integral / acc.area)
}

#[derive(Default)]
struct MeanAcc {
    integral: f64,
    area: f64,
}

fn split(t: [Vec3; 3]) -> [[Vec3; 3]; 4] {
    let m01 = t[0].lerp(t[1], 0.5);
    let m12 = t[1].lerp(t[2], 0.5);
    let m20 = t[2].lerp(t[0], 0.5);
    [[t[0], m01, m20], [m01, t[1], m12], [m20, m12, t[2]], [m01, m12, m20]]
}

/// `(area, integral)` of one flat sub-triangle lifted to the unit sphere.
fn estimate(u0: &InitialData, rule: &TriangleRule, t: [Vec3; 3]) -> Result<(f64, f64)> {
    let area = spherical_triangle_area(t[0], t[1], t[2], 1.0)?;
    let n = (t[1] - t[0]).cross(t[2] - t[0]);
    let (mut num, mut den) = (0.0, 0.0);
    for (l, w) in rule.iter() {
        let y = t[0] * l[0] + t[1] * l[1] + t[2] * l[2];
        let r = y.norm();
        let jac = w * n.dot(y).abs() / (r * r * r);
        num += jac * u0.eval(y / r);
        den += jac;
    }
    Ok((area, area * num / den))
}

fn integrate_smooth(
    u0: &InitialData,
    rule: &TriangleRule,
    t: [Vec3; 3],
    est: (f64, f64),
    depth: u32,
    tol: f64,
    acc: &mut MeanAcc,
) -> Result<()> {
    let kids = split(t);
    let mut ests = [(0.0, 0.0); 4];
    for (e, k) in ests.iter_mut().zip(kids.iter()) {
        *e = estimate(u0, rule, *k)?;
    }
    let fine: f64 = ests.iter().map(|e| e.1).sum();
    if (fine - est.1).abs() <= tol * est.0 {
        for e in &ests {
            acc.area += e.0;
            acc.integral += e.1;
        }
        return Ok(());
    }
    if depth + 1 >= MAX_MEAN_DEPTH {
        return Err(Error::Tolerance {
            tol,
            depth: MAX_MEAN_DEPTH,
        });
    }
    for (k, e) in kids.iter().zip(ests) {
        integrate_smooth(u0, rule, *k, e, depth + 1, tol, acc)?;
    }
    Ok(())
}

struct HalfSpaceCut {
    normal: Vec3,
    offset: f64,
    inside: f64,
    outside: f64,
}

fn integrate_cut(cut: &HalfSpaceCut, t: [Vec3; 3], depth: u32, acc: &mut MeanAcc) -> Result<()> {
    let lifted = t.map(|y| y / y.norm());
    let phi = lifted.map(|x| cut.normal.dot(x) - cut.offset);
    // the lifted sub-triangle lies in the cap about ĉ through its farthest vertex
    let c = barycenter(lifted);
    let c = c / c.norm();
    let reach = lifted.iter().map(|x| x.distance(c)).fold(0.0, f64::max) * cut.normal.norm();
    let phi_c = cut.normal.dot(c) - cut.offset;
    let area = spherical_triangle_area(t[0], t[1], t[2], 1.0)?;
    let uniform = phi_c.abs() > 1.01 * reach && phi.iter().all(|&v| (v > 0.0) == (phi_c > 0.0));
    if uniform {
        let v = if phi_c > 0.0 { cut.inside } else { cut.outside };
        acc.area += area;
        acc.integral += area * v;
        return Ok(());
    }
    if depth >= CUT_DEPTH {
        let f = positive_fraction(phi);
        acc.area += area;
        acc.integral += area * (f * cut.inside + (1.0 - f) * cut.outside);
        return Ok(());
    }
    for k in split(t) {
        integrate_cut(cut, k, depth + 1, acc)?;
    }
    Ok(())
}

/// Area fraction of a triangle on which the linear interpolant of the vertex
/// values `phi` is positive.
pub fn positive_fraction(phi: [f64; 3]) -> f64 {
    let pos = phi.iter().filter(|&&v| v > 0.0).count();
    match pos {
        0 => 0.0,
        3 => 1.0,
        1 => {
            let i = phi.iter().position(|&v| v > 0.0).unwrap();
            corner_fraction(phi, i)
        }
        _ => {
            let i = phi.iter().position(|&v| v <= 0.0).unwrap();
            1.0 - corner_fraction(phi, i)
        }
    }
}

/// Fraction of the corner triangle at vertex `i`, cut where the linear
/// interpolant changes sign along the two adjacent edges.
fn corner_fraction(phi: [f64; 3], i: usize) -> f64 {
    let a = phi[i];
    let b = phi[(i + 1) % 3];
    let c = phi[(i + 2) % 3];
    let s1 = a / (a - b);
    let s2 = a / (a - c);
    (s1 * s2).clamp(0.0, 1.0)
}

/// Exact mean of a half-space indicator over a flat triangle: the level set
/// `⟨n, x⟩ − offset` is linear, so the clipped area is exact.
pub fn flat_half_space_mean(p: [Vec3; 3], normal: Vec3, offset: f64, inside: f64, outside: f64) -> f64 {
    let phi = p.map(|x| normal.dot(x) - offset);
    let f = positive_fraction(phi);
    if f == 1.0 {
        inside
    } else if f == 0.0 {
        outside
    } else {
        f * inside + (1.0 - f) * outside
    }
}

/// Area of a flat triangle; re-exported so oracle users need one import.
pub fn chord_area(p: [Vec3; 3]) -> f64 {
    triangle_area(p[0], p[1], p[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_icosphere;
    use crate::quadrature::IntervalRule;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn projection_and_distance() {
        let s = SphereSurface::unit();
        assert_eq!(s.project(Vec3::new(2.0, 0.0, 0.0), 0.0).unwrap(), Vec3::X);
        let on = Vec3::new(0.6, 0.0, 0.8);
        assert!((s.project(on, 0.0).unwrap() - on).norm() < 1e-16);
        assert_eq!(s.signed_distance(Vec3::new(0.5, 0.0, 0.0), 0.0), -0.5);
        assert_eq!(s.signed_distance(Vec3::new(2.0, 0.0, 0.0), 0.0), 1.0);
        assert_eq!(s.signed_distance(Vec3::Y, 0.0), 0.0);
        assert!(s.project(Vec3::ZERO, 0.0).is_err());
    }

    #[test]
    fn octant_area_and_arc() {
        let a = spherical_triangle_area(Vec3::X, Vec3::Y, Vec3::Z, 1.0).unwrap();
        assert!((a - FRAC_PI_2).abs() < 1e-15);
        assert!((arc_length(Vec3::X, Vec3::Y, 1.0) - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(arc_length(Vec3::X, Vec3::X, 1.0), 0.0);
        assert!((spherical_triangle_area(Vec3::X, Vec3::Y, Vec3::Z, 2.0).unwrap() - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn antipodal_pair_rejected() {
        assert!(spherical_triangle_area(Vec3::X, -Vec3::X, Vec3::Z, 1.0).is_err());
    }

    #[test]
    fn icosphere_cells_partition_the_sphere() {
        for level in 0..=3 {
            let m = build_icosphere(level).unwrap();
            let total: f64 = (0..m.num_cells())
                .map(|k| {
                    let p = m.cell_points(k, m.vertices());
                    spherical_triangle_area(p[0], p[1], p[2], 1.0).unwrap()
                })
                .sum();
            assert!((total - 4.0 * PI).abs() < 1e-10, "level {level}: {total}");
        }
    }

    #[test]
    fn octant_conormal() {
        let mu = curved_conormal(Vec3::X, Vec3::Y, Vec3::Z).unwrap();
        assert_eq!(mu, -Vec3::Z);
        assert!(mu.dot(Vec3::X).abs() < 1e-14 && mu.dot(Vec3::Y).abs() < 1e-14);
        let other = curved_conormal(Vec3::X, Vec3::Y, -Vec3::Z).unwrap();
        assert_eq!(other, -mu);
        assert!(curved_conormal(Vec3::X, Vec3::X * 2.0, Vec3::Z).is_err());
    }

    fn h_v(x: Vec3) -> f64 {
        TAU * x.z
    }

    fn field_v(x: Vec3) -> Vec3 {
        Vec3::new(x.y, -x.x, 0.0) * (TAU / x.norm())
    }

    /// Brute-force `∫⟨V, μ⟩` along the great-circle arc.
    fn arc_quadrature(p: Vec3, q: Vec3, mu: Vec3, n: usize) -> f64 {
        let theta = central_angle(p, q);
        let e = (q - p * p.dot(q)).normalized().unwrap();
        let rule = IntervalRule::gauss(n);
        theta
            * rule
                .iter()
                .map(|(&s, w)| {
                    let x = p * (s * theta).cos() + e * (s * theta).sin();
                    w * field_v(x).dot(mu)
                })
                .sum::<f64>()
    }

    #[test]
    fn equator_edge_carries_no_v_flux() {
        let mu = curved_conormal(Vec3::X, Vec3::Y, Vec3::Z).unwrap();
        let avg = exact_edge_flux_average(h_v, Vec3::X, Vec3::Y, mu, 1.0).unwrap();
        assert_eq!(avg, 0.0);
    }

    #[test]
    fn meridian_edge_matches_arc_quadrature() {
        let mu = curved_conormal(Vec3::X, Vec3::Z, Vec3::Y).unwrap();
        let (d, e) = exact_edge_flux_integral(h_v, Vec3::X, Vec3::Z, mu);
        let brute = arc_quadrature(Vec3::X, Vec3::Z, mu, 64);
        assert!(((d + e) - brute).abs() < 1e-12, "{} vs {brute}", d + e);
        assert!(((d + e).abs() - TAU).abs() < 1e-14);
        let (rd, re) = exact_edge_flux_integral(h_v, Vec3::X, Vec3::Z, -mu);
        assert_eq!(rd + re, -(d + e));
    }

    #[test]
    fn random_edges_match_arc_quadrature() {
        let m = build_icosphere(2).unwrap();
        for (i, e) in m.edges().iter().enumerate().step_by(37) {
            let p = m.vertices()[e.vertices[0]];
            let q = m.vertices()[e.vertices[1]];
            let r = m
                .cell_points(e.left, m.vertices())
                .into_iter()
                .find(|&x| x != p && x != q)
                .unwrap();
            let mu = curved_conormal(p, q, r).unwrap();
            let (d, err) = exact_edge_flux_integral(h_v, p, q, mu);
            let brute = arc_quadrature(p, q, mu, 64);
            assert!(((d + err) - brute).abs() < 1e-12, "edge {i}");
        }
    }

    #[test]
    fn constant_mean_is_exact() {
        let v = curved_cell_mean(&InitialData::Constant(3.25), [Vec3::X, Vec3::Y, Vec3::Z], 1e-10).unwrap();
        assert_eq!(v, 3.25);
    }

    #[test]
    fn octant_mean_of_x3_is_one_half() {
        // ∫ x₃ over the octant is π/4, the area is π/2
        let u0 = InitialData::Function(std::sync::Arc::new(|x: Vec3| x.z));
        let v = curved_cell_mean(&u0, [Vec3::X, Vec3::Y, Vec3::Z], 1e-12).unwrap();
        assert!((v - 0.5).abs() < 1e-10, "{v}");
    }

    #[test]
    fn level3_cells_reach_tight_tolerance() {
        let m = build_icosphere(3).unwrap();
        let u0 = InitialData::Function(std::sync::Arc::new(|x: Vec3| (3.0 * x.x).sin() * x.z + x.y * x.y));
        for k in (0..m.num_cells()).step_by(97) {
            curved_cell_mean(&u0, m.cell_points(k, m.vertices()), 1e-10).unwrap();
        }
    }

    #[test]
    fn indicator_mean_on_octant() {
        // fraction of the octant with x₁ > c is the cap area inside the octant:
        // a quarter of the cap 2π(1 − c) for c ≥ 0
        let c = 0.15;
        let u0 = InitialData::HalfSpace {
            normal: Vec3::X,
            offset: c,
            inside: 1.0,
            outside: 0.0,
        };
        let v = curved_cell_mean(&u0, [Vec3::X, Vec3::Y, Vec3::Z], 1e-10).unwrap();
        let exact = (TAU * (1.0 - c) / 4.0) / FRAC_PI_2;
        assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
    }

    #[test]
    fn fractions_of_linear_level_sets() {
        assert_eq!(positive_fraction([1.0, 1.0, 1.0]), 1.0);
        assert_eq!(positive_fraction([-1.0, -1.0, 0.0]), 0.0);
        assert!((positive_fraction([1.0, -1.0, -1.0]) - 0.25).abs() < 1e-15);
        assert!((positive_fraction([-1.0, 1.0, 1.0]) - 0.75).abs() < 1e-15);
        let p = [Vec3::ZERO, Vec3::X, Vec3::Y];
        // x > 0.5 cuts off the corner triangle at (1,0) of area 1/8 out of 1/2
        assert!((flat_half_space_mean(p, Vec3::X, 0.5, 1.0, 0.0) - 0.25).abs() < 1e-15);
    }
}
