//! Prescribed surface motions in Lagrangian form: a map from reference
//! positions and time to current positions.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::vec3::Vec3;

type MotionMap = dyn Fn(Vec3, f64) -> Vec3 + Send + Sync;

/// Strength of the x₁ squeeze in [`torus_deformation`].
pub const TORUS_SQUEEZE: f64 = 0.4;

#[derive(Clone)]
pub struct SurfaceMotion {
    name: &'static str,
    map: Arc<MotionMap>,
    horizon: f64,
    stationary: bool,
}

impl fmt::Debug for SurfaceMotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceMotion")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("stationary", &self.stationary)
            .finish()
    }
}

impl SurfaceMotion {
    /// A custom motion. `map(x, 0)` must return `x`; this is enforced by
    /// never calling `map` at `t = 0`.
    pub fn new(name: &'static str, horizon: f64, map: impl Fn(Vec3, f64) -> Vec3 + Send + Sync + 'static) -> Self {
        SurfaceMotion {
            name,
            map: Arc::new(map),
            horizon,
            stationary: false,
        }
    }

    pub fn identity(horizon: f64) -> Self {
        SurfaceMotion {
            name: "identity",
            map: Arc::new(|x, _| x),
            horizon,
            stationary: true,
        }
    }

    /// `x ↦ (R(t)/R(0))·x`, the sphere of radius `R(t)` for unit-sphere input.
    pub fn scaled_sphere(radius: impl Fn(f64) -> f64 + Send + Sync + 'static, horizon: f64) -> Self {
        let r0 = radius(0.0);
        Self::new("scaled sphere", horizon, move |x, t| x * (radius(t) / r0))
    }

    /// Non-uniform motion of the unit sphere: an x₁-squeeze of strength
    /// `squeeze·min(t, 1)` followed by radial projection onto the sphere of
    /// radius `1 + t/2`. Cell shapes change, so curved-to-flat area ratios
    /// vary in time.
    pub fn squeezed_sphere(squeeze: f64, horizon: f64) -> Self {
        Self::new("squeezed sphere", horizon, move |x, t| {
            let s = squeeze * t.min(1.0);
            let y = Vec3::new(x.x * (1.0 - s * (3.0 * x.x).tanh()), x.y, x.z);
            y * ((1.0 + 0.5 * t) / y.norm())
        })
    }

    /// Deformation of the torus: the half `x₁ > 0` is compressed and the half
    /// `x₁ < 0` stretched during `[0, 2]`; frozen afterwards.
    pub fn torus(horizon: f64) -> Self {
        Self::new("deforming torus", horizon, |x, t| torus_deformation(t)(x))
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_static(&self) -> bool {
        self.stationary
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Current position of the reference point `x`.
    pub fn move_point(&self, x: Vec3, t: f64) -> Result<Vec3> {
        self.check_time(t)?;
        Ok(if t == 0.0 || self.stationary {
            x
        } else {
            (self.map)(x, t)
        })
    }

    /// Moves every reference point.
    pub fn positions(&self, reference: &[Vec3], t: f64) -> Result<Vec<Vec3>> {
        self.check_time(t)?;
        if t == 0.0 || self.stationary {
            return Ok(reference.to_vec());
        }
        Ok(reference.par_iter().map(|&x| (self.map)(x, t)).collect())
    }
}

/// Vertex positions of `mesh` at time `t`.
pub fn positions_at(mesh: &TriMesh, motion: &SurfaceMotion, t: f64) -> Result<Vec<Vec3>> {
    motion.positions(mesh.vertices(), t)
}

/// Time profile `½(1 − cos(π·min(t, 2)/2))`: 0 at `t = 0`, 1 from `t = 2` on.
pub fn torus_profile(t: f64) -> f64 {
    0.5 * (1.0 - (std::f64::consts::PI * t.min(2.0) / 2.0).cos())
}

/// `x ↦ (x₁(1 − β(t)·γ·tanh(3x₁)), x₂, x₃)` with `γ = 0.4`.
pub fn torus_deformation(t: f64) -> impl Fn(Vec3) -> Vec3 {
    let b = torus_profile(t) * TORUS_SQUEEZE;
    move |x| Vec3::new(x.x * (1.0 - b * (3.0 * x.x).tanh()), x.y, x.z)
}

/// `∂x₁'/∂x₁` of the torus deformation; the map is a diffeomorphism while
/// this stays positive.
pub fn torus_deformation_jacobian(x1: f64, t: f64) -> f64 {
    let b = torus_profile(t) * TORUS_SQUEEZE;
    let th = (3.0 * x1).tanh();
    1.0 - b * (th + 3.0 * x1 * (1.0 - th * th))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cell_areas;
    use crate::mesh::{build_icosphere, build_torus};

    #[test]
    fn identity_leaves_positions() {
        let m = build_icosphere(1).unwrap();
        let p = positions_at(&m, &SurfaceMotion::identity(1.0), 0.7).unwrap();
        assert_eq!(p, m.vertices());
    }

    #[test]
    fn scaled_sphere_radius() {
        let m = build_icosphere(2).unwrap();
        let motion = SurfaceMotion::scaled_sphere(|t| 1.0 + t / 2.0, 1.0);
        for x in positions_at(&m, &motion, 1.0).unwrap() {
            assert!((x.norm() - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn time_outside_horizon_is_rejected() {
        let m = build_icosphere(0).unwrap();
        let motion = SurfaceMotion::identity(1.0);
        assert!(matches!(
            positions_at(&m, &motion, 1.5),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(positions_at(&m, &motion, -0.1).is_err());
    }

    #[test]
    fn torus_frozen_after_two_and_identity_at_zero() {
        let m = build_torus(1.0, 0.4, (32, 16)).unwrap();
        let motion = SurfaceMotion::torus(4.0);
        assert_eq!(positions_at(&m, &motion, 0.0).unwrap(), m.vertices());
        assert_eq!(
            positions_at(&m, &motion, 2.0).unwrap(),
            positions_at(&m, &motion, 4.0).unwrap()
        );
        let mid = positions_at(&m, &motion, 1.0).unwrap();
        assert!(mid.iter().zip(m.vertices()).any(|(a, b)| a != b));
    }

    #[test]
    fn torus_jacobian_positive_along_vertex_paths() {
        let m = build_torus(1.0, 0.4, (64, 32)).unwrap();
        for i in 0..=40 {
            let t = 0.1 * i as f64;
            for x in m.vertices() {
                assert!(torus_deformation_jacobian(x.x, t) > 0.4);
            }
        }
    }

    #[test]
    fn squeezed_sphere_stays_on_sphere_and_moves_non_uniformly() {
        let m = build_icosphere(2).unwrap();
        let motion = SurfaceMotion::squeezed_sphere(0.3, 1.0);
        let p = positions_at(&m, &motion, 0.5).unwrap();
        for x in &p {
            assert!((x.norm() - 1.25).abs() < 1e-14);
        }
        let a0 = cell_areas(&m, m.vertices()).unwrap();
        let a1 = cell_areas(&m, &p).unwrap();
        let ratios: Vec<f64> = a0.iter().zip(&a1).map(|(a, b)| b / a).collect();
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) - ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.05, "motion looks uniform: spread {spread}");
    }

    #[test]
    fn area_ratio_per_step_is_first_order_in_dt() {
        let m = build_torus(1.0, 0.4, (32, 16)).unwrap();
        let motion = SurfaceMotion::torus(4.0);
        let worst = |dt: f64| {
            let a = cell_areas(&m, &positions_at(&m, &motion, 0.5).unwrap()).unwrap();
            let b = cell_areas(&m, &positions_at(&m, &motion, 0.5 + dt).unwrap()).unwrap();
            a.iter().zip(&b).map(|(x, y)| (y / x - 1.0).abs()).fold(0.0, f64::max)
        };
        let r = worst(0.02) / worst(0.01);
        assert!((1.8..2.2).contains(&r), "ratio {r}");
    }
}
