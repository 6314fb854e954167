//! Initial data for the test problems.

use std::fmt;
use std::sync::Arc;

use crate::vec3::Vec3;

/// Scalar initial datum `u₀`. Formulas are evaluated verbatim at any point of
/// R³, so the same datum serves the curved cells and the flat polyhedron.
#[derive(Clone)]
pub enum InitialData {
    Constant(f64),
    /// `inside` where `⟨normal, x⟩ > offset`, `outside` elsewhere.
    HalfSpace {
        normal: Vec3,
        offset: f64,
        inside: f64,
        outside: f64,
    },
    /// Smooth compactly supported bump
    /// `amplitude · exp(−2(1+r²)/(1−r²)²)` for `r = |x − center|/radius < 1`.
    Bump {
        center: Vec3,
        radius: f64,
        amplitude: f64,
    },
    Function(Arc<dyn Fn(Vec3) -> f64 + Send + Sync>),
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Constant(c) => write!(f, "Constant({c})"),
            InitialData::HalfSpace {
                normal,
                offset,
                inside,
                outside,
            } => write!(f, "HalfSpace({normal:?} > {offset}: {inside} / {outside})"),
            InitialData::Bump {
                center,
                radius,
                amplitude,
            } => write!(f, "Bump({center:?}, {radius}, {amplitude})"),
            InitialData::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl InitialData {
    /// `1_{x₁ > 0.15}`, the discontinuous datum of the advection tests.
    pub fn indicator_x1() -> Self {
        InitialData::HalfSpace {
            normal: Vec3::X,
            offset: 0.15,
            inside: 1.0,
            outside: 0.0,
        }
    }

    /// Smooth bump of amplitude 1/10 and radius 0.74 centred at (1,0,0).
    pub fn smooth_bump() -> Self {
        InitialData::Bump {
            center: Vec3::X,
            radius: 0.74,
            amplitude: 0.1,
        }
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        match self {
            InitialData::Constant(c) => *c,
            InitialData::HalfSpace {
                normal,
                offset,
                inside,
                outside,
            } => {
                if normal.dot(x) > *offset {
                    *inside
                } else {
                    *outside
                }
            }
            InitialData::Bump {
                center,
                radius,
                amplitude,
            } => bump(x.distance(*center) / radius, *amplitude),
            InitialData::Function(f) => f(x),
        }
    }

    /// The datum pulled back to the unit sphere from the sphere of radius `r`
    /// about the origin: `x ↦ u₀(r·x)`.
    pub fn on_unit_sphere(&self, r: f64) -> InitialData {
        if r == 1.0 {
            return self.clone();
        }
        match self {
            InitialData::Constant(_) => self.clone(),
            InitialData::HalfSpace {
                normal,
                offset,
                inside,
                outside,
            } => InitialData::HalfSpace {
                normal: *normal,
                offset: offset / r,
                inside: *inside,
                outside: *outside,
            },
            other => {
                let inner = other.clone();
                InitialData::Function(Arc::new(move |x| inner.eval(x * r)))
            }
        }
    }

    /// `(min, max)` of the datum, used to size the flux bounds.
    pub fn range(&self) -> Option<(f64, f64)> {
        match self {
            InitialData::Constant(c) => Some((*c, *c)),
            InitialData::HalfSpace { inside, outside, .. } => Some((inside.min(*outside), inside.max(*outside))),
            InitialData::Bump { amplitude, .. } => {
                let peak = amplitude * (-2f64).exp();
                Some((peak.min(0.0), peak.max(0.0)))
            }
            InitialData::Function(_) => None,
        }
    }
}

/// `a · exp(−2(1+r²)/(1−r²)²)` for `r < 1`, zero otherwise.
pub fn bump(r: f64, amplitude: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    let r2 = r * r;
    amplitude * (-2.0 * (1.0 + r2) / ((1.0 - r2) * (1.0 - r2))).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_peak_and_support() {
        let u = InitialData::smooth_bump();
        assert!((u.eval(Vec3::X) - 0.1 * (-2f64).exp()).abs() < 1e-17);
        assert!((u.eval(Vec3::X) - 0.013_533_528_323_661_27).abs() < 1e-12);
        assert_eq!(u.eval(-Vec3::X), 0.0);
        assert!(bump(1.0 - 1e-3, 0.1) < 1e-200);
    }

    #[test]
    fn indicator_values() {
        let u = InitialData::indicator_x1();
        assert_eq!(u.eval(Vec3::new(0.2, 0.0, 0.0)), 1.0);
        assert_eq!(u.eval(Vec3::new(0.15, 0.0, 0.0)), 0.0);
        assert_eq!(u.range(), Some((0.0, 1.0)));
    }

    #[test]
    fn pull_back_to_unit_sphere() {
        let u = InitialData::indicator_x1().on_unit_sphere(2.0);
        assert_eq!(u.eval(Vec3::new(0.1, 0.0, 0.0)), 1.0);
        assert_eq!(u.eval(Vec3::new(0.07, 0.0, 0.0)), 0.0);
        let b = InitialData::smooth_bump().on_unit_sphere(0.5);
        assert_eq!(b.eval(Vec3::X * 2.0), InitialData::smooth_bump().eval(Vec3::X));
    }
}
