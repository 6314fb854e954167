//! Flux functions `f(u, x) = Σ φₖ(u)·Fₖ(x)` and the test fluxes built from
//! the rotation fields `V` and `W`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// State dependence of one flux term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateFn {
    One,
    Linear,
    HalfSquare,
}

impl StateFn {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            StateFn::One => 1.0,
            StateFn::Linear => u,
            StateFn::HalfSquare => 0.5 * u * u,
        }
    }

    /// `sup |φ'(u)|` over `[a, b]`.
    pub fn derivative_bound(self, range: (f64, f64)) -> f64 {
        match self {
            StateFn::One => 0.0,
            StateFn::Linear => 1.0,
            StateFn::HalfSquare => range.0.abs().max(range.1.abs()),
        }
    }
}

/// Spatial part of one flux term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorField {
    /// `(2π/|x|)(x₂, −x₁, 0)`
    V,
    /// `(2π/|x|)(−x₃, 0, x₁)`
    W,
    /// `(x₂, −x₁, 0)`, unnormalised
    Rotation,
}

impl VectorField {
    #[inline]
    pub fn eval(self, x: Vec3) -> Vec3 {
        match self {
            VectorField::V => field_v(x),
            VectorField::W => field_w(x),
            VectorField::Rotation => Vec3::new(x.y, -x.x, 0.0),
        }
    }

    /// Stream function `h` with `F = ν × ∇h` on every origin-centred sphere.
    pub fn stream(self) -> Option<fn(Vec3) -> f64> {
        match self {
            VectorField::V => Some(stream_v),
            VectorField::W => Some(stream_w),
            VectorField::Rotation => None,
        }
    }
}

/// `V(x) = (2π/|x|)(x₂, −x₁, 0)`.
#[inline]
pub fn field_v(x: Vec3) -> Vec3 {
    Vec3::new(x.y, -x.x, 0.0) * (TAU / x.norm())
}

/// `W(x) = (2π/|x|)(−x₃, 0, x₁)`.
#[inline]
pub fn field_w(x: Vec3) -> Vec3 {
    Vec3::new(-x.z, 0.0, x.x) * (TAU / x.norm())
}

/// `h_V(x) = 2πx₃`.
pub fn stream_v(x: Vec3) -> f64 {
    TAU * x.z
}

/// `h_W(x) = 2πx₂`.
pub fn stream_w(x: Vec3) -> f64 {
    TAU * x.y
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FluxTerm {
    pub state: StateFn,
    pub field: VectorField,
}

/// The built-in fluxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FluxKind {
    /// `V`
    StationaryV,
    /// `u·W`
    LinearW,
    /// `½u²·V`
    BurgersV,
    /// `u·V + ½u²·W`
    TwoDim,
    /// `½u²·(x₂, −x₁, 0)`
    TorusBurgers,
    /// `u·V`
    LinearV,
}

impl FluxKind {
    pub const ALL: [FluxKind; 6] = [
        FluxKind::StationaryV,
        FluxKind::LinearW,
        FluxKind::BurgersV,
        FluxKind::TwoDim,
        FluxKind::TorusBurgers,
        FluxKind::LinearV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FluxKind::StationaryV => "stationary_V",
            FluxKind::LinearW => "linear_W",
            FluxKind::BurgersV => "burgers_V",
            FluxKind::TwoDim => "two_dim",
            FluxKind::TorusBurgers => "torus_burgers",
            FluxKind::LinearV => "linear_V",
        }
    }

    fn terms(self) -> Vec<FluxTerm> {
        use StateFn::*;
        use VectorField::*;
        let t = |state, field| FluxTerm { state, field };
        match self {
            FluxKind::StationaryV => vec![t(One, V)],
            FluxKind::LinearW => vec![t(Linear, W)],
            FluxKind::BurgersV => vec![t(HalfSquare, V)],
            FluxKind::TwoDim => vec![t(Linear, V), t(HalfSquare, W)],
            FluxKind::TorusBurgers => vec![t(HalfSquare, Rotation)],
            FluxKind::LinearV => vec![t(Linear, V)],
        }
    }
}

impl fmt::Display for FluxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FluxKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FluxKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown flux kind '{s}'")))
    }
}

/// Bound on `|Rotation|` used for the torus flux: the outer radius of the
/// reference torus, which the deformation only shrinks.
pub const TORUS_FIELD_BOUND: f64 = 1.4;

/// A flux with its Lax–Friedrichs parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField {
    pub kind: FluxKind,
    pub terms: Vec<FluxTerm>,
    /// `sup |∂ᵤf|` over `state_range`.
    pub du_bound: f64,
    pub lambda: f64,
    pub state_range: (f64, f64),
}

impl FluxField {
    pub fn eval(&self, u: f64, x: Vec3) -> Vec3 {
        self.terms
            .iter()
            .fold(Vec3::ZERO, |acc, t| acc + t.field.eval(x) * t.state.eval(u))
    }

    /// `∂ᵤf(u, x)`.
    pub fn eval_du(&self, u: f64, x: Vec3) -> Vec3 {
        self.terms.iter().fold(Vec3::ZERO, |acc, t| {
            let d = match t.state {
                StateFn::One => 0.0,
                StateFn::Linear => 1.0,
                StateFn::HalfSquare => u,
            };
            acc + t.field.eval(x) * d
        })
    }

    pub fn has_stream(&self) -> bool {
        self.terms.iter().all(|t| t.field.stream().is_some())
    }

    /// Lipschitz constant of the Lax–Friedrichs flux in each argument.
    pub fn lipschitz(&self) -> f64 {
        self.lambda + 0.5 * self.du_bound
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        self.lambda = lambda;
        Ok(self)
    }
}

/// Builds a test flux. `du_bound` is evaluated analytically over `range`;
/// `λ` defaults to `½·du_bound`.
pub fn make_flux(kind: FluxKind, range: (f64, f64), lambda: Option<f64>) -> Result<FluxField> {
    if !(range.0 <= range.1 && range.0.is_finite() && range.1.is_finite()) {
        return Err(Error::Parameter(format!("invalid state range {range:?}")));
    }
    let terms = kind.terms();
    let du_bound = terms
        .iter()
        .map(|t| {
            let field_bound = match t.field {
                VectorField::V | VectorField::W => TAU,
                VectorField::Rotation => TORUS_FIELD_BOUND,
            };
            t.state.derivative_bound(range) * field_bound
        })
        .sum();
    let flux = FluxField {
        kind,
        terms,
        du_bound,
        lambda: 0.5 * du_bound,
        state_range: range,
    };
    match lambda {
        Some(l) => flux.with_lambda(l),
        None => Ok(flux),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn field_values() {
        assert_eq!(field_v(Vec3::X), Vec3::new(0.0, -TAU, 0.0));
        assert_eq!(field_w(Vec3::X), Vec3::new(0.0, 0.0, TAU));
    }

    #[test]
    fn default_lambdas() {
        assert_eq!(make_flux(FluxKind::StationaryV, (0.0, 0.0), None).unwrap().lambda, 0.0);
        let w = make_flux(FluxKind::LinearW, (0.0, 1.0), None).unwrap();
        assert_eq!(w.du_bound, TAU);
        assert_eq!(w.lambda, PI);
        assert_eq!(make_flux(FluxKind::BurgersV, (0.0, 1.0), None).unwrap().lambda, PI);
        assert_eq!(
            make_flux(FluxKind::TwoDim, (0.0, 1.0), None).unwrap().du_bound,
            2.0 * TAU
        );
        assert_eq!(
            make_flux(FluxKind::StationaryV, (0.0, 0.0), Some(1.0)).unwrap().lambda,
            1.0
        );
    }

    #[test]
    fn parse_and_reject() {
        assert_eq!("burgers_V".parse::<FluxKind>().unwrap(), FluxKind::BurgersV);
        assert!("nope".parse::<FluxKind>().is_err());
        assert!(make_flux(FluxKind::LinearW, (1.0, 0.0), None).is_err());
        assert!(make_flux(FluxKind::LinearW, (0.0, 1.0), Some(-1.0)).is_err());
    }

    #[test]
    fn eval_combines_terms() {
        let f = make_flux(FluxKind::TwoDim, (0.0, 1.0), None).unwrap();
        let x = Vec3::new(0.3, -0.4, 0.5);
        let u = 0.7;
        let expect = field_v(x) * u + field_w(x) * (0.5 * u * u);
        assert!((f.eval(u, x) - expect).norm() < 1e-15);
        let h = 1e-6;
        let fd = (f.eval(u + h, x) - f.eval(u - h, x)) / (2.0 * h);
        assert!((fd - f.eval_du(u, x)).norm() < 1e-8);
    }
}
