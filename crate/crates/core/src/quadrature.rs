//! Quadrature rules on the unit interval and the reference triangle.
//!
//! Weights are normalised to sum to one, so a rule applied to an element
//! returns `measure · Σ wᵢ f(xᵢ)`, i.e. the integral; dividing by the
//! measure gives the mean value.

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// A rule with nodes of type `N` (interval coordinate or barycentric triple).
/// `order` is the largest polynomial degree integrated exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<N> {
    pub nodes: Vec<N>,
    pub weights: Vec<f64>,
    pub order: u32,
}

pub type IntervalRule = QuadratureRule<f64>;
pub type TriangleRule = QuadratureRule<[f64; 3]>;

impl<N> QuadratureRule<N> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&N, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }
}

impl IntervalRule {
    pub fn midpoint() -> Self {
        QuadratureRule {
            nodes: vec![0.5],
            weights: vec![1.0],
            order: 1,
        }
    }

    /// Gauss–Legendre rule with `n` points on `[0, 1]`.
    pub fn gauss(n: usize) -> Self {
        assert!(n > 0, "Gauss rule needs at least one point");
        let (nodes, weights) = gauss_legendre(n);
        QuadratureRule {
            nodes,
            weights,
            order: (2 * n - 1) as u32,
        }
    }

    /// Smallest Gauss rule of at least the requested order.
    pub fn with_order(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::Parameter("quadrature order must be at least 1".into()));
        }
        if order == 1 {
            return Ok(Self::midpoint());
        }
        Ok(Self::gauss(order.div_ceil(2) as usize))
    }
}

impl TriangleRule {
    pub fn centroid() -> Self {
        QuadratureRule {
            nodes: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            order: 1,
        }
    }

    /// Edge-midpoint rule, exact for quadratics.
    pub fn edge_midpoints() -> Self {
        QuadratureRule {
            nodes: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
            order: 2,
        }
    }

    /// Six-point symmetric rule of degree four.
    pub fn degree4() -> Self {
        let (a1, w1) = (0.445_948_490_915_964_9, 0.223_381_589_678_011_47);
        let (a2, w2) = (0.091_576_213_509_770_74, 0.109_951_743_655_321_87);
        let b1 = 1.0 - 2.0 * a1;
        let b2 = 1.0 - 2.0 * a2;
        QuadratureRule {
            nodes: vec![
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weights: vec![w1, w1, w1, w2, w2, w2],
            order: 4,
        }
    }

    /// Seven-point symmetric rule of degree five.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let b1 = 1.0 - 2.0 * a1;
        let b2 = 1.0 - 2.0 * a2;
        QuadratureRule {
            nodes: vec![
                [1.0 / 3.0; 3],
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
            order: 5,
        }
    }

    pub fn with_order(order: u32) -> Result<Self> {
        match order {
            0 => Err(Error::Parameter("quadrature order must be at least 1".into())),
            1 => Ok(Self::centroid()),
            2 => Ok(Self::edge_midpoints()),
            3 | 4 => Ok(Self::degree4()),
            5 => Ok(Self::degree5()),
            _ => Err(Error::Parameter(format!("no triangle rule of order {order}"))),
        }
    }
}

/// Nodes and weights (unit sum) of the `n`-point Gauss–Legendre rule on
/// `[0, 1]`, by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] to [0, 1]; halving the weights gives unit sum
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `∫_a^b f` along the straight segment from `a` to `b`.
pub fn quad_edge(rule: &IntervalRule, a: Vec3, b: Vec3, f: impl Fn(Vec3) -> f64) -> f64 {
    let len = a.distance(b);
    len * rule.iter().map(|(&s, w)| w * f(a.lerp(b, s))).sum::<f64>()
}

/// `∫_K f` over the flat triangle `p`.
pub fn quad_cell(rule: &TriangleRule, p: [Vec3; 3], f: impl Fn(Vec3) -> f64) -> f64 {
    let area = crate::geometry::triangle_area(p[0], p[1], p[2]);
    area * rule
        .iter()
        .map(|(l, w)| w * f(p[0] * l[0] + p[1] * l[1] + p[2] * l[2]))
        .sum::<f64>()
}

/// `∫_{t0}^{t1} f`.
pub fn quad_time(rule: &IntervalRule, interval: (f64, f64), f: impl Fn(f64) -> f64) -> f64 {
    let (t0, t1) = interval;
    (t1 - t0) * rule.iter().map(|(&s, w)| w * f(t0 + s * (t1 - t0))).sum::<f64>()
}

/// The three rules used by the flat scheme: cells (p₁), edges (p₂), time (p₃).
#[derive(Clone, Debug)]
pub struct QuadratureSet {
    pub cell: TriangleRule,
    pub edge: IntervalRule,
    pub time: IntervalRule,
}

impl QuadratureSet {
    pub fn with_orders(cell: u32, edge: u32, time: u32) -> Result<Self> {
        Ok(QuadratureSet {
            cell: TriangleRule::with_order(cell)?,
            edge: IntervalRule::with_order(edge)?,
            time: IntervalRule::with_order(time)?,
        })
    }

    pub fn orders(&self) -> (u32, u32, u32) {
        (self.cell.order, self.edge.order, self.time.order)
    }
}

impl Default for QuadratureSet {
    fn default() -> Self {
        QuadratureSet {
            cell: TriangleRule::edge_midpoints(),
            edge: IntervalRule::gauss(2),
            time: IntervalRule::midpoint(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval_monomial(rule: &IntervalRule, k: i32) -> f64 {
        rule.iter().map(|(&s, w)| w * s.powi(k)).sum()
    }

    #[test]
    fn weights_sum_to_one() {
        for n in 1..=64 {
            let r = IntervalRule::gauss(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-15 * n as f64, "n={n} sum={s}");
        }
        for r in [
            TriangleRule::centroid(),
            TriangleRule::edge_midpoints(),
            TriangleRule::degree4(),
            TriangleRule::degree5(),
        ] {
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0).abs() <= 2e-16, "order {} sum {s}", r.order);
        }
    }

    #[test]
    fn interval_rules_exact_to_order() {
        for r in [
            IntervalRule::midpoint(),
            IntervalRule::gauss(2),
            IntervalRule::gauss(3),
            IntervalRule::gauss(10),
        ] {
            for k in 0..=r.order as i32 {
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(
                    (interval_monomial(&r, k) - exact).abs() < 1e-14,
                    "order {} k {k}",
                    r.order
                );
            }
        }
        // and not beyond
        let g2 = IntervalRule::gauss(2);
        assert!((interval_monomial(&g2, 4) - 0.2).abs() > 1e-6);
    }

    #[test]
    fn triangle_rules_exact_to_order() {
        // ∫_T x^a y^b over the reference triangle = a! b! / (a+b+2)!, area 1/2
        fn fact(n: u32) -> f64 {
            (1..=n).map(|i| i as f64).product()
        }
        for r in [
            TriangleRule::centroid(),
            TriangleRule::edge_midpoints(),
            TriangleRule::degree4(),
            TriangleRule::degree5(),
        ] {
            for a in 0..=r.order {
                for b in 0..=(r.order - a) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2) / 0.5;
                    let q: f64 = r
                        .iter()
                        .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
                        .sum();
                    assert!(
                        (q - exact).abs() < 1e-14,
                        "order {} a {a} b {b}: {q} vs {exact}",
                        r.order
                    );
                }
            }
        }
    }

    #[test]
    fn midpoint_of_identity() {
        let v = quad_time(&IntervalRule::midpoint(), (0.0, 1.0), |t| t);
        assert_eq!(v, 0.5);
    }

    #[test]
    fn two_point_gauss_integrates_cubic_on_edge() {
        let a = Vec3::new(0.5, -1.0, 2.0);
        let b = Vec3::new(2.0, 1.0, 0.0);
        let len = a.distance(b);
        // f(x) = s³ along the edge parameter, recovered from the x coordinate
        let f = |x: Vec3| ((x.x - a.x) / (b.x - a.x)).powi(3);
        let v = quad_edge(&IntervalRule::gauss(2), a, b, f);
        assert!((v - len / 4.0).abs() < 1e-14);
    }

    #[test]
    fn constant_on_triangle_gives_area() {
        let p = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 3.0, 0.5),
        ];
        let area = crate::geometry::triangle_area(p[0], p[1], p[2]);
        for r in [
            TriangleRule::centroid(),
            TriangleRule::edge_midpoints(),
            TriangleRule::degree5(),
        ] {
            assert!((quad_cell(&r, p, |_| 2.5) - 2.5 * area).abs() < 1e-14);
        }
    }

    #[test]
    fn order_zero_rejected() {
        assert!(IntervalRule::with_order(0).is_err());
        assert!(TriangleRule::with_order(0).is_err());
    }
}
