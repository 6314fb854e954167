//! Error-free floating point transformations and a small exact accumulator.
//!
//! The curved scheme expresses edge integrals of divergence-free fields as
//! differences of stream-function values. Carrying the rounding error of each
//! difference and summing with an expansion makes the cell balance of such a
//! field exactly zero, so stationary states stay bitwise stationary.

/// `a + b = s + e` exactly (Knuth's two-sum).
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a - b = d + e` exactly.
#[inline]
pub fn two_diff(a: f64, b: f64) -> (f64, f64) {
    two_sum(a, -b)
}

/// Most components a nonoverlapping expansion of doubles can have: the
/// exponent range spans fewer than 40 blocks of 53 bits.
const MAX_PARTS: usize = 40;

/// Nonoverlapping floating point expansion whose components sum exactly to
/// the value of everything added so far.
#[derive(Clone, Debug)]
pub struct ExactSum {
    parts: [f64; MAX_PARTS],
    len: usize,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum {
            parts: [0.0; MAX_PARTS],
            len: 0,
        }
    }

    pub fn clear(&mut self) {
        self.len = 0;
    }

    /// Shewchuk's grow-expansion with zero elimination.
    #[inline]
    pub fn add(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        let mut q = x;
        let mut w = 0;
        for i in 0..self.len {
            let (s, e) = two_sum(q, self.parts[i]);
            q = s;
            if e != 0.0 {
                self.parts[w] = e;
                w += 1;
            }
        }
        if q != 0.0 {
            self.parts[w] = q;
            w += 1;
        }
        self.len = w;
    }

    /// Sum of the components, smallest first. Exactly zero when the
    /// accumulated value is exactly zero.
    pub fn value(&self) -> f64 {
        self.parts[..self.len].iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.len == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sum_recovers_rounding() {
        let (s, e) = two_sum(1.0, 1e-17);
        assert_eq!(s, 1.0);
        assert_eq!(e, 1e-17);
    }

    #[test]
    fn telescoping_differences_cancel_exactly() {
        let h = [0.1, 0.7, 0.30000000000000004];
        let mut acc = ExactSum::new();
        for i in 0..3 {
            let (d, e) = two_diff(h[(i + 1) % 3], h[i]);
            acc.add(d);
            acc.add(e);
        }
        assert!(acc.is_zero());
        assert_eq!(acc.value(), 0.0);
    }

    #[test]
    fn matches_plain_sum_on_benign_input() {
        let mut acc = ExactSum::new();
        for x in [1.0, 2.0, -0.5, 0.25] {
            acc.add(x);
        }
        assert_eq!(acc.value(), 2.75);
    }
}
