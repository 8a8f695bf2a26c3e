//! Piecewise-linear inverter volt-var characteristic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Maps a local voltage magnitude (p.u.) to an injection angle (rad).
///
/// Outside the first and last breakpoints the curve is held constant.
/// The derivative at a breakpoint is the slope of the segment to its right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VoltVarCurve<T> {
    pub breakpoints: Vec<(T, T)>,
}

impl<T: Real> VoltVarCurve<T> {
    pub fn new(breakpoints: Vec<(T, T)>) -> Result<Self> {
        let curve = Self { breakpoints };
        curve.validate()?;
        Ok(curve)
    }

    /// A curve that always returns zero angle.
    pub fn flat() -> Self {
        Self {
            breakpoints: vec![(T::one(), T::zero())],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() {
            return Err(invalid("volt-var curve needs at least one breakpoint"));
        }
        let half_pi = T::frac_pi_2();
        for (u, phi) in &self.breakpoints {
            if !u.is_finite() || !phi.is_finite() {
                return Err(invalid("volt-var breakpoints must be finite"));
            }
            if *phi < -half_pi || *phi > half_pi {
                return Err(invalid("volt-var angles must lie in [-pi/2, pi/2]"));
            }
        }
        for w in self.breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(invalid("volt-var magnitudes must be strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn angle(&self, u: T) -> T {
        let bp = &self.breakpoints;
        if u <= bp[0].0 {
            return bp[0].1;
        }
        let last = bp[bp.len() - 1];
        if u >= last.0 {
            return last.1;
        }
        let i = self.segment(u);
        let (u0, p0) = bp[i];
        let (u1, p1) = bp[i + 1];
        p0 + (p1 - p0) * (u - u0) / (u1 - u0)
    }

    /// Right derivative of the curve at `u`.
    pub fn slope(&self, u: T) -> T {
        let bp = &self.breakpoints;
        if bp.len() < 2 || u < bp[0].0 || u >= bp[bp.len() - 1].0 {
            return T::zero();
        }
        let i = self.segment(u);
        (bp[i + 1].1 - bp[i].1) / (bp[i + 1].0 - bp[i].0)
    }

    /// Largest absolute slope of any segment overlapping `[lo, hi]`.
    pub fn max_abs_slope(&self, lo: T, hi: T) -> T {
        self.breakpoints
            .windows(2)
            .filter(|w| w[1].0 > lo && w[0].0 < hi)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    // index i with bp[i].0 <= u < bp[i+1].0; caller guarantees u is interior
    fn segment(&self, u: T) -> usize {
        let bp = &self.breakpoints;
        let mut i = bp.partition_point(|(b, _)| *b <= u);
        i = i.saturating_sub(1);
        i.min(bp.len() - 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VoltVarCurve<f64> {
        VoltVarCurve::new(vec![(0.92, 0.3), (0.98, 0.0), (1.02, 0.0), (1.08, -0.3)]).unwrap()
    }

    #[test]
    fn interpolates_and_clamps() {
        let c = sample();
        assert_eq!(c.angle(0.5), 0.3);
        assert_eq!(c.angle(1.2), -0.3);
        assert!((c.angle(0.95) - 0.15).abs() < 1e-12);
        assert_eq!(c.angle(1.0), 0.0);
    }

    #[test]
    fn slope_is_right_derivative() {
        let c = sample();
        // at 0.98 the right segment is flat
        assert_eq!(c.slope(0.98), 0.0);
        assert!((c.slope(0.92) + 5.0).abs() < 1e-9);
        assert!((c.slope(1.02) + 5.0).abs() < 1e-9);
        assert_eq!(c.slope(1.08), 0.0);
        assert_eq!(c.slope(0.5), 0.0);
        assert!((c.max_abs_slope(0.95, 1.05) - 5.0).abs() < 1e-9);
        assert_eq!(c.max_abs_slope(0.99, 1.01), 0.0);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(VoltVarCurve::new(vec![(1.0, 0.0), (1.0, 0.1)]).is_err());
        assert!(VoltVarCurve::new(vec![(1.0, 2.0)]).is_err());
        assert!(VoltVarCurve::<f64>::new(vec![]).is_err());
    }
}
