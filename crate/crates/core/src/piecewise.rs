//! Piecewise-linear functions on the extended non-negative reals.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A function given by `[lo, hi, slope, intercept]` rows, evaluated as `slope * x + intercept`.
///
/// Rows are contiguous and start at 0. The first row covers the closed interval
/// `[lo, hi]`, every later row the half-open `(lo, hi]`. Arguments beyond the last `hi`
/// use the last row. A zero slope ignores the argument, so `f(∞)` is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 4]>", into = "Vec<[f64; 4]>")]
pub struct PiecewiseLinear {
    segments: Vec<[f64; 4]>,
}

impl PiecewiseLinear {
    pub fn new(segments: Vec<[f64; 4]>) -> Result<Self, String> {
        if segments.is_empty() {
            return Err("piecewise function needs at least one segment".into());
        }
        if segments[0][0] != 0.0 {
            return Err("first segment must start at 0".into());
        }
        for (k, [lo, hi, slope, intercept]) in segments.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(format!(
                    "segment {k}: breakpoints must be strictly increasing"
                ));
            }
            if hi.is_infinite() && k + 1 != segments.len() {
                return Err(format!(
                    "segment {k}: only the last segment may be unbounded"
                ));
            }
            if k > 0 && segments[k - 1][1] != *lo {
                return Err(format!(
                    "segment {k}: must start where segment {} ends",
                    k - 1
                ));
            }
            if !slope.is_finite() {
                return Err(format!("segment {k}: slope must be finite"));
            }
            if intercept.is_nan() || (*intercept == f64::INFINITY && *slope != 0.0) {
                return Err(format!("segment {k}: bad intercept"));
            }
        }
        Ok(PiecewiseLinear { segments })
    }

    pub fn constant(c: f64) -> Self {
        PiecewiseLinear {
            segments: vec![[0.0, f64::INFINITY, 0.0, c]],
        }
    }

    /// `x ↦ l·x`, the bound used by Lipschitz-fairness.
    pub fn linear(l: f64) -> Self {
        PiecewiseLinear {
            segments: vec![[0.0, f64::INFINITY, l, 0.0]],
        }
    }

    pub fn segments(&self) -> &[[f64; 4]] {
        &self.segments
    }

    pub fn eval(&self, x: f64) -> f64 {
        let row = self
            .segments
            .iter()
            .enumerate()
            .find(|(k, s)| {
                if *k == 0 {
                    x <= s[1]
                } else {
                    x > s[0] && x <= s[1]
                }
            })
            .map_or(self.segments.last().unwrap(), |(_, s)| s);
        let [_, _, slope, intercept] = *row;
        if slope == 0.0 {
            intercept
        } else {
            slope * x + intercept
        }
    }
}

impl TryFrom<Vec<[f64; 4]>> for PiecewiseLinear {
    type Error = String;
    fn try_from(v: Vec<[f64; 4]>) -> Result<Self, String> {
        PiecewiseLinear::new(v)
    }
}

impl From<PiecewiseLinear> for Vec<[f64; 4]> {
    fn from(p: PiecewiseLinear) -> Self {
        p.segments
    }
}

impl fmt::Display for PiecewiseLinear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("pw[")?;
        for (k, [lo, hi, s, c]) in self.segments.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{lo}..{hi}: {s}x+{c}")?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn steps() -> PiecewiseLinear {
        PiecewiseLinear::new(vec![
            [0.0, 0.01, 8.0, 0.001],
            [0.01, 0.1, 4.0, 0.001],
            [0.1, 1.0, 2.0, 0.001],
        ])
        .unwrap()
    }

    #[test]
    fn boundaries_belong_to_lower_segment() {
        let f = steps();
        assert!((f.eval(0.0) - 0.001).abs() < 1e-15);
        assert!((f.eval(0.01) - 0.081).abs() < 1e-12);
        assert!((f.eval(0.1) - 0.401).abs() < 1e-12);
        assert!((f.eval(2.0) - 4.001).abs() < 1e-12);
        assert_eq!(f.eval(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn constant_at_infinity() {
        assert_eq!(PiecewiseLinear::constant(6.0).eval(f64::INFINITY), 6.0);
        let cut = PiecewiseLinear::new(vec![
            [0.0, 1.0, 0.0, 6.0],
            [1.0, f64::INFINITY, 0.0, f64::INFINITY],
        ])
        .unwrap();
        assert_eq!(cut.eval(1.0), 6.0);
        assert_eq!(cut.eval(1.5), f64::INFINITY);
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(PiecewiseLinear::new(vec![]).is_err());
        assert!(PiecewiseLinear::new(vec![[0.5, 1.0, 1.0, 0.0]]).is_err());
        assert!(PiecewiseLinear::new(vec![[0.0, 1.0, 1.0, 0.0], [2.0, 3.0, 1.0, 0.0]]).is_err());
        assert!(PiecewiseLinear::new(vec![[0.0, 0.0, 1.0, 0.0]]).is_err());
        assert!(PiecewiseLinear::new(vec![[0.0, 1.0, f64::NAN, 0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn linear_pieces_agree_with_formula(x in 0.0f64..5.0) {
            let f = steps();
            let expected = if x <= 0.01 { 0.001 + 8.0 * x }
                else if x <= 0.1 { 0.001 + 4.0 * x }
                else { 0.001 + 2.0 * x };
            prop_assert!((f.eval(x) - expected).abs() < 1e-12);
        }
    }
}
