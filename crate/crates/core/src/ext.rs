//! Arithmetic on extended reals.
//!
//! Values are `f64`; `±INFINITY` are the extended elements. IEEE arithmetic already
//! gives `∞ - c = ∞`, `min(∞, x) = x` and `-(∞) = -∞`. The one gap is `∞ - ∞`, which
//! IEEE leaves as NaN. Threshold terms of the form `lhs - rhs` compare two extended
//! values, and `∞ ≤ ∞` holds, so the difference of two equal infinities is `0`.

/// `a - b` with `∞ - ∞ = 0` and `-∞ - -∞ = 0`.
pub fn sub(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

/// Renders an extended real, using `inf`/`-inf` for the infinite elements.
pub fn render(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

/// Parses the rendering produced by [`render`].
pub fn parse(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" | "∞" => Some(f64::INFINITY),
        "-inf" | "-∞" => Some(f64::NEG_INFINITY),
        other => other.parse::<f64>().ok().filter(|x| !x.is_nan()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_difference_is_zero() {
        assert_eq!(sub(f64::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(sub(f64::NEG_INFINITY, f64::NEG_INFINITY), 0.0);
        assert_eq!(sub(f64::INFINITY, 3.0), f64::INFINITY);
        assert_eq!(sub(2.0, f64::INFINITY), f64::NEG_INFINITY);
        assert_eq!(sub(5.0, 2.0), 3.0);
    }

    #[test]
    fn render_parse() {
        for x in [0.0, -1.5, 1e-9, f64::INFINITY, f64::NEG_INFINITY] {
            assert_eq!(parse(&render(x)), Some(x));
        }
        assert_eq!(parse("nan"), None);
    }
}
