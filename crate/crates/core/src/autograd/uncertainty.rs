use std::fmt::Debug;

/// Symmetric bump used to smooth the switch between a row and its
/// neighbour. Must satisfy `U(0) = 0.5`, `U(u) = U(-u)` and `U -> 0` as
/// `|u| -> inf`. Only training ever evaluates it.
pub trait UncertaintyFn: Debug + Send + Sync {
    fn value(&self, u: f32) -> f32;
    fn deriv(&self, u: f32) -> f32;
}

/// `U(u) = 0.5 / (1 + |u|)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReciprocalAbs;

impl UncertaintyFn for ReciprocalAbs {
    fn value(&self, u: f32) -> f32 {
        uncertainty(u)
    }

    fn deriv(&self, u: f32) -> f32 {
        uncertainty_deriv(u)
    }
}

/// `0.5 / (1 + |u|)`.
pub fn uncertainty(u: f32) -> f32 {
    0.5 / (1.0 + u.abs())
}

/// `-0.5 sign(u) / (1 + |u|)^2`, taking `sign(0) = +1`.
pub fn uncertainty_deriv(u: f32) -> f32 {
    let s = if u < 0.0 { -1.0 } else { 1.0 };
    let d = 1.0 + u.abs();
    -0.5 * s / (d * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(uncertainty(0.0), 0.5);
        assert_eq!(uncertainty(1.0), 0.25);
        assert_eq!(uncertainty(-3.0), uncertainty(3.0));
        assert_eq!(uncertainty_deriv(0.0), -0.5);
        assert!(uncertainty(1e9) < 1e-9);
    }

    #[test]
    fn derivative_matches_central_difference() {
        for u in [0.1f64, -0.1, 1.0, -1.0, 5.0, -5.0] {
            let f = |u: f64| 0.5 / (1.0 + u.abs());
            let h = 1e-6;
            let fd = (f(u + h) - f(u - h)) / (2.0 * h);
            let an = uncertainty_deriv(u as f32) as f64;
            assert!(((an - fd) / fd).abs() < 1e-6, "u={u}: {an} vs {fd}");
        }
    }
}
