//! Smooth cutoff shapes built from the `exp(-1/x)` mollifier family.

/// `exp(-1/x)` for `x > 0`, zero otherwise. C-infinity, flat at the origin.
fn flat(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// C-infinity step: 0 for `x <= 0`, 1 for `x >= 1`, monotone in between.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = flat(x);
        a / (a + flat(1.0 - x))
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let a = flat(x);
    let b = flat(1.0 - x);
    let da = a / (x * x);
    let db = -b / ((1.0 - x) * (1.0 - x));
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}

/// Rises from 0 at `lo` to 1 at `hi`.
pub fn rise(s: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return if s >= hi { 1.0 } else { 0.0 };
    }
    smooth_step((s - lo) / (hi - lo))
}

/// Falls from 1 at `lo` to 0 at `hi`.
pub fn fall(s: f64, lo: f64, hi: f64) -> f64 {
    1.0 - rise(s, lo, hi)
}

/// Smooth bump equal to 1 on `[a, b]`, vanishing outside `(a - ramp, b + ramp)`.
pub fn plateau(s: f64, a: f64, b: f64, ramp: f64) -> f64 {
    rise(s, a - ramp, a) * fall(s, b, b + ramp)
}

/// A smooth monotone switch with explicit support edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Switch {
    /// Value is exactly 0 at and below this point.
    pub lo: f64,
    /// Value is exactly 1 at and above this point.
    pub hi: f64,
}

impl Switch {
    pub fn new(lo: f64, hi: f64) -> Self {
        Switch { lo, hi }
    }

    pub fn eval(&self, s: f64) -> f64 {
        rise(s, self.lo, self.hi)
    }

    /// The complementary switch `1 - self`.
    pub fn complement(&self, s: f64) -> f64 {
        1.0 - self.eval(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_endpoints_and_symmetry() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        for &x in &[0.1, 0.3, 0.77] {
            assert!((smooth_step(x) + smooth_step(1.0 - x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for &x in &[0.2, 0.45, 0.8] {
            let h = 1e-6;
            let fd = (smooth_step(x + h) - smooth_step(x - h)) / (2.0 * h);
            assert!((fd - smooth_step_deriv(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn switch_support() {
        let s = Switch::new(1.0, 2.0);
        assert_eq!(s.eval(1.0), 0.0);
        assert_eq!(s.eval(0.3), 0.0);
        assert_eq!(s.eval(2.0), 1.0);
        assert!(s.eval(1.5) > 0.0 && s.eval(1.5) < 1.0);
    }
}
