//! One-dimensional root finding.

/// Root of a decreasing function on [lo, ∞) by Newton steps safeguarded
/// with bisection. `f` returns (value, derivative). Returns `lo` when
/// f(lo) ≤ 0.
pub fn decreasing_root<F: FnMut(f64) -> (f64, f64)>(mut f: F, lo: f64, initial_width: f64) -> f64 {
    let (f_lo, _) = f(lo);
    if f_lo <= 0.0 {
        return lo;
    }
    let mut a = lo;
    let mut b = lo + initial_width;
    let mut expand = 0;
    while f(b).0 > 0.0 {
        a = b;
        b = lo + (b - lo) * 2.0;
        expand += 1;
        if expand > 200 {
            return b;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return x;
        }
        if v > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - v / dv;
        let next = if dv < 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || b - a <= 4.0 * f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}
