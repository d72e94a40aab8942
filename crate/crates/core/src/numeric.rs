//! Small numerical helpers shared across modules: compensated summation,
//! central finite differences and uniform grids.

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Step used for third-derivative checks: 1e-4, shrunk linearly once the
/// evaluation point is closer than 0.05 to an endpoint of (0, 1).
pub fn third_derivative_step(x: f64) -> f64 {
    let dist = x.min(1.0 - x);
    1e-4 * (20.0 * dist).min(1.0)
}

/// Five-point central difference for f'''(x).
pub fn central_third<F: Fn(f64) -> f64>(f: F, x: f64, step: f64) -> f64 {
    (-f(x - 2.0 * step) + 2.0 * f(x - step) - 2.0 * f(x + step) + f(x + 2.0 * step))
        / (2.0 * step * step * step)
}

/// Three-point central difference for f''(x).
pub fn central_second<F: Fn(f64) -> f64>(f: F, x: f64, step: f64) -> f64 {
    (f(x - step) - 2.0 * f(x) + f(x + step)) / (step * step)
}

/// `count` interior points k/(count + 1), k = 1..=count, of the unit interval.
pub fn open_unit_grid(count: usize) -> impl Iterator<Item = f64> + Clone {
    let denom = (count + 1) as f64;
    (1..=count).map(move |k| k as f64 / denom)
}

/// Relative error |a − b| / max(|b|, floor).
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
