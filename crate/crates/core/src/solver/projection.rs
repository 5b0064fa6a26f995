//! Euclidean projection onto `{ 0 <= p_n <= upper, sum p_n <= budget }`.

/// Project `v` onto the box `[0, upper]^n` intersected with the half-space
/// `sum <= budget`. The result never exceeds the budget.
pub fn project_box_budget(v: &[f64], upper: f64, budget: f64) -> Vec<f64> {
    let clamp = |x: f64, shift: f64| (x - shift).clamp(0.0, upper);
    let clamped: Vec<f64> = v.iter().map(|&x| clamp(x, 0.0)).collect();
    if clamped.iter().sum::<f64>() <= budget {
        return clamped;
    }
    // sum(clamp(v - tau)) is non-increasing in tau; bisect keeping the
    // feasible endpoint
    let total = |tau: f64| v.iter().map(|&x| clamp(x, tau)).sum::<f64>();
    let mut lo = 0.0;
    let mut hi = v.iter().cloned().fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    v.iter().map(|&x| clamp(x, hi)).collect()
}
