//! One-dimensional minimization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // 200 iterations shrink any finite bracket far below f64 resolution.
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Global-ish minimizer for a possibly nonconvex function on `[lo, hi]`:
/// evaluates `points` equally spaced samples (endpoints included), then
/// refines the best bracket with golden-section search.
///
/// Ties on the grid go to the smaller argument. The returned point is never
/// worse than the best grid sample.
pub fn grid_golden<F>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    assert!(points >= 2, "grid needs at least two points");
    if hi <= lo {
        return (lo, f(lo));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let at = |k: usize| if k == points - 1 { hi } else { lo + step * k as f64 };
    let mut best_k = 0;
    let mut best_v = f(lo);
    for k in 1..points {
        let v = f(at(k));
        if v < best_v {
            best_v = v;
            best_k = k;
        }
    }
    let a = at(best_k.saturating_sub(1));
    let b = at((best_k + 1).min(points - 1));
    let (x, v) = golden_section(&f, a, b, tol);
    if v < best_v {
        (x, v)
    } else {
        (at(best_k), best_v)
    }
}

/// Relative closeness with an absolute floor of one: `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, v) = golden_section(|x| (x - 1.25).powi(2) + 3.0, -10.0, 10.0, 1e-12);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn grid_golden_escapes_local_minimum() {
        // Two wells; the deeper one is near x = 2.
        let f = |x: f64| (x * x - 4.0).powi(2) + x;
        let (x, _) = grid_golden(f, -3.0, 3.0, 4096, 1e-12);
        assert!(x < 0.0, "deeper well is at negative x, got {x}");
        let (x, _) = grid_golden(|x: f64| (x * x - 4.0).powi(2) - x, -3.0, 3.0, 4096, 1e-12);
        assert!(x > 0.0);
    }

    #[test]
    fn grid_golden_handles_boundary_minimum() {
        let (x, v) = grid_golden(|x| x, 0.5, 2.0, 64, 1e-12);
        assert_eq!(x, 0.5);
        assert_eq!(v, 0.5);
    }

    #[test]
    fn degenerate_interval() {
        let (x, v) = grid_golden(|x| x * x, 1.0, 1.0, 16, 1e-9);
        assert_eq!((x, v), (1.0, 1.0));
    }
}
