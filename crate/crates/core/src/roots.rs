//! Derivative-free one-dimensional search used by the game and plan code.

/// Absolute tolerance for bisection on action levels.
pub const BISECTION_TOL: f64 = 1e-10;

const MAX_BISECTION_ITERS: usize = 200;

/// Locates the boundary of a predicate that holds at `feasible` and fails at
/// `infeasible`. The returned point always satisfies the predicate and lies
/// within `tol` of the switch point.
///
/// Works in either direction: `feasible` may be larger or smaller than
/// `infeasible`.
pub fn bisect_boundary<F>(mut feasible: f64, mut infeasible: f64, tol: f64, pred: F) -> f64
where
    F: Fn(f64) -> bool,
{
    for _ in 0..MAX_BISECTION_ITERS {
        if (infeasible - feasible).abs() <= tol {
            break;
        }
        let mid = 0.5 * (feasible + infeasible);
        if mid == feasible || mid == infeasible {
            break;
        }
        if pred(mid) {
            feasible = mid;
        } else {
            infeasible = mid;
        }
    }
    feasible
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
pub fn golden_section_max<F>(mut lo: f64, mut hi: f64, tol: f64, f: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        if x1 >= x2 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt_two_from_below() {
        let r = bisect_boundary(0.0, 2.0, 1e-12, |x| x * x <= 2.0);
        assert!(r * r <= 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn bisection_works_downward() {
        // feasible side above the switch point
        let r = bisect_boundary(3.0, 0.0, 1e-12, |x| x >= 1.25);
        assert!(r >= 1.25 && r - 1.25 < 1e-11);
    }

    #[test]
    fn golden_section_quadratic() {
        let x = golden_section_max(-3.0, 5.0, 1e-12, |x| -(x - 1.7) * (x - 1.7));
        assert!((x - 1.7).abs() < 1e-8);
    }

    #[test]
    fn golden_section_monotone_goes_to_edge() {
        let x = golden_section_max(0.0, 1.0, 1e-12, |x| x);
        assert!((x - 1.0).abs() < 1e-9);
    }
}
