//! Scalar optimization, root finding and quadrature rules shared by the solvers
//! and the oracles.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use gauss_quad::laguerre::GaussLaguerre;
use gauss_quad::FiniteAboveNegOneF64;

use crate::error::{Error, Result};

/// Absolute residual tolerance for scalar root finding.
pub const ROOT_TOL: f64 = 1e-10;
/// Iteration cap for scalar root finding.
pub const ROOT_MAX_ITER: usize = 200;
/// Final bracket width of golden-section searches.
pub const GOLDEN_WIDTH: f64 = 1e-8;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizes a unimodal `f` on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, width: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > width {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // endpoints can win when the maximum sits on the boundary
    [(x, fx), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .fold(
            (x, f64::NEG_INFINITY),
            |best, cand| if cand.1 > best.1 { cand } else { best },
        )
}

/// Scans `n` grid points to bracket the global maximum, then refines with
/// golden-section search and two Newton polishing steps.
pub fn grid_refine_max<F>(mut f: F, lo: f64, hi: f64, n: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let n = n.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let v = f(lo + step * i as f64);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = (lo + step * (best + 1) as f64).min(hi);
    let (x, fx) = golden_section_max(&mut f, a, b, GOLDEN_WIDTH);
    newton_polish(f, x, fx, (lo, hi), 2)
}

/// Newton steps on a scalar objective using central differences; a step is kept
/// only if it stays inside `bounds` and does not lower the objective.
pub fn newton_polish<F>(mut f: F, mut x: f64, mut fx: f64, bounds: (f64, f64), steps: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    for _ in 0..steps {
        let h = 1e-5 * (1.0 + x.abs());
        if x - h <= bounds.0 || x + h >= bounds.1 {
            break;
        }
        let fp = f(x + h);
        let fm = f(x - h);
        let d1 = (fp - fm) / (2.0 * h);
        let d2 = (fp - 2.0 * fx + fm) / (h * h);
        if !(d2 < 0.0) || !d1.is_finite() {
            break;
        }
        let cand = x - d1 / d2;
        if cand <= bounds.0 || cand >= bounds.1 {
            break;
        }
        let fc = f(cand);
        if fc >= fx {
            x = cand;
            fx = fc;
        } else {
            break;
        }
    }
    (x, fx)
}

/// Bisection on a sign-changing bracket. Stops when `|f| <= tol` or the bracket
/// collapses to machine precision.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Domain(format!(
            "root not bracketed on [{lo}, {hi}] (f = {flo}, {fhi})"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..max_iter.max(1100) {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Newton iteration safeguarded by a bracket: any step leaving the bracket or
/// failing to shrink the residual falls back to bisection.
pub fn safeguarded_newton<F, D>(mut f: F, mut df: D, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Domain(format!("root not bracketed on [{lo}, {hi}]")));
    }
    let mut x = 0.5 * (a + b);
    let mut fx = f(x);
    for _ in 0..ROOT_MAX_ITER {
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d.is_finite() && d != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let fn_ = f(next);
        // reject Newton steps that do not halve the residual
        if fn_.abs() > 0.5 * fx.abs() && next == newton {
            x = 0.5 * (a + b);
            fx = f(x);
        } else {
            x = next;
            fx = fn_;
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            return Ok(x);
        }
    }
    if fx.abs() <= tol {
        Ok(x)
    } else {
        Err(Error::NotConverged {
            iterations: ROOT_MAX_ITER,
            residual: fx.abs(),
            best: vec![x],
        })
    }
}

/// Nodes and weights of a rule normalized as an expectation operator.
#[derive(Debug, Clone)]
pub struct ExpectationRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ExpectationRule {
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * g(*x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn normal_cache() -> &'static Mutex<HashMap<usize, Arc<ExpectationRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ExpectationRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Hermite rule for `E[g(Z)]`, `Z ~ N(0, 1)`.
pub fn normal_rule(n: usize) -> Arc<ExpectationRule> {
    let n = n.max(1);
    let mut cache = normal_cache().lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(n)
        .or_insert_with(|| {
            let gh = GaussHermite::new(NonZeroUsize::new(n).unwrap());
            let norm = std::f64::consts::PI.sqrt();
            let (nodes, weights) = gh
                .as_node_weight_pairs()
                .iter()
                .map(|(x, w)| (std::f64::consts::SQRT_2 * x, w / norm))
                .unzip();
            Arc::new(ExpectationRule { nodes, weights })
        })
        .clone()
}

/// Generalized Gauss–Laguerre rule for `E[g(U)]`, `U ~ Gamma(shape, 1)`.
/// Weights are renormalized to sum to one, which avoids evaluating Γ(shape).
pub fn gamma_rule(n: usize, shape: f64) -> Result<ExpectationRule> {
    let alpha = FiniteAboveNegOneF64::new(shape - 1.0)
        .ok_or_else(|| Error::Domain(format!("gamma shape must be positive, got {shape}")))?;
    let gl = GaussLaguerre::new(NonZeroUsize::new(n.max(1)).unwrap(), alpha);
    let pairs = gl.as_node_weight_pairs();
    let total: f64 = pairs.iter().map(|(_, w)| w).sum();
    let (nodes, weights) = pairs.iter().map(|(x, w)| (*x, w / total)).unzip();
    Ok(ExpectationRule { nodes, weights })
}

/// Tanh-sinh (double exponential) quadrature of `f` on a finite interval.
/// Returns `(integral, error_estimate)`; endpoint singularities are tolerated
/// because the nodes never touch the endpoints.
pub fn tanh_sinh<F>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let half = 0.5 * (b - a);
    let pi2 = std::f64::consts::FRAC_PI_2;
    // node at offset t: x = mid + half * tanh(π/2 sinh t)
    let mut eval = |t: f64| -> f64 {
        let s = pi2 * t.sinh();
        let u = s.tanh();
        let w = pi2 * t.cosh() / (s.cosh() * s.cosh());
        if w == 0.0 {
            return 0.0;
        }
        // distance to the nearest endpoint computed without cancellation
        let comp = 1.0 / (s.abs().exp() * s.abs().cosh());
        let x = if u >= 0.0 { b - half * comp } else { a + half * comp };
        if x <= a || x >= b {
            return 0.0;
        }
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let t_max = 4.0;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h * half;
    let mut err = f64::INFINITY;
    for _ in 0..10 {
        h *= 0.5;
        let mut extra = 0.0;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            extra += eval(t) + eval(-t);
            k += 2;
        }
        sum += extra;
        let next = sum * h * half;
        err = (next - estimate).abs();
        estimate = next;
        if err <= tol.max(1e-15 * estimate.abs()) {
            break;
        }
    }
    (estimate, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 2e-8);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn golden_returns_boundary_maximum() {
        let (x, _) = golden_section_max(|x| x, 0.0, 1.0, 1e-8);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn grid_refine_handles_multimodal() {
        let f = |x: f64| (-(x - 2.0) * (x - 2.0)).exp() + 0.5 * (-(x + 2.0) * (x + 2.0)).exp();
        let (x, _) = grid_refine_max(f, -5.0, 5.0, 101);
        // the far bump tilts the peak by −(1/2)·0.5·8·e^{−16}
        let peak = 2.0 - 2.0 * (-16f64).exp();
        assert!((x - peak).abs() < 1e-8, "{x}");
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14, 200).is_err());
    }

    #[test]
    fn newton_with_bad_derivative_still_converges() {
        // derivative deliberately wrong by a factor of 10
        let r = safeguarded_newton(|x| x.powi(3) - 8.0, |x| 0.3 * x * x, 0.0, 5.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn normal_rule_moments() {
        let rule = normal_rule(40);
        assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(rule.expect(|z| z).abs() < 1e-14);
        assert!((rule.expect(|z| z * z) - 1.0).abs() < 1e-13);
        assert!((rule.expect(|z| z.powi(4)) - 3.0).abs() < 1e-12);
        // MGF of a standard normal at 0.7
        assert!((rule.expect(|z| (0.7 * z).exp()) - (0.245f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn gamma_rule_moments() {
        let rule = gamma_rule(40, 2.5).unwrap();
        assert!((rule.expect(|u| u) - 2.5).abs() < 1e-12);
        assert!((rule.expect(|u| u * u) - 2.5 * 3.5).abs() < 1e-11);
        assert!(gamma_rule(10, 0.0).is_err());
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2
        let (v, _) = tanh_sinh(|x| x.powf(-0.5), 0.0, 1.0, 1e-13);
        assert!((v - 2.0).abs() < 1e-10, "{v}");
        let (v, _) = tanh_sinh(|x| x.exp(), -1.0, 2.0, 1e-14);
        assert!((v - (2f64.exp() - (-1f64).exp())).abs() < 1e-13);
    }
}
