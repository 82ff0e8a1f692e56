use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::gmv_objectives::{MomentPair, UtilitySpec};
use crate::numerics::{gamma_rule, normal_rule, tanh_sinh, ExpectationRule};

/// Absolute error target, relative once the integral exceeds one.
pub const QUAD_TOL: f64 = 1e-10;
const LEVELS: [usize; 4] = [16, 32, 64, 128];
/// Student-t: the core window spans `loc ± CORE·scale`; shells then double.
const CORE: f64 = 8.0;
const MAX_SHELLS: usize = 48;

/// Distributions the oracle can integrate against. Parameters that are
/// themselves uncertain are integrated out by nested rules, never by the
/// closed-form mixture identities under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Normal {
        mu: f64,
        sigma2: f64,
    },
    /// `x ~ N(μ, σ²)` with `μ ~ N(μ₀, σ₀²)`.
    NormalUncertainMean {
        mu0: f64,
        sigma2: f64,
        sigma0_2: f64,
    },
    /// As above with `s² ~ Γ(α/2, 2σ²/α)` replacing σ².
    NormalGammaVariance {
        mu0: f64,
        sigma2: f64,
        sigma0_2: f64,
        alpha: f64,
    },
    /// `x = e^y` with `y ~ N(μ, σ²)`, `μ ~ N(μ₀, σ₀²)`.
    LogNormal {
        mu_ln: f64,
        sigma_ln2: f64,
        sigma0_ln2: f64,
    },
    StudentT {
        nu: f64,
        loc: f64,
        scale: f64,
    },
}

impl DensitySpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DensitySpec::Normal { mu, sigma2 } => mu.is_finite() && sigma2 >= 0.0,
            DensitySpec::NormalUncertainMean { mu0, sigma2, sigma0_2 } => {
                mu0.is_finite() && sigma2 >= 0.0 && sigma0_2 >= 0.0
            }
            DensitySpec::NormalGammaVariance {
                mu0,
                sigma2,
                sigma0_2,
                alpha,
            } => mu0.is_finite() && sigma2 >= 0.0 && sigma0_2 >= 0.0 && alpha > 0.0,
            DensitySpec::LogNormal {
                mu_ln,
                sigma_ln2,
                sigma0_ln2,
            } => mu_ln.is_finite() && sigma_ln2 >= 0.0 && sigma0_ln2 >= 0.0,
            DensitySpec::StudentT { nu, loc, scale } => nu > 0.0 && loc.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid density parameters: {self:?}"))
        }
    }
}

/// Outcome `w·x + (1 − w)·r0` fed to the utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub w: f64,
    pub r0: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { w: 1.0, r0: 0.0 };

    pub fn apply(&self, x: f64) -> f64 {
        self.w * x + (1.0 - self.w) * self.r0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub moments: MomentPair,
    pub error_estimate: f64,
    /// Nodes per dimension (Gaussian rules), shells used (Student-t), or 0
    /// for the peak-centred tanh-sinh fallback.
    pub resolution: usize,
}

/// `E[U(w x + (1−w) r0)]` and `Var[U]` by Gauss–Hermite / Gauss–Laguerre
/// with node doubling, or by tanh-sinh on expanding shells for Student-t.
/// Divergent integrals are reported as [`Error::Divergent`].
pub fn expected_utility_quadrature(
    density: &DensitySpec,
    utility: &UtilitySpec,
    transform: Affine,
) -> Result<QuadratureResult> {
    density.validate()?;
    utility.validate()?;
    let u = |x: f64| utility.eval(transform.apply(x));
    if let DensitySpec::StudentT { nu, loc, scale } = *density {
        return student_t(nu, loc, scale, &u);
    }
    let ladder = node_ladder(density, &u);
    if ladder.is_ok() {
        return ladder;
    }
    // Gaussian rules lose accuracy when the utility tilts the mass far from
    // the nodes; retry around the integrand's peak before giving up.
    peak_centred(density, &|x| ln_utility(utility, transform.apply(x))).map_or(ladder, Ok)
}

fn node_ladder(density: &DensitySpec, u: &dyn Fn(f64) -> f64) -> Result<QuadratureResult> {
    let mut prev: Option<(f64, f64)> = None;
    let mut err = f64::INFINITY;
    for n in LEVELS {
        let rules = Rules::new(density, n)?;
        let mean = rules.expect(density, u);
        let var = rules.expect(density, &|x| (u(x) - mean).powi(2));
        if !mean.is_finite() || !var.is_finite() {
            return Err(Error::Divergent(format!(
                "utility is not integrable against {density:?} (non-finite values at {n} nodes)"
            )));
        }
        if let Some((pm, pv)) = prev {
            err = (mean - pm).abs().max((var - pv).abs());
            if err <= QUAD_TOL * 1f64.max(mean.abs()).max(var) {
                return Ok(QuadratureResult {
                    moments: MomentPair::new(mean, var)?,
                    error_estimate: err,
                    resolution: n,
                });
            }
        }
        prev = Some((mean, var));
    }
    Err(Error::Quadrature { estimate: err })
}

/// Integrand kept within this many e-folds of its peak.
const TAIL_EFOLDS: f64 = 75.0;
const SCAN_STEP: f64 = 0.1;
/// Above this log-magnitude values are kept in log form.
const LN_BIG: f64 = 600.0;

/// `mantissa · e^{ln_scale}`, with an absolute error on the same scale.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    mantissa: f64,
    err: f64,
    ln_scale: f64,
}

impl Scaled {
    fn signed_ln(self) -> (f64, f64) {
        (self.mantissa.signum(), self.mantissa.abs().ln() + self.ln_scale)
    }

    fn rel_err(self) -> f64 {
        self.err / self.mantissa.abs()
    }

    fn value(self) -> Option<(f64, f64)> {
        let scale = self.ln_scale.exp();
        let v = self.mantissa * scale;
        v.is_finite().then_some((v, self.err * scale))
    }
}

/// Doubling steps allowed when chasing a peak or a tail outside the window.
const MAX_DOUBLINGS: usize = 64;

/// Walks from `x` in direction `dir` with doubling steps while `ℓ` rises,
/// then refines the bracketed maximum by golden section.
fn chase_peak(l: &dyn Fn(f64) -> f64, x: f64, dir: f64) -> Option<(f64, f64)> {
    let (mut prev, mut cur, mut d) = (x - dir * SCAN_STEP, x, SCAN_STEP);
    let mut l_cur = l(cur);
    for _ in 0..MAX_DOUBLINGS {
        d *= 2.0;
        let next = cur + dir * d;
        let l_next = l(next);
        if !(l_next > l_cur) {
            let (lo, hi) = if dir > 0.0 { (prev, next) } else { (next, prev) };
            let (xm, lm) = crate::numerics::golden_section_max(l, lo, hi, 1e-9 * (1.0 + d));
            return (lm >= l_cur).then_some((xm, lm)).or(Some((cur, l_cur)));
        }
        (prev, cur, l_cur) = (cur, next, l_next);
    }
    None
}

/// First point beyond `x` in direction `dir`, by doubling steps, where `ℓ`
/// falls below `floor`.
fn chase_tail(l: &dyn Fn(f64) -> f64, x: f64, dir: f64, floor: f64) -> Option<f64> {
    let mut d = SCAN_STEP;
    for _ in 0..MAX_DOUBLINGS {
        let y = x + dir * d;
        if l(y) < floor {
            return Some(y);
        }
        d *= 2.0;
    }
    None
}

/// `∫ sign(x)·e^{ℓ(x)} dx` where `term(x) = (sign, ℓ)`. A fine grid over
/// `[lo, hi]` resolves local structure such as sign changes; outside it ℓ is
/// taken to be unimodal, so peaks and tails there are found by doubling
/// steps. The region within [`TAIL_EFOLDS`] of the peak is integrated by
/// tanh-sinh, split at the peak and the window edges. `None` when ℓ is
/// non-finite or rises without bound.
fn peak_integral<F>(term: F, lo: f64, hi: f64) -> Option<Scaled>
where
    F: Fn(f64) -> (f64, f64),
{
    let bad = std::cell::Cell::new(false);
    let l = |x: f64| {
        let v = term(x).1;
        if v.is_nan() || v == f64::INFINITY {
            bad.set(true);
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let n = ((hi - lo) / SCAN_STEP).ceil() as usize;
    let grid: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            (x, l(x))
        })
        .collect();
    let mut peak = grid
        .iter()
        .fold((lo, f64::NEG_INFINITY), |p, &(x, v)| if v > p.1 { (x, v) } else { p });
    if bad.get() {
        return None;
    }
    if peak.1 == f64::NEG_INFINITY {
        return Some(Scaled {
            mantissa: 0.0,
            err: 0.0,
            ln_scale: 0.0,
        });
    }
    for (edge, dir) in [(lo, -1.0), (hi, 1.0)] {
        let p = chase_peak(&l, edge, dir)?;
        if p.1 > peak.1 {
            peak = p;
        }
    }
    let floor = peak.1 - TAIL_EFOLDS;
    let inside = |x: f64| (lo..=hi).contains(&x);
    // tails start from the window edge when the window itself is not negligible
    let left_from = if grid[0].1 >= floor && inside(peak.0) {
        lo
    } else {
        peak.0.min(hi)
    };
    let right_from = if grid[n].1 >= floor && inside(peak.0) {
        hi
    } else {
        peak.0.max(lo)
    };
    let mut xl = chase_tail(&l, left_from.min(peak.0), -1.0, floor)?;
    let mut xr = chase_tail(&l, right_from.max(peak.0), 1.0, floor)?;
    if let Some(&(x, _)) = grid.iter().find(|g| g.1 >= floor) {
        xl = xl.min(x - SCAN_STEP);
    }
    if let Some(&(x, _)) = grid.iter().rev().find(|g| g.1 >= floor) {
        xr = xr.max(x + SCAN_STEP);
    }
    if bad.get() {
        return None;
    }
    let mut cuts = vec![xl, peak.0, xr];
    cuts.extend([lo, hi].into_iter().filter(|&c| c > xl && c < xr));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let scaled = |x: f64| {
        let (sign, v) = term(x);
        sign * (v - peak.1).exp()
    };
    let (mut total, mut err) = (0.0, 0.0);
    for pair in cuts.windows(2) {
        let (v, e) = tanh_sinh(scaled, pair[0], pair[1], 1e-15);
        total += v;
        err += e;
    }
    Some(Scaled {
        mantissa: total,
        err,
        ln_scale: peak.1,
    })
}

fn signed_ln(v: f64) -> (f64, f64) {
    (v.signum(), v.abs().ln())
}

/// Utility as `(sign, ln|U|)`, finite where `U` itself would overflow.
fn ln_utility(utility: &UtilitySpec, x: f64) -> (f64, f64) {
    match *utility {
        UtilitySpec::Cara { a } if -a * x > LN_BIG => (-1.0, -a * x + (-(a * x).exp()).ln_1p() - a.ln()),
        _ => signed_ln(utility.eval(x)),
    }
}

/// `E[g(m + sd Z)]` by [`peak_integral`] in the standard-normal variable,
/// with `g` given in signed-log form.
fn gauss_peak(m: f64, sd: f64, lg: &dyn Fn(f64) -> (f64, f64)) -> Option<Scaled> {
    if sd == 0.0 {
        let (s, l) = lg(m);
        return l.is_finite().then_some(Scaled {
            mantissa: s,
            err: 0.0,
            ln_scale: l,
        });
    }
    let ln_phi = -0.5 * (2.0 * std::f64::consts::PI).ln();
    peak_integral(
        |z| {
            let (s, l) = lg(m + sd * z);
            (s, l + ln_phi - 0.5 * z * z)
        },
        -12.0,
        12.0,
    )
}

/// Expectation under the Gaussian families with the stacked normals merged
/// into one (independent normals add), and the Gamma variance integrated in
/// `t = ln V` around its peak.
fn peak_expect(density: &DensitySpec, lg: &dyn Fn(f64) -> (f64, f64)) -> Option<Scaled> {
    match *density {
        DensitySpec::Normal { mu, sigma2 } => gauss_peak(mu, sigma2.sqrt(), lg),
        DensitySpec::NormalUncertainMean { mu0, sigma2, sigma0_2 } => gauss_peak(mu0, (sigma2 + sigma0_2).sqrt(), lg),
        DensitySpec::LogNormal {
            mu_ln,
            sigma_ln2,
            sigma0_ln2,
        } => gauss_peak(mu_ln, (sigma_ln2 + sigma0_ln2).sqrt(), &|y| lg(y.exp())),
        DensitySpec::NormalGammaVariance {
            mu0,
            sigma2,
            sigma0_2,
            alpha,
        } => {
            let k = 0.5 * alpha;
            let ln_norm = -ln_gamma(k);
            let inner_rel = std::cell::Cell::new(0.0f64);
            let centre = k.ln();
            let outer = peak_integral(
                |t| {
                    let v = t.exp();
                    let Some(inner) = gauss_peak(mu0, (sigma0_2 + 2.0 * sigma2 * v / alpha).sqrt(), lg) else {
                        return (1.0, f64::NAN);
                    };
                    if inner.mantissa != 0.0 {
                        inner_rel.set(inner_rel.get().max(inner.rel_err()));
                    }
                    let (s, l) = inner.signed_ln();
                    (s, l + ln_norm + k * t - v)
                },
                centre - 12.0,
                centre + 4.0,
            )?;
            Some(Scaled {
                err: outer.err + inner_rel.get() * outer.mantissa.abs(),
                ..outer
            })
        }
        DensitySpec::StudentT { .. } => None,
    }
}

fn peak_centred(density: &DensitySpec, lu: &dyn Fn(f64) -> (f64, f64)) -> Option<QuadratureResult> {
    let (mean, e1) = peak_expect(density, lu)?.value()?;
    let centred = |x: f64| {
        let (s, l) = lu(x);
        if l < LN_BIG {
            let (_, d) = signed_ln(s * l.exp() - mean);
            (1.0, 2.0 * d)
        } else {
            (1.0, 2.0 * l)
        }
    };
    let (var, e2) = peak_expect(density, &centred)?.value()?;
    let estimate = e1.max(e2);
    if !(estimate <= QUAD_TOL * 1f64.max(mean.abs()).max(var)) {
        return None;
    }
    Some(QuadratureResult {
        moments: MomentPair::new(mean, var).ok()?,
        error_estimate: estimate,
        resolution: 0,
    })
}

struct Rules {
    normal: std::sync::Arc<ExpectationRule>,
    gamma: Option<ExpectationRule>,
}

impl Rules {
    fn new(density: &DensitySpec, n: usize) -> Result<Self> {
        let gamma = match *density {
            DensitySpec::NormalGammaVariance { alpha, .. } => Some(gamma_rule(n, 0.5 * alpha)?),
            _ => None,
        };
        Ok(Self {
            normal: normal_rule(n),
            gamma,
        })
    }

    /// `E[g(μ₀ + σ₀ z₁ + s z₂)]` with the inner normal skipped when σ₀ = 0.
    fn mixed(&self, mu0: f64, sd0: f64, sd: f64, g: &dyn Fn(f64) -> f64) -> f64 {
        let r = &self.normal;
        if sd0 == 0.0 {
            r.expect(|z| g(mu0 + sd * z))
        } else {
            r.expect(|z1| r.expect(|z2| g(mu0 + sd0 * z1 + sd * z2)))
        }
    }

    fn expect(&self, density: &DensitySpec, g: &dyn Fn(f64) -> f64) -> f64 {
        match *density {
            DensitySpec::Normal { mu, sigma2 } => self.mixed(mu, 0.0, sigma2.sqrt(), g),
            DensitySpec::NormalUncertainMean { mu0, sigma2, sigma0_2 } => {
                self.mixed(mu0, sigma0_2.sqrt(), sigma2.sqrt(), g)
            }
            DensitySpec::NormalGammaVariance {
                mu0,
                sigma2,
                sigma0_2,
                alpha,
            } => {
                let gamma = self.gamma.as_ref().expect("gamma rule built for this family");
                let sd0 = sigma0_2.sqrt();
                gamma.expect(|v| self.mixed(mu0, sd0, (2.0 * sigma2 * v / alpha).sqrt(), g))
            }
            DensitySpec::LogNormal {
                mu_ln,
                sigma_ln2,
                sigma0_ln2,
            } => self.mixed(mu_ln, sigma0_ln2.sqrt(), sigma_ln2.sqrt(), &|y| g(y.exp())),
            DensitySpec::StudentT { .. } => unreachable!("handled by the shell integrator"),
        }
    }
}

fn student_t(nu: f64, loc: f64, scale: f64, u: &dyn Fn(f64) -> f64) -> Result<QuadratureResult> {
    let log_norm =
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln() - scale.ln();
    let pdf = move |x: f64| {
        let z = (x - loc) / scale;
        (log_norm - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()).exp()
    };

    // The integrand times |x − loc| must vanish in both tails; probe decades.
    for side in [-1.0, 1.0] {
        let probe = |j: i32| {
            let d = scale * 10f64.powi(j);
            let x = loc + side * d;
            (1.0 + u(x).powi(2)) * pdf(x) * d
        };
        let (p11, p12) = (probe(11), probe(12));
        if !p11.is_finite() || !p12.is_finite() || p12 >= p11 * (1.0 - 1e-3) {
            return Err(Error::Divergent(format!(
                "utility grows too fast for Student-t tails with nu = {nu} (tail probe {p12:.3e})"
            )));
        }
    }

    let integrate = |g: &dyn Fn(f64) -> f64| -> Result<(f64, f64, usize)> {
        let h = |x: f64| g(x) * pdf(x);
        let lo = loc - CORE * scale;
        let hi = loc + CORE * scale;
        let (mut total, mut err) = tanh_sinh(h, lo, hi, 1e-14);
        let mut width = CORE * scale;
        let mut quiet = 0;
        for shell in 1..=MAX_SHELLS {
            let (l, le) = tanh_sinh(h, loc - 2.0 * width, loc - width, 1e-15);
            let (r, re) = tanh_sinh(h, loc + width, loc + 2.0 * width, 1e-15);
            width *= 2.0;
            total += l + r;
            err += le + re;
            if !total.is_finite() {
                return Err(Error::Divergent(format!(
                    "Student-t shell integral overflowed at width {width:.3e}"
                )));
            }
            let tol = QUAD_TOL * 1f64.max(total.abs());
            if (l + r).abs() <= 1e-3 * tol {
                quiet += 1;
                if quiet == 2 {
                    return Ok((total, err + (l + r).abs(), shell));
                }
            } else {
                quiet = 0;
            }
        }
        Err(Error::Quadrature { estimate: err })
    };

    let (mean, e1, s1) = integrate(u)?;
    let (var, e2, s2) = integrate(&|x| (u(x) - mean).powi(2))?;
    let estimate = e1.max(e2);
    if estimate > QUAD_TOL * 1f64.max(mean.abs()).max(var) {
        return Err(Error::Quadrature { estimate });
    }
    Ok(QuadratureResult {
        moments: MomentPair::new(mean, var)?,
        error_estimate: estimate,
        resolution: s1.max(s2),
    })
}
