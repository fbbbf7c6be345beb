//! Reverse-Hölder structure of the `ApLambda` and tilde classes.
//!
//! Densities are always taken against `ν_λ`: `g = t^p w / t^{2λ+1}` for
//! `ApLambda` (the density of `μ = t^p w dt`) and `g = w / t^{2λ+1}` for the
//! tilde class.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measure::{ln_moment, Grid, GridFunction, Interval, LambdaMeasure, Window};
use crate::weights::{integrate_against, weight_constant, BaseClass, ClassKind, Weight, WeightConstantReport};

/// Default `c` in `ε = 1/(c·[w])`.
pub const DEFAULT_C: f64 = 1024.0;

/// How `ε` is derived from the class constant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// `ε = 1/(c·[w])`
    #[default]
    Reciprocal,
    /// `ε = 1 + 1/(c·[w])`
    OnePlusReciprocal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    MuOverNu,
    WOverNu,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReverseHolderReport {
    pub epsilon: f64,
    #[serde(serialize_with = "crate::serde_ext::extended_f64")]
    pub lhs: f64,
    pub rhs: f64,
    #[serde(serialize_with = "crate::serde_ext::extended_f64")]
    pub factor: f64,
    pub pass: bool,
    pub density_kind: DensityKind,
}

/// `(shift σ, density kind)`: the density is `t^σ w / t^{2λ+1}`.
fn density(kind: ClassKind, p: f64) -> Result<(f64, DensityKind)> {
    match kind.base() {
        BaseClass::ApLambda => Ok((p, DensityKind::MuOverNu)),
        BaseClass::ApLambdaTilde => Ok((0.0, DensityKind::WOverNu)),
        BaseClass::Ap => Err(Error::Unsupported("reverse-type densities are defined for apl and apt only".into())),
    }
}

struct Rh {
    eps: f64,
    shift: f64,
    e: f64,
}

impl Rh {
    fn new(p: f64, mu: &LambdaMeasure, kind: ClassKind, eps: f64) -> Result<(Self, DensityKind)> {
        if !(p > 1.0) {
            return domain(format!("p must exceed 1, got {p}"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return domain(format!("ε must be positive, got {eps}"));
        }
        let (shift, dk) = density(kind, p)?;
        Ok((Self { eps, shift, e: mu.nu_exponent() }, dk))
    }

    /// `(ln lhs, ln rhs)` on `b`.
    fn ln_sides(&self, w: &Weight, b: &Interval) -> Result<(f64, f64)> {
        let s = 1.0 + self.eps;
        let ln_nu = ln_moment(self.e, b.a, b.b);
        let ln_top = w.ln_integral(s, (self.shift - self.e) * s + self.e, b)?;
        let ln_mean = w.ln_integral(1.0, self.shift, b)?;
        Ok(((ln_top - ln_nu) / s, ln_mean - ln_nu))
    }
}

/// Reverse-Hölder comparison on `b` at exponent `1 + ε`.
pub fn reverse_holder(w: &Weight, p: f64, mu: &LambdaMeasure, kind: ClassKind, eps: f64, b: &Interval) -> Result<ReverseHolderReport> {
    let (rh, dk) = Rh::new(p, mu, kind, eps)?;
    let (l, r) = rh.ln_sides(w, b)?;
    let factor = (l - r).exp();
    Ok(ReverseHolderReport {
        epsilon: eps,
        lhs: l.exp(),
        rhs: r.exp(),
        factor,
        pass: factor <= 2.0,
        density_kind: dk,
    })
}

/// `ε` from the class constant on `grid`, with the constant it came from.
pub fn reverse_epsilon(
    w: &Weight,
    p: f64,
    mu: &LambdaMeasure,
    kind: ClassKind,
    grid: Grid,
    c: f64,
    rule: EpsilonRule,
) -> Result<(f64, WeightConstantReport)> {
    if !(c > 0.0) {
        return domain(format!("c must be positive, got {c}"));
    }
    let report = weight_constant(w, p, mu, kind, grid)?;
    if !report.value.is_finite() {
        return domain("the class constant is infinite");
    }
    let base = 1.0 / (c * report.value);
    let eps = match rule {
        EpsilonRule::Reciprocal => base,
        EpsilonRule::OnePlusReciprocal => 1.0 + base,
    };
    Ok((eps, report))
}

/// One row of a reverse-Hölder sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub kind: ClassKind,
    #[serde(serialize_with = "crate::serde_ext::extended_f64_opt")]
    pub alpha: Option<f64>,
    pub p: f64,
    pub lambda: f64,
    pub epsilon: f64,
    #[serde(serialize_with = "crate::serde_ext::extended_f64")]
    pub max_factor: f64,
    pub pass: bool,
}

/// Largest reverse-Hölder factor over every breakpoint interval of `grid`.
pub fn reverse_sweep(w: &Weight, p: f64, mu: &LambdaMeasure, kind: ClassKind, grid: Grid, eps: f64) -> Result<SweepRow> {
    let (rh, _) = Rh::new(p, mu, kind, eps)?;
    let pts = grid.breakpoints();
    let factors: Result<Vec<f64>> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut best = f64::NEG_INFINITY;
            for &b in &pts[i + 1..] {
                let iv = Interval { a: pts[i], b };
                if !kind.admits(&iv) {
                    break;
                }
                let (l, r) = rh.ln_sides(w, &iv)?;
                best = best.max(l - r);
            }
            Ok(best)
        })
        .collect();
    let ln_max = factors?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let max_factor = ln_max.exp();
    Ok(SweepRow {
        kind,
        alpha: w.alpha(),
        p,
        lambda: mu.lambda(),
        epsilon: eps,
        max_factor,
        pass: max_factor <= 2.0,
    })
}

/// Mass of `b` under the measure whose density against `ν_λ` is tested:
/// `μ = t^p w dt` for `ApLambda`, `w dt` for tilde.
pub fn induced_mass(w: &Weight, p: f64, kind: ClassKind, b: &Interval) -> Result<f64> {
    let (shift, _) = density(kind, p)?;
    w.integral(1.0, shift, b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsoluteContinuity {
    pub alpha: f64,
    pub beta_bound: f64,
    pub mu_ratio: f64,
    pub pass: bool,
}

/// Checks `induced(S)/induced(B) ≤ 1 − (1−α)^p/C` with `α = ν(S)/ν(B)`.
///
/// `s` is a list of disjoint subintervals of `b`; `c` is the class constant.
pub fn absolute_continuity(
    w: &Weight,
    p: f64,
    mu: &LambdaMeasure,
    kind: ClassKind,
    b: &Interval,
    s: &[Interval],
    c: f64,
) -> Result<AbsoluteContinuity> {
    let mut sorted = s.to_vec();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    for (k, piece) in sorted.iter().enumerate() {
        if !b.contains_interval(piece) {
            return domain(format!("({}, {}) is not inside B", piece.a, piece.b));
        }
        if k > 0 && sorted[k - 1].b > piece.a {
            return domain("pieces of S overlap");
        }
    }
    let nu_b = mu.nu(b);
    let nu_s: f64 = sorted.iter().map(|x| mu.nu(x)).sum();
    let alpha = nu_s / nu_b;
    if alpha >= 1.0 {
        return domain(format!("S must be a proper part of B (ν-ratio {alpha})"));
    }
    let mass_b = induced_mass(w, p, kind, b)?;
    let mass_s: f64 = sorted.iter().map(|x| induced_mass(w, p, kind, x)).sum::<Result<f64>>()?;
    let beta_bound = 1.0 - (1.0 - alpha).powf(p) / c;
    let mu_ratio = mass_s / mass_b;
    Ok(AbsoluteContinuity { alpha, beta_bound, mu_ratio, pass: mu_ratio <= beta_bound * (1.0 + 1e-12) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioTest {
    pub ratio: f64,
    pub bound: f64,
    pub delta: f64,
    pub pass: bool,
}

/// Checks `induced(A)/induced(B) ≤ C·(ν(A)/ν(B))^δ` with `δ = ε/(1+ε)`.
///
/// `c` should be the largest reverse-Hölder factor at this `ε` over a family containing `b`.
#[allow(clippy::too_many_arguments)]
pub fn ratio_testing(
    w: &Weight,
    p: f64,
    mu: &LambdaMeasure,
    kind: ClassKind,
    a: &Interval,
    b: &Interval,
    eps: f64,
    c: f64,
) -> Result<RatioTest> {
    if !b.contains_interval(a) {
        return domain("A must be contained in B");
    }
    let ratio = induced_mass(w, p, kind, a)? / induced_mass(w, p, kind, b)?;
    let delta = eps / (1.0 + eps);
    let bound = c * (mu.nu(a) / mu.nu(b)).powf(delta);
    Ok(RatioTest { ratio, bound, delta, pass: ratio <= bound * (1.0 + 1e-12) })
}

/// Parameters of the openness search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OpennessParams {
    /// Lower end of the search, `1 + 10^{-3}` by default.
    pub floor: f64,
    /// Window exponent of the baseline run; stability is judged against `L + window_step`.
    pub window: u32,
    pub window_step: u32,
    pub resolution: u32,
    /// `q` counts as stable when the constant grows by at most this factor.
    pub tolerance: f64,
    /// Ten halvings leave a bracket near 10^{-3}; the stability test itself
    /// resolves thresholds to a few 10^{-4} at the default windows.
    pub iterations: u32,
}

impl Default for OpennessParams {
    fn default() -> Self {
        Self { floor: 1.001, window: 64, window_step: 4, resolution: 1, tolerance: 1.05, iterations: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpennessResult {
    /// Estimate of the smallest admissible exponent: the midpoint of the final bracket.
    pub q_hat: f64,
    /// Largest tested exponent found unstable.
    pub lo: f64,
    /// Smallest tested exponent found stable.
    pub hi: f64,
    /// Width of the final bracket.
    pub step: f64,
    /// The search floor itself was stable.
    pub at_floor: bool,
}

/// Whether the tilde constant of `w` at exponent `q` is finite and stable as the window grows.
pub fn tilde_stable(w: &Weight, q: f64, mu: &LambdaMeasure, params: &OpennessParams) -> Result<bool> {
    let g0 = Grid::new(Window::new(params.window)?, params.resolution)?;
    let g1 = Grid::new(Window::new(params.window + params.window_step)?, params.resolution)?;
    let c0 = weight_constant(w, q, mu, ClassKind::ApLambdaTilde, g0)?.ln_value;
    let c1 = weight_constant(w, q, mu, ClassKind::ApLambdaTilde, g1)?.ln_value;
    Ok(c0.is_finite() && c1.is_finite() && c1 - c0 <= params.tolerance.ln())
}

/// Bisection for the smallest `q ∈ [floor, p]` at which `w` is in the tilde class.
pub fn openness_search(w: &Weight, p: f64, mu: &LambdaMeasure, params: &OpennessParams) -> Result<OpennessResult> {
    if !(p > params.floor) {
        return domain(format!("p = {p} must exceed the search floor {}", params.floor));
    }
    if tilde_stable(w, params.floor, mu, params)? {
        return Ok(OpennessResult { q_hat: params.floor, lo: params.floor, hi: params.floor, step: 0.0, at_floor: true });
    }
    if !tilde_stable(w, p, mu, params)? {
        return domain(format!("the weight is not stably in the tilde class at p = {p}"));
    }
    let (mut lo, mut hi) = (params.floor, p);
    for _ in 0..params.iterations {
        let mid = 0.5 * (lo + hi);
        if tilde_stable(w, mid, mu, params)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(OpennessResult { q_hat: 0.5 * (lo + hi), lo, hi, step: hi - lo, at_floor: false })
}

/// A nonnegative test function for the testing condition.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    Grid(GridFunction),
    /// `f = w^{w_exp} · t^{t_exp}`
    WeightPower { w_exp: f64, t_exp: f64 },
}

impl TestFunction {
    /// The choice of `f` that turns the testing ratio into the `ApLambda` product.
    pub fn extremal(p: f64, mu: &LambdaMeasure) -> Self {
        let pp = p / (p - 1.0);
        TestFunction::WeightPower { w_exp: -1.0 / (p - 1.0), t_exp: (1.0 + 2.0 * mu.lambda()) / (p - 1.0) - pp }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestingResult {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs/rhs`; `None` when `rhs = 0`.
    pub constant: Option<f64>,
}

/// `μ(B)·(f_{B,λ})^p` against `∫_B f^p dμ`, `μ = t^p w dt`.
pub fn testing_characterization(w: &Weight, p: f64, mu: &LambdaMeasure, f: &TestFunction, b: &Interval) -> Result<TestingResult> {
    if !(p > 1.0) {
        return domain(format!("p must exceed 1, got {p}"));
    }
    let mu_b = w.integral(1.0, p, b)?;
    let e = mu.nu_exponent();
    let (avg, rhs) = match f {
        TestFunction::Grid(g) => {
            if g.values().iter().any(|v| *v < 0.0) {
                return domain("test function must be nonnegative");
            }
            (g.lambda_average(b, mu)?, integrate_against(w, g, p, p, b)?)
        }
        TestFunction::WeightPower { w_exp, t_exp } => (
            w.integral(*w_exp, t_exp + e, b)? / mu.nu(b),
            w.integral(p * w_exp + 1.0, p * t_exp + p, b)?,
        ),
    };
    let lhs = mu_b * avg.powf(p);
    Ok(TestingResult { lhs, rhs, constant: (rhs > 0.0).then(|| lhs / rhs) })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::weights::interval_product;

    fn grid(l: u32, r: u32) -> Grid {
        Grid::new(Window::new(l).unwrap(), r).unwrap()
    }

    fn lam(l: f64) -> LambdaMeasure {
        LambdaMeasure::new(l).unwrap()
    }

    #[test]
    fn reverse_holder_examples() {
        let mu = lam(1.0);
        let b = Interval::new(1.0, 2.0).unwrap();
        let one = Weight::power(0.0).unwrap();
        let r = reverse_holder(&one, 2.0, &mu, ClassKind::ApLambda, 1.0, &b).unwrap();
        assert_relative_eq!(r.lhs, (0.4f64).sqrt(), max_relative = 1e-13);
        assert_relative_eq!(r.rhs, 28.0 / 45.0, max_relative = 1e-13);
        assert!(r.pass);
        assert_eq!(r.density_kind, DensityKind::MuOverNu);
        let exact = Weight::power(2.0 + 1.0 - 2.0).unwrap();
        let r = reverse_holder(&exact, 2.0, &mu, ClassKind::ApLambda, 0.3, &b).unwrap();
        assert_relative_eq!(r.lhs, 1.0, max_relative = 1e-13);
        assert_relative_eq!(r.rhs, 1.0, max_relative = 1e-13);
        let t = Weight::power(3.0).unwrap();
        let r = reverse_holder(&t, 2.0, &mu, ClassKind::ApLambdaTilde, 0.7, &b).unwrap();
        assert_relative_eq!(r.lhs, r.rhs, max_relative = 1e-13);
        assert!(reverse_holder(&t, 2.0, &mu, ClassKind::Ap, 0.7, &b).is_err());
    }

    #[test]
    fn epsilon_rules() {
        let g = grid(4, 3);
        let mu = lam(1.0);
        let exact = Weight::power(1.0).unwrap();
        let (eps, rep) = reverse_epsilon(&exact, 2.0, &mu, ClassKind::ApLambda, g, DEFAULT_C, EpsilonRule::Reciprocal).unwrap();
        assert_eq!(rep.value, 1.0);
        assert_eq!(eps, 1.0 / 1024.0);
        let (eps, _) = reverse_epsilon(&exact, 2.0, &mu, ClassKind::ApLambda, g, DEFAULT_C, EpsilonRule::OnePlusReciprocal).unwrap();
        assert_eq!(eps, 1.0 + 1.0 / 1024.0);
        let one = Weight::power(0.0).unwrap();
        let (eps, rep) = reverse_epsilon(&one, 2.0, &mu, ClassKind::ApLambda, g, DEFAULT_C, EpsilonRule::Reciprocal).unwrap();
        assert_relative_eq!(eps, 1.0 / (1024.0 * rep.value), max_relative = 1e-15);
        assert!(reverse_sweep(&one, 2.0, &mu, ClassKind::ApLambda, g, eps).unwrap().pass);
    }

    #[test]
    fn absolute_continuity_examples() {
        let mu = lam(0.5);
        let b = Interval::new(1.0, 3.0).unwrap();
        let w = Weight::power(0.0).unwrap();
        let empty = absolute_continuity(&w, 2.0, &mu, ClassKind::ApLambdaTilde, &b, &[], 1.5).unwrap();
        assert_eq!(empty.mu_ratio, 0.0);
        assert!(empty.pass);
        // μ equals ν for w = t^{2λ+1−p}: ratio α ≤ 1 − (1−α)^p
        let exact = Weight::power(2.0 * 0.5 + 1.0 - 2.0).unwrap();
        let s = [Interval::new(1.5, 2.0).unwrap()];
        let r = absolute_continuity(&exact, 2.0, &mu, ClassKind::ApLambda, &b, &s, 1.0).unwrap();
        assert_relative_eq!(r.mu_ratio, r.alpha, max_relative = 1e-13);
        assert!(r.pass);
        assert!(absolute_continuity(&exact, 2.0, &mu, ClassKind::ApLambda, &b, &[b], 1.0).is_err());
    }

    #[test]
    fn ratio_testing_examples() {
        let mu = lam(0.5);
        let b = Interval::new(1.0, 3.0).unwrap();
        let w = Weight::power(2.0).unwrap();
        let r = ratio_testing(&w, 2.0, &mu, ClassKind::ApLambdaTilde, &b, &b, 0.01, 1.0).unwrap();
        assert_relative_eq!(r.ratio, 1.0, max_relative = 1e-14);
        assert!(r.bound >= 1.0);
        let exact = Weight::power(0.0).unwrap();
        let a = Interval::new(2.0, 2.5).unwrap();
        let r = ratio_testing(&exact, 2.0, &mu, ClassKind::ApLambda, &a, &b, 0.01, 1.0).unwrap();
        assert_relative_eq!(r.ratio, mu.nu(&a) / mu.nu(&b), max_relative = 1e-13);
        assert!(r.pass);
        assert!(ratio_testing(&exact, 2.0, &mu, ClassKind::ApLambda, &b, &a, 0.01, 1.0).is_err());
    }

    #[test]
    fn testing_examples() {
        let mu = lam(1.0);
        let g = grid(3, 3);
        let b = Interval::new(0.5, 3.0).unwrap();
        let w = Weight::power(0.5).unwrap();
        let one = TestFunction::Grid(GridFunction::constant(g, 1.0).unwrap());
        let r = testing_characterization(&w, 2.0, &mu, &one, &b).unwrap();
        assert_relative_eq!(r.constant.unwrap(), 1.0, max_relative = 1e-13);
        for p in [1.5, 2.0, 3.0] {
            let ext = testing_characterization(&w, p, &mu, &TestFunction::extremal(p, &mu), &b).unwrap();
            let prod = interval_product(&w, p, &mu, ClassKind::ApLambda, &b).unwrap();
            assert_relative_eq!(ext.constant.unwrap(), prod, max_relative = 1e-12);
        }
        let zero = TestFunction::Grid(GridFunction::constant(g, 0.0).unwrap());
        assert_eq!(testing_characterization(&w, 2.0, &mu, &zero, &b).unwrap().constant, None);
    }

    #[test]
    fn openness_examples() {
        let mu = lam(1.0);
        let params = OpennessParams::default();
        for a in [0.0, 3.0] {
            let r = openness_search(&Weight::power(a).unwrap(), 2.0, &mu, &params).unwrap();
            assert!(r.at_floor, "alpha {a}: {r:?}");
        }
        let r = openness_search(&Weight::power(6.0).unwrap(), 2.0, &mu, &params).unwrap();
        assert!(!r.at_floor);
        assert!((r.q_hat - 1.75).abs() <= 0.01, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lhs_monotone_in_epsilon(alpha in -1.0f64..4.0, e1 in 0.0f64..2.0, de in 0.0f64..2.0,
                                   a in 0.1f64..5.0, ratio in 1.01f64..30.0, tilde in proptest::bool::ANY) {
            let mu = lam(0.75);
            let kind = if tilde { ClassKind::ApLambdaTilde } else { ClassKind::ApLambda };
            let w = Weight::power(alpha).unwrap();
            let b = Interval::new(a, a * ratio).unwrap();
            let r1 = reverse_holder(&w, 2.0, &mu, kind, e1 + 1e-6, &b).unwrap();
            let r2 = reverse_holder(&w, 2.0, &mu, kind, e1 + de + 1e-6, &b).unwrap();
            prop_assert!(r1.lhs <= r2.lhs * (1.0 + 1e-10));
            prop_assert!(r1.rhs <= r1.lhs * (1.0 + 1e-10));
        }
    }
}
