//! Muckenhoupt-type weight classes on the half line.
//!
//! Three global classes are supported, each with a local variant restricted
//! to intervals with `b <= k·a`:
//!
//! | kind  | first factor            | second factor                                     |
//! |-------|-------------------------|---------------------------------------------------|
//! | `Ap`  | `(1/|B|)∫ w`            | `((1/|B|)∫ w^{-1/(p-1)})^{p-1}`                   |
//! | `ApLambda` | `(1/ν(B))∫ t^p w`  | `((1/ν(B))∫ t^{2λp'} w^{-1/(p-1)})^{p-1}`        |
//! | `ApLambdaTilde` | `(1/ν(B))∫ w` | `((1/ν(B))∫ t^{(2λ+1)p'} w^{-1/(p-1)})^{p-1}`   |

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::measure::{ln_moment, moment_from, Grid, GridFunction, Interval, LambdaMeasure};

/// Exponents closer than this to the normalising exponent are snapped onto it,
/// so that the equality cases of Hölder give a product of exactly one.
const SNAP: f64 = 1e-12;

/// Bounds on tabulated weight values.
pub const TABULATED_MIN: f64 = 1e-12;
pub const TABULATED_MAX: f64 = 1e12;

/// The three global classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BaseClass {
    #[serde(rename = "ap")]
    Ap,
    #[serde(rename = "apl")]
    ApLambda,
    #[serde(rename = "apt")]
    ApLambdaTilde,
}

impl BaseClass {
    pub fn name(&self) -> &'static str {
        match self {
            BaseClass::Ap => "ap",
            BaseClass::ApLambda => "apl",
            BaseClass::ApLambdaTilde => "apt",
        }
    }

    /// `(β₁, β₂, e)`: the first factor integrates `w·t^{β₁}`, the second
    /// `w^{-1/(p-1)}·t^{β₂}`, both normalised by `∫ t^e`.
    pub fn exponents(&self, lambda: f64, p: f64) -> (f64, f64, f64) {
        let pp = p / (p - 1.0);
        let nu = 2.0 * lambda + 1.0;
        match self {
            BaseClass::Ap => (0.0, 0.0, 0.0),
            BaseClass::ApLambda => (p, 2.0 * lambda * pp, nu),
            BaseClass::ApLambdaTilde => (0.0, nu * pp, nu),
        }
    }

    /// Shift `c` in the dual exponent map `α ↦ c·p' − α/(p−1)`.
    pub fn dual_shift(&self, lambda: f64) -> f64 {
        match self {
            BaseClass::Ap => 0.0,
            BaseClass::ApLambda => 2.0 * lambda - 1.0,
            BaseClass::ApLambdaTilde => 2.0 * lambda + 1.0,
        }
    }
}

/// A weight class, optionally localised to intervals with `b <= k·a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassKind {
    Ap,
    ApLambda,
    ApLambdaTilde,
    ApLocal { k: f64 },
    ApLambdaLocal { k: f64 },
    ApLambdaTildeLocal { k: f64 },
}

impl ClassKind {
    pub fn local(base: BaseClass, k: f64) -> Result<Self> {
        if !(k > 1.0 && k.is_finite()) {
            return domain(format!("locality factor k must exceed 1, got {k}"));
        }
        Ok(match base {
            BaseClass::Ap => ClassKind::ApLocal { k },
            BaseClass::ApLambda => ClassKind::ApLambdaLocal { k },
            BaseClass::ApLambdaTilde => ClassKind::ApLambdaTildeLocal { k },
        })
    }

    pub fn global(base: BaseClass) -> Self {
        match base {
            BaseClass::Ap => ClassKind::Ap,
            BaseClass::ApLambda => ClassKind::ApLambda,
            BaseClass::ApLambdaTilde => ClassKind::ApLambdaTilde,
        }
    }

    pub fn base(&self) -> BaseClass {
        match self {
            ClassKind::Ap | ClassKind::ApLocal { .. } => BaseClass::Ap,
            ClassKind::ApLambda | ClassKind::ApLambdaLocal { .. } => BaseClass::ApLambda,
            ClassKind::ApLambdaTilde | ClassKind::ApLambdaTildeLocal { .. } => BaseClass::ApLambdaTilde,
        }
    }

    pub fn local_k(&self) -> Option<f64> {
        match *self {
            ClassKind::ApLocal { k } | ClassKind::ApLambdaLocal { k } | ClassKind::ApLambdaTildeLocal { k } => Some(k),
            _ => None,
        }
    }

    pub fn is_local(&self) -> bool {
        self.local_k().is_some()
    }

    /// Whether `b` belongs to the interval family of this kind.
    pub fn admits(&self, b: &Interval) -> bool {
        self.local_k().is_none_or(|k| b.b <= k * b.a)
    }
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.local_k() {
            None => f.write_str(self.base().name()),
            Some(k) => write!(f, "{}-local:{}", self.base().name(), k),
        }
    }
}

impl FromStr for ClassKind {
    type Err = Error;

    /// Accepts `ap`, `apl`, `apt`, optionally followed by `-local:K`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, k) = match s.split_once("-local") {
            Some((h, rest)) => {
                let k = rest.strip_prefix(':').unwrap_or("2");
                let k: f64 = k
                    .parse()
                    .map_err(|_| Error::Domain(format!("bad locality factor in {s:?}")))?;
                (h, Some(k))
            }
            None => (s, None),
        };
        let base = match head {
            "ap" => BaseClass::Ap,
            "apl" | "ap-lambda" => BaseClass::ApLambda,
            "apt" | "ap-lambda-tilde" => BaseClass::ApLambdaTilde,
            _ => return domain(format!("unknown class kind {s:?} (expected ap, apl, apt)")),
        };
        match k {
            Some(k) => ClassKind::local(base, k),
            None => Ok(ClassKind::global(base)),
        }
    }
}

impl Serialize for ClassKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A strictly positive weight on the window.
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    /// `t^alpha`, integrated in closed form.
    Power { alpha: f64 },
    /// Piecewise-constant values on a grid.
    Tabulated(GridFunction),
}

impl Weight {
    pub fn power(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return domain("power exponent must be finite");
        }
        Ok(Weight::Power { alpha })
    }

    pub fn tabulated(g: GridFunction) -> Result<Self> {
        if let Some((i, v)) = g
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| !(TABULATED_MIN..=TABULATED_MAX).contains(&v))
        {
            return domain(format!(
                "tabulated weight value {v} in cell {i} is outside [{TABULATED_MIN:e}, {TABULATED_MAX:e}]"
            ));
        }
        Ok(Weight::Tabulated(g))
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Weight::Power { alpha } => Some(*alpha),
            Weight::Tabulated(_) => None,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Weight::Power { alpha } => t.powf(*alpha),
            Weight::Tabulated(g) => g.eval(t),
        }
    }

    fn check(&self, b: &Interval) -> Result<()> {
        if let Weight::Tabulated(g) = self {
            if !g.grid().window().contains_interval(b) {
                return domain(format!("interval ({}, {}) leaves the weight's window", b.a, b.b));
            }
        }
        Ok(())
    }

    /// `∫_B w^s t^beta dt`.
    pub fn integral(&self, s: f64, beta: f64, b: &Interval) -> Result<f64> {
        self.check(b)?;
        Ok(match self {
            Weight::Power { alpha } => moment_from(alpha * s + beta, b.a, b.b),
            Weight::Tabulated(g) => g.integrate_abs_pow(s, beta, b)?,
        })
    }

    /// `ln ∫_B w^s t^beta dt`, without overflow for power weights.
    pub fn ln_integral(&self, s: f64, beta: f64, b: &Interval) -> Result<f64> {
        self.check(b)?;
        Ok(match self {
            Weight::Power { alpha } => ln_moment(alpha * s + beta, b.a, b.b),
            Weight::Tabulated(g) => g.integrate_abs_pow(s, beta, b)?.ln(),
        })
    }

    /// Pointwise `t^gamma · w^s` as a weight.
    pub fn transform(&self, s: f64, gamma: f64) -> Result<Self> {
        match self {
            Weight::Power { alpha } => Weight::power(s * alpha + gamma),
            Weight::Tabulated(g) => {
                let values = g
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let (a, b) = g.cell_bounds(i);
                        v.powf(s) * (0.5 * (a + b)).powf(gamma)
                    })
                    .collect();
                Weight::tabulated(GridFunction::new(g.grid(), values)?)
            }
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return domain(format!("p must satisfy 1 < p < ∞, got {p}"));
    }
    Ok(())
}

fn snap(e: f64, target: f64) -> f64 {
    if (e - target).abs() < SNAP {
        target
    } else {
        e
    }
}

/// Precomputed exponents for repeated product evaluations.
#[derive(Clone, Copy, Debug)]
struct ProductPlan {
    p: f64,
    q: f64,
    beta1: f64,
    beta2: f64,
    norm: f64,
    /// Power weights only: the full exponents of both factors.
    power: Option<(f64, f64)>,
}

impl ProductPlan {
    fn new(w: &Weight, p: f64, mu: &LambdaMeasure, base: BaseClass) -> Result<Self> {
        check_p(p)?;
        let (beta1, beta2, norm) = base.exponents(mu.lambda(), p);
        let q = -1.0 / (p - 1.0);
        let power = w
            .alpha()
            .map(|alpha| (snap(alpha + beta1, norm), snap(q * alpha + beta2, norm)));
        Ok(Self { p, q, beta1, beta2, norm, power })
    }

    fn ln_product_power(&self, a: f64, b: f64) -> f64 {
        let (e1, e2) = self.power.expect("power plan");
        let ln_n = ln_moment(self.norm, a, b);
        let ln1 = if e1 == self.norm { ln_n } else { ln_moment(e1, a, b) };
        let ln2 = if e2 == self.norm { ln_n } else { ln_moment(e2, a, b) };
        (ln1 - ln_n) + (self.p - 1.0) * (ln2 - ln_n)
    }

    fn ln_product(&self, w: &Weight, b: &Interval) -> Result<f64> {
        if self.power.is_some() {
            return Ok(self.ln_product_power(b.a, b.b));
        }
        let ln_n = ln_moment(self.norm, b.a, b.b);
        let ln1 = w.ln_integral(1.0, self.beta1, b)?;
        let ln2 = w.ln_integral(self.q, self.beta2, b)?;
        Ok((ln1 - ln_n) + (self.p - 1.0) * (ln2 - ln_n))
    }
}

/// Natural log of [`interval_product`].
pub fn ln_interval_product(w: &Weight, p: f64, mu: &LambdaMeasure, kind: ClassKind, b: &Interval) -> Result<f64> {
    ProductPlan::new(w, p, mu, kind.base())?.ln_product(w, b)
}

/// The bracketed product of `kind` for the single interval `b`.
pub fn interval_product(w: &Weight, p: f64, mu: &LambdaMeasure, kind: ClassKind, b: &Interval) -> Result<f64> {
    Ok(ln_interval_product(w, p, mu, kind, b)?.exp())
}

/// Supremum of the per-interval product over a finite interval family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightConstantReport {
    pub kind: ClassKind,
    pub p: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(serialize_with = "crate::serde_ext::extended_f64")]
    pub value: f64,
    #[serde(serialize_with = "crate::serde_ext::extended_f64")]
    pub ln_value: f64,
    pub argmax: Interval,
    #[serde(rename = "window_L")]
    pub window_l: u32,
    pub resolution: u32,
    pub interval_count: u64,
}

/// Best `(ln value, i, j)` with ties going to the smaller `i`, then `j`.
#[derive(Clone, Copy)]
pub(crate) struct Best {
    ln: f64,
    i: usize,
    j: usize,
    count: u64,
}

impl Best {
    const NONE: Best = Best { ln: f64::NEG_INFINITY, i: usize::MAX, j: usize::MAX, count: 0 };

    fn offer(&mut self, ln: f64, i: usize, j: usize) {
        self.count += 1;
        let ln = if ln.is_nan() { f64::INFINITY } else { ln };
        if self.i == usize::MAX || ln > self.ln || (ln == self.ln && (i, j) < (self.i, self.j)) {
            self.ln = ln;
            self.i = i;
            self.j = j;
        }
    }

    fn merge(mut self, other: Best) -> Best {
        let count = self.count + other.count;
        if other.i != usize::MAX
            && (self.i == usize::MAX
                || other.ln > self.ln
                || (other.ln == self.ln && (other.i, other.j) < (self.i, self.j)))
        {
            self = other;
        }
        self.count = count;
        self
    }
}

/// Maximises `f(i, j)` over breakpoint pairs `i < j` admitted by `admit`.
///
/// `f` is called for each row `i` with a stateful closure so that rows can
/// accumulate running sums.
pub(crate) fn argmax_pairs<R>(n: usize, row: R) -> Best
where
    R: Fn(usize, &mut dyn FnMut(usize, f64)) + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = Best::NONE;
            row(i, &mut |j, v| best.offer(v, i, j));
            best
        })
        .reduce(|| Best::NONE, Best::merge)
}

/// The class constant of `w`, maximised over every interval whose endpoints
/// are breakpoints of `grid` (local kinds: only those with `b <= k·a`).
///
/// The value is a lower bound for the supremum over all intervals.
pub fn weight_constant(w: &Weight, p: f64, mu: &LambdaMeasure, kind: ClassKind, grid: Grid) -> Result<WeightConstantReport> {
    let plan = ProductPlan::new(w, p, mu, kind.base())?;
    let pts = grid.breakpoints();
    let n = pts.len();
    let k = kind.local_k().unwrap_or(f64::INFINITY);

    let best = match w {
        Weight::Power { .. } => argmax_pairs(n, |i, emit| {
            let a = pts[i];
            for (j, &b) in pts.iter().enumerate().skip(i + 1) {
                if b > k * a {
                    break;
                }
                emit(j, plan.ln_product_power(a, b));
            }
        }),
        Weight::Tabulated(g) => {
            if g.grid() != grid {
                return domain("tabulated weight lives on a different grid than the enumeration");
            }
            let cells: Vec<(f64, f64, f64)> = (0..g.n_cells())
                .map(|c| {
                    let (a, b) = g.cell_bounds(c);
                    let v = g.values()[c];
                    (
                        v * moment_from(plan.beta1, a, b),
                        v.powf(plan.q) * moment_from(plan.beta2, a, b),
                        moment_from(plan.norm, a, b),
                    )
                })
                .collect();
            argmax_pairs(n, |i, emit| {
                let a = pts[i];
                let (mut s1, mut s2, mut sn) = (0.0, 0.0, 0.0);
                for j in i + 1..n {
                    if pts[j] > k * a {
                        break;
                    }
                    let (c1, c2, cn) = cells[j - 1];
                    s1 += c1;
                    s2 += c2;
                    sn += cn;
                    emit(j, (s1 / sn).ln() + (p - 1.0) * (s2 / sn).ln());
                }
            })
        }
    };
    if best.i == usize::MAX {
        return domain("the interval family is empty");
    }
    Ok(WeightConstantReport {
        kind,
        p,
        lambda: mu.lambda(),
        alpha: w.alpha(),
        value: best.ln.exp(),
        ln_value: best.ln,
        argmax: Interval { a: pts[best.i], b: pts[best.j] },
        window_l: grid.window().exponent(),
        resolution: grid.resolution(),
        interval_count: best.count,
    })
}

/// [`weight_constant`] restricted to local kinds.
pub fn local_constant(w: &Weight, p: f64, mu: &LambdaMeasure, kind: ClassKind, grid: Grid) -> Result<WeightConstantReport> {
    if !kind.is_local() {
        return domain(format!("{kind} is not a local kind"));
    }
    weight_constant(w, p, mu, kind, grid)
}

/// Converts a finite `f64` to an exact rational.
pub fn to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("{x} is not finite")))
}

/// Exact open range `(lo, hi)` of exponents `α` with `t^α` in the class.
///
/// These are the local integrability conditions of both factors at the
/// origin; the product is dilation invariant, so nothing else constrains `α`.
pub fn exact_power_range(p: &BigRational, lambda: &BigRational, base: BaseClass) -> (BigRational, BigRational) {
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));
    let pm1 = p - &one;
    match base {
        BaseClass::Ap => (-one.clone(), pm1),
        BaseClass::ApLambda => (-&one - p, &pm1 + &two * lambda * p),
        BaseClass::ApLambdaTilde => (-one.clone(), &pm1 + (&two * lambda + &one) * p),
    }
}

/// Exact dual exponent `c·p' − α/(p−1)`.
pub fn exact_dual_exponent(alpha: &BigRational, p: &BigRational, lambda: &BigRational, base: BaseClass) -> BigRational {
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));
    let c = match base {
        BaseClass::Ap => BigRational::zero(),
        BaseClass::ApLambda => &two * lambda - &one,
        BaseClass::ApLambdaTilde => &two * lambda + &one,
    };
    let pm1 = p - &one;
    let pp = p / &pm1;
    c * pp - alpha / pm1
}

/// Exact conjugate exponent `p/(p−1)`.
pub fn exact_conjugate(p: &BigRational) -> BigRational {
    p / (p - BigRational::one())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerMembership {
    pub member: bool,
    /// Endpoints of the open range, rounded to the nearest `f64`.
    pub range: (f64, f64),
}

fn rational_to_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact membership of `t^alpha` in a global class.
pub fn power_membership(alpha: f64, p: f64, lambda: f64, kind: ClassKind) -> Result<PowerMembership> {
    if kind.is_local() {
        return Err(Error::Unsupported(
            "every power weight is locally admissible; use local_constant".into(),
        ));
    }
    check_p(p)?;
    LambdaMeasure::new(lambda)?;
    let (lo, hi) = exact_power_range(&to_rational(p)?, &to_rational(lambda)?, kind.base());
    let a = to_rational(alpha)?;
    Ok(PowerMembership {
        member: lo < a && a < hi,
        range: (rational_to_f64(&lo), rational_to_f64(&hi)),
    })
}

/// The dual weight and its exponent `p' = p/(p−1)`.
///
/// Power weights map `α ↦ c·p' − α/(p−1)` with `c = 0, 2λ−1, 2λ+1` for
/// `Ap`, `ApLambda`, `ApLambdaTilde`; tabulated weights map pointwise at cell
/// midpoints.
pub fn dual_weight(w: &Weight, p: f64, mu: &LambdaMeasure, kind: ClassKind) -> Result<(Weight, f64)> {
    check_p(p)?;
    let pp = p / (p - 1.0);
    let c = kind.base().dual_shift(mu.lambda());
    Ok((w.transform(-1.0 / (p - 1.0), c * pp)?, pp))
}

/// `∫_B |f|^q t^beta w dt` for a grid function `f`.
pub fn integrate_against(w: &Weight, f: &GridFunction, q: f64, beta: f64, b: &Interval) -> Result<f64> {
    f.check_inside(b)?;
    let mut s = 0.0;
    for (i, piece) in f.pieces(b) {
        let v = f.values()[i].abs();
        if v != 0.0 {
            s += v.powf(q) * w.integral(1.0, beta, &piece)?;
        }
    }
    Ok(s)
}

/// Which measure induced by a weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InducedKind {
    /// `t^p w(t) dt`
    Mu,
    /// `t^{2λp'} w(t)^{-1/(p−1)} dt`
    Sigma,
}

fn induced_exponents(p: f64, mu: &LambdaMeasure, which: InducedKind) -> (f64, f64) {
    match which {
        InducedKind::Mu => (1.0, p),
        InducedKind::Sigma => (-1.0 / (p - 1.0), 2.0 * mu.lambda() * p / (p - 1.0)),
    }
}

/// Mass of `(lo, hi)` under the induced measure, `lo >= 0` allowed for power weights.
pub(crate) fn induced_mass(w: &Weight, p: f64, mu: &LambdaMeasure, which: InducedKind, lo: f64, hi: f64) -> Result<f64> {
    let (s, beta) = induced_exponents(p, mu, which);
    match w {
        Weight::Power { alpha } => Ok(moment_from(alpha * s + beta, lo, hi)),
        Weight::Tabulated(g) => {
            let lo = lo.max(g.grid().window().lo());
            if hi <= lo {
                return Ok(0.0);
            }
            w.integral(s, beta, &Interval { a: lo, b: hi })
        }
    }
}

/// Mass of `b` under the induced measure.
pub fn induced_measure(w: &Weight, p: f64, mu: &LambdaMeasure, which: InducedKind, b: &Interval) -> Result<f64> {
    check_p(p)?;
    induced_mass(w, p, mu, which, b.a, b.b)
}

/// Largest `measure(ηB ∩ ℝ_+)/measure(B)` over intervals `B` with grid
/// endpoints whose dilate stays below the top of the window.
pub fn induced_doubling_probe(w: &Weight, p: f64, mu: &LambdaMeasure, which: InducedKind, grid: Grid, eta: f64) -> Result<f64> {
    check_p(p)?;
    if !(eta >= 1.0) {
        return domain(format!("dilation factor must be >= 1, got {eta}"));
    }
    let pts = grid.breakpoints();
    let hi = grid.window().hi();
    let ratios: Result<Vec<f64>> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for &b in &pts[i + 1..] {
                let bi = Interval { a: pts[i], b };
                let (lo, up) = bi.dilate(eta);
                if up > hi {
                    break;
                }
                let r = induced_mass(w, p, mu, which, lo, up)? / induced_mass(w, p, mu, which, bi.a, bi.b)?;
                best = best.max(r);
            }
            Ok(best)
        })
        .collect();
    Ok(ratios?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::measure::{moment, Window};

    fn grid(l: u32, r: u32) -> Grid {
        Grid::new(Window::new(l).unwrap(), r).unwrap()
    }

    fn lam(l: f64) -> LambdaMeasure {
        LambdaMeasure::new(l).unwrap()
    }

    #[test]
    fn product_examples() {
        let b = Interval::new(1.0, 2.0).unwrap();
        let one = Weight::power(0.0).unwrap();
        let v = interval_product(&one, 2.0, &lam(1.0), ClassKind::ApLambda, &b).unwrap();
        assert_relative_eq!(v, 3472.0 / 3375.0, max_relative = 1e-14);
        for (l, p) in [(1.0, 2.0), (0.5, 3.0), (-0.25, 1.5), (2.0, 1.1)] {
            let mu = lam(l);
            let wa = Weight::power(2.0 * l + 1.0 - p).unwrap();
            let wt = Weight::power(2.0 * l + 1.0).unwrap();
            for (a, bb) in [(0.01, 0.02), (1.0, 100.0), (3.0, 3.0001)] {
                let b = Interval::new(a, bb).unwrap();
                assert_eq!(interval_product(&wa, p, &mu, ClassKind::ApLambda, &b).unwrap(), 1.0);
                assert_eq!(interval_product(&wt, p, &mu, ClassKind::ApLambdaTilde, &b).unwrap(), 1.0);
            }
        }
        assert!(interval_product(&one, 1.0, &lam(1.0), ClassKind::Ap, &b).is_err());
    }

    #[test]
    fn constant_examples() {
        let g = grid(4, 3);
        let mu = lam(1.0);
        let one = Weight::power(0.0).unwrap();
        let r = weight_constant(&one, 2.0, &mu, ClassKind::Ap, g).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.argmax, Interval { a: g.window().lo(), b: g.breakpoints()[1] });
        let n = g.n_cells() as u64 + 1;
        assert_eq!(r.interval_count, n * (n - 1) / 2);

        let w = Weight::power(2.0 * 1.0 + 1.0 - 2.0).unwrap();
        assert_eq!(weight_constant(&w, 2.0, &mu, ClassKind::ApLambda, g).unwrap().value, 1.0);

        let r = weight_constant(&one, 2.0, &mu, ClassKind::ApLambda, grid(4, 8)).unwrap();
        assert!(r.value >= 3472.0 / 3375.0);
        let r6 = weight_constant(&one, 2.0, &mu, ClassKind::ApLambda, grid(6, 4)).unwrap();
        // the supremum is the (0, b) limit: (b^3/3)/(b^4/4) · ((b^5/5)/(b^4/4)) = 16/15
        assert!(r6.value <= 16.0 / 15.0 + 1e-12);
    }

    #[test]
    fn tabulated_matches_power() {
        let g = grid(3, 4);
        let mu = lam(0.5);
        for alpha in [-0.5, 0.0, 1.5] {
            let wp = Weight::power(alpha).unwrap();
            // cellwise averages reproduce first-factor integrals only approximately;
            // midpoint sampling converges at second order
            let wt = Weight::tabulated(GridFunction::sample(g, |t| t.powf(alpha)).unwrap()).unwrap();
            for kind in [ClassKind::Ap, ClassKind::ApLambda, ClassKind::ApLambdaTilde] {
                let a = weight_constant(&wp, 2.0, &mu, kind, g).unwrap().value;
                let b = weight_constant(&wt, 2.0, &mu, kind, g).unwrap().value;
                assert_relative_eq!(a, b, max_relative = 2e-2);
            }
        }
    }

    #[test]
    fn tabulated_weight_bounds() {
        let g = grid(2, 1);
        assert!(Weight::tabulated(GridFunction::constant(g, 1e-13).unwrap()).is_err());
        assert!(Weight::tabulated(GridFunction::constant(g, 2e12).unwrap()).is_err());
        assert!(Weight::tabulated(GridFunction::constant(g, 1.0).unwrap()).is_ok());
    }

    #[test]
    fn membership_examples() {
        let m = |a, k| power_membership(a, 2.0, 1.0, k).unwrap();
        assert_eq!(m(0.0, ClassKind::Ap).range, (-1.0, 1.0));
        assert_eq!(m(0.0, ClassKind::ApLambdaTilde).range, (-1.0, 7.0));
        assert_eq!(m(0.0, ClassKind::ApLambda).range, (-3.0, 5.0));
        for k in [ClassKind::Ap, ClassKind::ApLambda, ClassKind::ApLambdaTilde] {
            assert!(m(0.0, k).member);
        }
        assert!(m(-2.0, ClassKind::ApLambda).member);
        assert!(!m(-2.0, ClassKind::ApLambdaTilde).member);
        assert!(m(5.0, ClassKind::ApLambdaTilde).member);
        assert!(!m(5.0, ClassKind::ApLambda).member);
        assert!(matches!(
            power_membership(0.0, 2.0, 1.0, ClassKind::ApLocal { k: 2.0 }),
            Err(Error::Unsupported(_))
        ));
        assert!(power_membership(0.0, 1.0, 1.0, ClassKind::Ap).is_err());
        assert!(power_membership(0.0, 2.0, 0.0, ClassKind::Ap).is_err());
    }

    #[test]
    fn dual_examples() {
        let one = Weight::power(0.0).unwrap();
        let (d, pp) = dual_weight(&one, 2.0, &lam(1.0), ClassKind::ApLambda).unwrap();
        assert_eq!(d.alpha(), Some(2.0));
        assert_eq!(pp, 2.0);
        let (d, _) = dual_weight(&Weight::power(3.0).unwrap(), 2.0, &lam(0.5), ClassKind::ApLambdaTilde).unwrap();
        assert_eq!(d.alpha(), Some(1.0));
        for a in [3.0, 1.0] {
            assert!(power_membership(a, 2.0, 0.5, ClassKind::ApLambdaTilde).unwrap().member);
        }
    }

    #[test]
    fn exact_dual_is_involution() {
        let r = |x: f64| to_rational(x).unwrap();
        for base in [BaseClass::Ap, BaseClass::ApLambda, BaseClass::ApLambdaTilde] {
            for (a, p, l) in [(0.3, 1.7, -0.2), (5.0, 2.0, 1.0), (-2.5, 3.25, 0.75)] {
                let (a, p, l) = (r(a), r(p), r(l));
                let d = exact_dual_exponent(&a, &p, &l, base);
                let back = exact_dual_exponent(&d, &exact_conjugate(&p), &l, base);
                assert_eq!(back, a);
            }
        }
    }

    #[test]
    fn local_kinds() {
        let g = grid(6, 2);
        let mu = lam(1.0);
        let w = Weight::power(10.0).unwrap();
        let kind = ClassKind::ApLambdaLocal { k: 2.0 };
        let r6 = local_constant(&w, 2.0, &mu, kind, g).unwrap();
        let r10 = local_constant(&w, 2.0, &mu, kind, grid(10, 2)).unwrap();
        assert!(r6.value.is_finite());
        assert_relative_eq!(r6.value, r10.value, max_relative = 1e-9);
        assert!(r6.argmax.b <= 2.0 * r6.argmax.a);
        let global6 = weight_constant(&w, 2.0, &mu, ClassKind::ApLambda, g).unwrap();
        let global10 = weight_constant(&w, 2.0, &mu, ClassKind::ApLambda, grid(10, 2)).unwrap();
        assert!(global10.value > 4.0 * global6.value);
        assert!(local_constant(&w, 2.0, &mu, ClassKind::ApLambda, g).is_err());
        assert!(ClassKind::local(BaseClass::Ap, 1.0).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("apl".parse::<ClassKind>().unwrap(), ClassKind::ApLambda);
        assert_eq!("apt-local:3".parse::<ClassKind>().unwrap(), ClassKind::ApLambdaTildeLocal { k: 3.0 });
        assert_eq!(ClassKind::ApLocal { k: 2.5 }.to_string(), "ap-local:2.5");
        assert!("apx".parse::<ClassKind>().is_err());
        assert!("ap-local:0.5".parse::<ClassKind>().is_err());
    }

    #[test]
    fn induced_doubling() {
        let g = grid(4, 2);
        let mu = lam(1.0);
        let p = 2.0;
        // μ of t^{2λ+1-p} is ν itself
        let w = Weight::power(2.0 * 1.0 + 1.0 - p).unwrap();
        let r = induced_doubling_probe(&w, p, &mu, InducedKind::Mu, g, 2.0).unwrap();
        assert!(r <= 2f64.powf(2.0 * 1.0 + 2.0) + 1e-12);
        let one = Weight::power(0.0).unwrap();
        let c = weight_constant(&one, p, &mu, ClassKind::ApLambda, g).unwrap().value;
        let r = induced_doubling_probe(&one, p, &mu, InducedKind::Mu, g, 2.0).unwrap();
        assert!(r <= 2f64.powf((2.0 * 1.0 + 2.0) * p) * c);
        let s = induced_doubling_probe(&one, p, &mu, InducedKind::Sigma, g, 2.0).unwrap();
        assert!(s.is_finite() && s >= 1.0);
    }

    fn classical_nu_product(alpha: f64, p: f64, l: f64, b: &Interval) -> f64 {
        // A_p(dν) product of g = w/ν with ν-averages, via plain moments
        let e = 2.0 * l + 1.0;
        let nu = moment(e, b.a, b.b).unwrap();
        let avg_g = moment(alpha - e + e, b.a, b.b).unwrap() / nu;
        let avg_gd = moment((alpha - e) * (-1.0 / (p - 1.0)) + e, b.a, b.b).unwrap() / nu;
        avg_g * avg_gd.powf(p - 1.0)
    }

    proptest! {
        #[test]
        fn product_at_least_one(alpha in -3.0f64..6.0, p in 1.1f64..4.0, l in -0.4f64..2.0,
                                a in 0.01f64..10.0, ratio in 1.001f64..50.0, which in 0usize..3) {
            prop_assume!(l.abs() > 1e-3);
            let kind = [ClassKind::Ap, ClassKind::ApLambda, ClassKind::ApLambdaTilde][which];
            let b = Interval::new(a, a * ratio).unwrap();
            let v = interval_product(&Weight::power(alpha).unwrap(), p, &lam(l), kind, &b).unwrap();
            prop_assert!(v >= 1.0 - 1e-9, "{v}");
        }

        #[test]
        fn tilde_is_classical_in_nu(alpha in -0.9f64..5.0, p in 1.2f64..3.0, l in -0.4f64..1.5,
                                    a in 0.1f64..5.0, ratio in 1.01f64..20.0) {
            prop_assume!(l.abs() > 1e-3);
            let b = Interval::new(a, a * ratio).unwrap();
            let v = interval_product(&Weight::power(alpha).unwrap(), p, &lam(l), ClassKind::ApLambdaTilde, &b).unwrap();
            let c = classical_nu_product(alpha, p, l, &b);
            prop_assert!((v - c).abs() <= 1e-10 * c, "{v} vs {c}");
        }

        #[test]
        fn range_nests_in_lambda(p in 1.05f64..5.0, l1 in -0.45f64..3.0, dl in 0.01f64..2.0) {
            let r = |x: f64| to_rational(x).unwrap();
            for base in [BaseClass::ApLambda, BaseClass::ApLambdaTilde] {
                let (lo1, hi1) = exact_power_range(&r(p), &r(l1), base);
                let (lo2, hi2) = exact_power_range(&r(p), &r(l1 + dl), base);
                prop_assert!(lo2 <= lo1 && hi1 <= hi2);
            }
        }

        #[test]
        fn dual_preserves_membership(alpha in -6.0f64..10.0, p in 1.05f64..5.0, l in -0.45f64..3.0, which in 0usize..3) {
            let base = [BaseClass::Ap, BaseClass::ApLambda, BaseClass::ApLambdaTilde][which];
            let r = |x: f64| to_rational(x).unwrap();
            let (a, pr, lr) = (r(alpha), r(p), r(l));
            let (lo, hi) = exact_power_range(&pr, &lr, base);
            let d = exact_dual_exponent(&a, &pr, &lr, base);
            let (dlo, dhi) = exact_power_range(&exact_conjugate(&pr), &lr, base);
            prop_assert_eq!(lo < a && a < hi, dlo < d && d < dhi);
        }
    }
}
