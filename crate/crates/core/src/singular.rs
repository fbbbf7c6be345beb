//! Kernel operators against `dm_λ`, commutators with a symbol `b`, the
//! contour-integral form of the commutator and the median-based
//! construction behind the commutator lower bound.
//!
//! Operators are discretised by the midpoint rule in `y`: on each grid cell
//! (or the part of it at distance `> δ` from `x`) the kernel is evaluated at
//! the midpoint and multiplied by the exact `m_λ` mass of the piece.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measure::{moment_from, GridFunction, Interval, LambdaMeasure, MeasureKind};
use crate::oscillation::{mean_oscillation, median_value, BmoNormKind};
use crate::weights::Weight;

/// An integral kernel `K(x, y)` on the half line.
pub trait Kernel: Sync {
    fn eval(&self, x: f64, y: f64) -> f64;

    /// Singular kernels need a positive truncation.
    fn singular(&self) -> bool;
}

/// `K ≡ c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantKernel(pub f64);

impl Kernel for ConstantKernel {
    fn eval(&self, _: f64, _: f64) -> f64 {
        self.0
    }

    fn singular(&self) -> bool {
        false
    }
}

/// `K(x, y) = 1/(x − y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HilbertKernel;

impl Kernel for HilbertKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        1.0 / (x - y)
    }

    fn singular(&self) -> bool {
        true
    }
}

/// `K(x, y) = sign(y − x) / m_λ((min(x,y), max(x,y)))`.
///
/// For `B = B(x₀, r)` and `B̃ = B(x₀ + A₁r, r)` the kernel is positive on
/// `B × B̃` and `|K| ≥ c_K / m_λ(B̃)` there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelLowerBoundKernel {
    lambda: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ModelLowerBoundKernel {
    pub fn new(mu: &LambdaMeasure, a1: f64, a2: f64) -> Result<Self> {
        if !(3.0 <= a1 && a1 <= a2 && a2.is_finite()) {
            return domain(format!("need 3 ≤ A1 ≤ A2, got A1 = {a1}, A2 = {a2}"));
        }
        Ok(Self { lambda: mu.lambda(), a1, a2 })
    }

    pub fn with_defaults(mu: &LambdaMeasure) -> Self {
        Self { lambda: mu.lambda(), a1: 3.0, a2: 5.0 }
    }

    /// `min(2/(A₁+2), 1 − (A₁/(A₁+2))^{2λ+1})`: the smallest share of
    /// `m_λ(hull(B, B̃))` that `B̃` can carry.
    pub fn c_k(&self) -> f64 {
        let s = self.a1 / (self.a1 + 2.0);
        (2.0 / (self.a1 + 2.0)).min(1.0 - s.powf(2.0 * self.lambda + 1.0))
    }

    /// `B̃`: `b` moved right by `A₁·r`.
    pub fn partner(&self, b: &Interval) -> Interval {
        let shift = self.a1 * b.radius();
        Interval { a: b.a + shift, b: b.b + shift }
    }
}

impl Kernel for ModelLowerBoundKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let m = moment_from(2.0 * self.lambda, lo, hi);
        if y > x {
            1.0 / m
        } else {
            -1.0 / m
        }
    }

    fn singular(&self) -> bool {
        true
    }
}

/// Kernel values on the product of grid midpoints, read from `x,y,K` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedKernel {
    grid: crate::measure::Grid,
    n: usize,
    values: Vec<f64>,
    singular: bool,
}

impl TabulatedKernel {
    /// Every off-diagonal pair of midpoints must be present; the diagonal is optional.
    pub fn read_csv<R: Read>(grid: crate::measure::Grid, r: R) -> Result<Self> {
        let mids = grid.midpoints();
        let n = mids.len();
        let index: HashMap<u64, usize> = mids.iter().enumerate().map(|(i, m)| (m.to_bits(), i)).collect();
        let mut values = vec![f64::NAN; n * n];
        let mut rdr = csv::Reader::from_reader(r);
        if rdr.headers()?.iter().map(str::trim).collect::<Vec<_>>() != ["x", "y", "K"] {
            return Err(Error::Parse { row: 0, msg: "expected header x,y,K".into() });
        }
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = k + 1;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse { row, msg: "missing field".into() })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { row, msg: e.to_string() })
            };
            let (x, y, v) = (field(0)?, field(1)?, field(2)?);
            let lookup = |t: f64| {
                index
                    .get(&t.to_bits())
                    .copied()
                    .ok_or_else(|| Error::Parse { row, msg: format!("{t} is not a grid midpoint") })
            };
            let (i, j) = (lookup(x)?, lookup(y)?);
            if !v.is_finite() {
                return Err(Error::Parse { row, msg: "kernel value is not finite".into() });
            }
            values[i * n + j] = v;
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && values[i * n + j].is_nan() {
                    return Err(Error::Parse {
                        row: 0,
                        msg: format!("missing kernel value at ({}, {})", mids[i], mids[j]),
                    });
                }
            }
        }
        let singular = (0..n).any(|i| values[i * n + i].is_nan());
        Ok(Self { grid, n, values, singular })
    }
}

impl Kernel for TabulatedKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match (self.grid.locate(x), self.grid.locate(y)) {
            (Some(i), Some(j)) => self.values[i * self.n + j],
            _ => 0.0,
        }
    }

    fn singular(&self) -> bool {
        self.singular
    }
}

/// Pieces `(cell, a, b)` of the grid at distance `> δ` from `x`.
fn truncated_pieces(f: &GridFunction, x: f64, delta: f64) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::with_capacity(f.n_cells() + 1);
    let (cut_lo, cut_hi) = (x - delta, x + delta);
    for c in 0..f.n_cells() {
        let (a, b) = f.cell_bounds(c);
        if delta == 0.0 || b <= cut_lo || a >= cut_hi {
            out.push((c, a, b));
            continue;
        }
        if a < cut_lo {
            out.push((c, a, cut_lo));
        }
        if b > cut_hi {
            out.push((c, cut_hi, b));
        }
    }
    out
}

fn check_truncation<K: Kernel + ?Sized>(k: &K, f: &GridFunction, x: f64, delta: f64) -> Result<()> {
    if !(delta >= 0.0) {
        return domain(format!("truncation must be nonnegative, got {delta}"));
    }
    if k.singular() {
        if delta == 0.0 {
            return domain("a singular kernel needs a positive truncation δ");
        }
        if let Some(c) = f.grid().locate(x) {
            let w = f.grid().cell(c).width();
            if delta < w {
                return domain(format!("δ = {delta} is below the width {w} of the cell at x = {x}"));
            }
        }
    }
    Ok(())
}

/// `(Σ over pieces of K(x, mid)·m_λ(piece)·g(cell))` without the truncation check.
fn apply_with<K: Kernel + ?Sized, T>(
    k: &K,
    f: &GridFunction,
    mu: &LambdaMeasure,
    delta: f64,
    x: f64,
    zero: T,
    term: impl Fn(usize) -> T,
) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let e = mu.exponent(MeasureKind::M);
    let mut acc = zero;
    for (c, a, b) in truncated_pieces(f, x, delta) {
        let kv = k.eval(x, 0.5 * (a + b));
        if kv == 0.0 {
            continue;
        }
        acc = acc + term(c) * (kv * moment_from(e, a, b));
    }
    acc
}

/// `T_δ f(x) = ∫_{|x−y|>δ} K(x,y) f(y) dm_λ(y)`.
pub fn apply_operator<K: Kernel + ?Sized>(k: &K, f: &GridFunction, mu: &LambdaMeasure, delta: f64, x: f64) -> Result<f64> {
    check_truncation(k, f, x, delta)?;
    Ok(apply_with(k, f, mu, delta, x, 0.0, |c| f.values()[c]))
}

/// `b(x)·T f(x) − T(b f)(x)`.
pub fn commutator_apply<K: Kernel + ?Sized>(b: &GridFunction, k: &K, f: &GridFunction, mu: &LambdaMeasure, delta: f64, x: f64) -> Result<f64> {
    let bf = b.mul(f)?;
    Ok(b.eval(x) * apply_operator(k, f, mu, delta, x)? - apply_operator(k, &bf, mu, delta, x)?)
}

/// `∫_{|x−y|>δ} (b(x) − b(y)) K(x,y) f(y) dm_λ(y)`.
pub fn commutator_kernel_form<K: Kernel + ?Sized>(b: &GridFunction, k: &K, f: &GridFunction, mu: &LambdaMeasure, delta: f64, x: f64) -> Result<f64> {
    if b.grid() != f.grid() {
        return domain("b and f live on different grids");
    }
    check_truncation(k, f, x, delta)?;
    let bx = b.eval(x);
    Ok(apply_with(k, f, mu, delta, x, 0.0, |c| (bx - b.values()[c]) * f.values()[c]))
}

/// Largest admissible `|b|` for the contour formula.
pub const MAX_SYMBOL: f64 = 1e6;

/// Default contour radius `1/(4·max|b|)` (1 when `b ≡ 0`).
pub fn default_radius(b: &GridFunction) -> f64 {
    let m = b.max_abs();
    if m > 0.0 {
        0.25 / m
    } else {
        1.0
    }
}

/// `[b, T] f(x)` from `(1/2πi) ∮ T_z f(x) / z² dz` with `T_z f = e^{z b} T(e^{−z b} f)`,
/// by the trapezoidal rule on `N` points of `|z| = eps`.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_commutator<K: Kernel + ?Sized>(
    b: &GridFunction,
    k: &K,
    f: &GridFunction,
    mu: &LambdaMeasure,
    delta: f64,
    x: f64,
    eps: f64,
    n: usize,
) -> Result<f64> {
    if n < 8 {
        return domain(format!("need at least 8 contour points, got {n}"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return domain(format!("contour radius must be positive, got {eps}"));
    }
    if b.max_abs() > MAX_SYMBOL {
        return domain(format!("|b| exceeds {MAX_SYMBOL:e}"));
    }
    if b.grid() != f.grid() {
        return domain("b and f live on different grids");
    }
    check_truncation(k, f, x, delta)?;
    let bx = b.eval(x);
    let sum: Complex64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let z = Complex64::from_polar(eps, 2.0 * PI * j as f64 / n as f64);
            let tz = apply_with(k, f, mu, delta, x, Complex64::new(0.0, 0.0), |c| {
                (z * (bx - b.values()[c])).exp() * f.values()[c]
            });
            tz / z
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    // summed in contour order so the result does not depend on the thread split
    Ok(sum.re / n as f64)
}

/// `Tf` at every grid midpoint, as a grid function.
pub fn apply_operator_grid<K: Kernel + ?Sized>(k: &K, f: &GridFunction, mu: &LambdaMeasure, delta: f64) -> Result<GridFunction> {
    let mids = f.grid().midpoints();
    let vals: Result<Vec<f64>> = mids.par_iter().map(|&x| apply_operator(k, f, mu, delta, x)).collect();
    GridFunction::new(f.grid(), vals?)
}

/// `‖g‖_{L^p(w dt)}` for a grid function, over the window.
pub fn weighted_lp_norm(g: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    let win = g.grid().window().interval();
    Ok(crate::weights::integrate_against(w, g, p, 0.0, &win)?.powf(1.0 / p))
}

/// `max_f ‖Tf‖/‖f‖` in `L^p(w dt)` over `family`; zero-norm members are skipped.
pub fn operator_norm_probe<K: Kernel + ?Sized>(k: &K, w: &Weight, p: f64, mu: &LambdaMeasure, delta: f64, family: &[GridFunction]) -> Result<f64> {
    if family.is_empty() {
        return domain("the test family is empty");
    }
    let mut best: f64 = 0.0;
    for f in family {
        let nf = weighted_lp_norm(f, w, p)?;
        if !(nf > 0.0) {
            continue;
        }
        let tf = apply_operator_grid(k, f, mu, delta)?;
        best = best.max(weighted_lp_norm(&tf, w, p)? / nf);
    }
    Ok(best)
}

/// The sets of the lower-bound lemma, as unions of grid-cell pieces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundSets {
    pub b: Interval,
    pub b_tilde: Interval,
    pub alpha_median: f64,
    /// `{x ∈ B : b(x) ≥ α}`
    pub e1: Vec<Interval>,
    /// `{x ∈ B : b(x) < α}`
    pub e2: Vec<Interval>,
    /// `{y ∈ B̃ : b(y) ≤ α}`
    pub f1: Vec<Interval>,
    /// `{y ∈ B̃ : b(y) ≥ α}`
    pub f2: Vec<Interval>,
    /// Cover and half-measure property.
    pub covers: bool,
    /// `b(x) − b(y)` keeps one sign on `E_i × F_i`.
    pub sign_definite: bool,
    /// `|b(x) − α| ≤ |b(x) − b(y)|` on `E_i × F_i`.
    pub dominated: bool,
}

impl LowerBoundSets {
    pub fn holds(&self) -> bool {
        self.covers && self.sign_definite && self.dominated
    }
}

fn valued_pieces(b: &GridFunction, iv: &Interval) -> Vec<(f64, Interval)> {
    b.pieces(iv).map(|(c, piece)| (b.values()[c], piece)).collect()
}

/// Median split of `B` and `B̃ = B + A₁r` for the symbol `b`, with all lemma
/// properties checked cell by cell.
pub fn lower_bound_sets(b: &GridFunction, iv: &Interval, mu: &LambdaMeasure, a1: f64, a2: f64) -> Result<LowerBoundSets> {
    let kernel = ModelLowerBoundKernel::new(mu, a1, a2)?;
    let tilde = kernel.partner(iv);
    let win = b.grid().window();
    if !win.contains_interval(iv) || !win.contains_interval(&tilde) {
        return domain(format!("B = ({}, {}) or its partner ({}, {}) leaves the window", iv.a, iv.b, tilde.a, tilde.b));
    }
    let alpha = median_value(b, &tilde, mu)?;
    let in_b = valued_pieces(b, iv);
    let in_t = valued_pieces(b, &tilde);
    let pick = |ps: &[(f64, Interval)], keep: &dyn Fn(f64) -> bool| -> Vec<(f64, Interval)> {
        ps.iter().filter(|(v, _)| keep(*v)).cloned().collect()
    };
    let e1 = pick(&in_b, &|v| v >= alpha);
    let e2 = pick(&in_b, &|v| v < alpha);
    let f1 = pick(&in_t, &|v| v <= alpha);
    let f2 = pick(&in_t, &|v| v >= alpha);

    let m = |ps: &[(f64, Interval)]| ps.iter().map(|(_, p)| mu.m(p)).sum::<f64>();
    let m_tilde = m(&in_t);
    let half = 0.5 * m_tilde * (1.0 - 1e-12);
    let covers = e1.len() + e2.len() == in_b.len()
        && in_t.iter().all(|(v, _)| *v <= alpha || *v >= alpha)
        && m(&f1) >= half
        && m(&f2) >= half;

    let mut sign_definite = true;
    let mut dominated = true;
    for (es, fs, sign) in [(&e1, &f1, 1.0), (&e2, &f2, -1.0)] {
        for (bx, _) in es.iter() {
            for (by, _) in fs.iter() {
                let d = bx - by;
                if sign * d < 0.0 || (sign < 0.0 && d == 0.0) {
                    sign_definite = false;
                }
                if (bx - alpha).abs() > d.abs() {
                    dominated = false;
                }
            }
        }
    }
    let strip = |ps: Vec<(f64, Interval)>| ps.into_iter().map(|(_, p)| p).collect();
    Ok(LowerBoundSets {
        b: *iv,
        b_tilde: tilde,
        alpha_median: alpha,
        e1: strip(e1),
        e2: strip(e2),
        f1: strip(f1),
        f2: strip(f2),
        covers,
        sign_definite,
        dominated,
    })
}

/// Cellwise check of the kernel's sign and size on `B × B̃`.
pub fn verify_kernel_lower_bound(k: &ModelLowerBoundKernel, g: &GridFunction, iv: &Interval, mu: &LambdaMeasure) -> bool {
    let tilde = k.partner(iv);
    let bound = k.c_k() / mu.m(&tilde);
    let xs: Vec<f64> = g.pieces(iv).flat_map(|(_, p)| [p.a, p.center(), p.b]).collect();
    let ys: Vec<f64> = g.pieces(&tilde).flat_map(|(_, p)| [p.a, p.center(), p.b]).collect();
    xs.iter().all(|&x| ys.iter().all(|&y| {
        let v = k.eval(x, y);
        v > 0.0 && v >= bound * (1.0 - 1e-12)
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationEstimate {
    /// `(1/ν(B)) ∫_B |b − b_{B,λ}| dν`
    pub osc: f64,
    /// `(1/ν(B)) Σ_i ‖[b,T]χ_{F_i}‖_{L^p(w, B)} · (∫_{B*} t^{(2λ+1)p'} w^{−1/(p−1)})^{1/p'}`
    pub probe: f64,
    pub c_k: f64,
}

impl OscillationEstimate {
    /// `(4/c_K)·probe`, which dominates `osc`.
    pub fn bound(&self) -> f64 {
        4.0 / self.c_k * self.probe
    }
}

/// Mean oscillation of `b` on `B` next to the commutator quantity that controls it.
///
/// The commutator norms are taken over the cells of `B`, where the
/// pointwise lower bound is used; `B̃` is at distance `≥ r` from `B`, so no
/// truncation is needed there.
pub fn oscillation_lower_estimate(
    b: &GridFunction,
    w: &Weight,
    p: f64,
    mu: &LambdaMeasure,
    k: &ModelLowerBoundKernel,
    iv: &Interval,
) -> Result<OscillationEstimate> {
    if !(p > 1.0) {
        return domain(format!("p must exceed 1, got {p}"));
    }
    let sets = lower_bound_sets(b, iv, mu, k.a1, k.a2)?;
    let osc = mean_oscillation(b, iv, mu, BmoNormKind::Nu)?;
    let nu_b = mu.nu(iv);

    let hull = iv.hull(&sets.b_tilde);
    let pp = p / (p - 1.0);
    let dual = w.integral(-1.0 / (p - 1.0), mu.nu_exponent() * pp, &hull)?.powf(1.0 / pp);
    let e = mu.m_exponent();
    let mut probe = 0.0;
    for fs in [&sets.f1, &sets.f2] {
        let mut norm_p = 0.0;
        for (c, piece) in b.pieces(iv) {
            let x = piece.center();
            let bx = b.values()[c];
            let mut val = 0.0;
            for y in fs.iter() {
                let by = b.eval(y.center());
                val += (bx - by) * k.eval(x, y.center()) * moment_from(e, y.a, y.b);
            }
            norm_p += val.abs().powf(p) * w.integral(1.0, 0.0, &piece)?;
        }
        probe += norm_p.powf(1.0 / p);
    }
    Ok(OscillationEstimate { osc, probe: probe * dual / nu_b, c_k: k.c_k() })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::measure::{Grid, Window};

    fn grid(l: u32, r: u32) -> Grid {
        Grid::new(Window::new(l).unwrap(), r).unwrap()
    }

    fn half() -> LambdaMeasure {
        LambdaMeasure::new(0.5).unwrap()
    }

    fn random_fn(g: Grid, seed: u64, lo: f64, hi: f64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::new(g, (0..g.n_cells()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
    }

    #[test]
    fn operator_examples() {
        let g = grid(4, 10);
        let mu = half();
        let ind = GridFunction::indicator(g, 1.0, 2.0).unwrap();
        assert_eq!(apply_operator(&ConstantKernel(0.0), &ind, &mu, 0.0, 4.0).unwrap(), 0.0);
        assert_relative_eq!(apply_operator(&ConstantKernel(1.0), &ind, &mu, 0.0, 4.0).unwrap(), 1.5, max_relative = 1e-13);
        let h = apply_operator(&HilbertKernel, &ind, &mu, 0.01, 4.0).unwrap();
        assert!((h - (4.0 * 1.5f64.ln() - 1.0)).abs() < 1e-4, "{h}");
        assert!(apply_operator(&HilbertKernel, &ind, &mu, 0.0, 4.0).is_err());
    }

    #[test]
    fn commutator_examples() {
        let g = grid(4, 10);
        let mu = half();
        let ind = GridFunction::indicator(g, 1.0, 2.0).unwrap();
        let k = ConstantKernel(1.0);
        let c = GridFunction::constant(g, 2.0).unwrap();
        assert_eq!(commutator_apply(&c, &k, &ind, &mu, 0.0, 4.0).unwrap(), 0.0);
        let b = GridFunction::power_average(g, &mu, MeasureKind::M, 1.0).unwrap();
        let v = commutator_apply(&b, &k, &ind, &mu, 0.0, 4.0).unwrap();
        // b(4) is the m_λ-average of t over the last cell below 4
        let width = g.cell(g.locate(4.0).unwrap()).width();
        assert!((v - 11.0 / 3.0).abs() <= 1.5 * width, "{v}");
    }

    #[test]
    fn contour_examples() {
        let g = grid(3, 3);
        let mu = half();
        let f = GridFunction::indicator(g, 1.0, 2.0).unwrap();
        let k = ConstantKernel(1.0);
        let c = GridFunction::constant(g, 3.0).unwrap();
        let v = cauchy_commutator(&c, &k, &f, &mu, 0.0, 4.0, default_radius(&c), 16).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(cauchy_commutator(&c, &k, &f, &mu, 0.0, 4.0, 0.1, 4).is_err());
        let huge = GridFunction::constant(g, 2e6).unwrap();
        assert!(cauchy_commutator(&huge, &k, &f, &mu, 0.0, 4.0, 0.1, 16).is_err());
    }

    #[test]
    fn rank_one_norm() {
        let g = grid(2, 3);
        let mu = half();
        let w = Weight::power(0.0).unwrap();
        let family: Vec<GridFunction> = (0..g.n_cells())
            .step_by(3)
            .map(|c| {
                let (a, b) = g.breakpoints()[c..c + 2].try_into().map(|x: [f64; 2]| (x[0], x[1])).unwrap();
                GridFunction::indicator(g, a, b).unwrap()
            })
            .collect();
        let probe = operator_norm_probe(&ConstantKernel(1.0), &w, 2.0, &mu, 0.0, &family).unwrap();
        let win = g.window().interval();
        // Tf ≡ m_λ(I) on the window, ‖f‖ = |I|^{1/2}
        let oracle = family
            .iter()
            .map(|f| {
                let c = f.values().iter().position(|v| *v == 1.0).unwrap();
                let (a, b) = f.cell_bounds(c);
                let i = Interval { a, b };
                mu.m(&i) * win.len().sqrt() / i.len().sqrt()
            })
            .fold(0.0, f64::max);
        assert_relative_eq!(probe, oracle, max_relative = 1e-8);
        assert_eq!(operator_norm_probe(&ConstantKernel(0.0), &w, 2.0, &mu, 0.0, &family).unwrap(), 0.0);
        let more: Vec<GridFunction> = family.iter().cloned().chain([GridFunction::constant(g, 1.0).unwrap()]).collect();
        assert!(operator_norm_probe(&ConstantKernel(1.0), &w, 2.0, &mu, 0.0, &more).unwrap() >= probe);
    }

    #[test]
    fn lower_bound_examples() {
        let g = grid(4, 3);
        let mu = half();
        let iv = Interval::new(1.0, 2.0).unwrap();
        let c = GridFunction::constant(g, 1.5).unwrap();
        let s = lower_bound_sets(&c, &iv, &mu, 3.0, 5.0).unwrap();
        assert_eq!(s.alpha_median, 1.5);
        assert!(s.holds());
        // B̃ = (2.5, 3.5]; indicator of its left half
        let b = GridFunction::indicator(g, 2.5, 3.0).unwrap();
        let s = lower_bound_sets(&b, &iv, &mu, 3.0, 5.0).unwrap();
        assert!(s.alpha_median == 0.0 || s.alpha_median == 1.0);
        assert!(s.holds());
        assert!(lower_bound_sets(&b, &Interval::new(8.0, 16.0).unwrap(), &mu, 3.0, 5.0).is_err());
        assert!(lower_bound_sets(&b, &iv, &mu, 2.0, 5.0).is_err());
    }

    #[test]
    fn model_kernel_bound_holds() {
        let g = grid(4, 3);
        for l in [-0.4, -0.25, 0.5, 2.0] {
            let mu = LambdaMeasure::new(l).unwrap();
            let k = ModelLowerBoundKernel::with_defaults(&mu);
            for (a, b) in [(0.0625, 0.125), (0.125, 1.0), (1.0, 1.5), (2.0, 3.0)] {
                assert!(verify_kernel_lower_bound(&k, &GridFunction::constant(g, 0.0).unwrap(), &Interval { a, b }, &mu), "λ={l} ({a},{b})");
            }
        }
    }

    #[test]
    fn oscillation_estimate_examples() {
        let g = grid(4, 3);
        let mu = LambdaMeasure::new(1.0).unwrap();
        let k = ModelLowerBoundKernel::with_defaults(&mu);
        let w = Weight::power(0.0).unwrap();
        let iv = Interval::new(0.5, 1.0).unwrap();
        let c = GridFunction::constant(g, 2.0).unwrap();
        let r = oscillation_lower_estimate(&c, &w, 2.0, &mu, &k, &iv).unwrap();
        assert_eq!(r.osc, 0.0);
        assert!(r.probe >= 0.0);
        let b = GridFunction::sample(g, f64::ln).unwrap();
        let r = oscillation_lower_estimate(&b, &w, 2.0, &mu, &k, &iv).unwrap();
        assert!(r.osc <= r.bound());
        let r3 = oscillation_lower_estimate(&b.scale(3.0).unwrap(), &w, 2.0, &mu, &k, &iv).unwrap();
        assert_relative_eq!(r3.osc, 3.0 * r.osc, max_relative = 1e-12);
        assert_relative_eq!(r3.probe, 3.0 * r.probe, max_relative = 1e-12);
    }

    #[test]
    fn tabulated_kernel_round_trip() {
        let g = grid(1, 1);
        let mids = g.midpoints();
        let mut csv = String::from("x,y,K\n");
        for &x in &mids {
            for &y in &mids {
                if x != y {
                    csv += &format!("{x},{y},{}\n", 1.0 / (x - y));
                }
            }
        }
        let k = TabulatedKernel::read_csv(g, csv.as_bytes()).unwrap();
        assert!(k.singular());
        assert_eq!(k.eval(mids[0], mids[2]), 1.0 / (mids[0] - mids[2]));
        let missing: String = csv.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(TabulatedKernel::read_csv(g, missing.as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn commutator_forms_agree(seed in 0u64..1000, x in 0.3f64..3.5) {
            let g = grid(2, 3);
            let mu = LambdaMeasure::new(0.7).unwrap();
            let b = random_fn(g, seed, -1.0, 1.0);
            let f = random_fn(g, seed + 7, 0.0, 2.0);
            let k = HilbertKernel;
            let delta = 0.6;
            let a = commutator_apply(&b, &k, &f, &mu, delta, x).unwrap();
            let kf = commutator_kernel_form(&b, &k, &f, &mu, delta, x).unwrap();
            prop_assert!((a - kf).abs() <= 1e-10 * (1.0 + kf.abs()));
            let eps = default_radius(&b);
            let c = cauchy_commutator(&b, &k, &f, &mu, delta, x, eps, 64).unwrap();
            prop_assert!((c - a).abs() <= 1e-8 * (1.0 + a.abs()));
        }

        #[test]
        fn contour_is_linear_in_f(seed in 0u64..1000, s in -3.0f64..3.0) {
            let g = grid(2, 2);
            let mu = half();
            let b = random_fn(g, seed, -1.0, 1.0);
            let f = random_fn(g, seed + 1, -1.0, 1.0);
            let h = random_fn(g, seed + 2, -1.0, 1.0);
            let k = ConstantKernel(1.0);
            let eps = default_radius(&b);
            let lhs = cauchy_commutator(&b, &k, &f.add(&h.scale(s).unwrap()).unwrap(), &mu, 0.0, 1.0, eps, 16).unwrap();
            let rhs = cauchy_commutator(&b, &k, &f, &mu, 0.0, 1.0, eps, 16).unwrap()
                + s * cauchy_commutator(&b, &k, &h, &mu, 0.0, 1.0, eps, 16).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
