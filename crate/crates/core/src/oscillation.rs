//! Mean oscillation: sharp maximal function, BMO norms under `ν_λ` and
//! `m_λ`, median values and John–Nirenberg profiles.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::measure::{moment_from, GridFunction, Interval, LambdaMeasure, MeasureKind};

/// Averaging measure of a BMO norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BmoNormKind {
    /// `ν_λ = t^{2λ+1} dt`
    #[serde(rename = "nu_lambda")]
    Nu,
    /// `m_λ = t^{2λ} dt`
    #[serde(rename = "m_lambda")]
    M,
}

impl BmoNormKind {
    pub fn measure(&self) -> MeasureKind {
        match self {
            BmoNormKind::Nu => MeasureKind::Nu,
            BmoNormKind::M => MeasureKind::M,
        }
    }
}

/// `(value, mass)` of every piece of `b`, with `f = 0` on the part below the window.
pub(crate) fn weighted_pieces(f: &GridFunction, b: &Interval, mu: &LambdaMeasure, kind: MeasureKind) -> Result<Vec<(f64, f64)>> {
    f.check_inside(b)?;
    let e = mu.exponent(kind);
    let lo = f.grid().window().lo();
    let mut out = Vec::new();
    if b.a < lo {
        out.push((0.0, moment_from(e, b.a, lo.min(b.b))));
    }
    out.extend(f.pieces(b).map(|(i, piece)| (f.values()[i], moment_from(e, piece.a, piece.b))));
    Ok(out)
}

fn mean_and_total(pieces: &[(f64, f64)]) -> (f64, f64) {
    let total: f64 = pieces.iter().map(|p| p.1).sum();
    let s: f64 = pieces.iter().map(|p| p.0 * p.1).sum();
    (s / total, total)
}

fn abs_dev(pieces: &[(f64, f64)], a: f64, total: f64) -> f64 {
    pieces.iter().map(|(v, m)| (v - a).abs() * m).sum::<f64>() / total
}

/// `(1/meas(B)) ∫_B |f − f_B| dmeas` with `f_B` the average under the same measure.
pub fn mean_oscillation(f: &GridFunction, b: &Interval, mu: &LambdaMeasure, kind: BmoNormKind) -> Result<f64> {
    let pieces = weighted_pieces(f, b, mu, kind.measure())?;
    let (avg, total) = mean_and_total(&pieces);
    Ok(abs_dev(&pieces, avg, total))
}

/// `(1/meas(B)) ∫_B |f − a| dmeas`.
pub fn oscillation_about(f: &GridFunction, b: &Interval, mu: &LambdaMeasure, kind: BmoNormKind, a: f64) -> Result<f64> {
    let pieces = weighted_pieces(f, b, mu, kind.measure())?;
    let (_, total) = mean_and_total(&pieces);
    Ok(abs_dev(&pieces, a, total))
}

/// A weighted median of the pieces of `b`: it minimises `a ↦ avg_B |f − a|`.
pub fn weighted_median(f: &GridFunction, b: &Interval, mu: &LambdaMeasure, kind: BmoNormKind) -> Result<f64> {
    let mut pieces = weighted_pieces(f, b, mu, kind.measure())?;
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = pieces.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for (v, m) in &pieces {
        acc += m;
        if acc >= 0.5 * total {
            return Ok(*v);
        }
    }
    Ok(pieces.last().map_or(0.0, |p| p.0))
}

/// `inf_a (1/meas(B)) ∫_B |f − a| dmeas`, attained at a weighted median.
pub fn min_oscillation(f: &GridFunction, b: &Interval, mu: &LambdaMeasure, kind: BmoNormKind) -> Result<f64> {
    let a = weighted_median(f, b, mu, kind)?;
    oscillation_about(f, b, mu, kind, a)
}

/// Maximum of a BMO-type functional over breakpoint intervals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BmoReport {
    pub kind: BmoNormKind,
    pub lambda: f64,
    pub value: f64,
    pub argmax: Interval,
    #[serde(rename = "window_L")]
    pub window_l: u32,
    pub resolution: u32,
    pub interval_count: u64,
}

/// Cell values and masses, for the `O(n³)` enumerations.
fn cell_table(f: &GridFunction, mu: &LambdaMeasure, kind: MeasureKind) -> Vec<(f64, f64)> {
    let g = f.grid();
    (0..f.n_cells())
        .map(|c| (f.values()[c], g.cell(c).measure(mu, kind)))
        .collect()
}

/// Max over `i ≤ hi_i`, `j ≥ lo_j` of the oscillation of cells `i..j`.
fn max_oscillation(table: &[(f64, f64)], rows: std::ops::RangeInclusive<usize>, min_end: usize) -> (f64, usize, usize, u64) {
    let n = table.len();
    rows.into_par_iter()
        .map(|i| {
            let mut best = (f64::NEG_INFINITY, i, i + 1, 0u64);
            let (mut s, mut m) = (0.0, 0.0);
            for j in i + 1..=n {
                let (v, w) = table[j - 1];
                s += v * w;
                m += w;
                if j < min_end {
                    continue;
                }
                let avg = s / m;
                let osc = table[i..j].iter().map(|(v, w)| (v - avg).abs() * w).sum::<f64>() / m;
                best.3 += 1;
                if osc > best.0 {
                    best = (osc, i, j, best.3);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, usize::MAX, 0),
            |x, y| {
                let count = x.3 + y.3;
                let pick = if y.0 > x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) { y } else { x };
                (pick.0, pick.1, pick.2, count)
            },
        )
}

/// `f^#(x)`: the largest mean oscillation over grid intervals `(a, b]` containing `x`.
pub fn sharp_maximal(f: &GridFunction, mu: &LambdaMeasure, x: f64, kind: BmoNormKind) -> Result<f64> {
    let Some(c) = f.grid().locate(x) else {
        return domain(format!("x = {x} is outside the window"));
    };
    let table = cell_table(f, mu, kind.measure());
    Ok(max_oscillation(&table, 0..=c, c + 1).0.max(0.0))
}

/// `‖f‖_BMO` over every interval with breakpoint endpoints (a lower bound).
pub fn bmo_norm(f: &GridFunction, mu: &LambdaMeasure, kind: BmoNormKind) -> Result<BmoReport> {
    let table = cell_table(f, mu, kind.measure());
    let n = table.len();
    let (value, i, j, count) = max_oscillation(&table, 0..=n - 1, 0);
    let br = f.breaks();
    Ok(BmoReport {
        kind,
        lambda: mu.lambda(),
        value: value.max(0.0),
        argmax: Interval { a: br[i], b: br[j] },
        window_l: f.grid().window().exponent(),
        resolution: f.grid().resolution(),
        interval_count: count,
    })
}

/// `sup_B inf_a avg_B |f − a|` over breakpoint intervals.
pub fn bmo_median_norm(f: &GridFunction, mu: &LambdaMeasure, kind: BmoNormKind) -> Result<f64> {
    let br = f.breaks();
    let n = br.len();
    let vals: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in i + 1..n {
                best = best.max(min_oscillation(f, &Interval { a: br[i], b: br[j] }, mu, kind)?);
            }
            Ok(best)
        })
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

/// Relative slack for the median's measure comparisons.
const MEDIAN_SLACK: f64 = 1e-12;

/// The smallest cell value `α` of `f` on `b` with
/// `m_λ({f > α}) ≤ m_λ(B)/2` and `m_λ({f < α}) ≤ m_λ(B)/2`.
pub fn median_value(f: &GridFunction, b: &Interval, mu: &LambdaMeasure) -> Result<f64> {
    let mut pieces = weighted_pieces(f, b, mu, MeasureKind::M)?;
    let total: f64 = pieces.iter().map(|p| p.1).sum();
    if !(total > 0.0) {
        return domain("degenerate interval");
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let half = 0.5 * total * (1.0 + MEDIAN_SLACK);
    let mut below = 0.0;
    let mut i = 0;
    while i < pieces.len() {
        let v = pieces[i].0;
        let mut same = 0.0;
        let mut k = i;
        while k < pieces.len() && pieces[k].0 == v {
            same += pieces[k].1;
            k += 1;
        }
        let above: f64 = pieces[k..].iter().map(|p| p.1).sum();
        if below <= half && above <= half {
            return Ok(v);
        }
        below += same;
        i = k;
    }
    unreachable!("a weighted median always exists")
}

/// Distribution of `|f − f_{B,ν}|` on `B` against the John–Nirenberg bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JnProfile {
    pub base: Interval,
    pub thresholds: Vec<f64>,
    pub masses: Vec<f64>,
    pub bound_values: Vec<f64>,
    /// Doubling constant used in `A = 1/(e·c)`.
    pub c: f64,
    pub a: f64,
    pub norm: f64,
}

impl JnProfile {
    pub fn holds(&self, slack: f64) -> bool {
        self.masses.iter().zip(&self.bound_values).all(|(m, b)| *m <= b * (1.0 + slack))
    }
}

/// Largest `ν(2D)/ν(D)` over the grid cells inside `b` and their dyadic ancestors inside `b`.
pub fn measured_doubling_constant(f: &GridFunction, b: &Interval, mu: &LambdaMeasure) -> Result<f64> {
    let g = f.grid();
    let mut best: f64 = 1.0;
    let mut seen = std::collections::HashSet::new();
    for (i, piece) in f.pieces(b) {
        let (lo, hi) = f.cell_bounds(i);
        if piece.a != lo || piece.b != hi {
            continue;
        }
        let mut d = g.cell(i);
        while let Some(iv) = d.interval() {
            if !b.contains_interval(&iv) || !seen.insert(d) {
                break;
            }
            best = best.max(mu.doubling_ratio(MeasureKind::Nu, &iv, 2.0)?);
            d = d.parent();
        }
    }
    Ok(best)
}

/// John–Nirenberg profile of `f` on `b` at `n` geometric thresholds.
///
/// `norm` is the ν_λ BMO norm of `f`; `c` defaults to [`measured_doubling_constant`].
pub fn jn_profile(f: &GridFunction, b: &Interval, mu: &LambdaMeasure, norm: f64, c: Option<f64>, n: usize) -> Result<JnProfile> {
    let c = match c {
        Some(c) => c,
        None => measured_doubling_constant(f, b, mu)?,
    };
    let a = 1.0 / (E * c);
    let pieces = weighted_pieces(f, b, mu, MeasureKind::Nu)?;
    let (avg, total) = mean_and_total(&pieces);
    let dev_max = pieces.iter().map(|(v, _)| (v - avg).abs()).fold(0.0, f64::max);
    let scale = if norm > 0.0 { norm } else { dev_max.max(1.0) };
    let (t0, t1) = (scale / 16.0, (2.0 * dev_max).max(scale * 4.0));
    let n = n.max(2);
    let thresholds: Vec<f64> = (0..n)
        .map(|k| t0 * (t1 / t0).powf(k as f64 / (n - 1) as f64))
        .collect();
    let masses = thresholds
        .iter()
        .map(|&t| pieces.iter().filter(|(v, _)| (v - avg).abs() > t).map(|p| p.1).sum())
        .collect();
    let bound_values = thresholds
        .iter()
        .map(|&t| if norm > 0.0 { E * total * (-a * t / norm).exp() } else { 0.0 })
        .collect();
    Ok(JnProfile { base: *b, thresholds, masses, bound_values, c, a, norm })
}

/// Exponential integrability on `b` next to the constants that bound it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpIntegrability {
    /// `(1/ν(B)) ∫_B e^{s|f − f_B|} dν`
    pub lhs: f64,
    pub cs: f64,
    /// `(avg e^{s f})·(avg e^{−s f/(p−1)})^{p−1}`, when `|s|` is in range for it.
    #[serde(serialize_with = "crate::serde_ext::extended_f64_opt")]
    pub product: Option<f64>,
    #[serde(serialize_with = "crate::serde_ext::extended_f64_opt")]
    pub cs_p: Option<f64>,
}

/// Evaluates both exponential-integrability statements at `s`.
///
/// Needs `|s| < A/‖f‖` with `A = 1/(e·c)`; the two-sided product is
/// reported only for `|s| < A·min(1, p−1)/‖f‖`.
pub fn exp_integrability(f: &GridFunction, b: &Interval, mu: &LambdaMeasure, s: f64, p: f64, norm: f64, c: f64) -> Result<ExpIntegrability> {
    if !(p > 1.0) {
        return domain(format!("p must exceed 1, got {p}"));
    }
    let a = 1.0 / (E * c);
    let x = s.abs() * norm / a;
    if x >= 1.0 {
        return domain(format!("|s| = {} must be below A/‖f‖ = {}", s.abs(), a / norm));
    }
    let pieces = weighted_pieces(f, b, mu, MeasureKind::Nu)?;
    let (avg, total) = mean_and_total(&pieces);
    let mean_exp = |g: &dyn Fn(f64) -> f64| pieces.iter().map(|(v, m)| g(v - avg).exp() * m).sum::<f64>() / total;
    let lhs = mean_exp(&|d| s * d.abs());
    let cs = 1.0 + E * x / (1.0 - x);
    let in_range = s.abs() * norm < a * (p - 1.0).min(1.0);
    let (product, cs_p) = if in_range {
        let pr = mean_exp(&|d| s * d) * mean_exp(&|d| -s * d / (p - 1.0)).powf(p - 1.0);
        (Some(pr), Some(cs.powf(p)))
    } else {
        (None, None)
    };
    Ok(ExpIntegrability { lhs, cs, product, cs_p })
}
