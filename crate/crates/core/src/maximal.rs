//! λ-maximal function, dyadic expectations, Calderón–Zygmund decomposition
//! and weighted boundedness probes.
//!
//! Suprema run over intervals whose endpoints are grid breakpoints. On such
//! a family the λ-maximal function is constant on each grid cell, so
//! [`lambda_maximal_grid`] returns it as a [`GridFunction`].

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::measure::{DyadicInterval, GridFunction, Interval, LambdaMeasure, MeasureKind};
use crate::weights::{integrate_against, Weight};

/// `(|f|·ν(cell), ν(cell))` for every grid cell.
fn cell_masses(f: &GridFunction, mu: &LambdaMeasure) -> Vec<(f64, f64)> {
    let g = f.grid();
    (0..f.n_cells())
        .map(|c| {
            let nu = g.cell(c).measure(mu, MeasureKind::Nu);
            (f.values()[c].abs() * nu, nu)
        })
        .collect()
}

/// `M_λ f(x)`: the largest ν_λ-average of `|f|` over grid intervals `(a, b]` containing `x`.
pub fn lambda_maximal(f: &GridFunction, mu: &LambdaMeasure, x: f64) -> Result<f64> {
    let Some(c) = f.grid().locate(x) else {
        return domain(format!("x = {x} is outside the window"));
    };
    let masses = cell_masses(f, mu);
    let n = masses.len();
    Ok((0..=c)
        .into_par_iter()
        .map(|i| {
            let (mut sf, mut sn) = (0.0, 0.0);
            let mut best: f64 = 0.0;
            for (j, &(mf, mn)) in masses.iter().enumerate().take(n).skip(i) {
                sf += mf;
                sn += mn;
                if j >= c {
                    best = best.max(sf / sn);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max))
}

/// `M_λ f` on every grid cell at once, in `O(n²)` time and `O(n)` memory per row block.
pub fn lambda_maximal_grid(f: &GridFunction, mu: &LambdaMeasure) -> Result<GridFunction> {
    let masses = cell_masses(f, mu);
    let n = masses.len();
    // g[j] = max over processed rows i of max_{j' >= j} avg(i..=j')
    let mut g = vec![0.0f64; n];
    let mut out = vec![0.0f64; n];
    const BLOCK: usize = 64;
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        let rows: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; n - i];
                let (mut sf, mut sn) = (0.0, 0.0);
                for (k, &(mf, mn)) in masses[i..].iter().enumerate() {
                    sf += mf;
                    sn += mn;
                    row[k] = sf / sn;
                }
                for k in (0..row.len().saturating_sub(1)).rev() {
                    row[k] = row[k].max(row[k + 1]);
                }
                row
            })
            .collect();
        for (r, i) in (start..end).enumerate() {
            for (k, v) in rows[r].iter().enumerate() {
                let j = i + k;
                if *v > g[j] {
                    g[j] = *v;
                }
            }
            out[i] = g[i];
        }
    }
    GridFunction::new(f.grid(), out)
}

/// `E_k|f|`: on each level-`k` dyadic cell, the ν_λ-average of `|f|` over it.
///
/// Grid cells coarser than level `k` keep `|f|`; finer ones take the
/// average over their level-`k` ancestor (which may reach below the window,
/// where `f` vanishes).
pub fn dyadic_expectation(f: &GridFunction, mu: &LambdaMeasure, k: i32) -> Result<GridFunction> {
    let grid = f.grid();
    if k > grid.finest_level() {
        return domain(format!(
            "level {k} is finer than the grid (finest level {})",
            grid.finest_level()
        ));
    }
    let n = f.n_cells();
    let mut out = vec![0.0; n];
    let mut c = 0;
    while c < n {
        let cell = grid.cell(c);
        if cell.level <= k {
            out[c] = f.values()[c].abs();
            c += 1;
            continue;
        }
        let anc = DyadicInterval::new(k, cell.index >> (cell.level - k));
        let mut end = c;
        let mut mass = 0.0;
        while end < n && anc.contains_cell(&grid.cell(end)) {
            mass += f.values()[end].abs() * grid.cell(end).measure(mu, MeasureKind::Nu);
            end += 1;
        }
        let avg = mass / anc.measure(mu, MeasureKind::Nu);
        out[c..end].fill(avg);
        c = end;
    }
    GridFunction::new(grid, out)
}

/// Coarsest level examined by the dyadic maximal function: the root `(0, 2^L]`.
fn root_level(f: &GridFunction) -> i32 {
    f.grid().window().root_cell().level
}

/// `M^d_λ f = max_k E_k|f|` over levels from the root `(0, 2^L]` to the finest grid cell.
///
/// Coarser ancestors `(0, 2^{L+m}]` only dilute the average and are skipped.
pub fn dyadic_maximal(f: &GridFunction, mu: &LambdaMeasure) -> Result<GridFunction> {
    let grid = f.grid();
    let levels: Vec<i32> = (root_level(f)..=grid.finest_level()).collect();
    let layers: Result<Vec<GridFunction>> = levels.par_iter().map(|&k| dyadic_expectation(f, mu, k)).collect();
    let mut out = vec![0.0f64; f.n_cells()];
    for layer in layers? {
        for (o, v) in out.iter_mut().zip(layer.values()) {
            *o = o.max(*v);
        }
    }
    GridFunction::new(grid, out)
}

/// One selected cell of a Calderón–Zygmund decomposition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzCell {
    pub k: i32,
    pub j: u64,
    pub a: f64,
    pub b: f64,
    pub average: f64,
}

impl CzCell {
    pub fn cell(&self) -> DyadicInterval {
        DyadicInterval::new(self.k, self.j)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzDecomposition {
    pub alpha: f64,
    pub cells: Vec<CzCell>,
    /// Largest `|f|` on grid cells outside the selection.
    #[serde(skip)]
    pub good_bound: f64,
    pub total_nu_measure: f64,
    pub l1_norm: f64,
}

impl CzDecomposition {
    pub fn selected(&self) -> impl Iterator<Item = DyadicInterval> + '_ {
        self.cells.iter().map(CzCell::cell)
    }

    pub fn covers(&self, t: f64) -> bool {
        self.selected().any(|c| c.contains(t))
    }
}

/// Sums `|f| dν` over the grid cells inside a dyadic cell.
struct CellIndex<'a> {
    f: &'a GridFunction,
    masses: Vec<(f64, f64)>,
}

impl CellIndex<'_> {
    fn range(&self, d: &DyadicInterval) -> (usize, usize) {
        let br = self.f.breaks();
        let lo = br.partition_point(|&p| p < d.left());
        let hi = br.partition_point(|&p| p < d.right()).min(self.masses.len());
        (lo.min(hi), hi)
    }

    fn mass(&self, d: &DyadicInterval) -> f64 {
        let (lo, hi) = self.range(d);
        self.masses[lo..hi].iter().map(|m| m.0).sum()
    }

    /// The grid cell equal to `d`, if any.
    fn is_grid_cell(&self, d: &DyadicInterval) -> bool {
        let (lo, hi) = self.range(d);
        hi == lo + 1 && self.f.grid().cell(lo) == *d
    }
}

/// Stopping-time decomposition at height `alpha` under `ν_λ`.
///
/// Starting from `(0, 2^L]` (or its first ancestor `(0, 2^{L+m}]` whose
/// average is at most `alpha`), dyadic cells are split until their
/// average of `|f|` exceeds `alpha`, at which point they are selected.
/// Descent stops at grid cells.
pub fn cz_decompose(f: &GridFunction, mu: &LambdaMeasure, alpha: f64) -> Result<CzDecomposition> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return domain(format!("height must be positive, got {alpha}"));
    }
    let idx = CellIndex { f, masses: cell_masses(f, mu) };
    let l1: f64 = idx.masses.iter().map(|m| m.0).sum();

    let avg = |d: &DyadicInterval| idx.mass(d) / d.measure(mu, MeasureKind::Nu);
    let mut top = f.grid().window().root_cell();
    while avg(&top) > alpha {
        top = top.parent();
    }

    let mut cells = Vec::new();
    let mut stack = vec![top];
    while let Some(d) = stack.pop() {
        let (first, last) = idx.range(&d);
        if first == last || idx.is_grid_cell(&d) {
            continue;
        }
        // push right child first so cells come out left to right
        for child in d.children().into_iter().rev() {
            let a = avg(&child);
            if a > alpha {
                cells.push(CzCell { k: child.level, j: child.index, a: child.left(), b: child.right(), average: a });
            } else {
                stack.push(child);
            }
        }
    }
    cells.sort_by(|x, y| x.a.total_cmp(&y.a));

    let mut good: f64 = 0.0;
    let mut total = 0.0;
    let mut covered = vec![false; f.n_cells()];
    for c in &cells {
        total += c.cell().measure(mu, MeasureKind::Nu);
        let (lo, hi) = idx.range(&c.cell());
        covered[lo..hi].fill(true);
    }
    for (i, v) in f.values().iter().enumerate() {
        if !covered[i] {
            good = good.max(v.abs());
        }
    }
    Ok(CzDecomposition { alpha, cells, good_bound: good, total_nu_measure: total, l1_norm: l1 })
}

/// Weak- and strong-type ratios of `M_λ` on `L^p(w dt)` over a family of test functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundednessReport {
    /// `sup_α α^p·w({M_λ f > α}) / ∫|f|^p w`; `None` marks zero-norm inputs.
    pub weak_constants: Vec<Option<f64>>,
    /// `‖M_λ f‖ / ‖f‖` in `L^p(w dt)`; `None` marks zero-norm inputs.
    pub strong_ratios: Vec<Option<f64>>,
}

/// Probes weighted boundedness of `M_λ` with heights `α ∈ {2^{-m}, …, 2^m}`.
pub fn boundedness_probe(
    family: &[GridFunction],
    w: &Weight,
    p: f64,
    mu: &LambdaMeasure,
    alpha_exponent: u32,
) -> Result<BoundednessReport> {
    if !(p > 1.0) {
        return domain(format!("p must exceed 1, got {p}"));
    }
    let mut weak = Vec::with_capacity(family.len());
    let mut strong = Vec::with_capacity(family.len());
    for f in family {
        let win = f.grid().window().interval();
        let norm = integrate_against(w, f, p, 0.0, &win)?;
        if !(norm > 0.0) {
            weak.push(None);
            strong.push(None);
            continue;
        }
        let m = lambda_maximal_grid(f, mu)?;
        let cell_w: Vec<f64> = (0..m.n_cells())
            .map(|c| {
                let (a, b) = m.cell_bounds(c);
                w.integral(1.0, 0.0, &Interval { a, b })
            })
            .collect::<Result<_>>()?;
        let mnorm: f64 = m.values().iter().zip(&cell_w).map(|(v, cw)| v.powf(p) * cw).sum();
        let m_exp = alpha_exponent as i32;
        let weak_c = (-m_exp..=m_exp)
            .map(|e| {
                let alpha = 2f64.powi(e);
                let level: f64 = m
                    .values()
                    .iter()
                    .zip(&cell_w)
                    .filter(|(v, _)| **v > alpha)
                    .map(|(_, cw)| cw)
                    .sum();
                alpha.powf(p) * level / norm
            })
            .fold(0.0, f64::max);
        weak.push(Some(weak_c));
        strong.push(Some((mnorm / norm).powf(1.0 / p)));
    }
    Ok(BoundednessReport { weak_constants: weak, strong_ratios: strong })
}

/// `(w(B)·(|f|_{B,λ})^p, ∫_B |f|^p w dt)` for the per-interval testing inequality.
pub fn testing_inequality(f: &GridFunction, w: &Weight, p: f64, mu: &LambdaMeasure, b: &Interval) -> Result<(f64, f64)> {
    let avg = f.abs().lambda_average(b, mu)?;
    let wb = w.integral(1.0, 0.0, b)?;
    Ok((wb * avg.powf(p), integrate_against(w, f, p, 0.0, b)?))
}
