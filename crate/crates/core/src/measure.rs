//! Measures, dyadic cells, windows and piecewise-constant grid functions.
//!
//! All integrals of powers are closed form. A [`GridFunction`] is constant on
//! the cells of a multi-octave dyadic partition of the window
//! `(2^{-L}, 2^L]`: every octave `(2^m, 2^{m+1}]` is split into `2^r` equal
//! dyadic cells, so cell widths shrink towards the origin and every cell is
//! a genuine dyadic interval `(j·2^{-k}, (j+1)·2^{-k}]`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest supported number of cells per octave, as a power of two.
pub const MAX_RESOLUTION: u32 = 20;

/// Largest supported window exponent.
pub const MAX_WINDOW: u32 = 256;

/// `ln ∫_a^b t^beta dt` for `0 <= a < b`.
///
/// Returns `+∞` when `a == 0` and `beta <= -1` (non-integrable at the
/// origin). The two branches keep the `expm1` argument negative so that
/// neither near-degenerate intervals nor large exponents lose precision.
pub fn ln_moment(beta: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b > a);
    let e = beta + 1.0;
    if a == 0.0 {
        return if e > 0.0 { e * b.ln() - e.ln() } else { f64::INFINITY };
    }
    // ln(b/a) without cancellation for b close to a.
    let ell = ((b - a) / a).ln_1p();
    if e.abs() < 1e-14 {
        ell.ln()
    } else if e > 0.0 {
        e * b.ln() + (-(-e * ell).exp_m1()).ln() - e.ln()
    } else {
        e * a.ln() + (-(e * ell).exp_m1()).ln() - (-e).ln()
    }
}

fn moment_raw(beta: f64, a: f64, b: f64) -> f64 {
    let e = beta + 1.0;
    if a == 0.0 {
        return if e > 0.0 { b.powf(e) / e } else { f64::INFINITY };
    }
    let ell = ((b - a) / a).ln_1p();
    let v = if e.abs() < 1e-14 {
        ell
    } else if e > 0.0 {
        b.powf(e) * (-(-e * ell).exp_m1()) / e
    } else {
        a.powf(e) * (-(e * ell).exp_m1()) / (-e)
    };
    if v.is_finite() {
        v
    } else {
        ln_moment(beta, a, b).exp()
    }
}

/// `∫_a^b t^beta dt` for `0 < a < b`.
pub fn moment(beta: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > a && b.is_finite()) {
        return domain(format!("moment needs 0 < a < b < ∞, got ({a}, {b})"));
    }
    Ok(moment_raw(beta, a, b))
}

/// Moment over `(a, b)` with `0 <= a < b`; non-integrable origins give `+∞`.
pub(crate) fn moment_from(beta: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        0.0
    } else {
        moment_raw(beta, a, b)
    }
}

/// Open interval `(a, b)` with `0 < a < b < ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a > 0.0 && b > a && b.is_finite() {
            Ok(Self { a, b })
        } else {
            domain(format!("interval needs 0 < a < b < ∞, got ({a}, {b})"))
        }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.a < t && t <= self.b
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.a <= other.a && other.b <= self.b
    }

    /// Intersection, if it has positive length.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let a = self.a.max(other.a);
        let b = self.b.min(other.b);
        (b > a).then_some(Interval { a, b })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            a: self.a.min(other.a),
            b: self.b.max(other.b),
        }
    }

    /// Endpoints of the `eta`-dilate about the center, clipped at the origin.
    pub fn dilate(&self, eta: f64) -> (f64, f64) {
        let c = self.center();
        let r = eta * self.radius();
        ((c - r).max(0.0), c + r)
    }
}

/// Selects the averaging density: `m_λ = t^{2λ}` or `ν_λ = t^{2λ+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    M,
    Nu,
}

/// The pair of power densities `m_λ(t) = t^{2λ}`, `ν_λ(t) = t^{2λ+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaMeasure {
    lambda: f64,
}

impl LambdaMeasure {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return domain("lambda must be finite");
        }
        if lambda == 0.0 {
            return domain("lambda = 0 is excluded");
        }
        if lambda <= -0.5 + 1e-6 {
            return domain(format!("lambda must exceed -1/2 (by at least 1e-6), got {lambda}"));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Exponent of the density of `kind`.
    pub fn exponent(&self, kind: MeasureKind) -> f64 {
        match kind {
            MeasureKind::M => 2.0 * self.lambda,
            MeasureKind::Nu => 2.0 * self.lambda + 1.0,
        }
    }

    pub fn nu_exponent(&self) -> f64 {
        self.exponent(MeasureKind::Nu)
    }

    pub fn m_exponent(&self) -> f64 {
        self.exponent(MeasureKind::M)
    }

    pub fn measure_of(&self, kind: MeasureKind, b: &Interval) -> f64 {
        moment_raw(self.exponent(kind), b.a, b.b)
    }

    pub fn nu(&self, b: &Interval) -> f64 {
        self.measure_of(MeasureKind::Nu, b)
    }

    pub fn m(&self, b: &Interval) -> f64 {
        self.measure_of(MeasureKind::M, b)
    }

    /// Measure of `(a, b)` allowing `a = 0`.
    pub(crate) fn measure_from(&self, kind: MeasureKind, a: f64, b: f64) -> f64 {
        moment_from(self.exponent(kind), a, b)
    }

    /// `measure(ηB ∩ ℝ_+) / measure(B)` for the dilate about the center.
    pub fn doubling_ratio(&self, kind: MeasureKind, b: &Interval, eta: f64) -> Result<f64> {
        if !(eta >= 1.0) {
            return domain(format!("dilation factor must be >= 1, got {eta}"));
        }
        if eta == 1.0 {
            return Ok(1.0);
        }
        let (lo, hi) = b.dilate(eta);
        Ok(self.measure_from(kind, lo, hi) / self.measure_of(kind, b))
    }

    /// The parent/child mass ratio bound `4^{λ+1}` of dyadic cells under `ν_λ`.
    pub fn cz_constant(&self) -> f64 {
        4f64.powf(self.lambda + 1.0)
    }
}

/// Dyadic cell `(j·2^{-k}, (j+1)·2^{-k}]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub level: i32,
    pub index: u64,
}

impl DyadicInterval {
    pub fn new(level: i32, index: u64) -> Self {
        Self { level, index }
    }

    pub fn left(&self) -> f64 {
        ldexp(self.index as f64, -self.level)
    }

    pub fn right(&self) -> f64 {
        ldexp((self.index + 1) as f64, -self.level)
    }

    pub fn width(&self) -> f64 {
        ldexp(1.0, -self.level)
    }

    pub fn parent(&self) -> Self {
        Self::new(self.level - 1, self.index / 2)
    }

    pub fn children(&self) -> [Self; 2] {
        [
            Self::new(self.level + 1, 2 * self.index),
            Self::new(self.level + 1, 2 * self.index + 1),
        ]
    }

    /// The level-`level` cell containing `t > 0` (half-open on the left).
    pub fn containing(t: f64, level: i32) -> Self {
        let scaled = ldexp(t, level);
        let j = (scaled.ceil() as u64).max(1) - 1;
        Self::new(level, j)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.left() < t && t <= self.right()
    }

    pub fn contains_cell(&self, other: &DyadicInterval) -> bool {
        other.level >= self.level && (other.index >> (other.level - self.level)) == self.index
    }

    /// `(left, right)`; `None` for the cell touching the origin.
    pub fn interval(&self) -> Option<Interval> {
        (self.index > 0).then(|| Interval {
            a: self.left(),
            b: self.right(),
        })
    }

    /// Measure of the cell, including the ones that touch the origin.
    pub fn measure(&self, mu: &LambdaMeasure, kind: MeasureKind) -> f64 {
        mu.measure_from(kind, self.left(), self.right())
    }
}

pub(crate) fn ldexp(x: f64, e: i32) -> f64 {
    x * 2f64.powi(e)
}

/// Truncation `(2^{-L}, 2^L]` of the half line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    exponent: u32,
}

impl Window {
    pub fn new(exponent: u32) -> Result<Self> {
        if exponent == 0 || exponent > MAX_WINDOW {
            return domain(format!("window exponent must be in 1..={MAX_WINDOW}, got {exponent}"));
        }
        Ok(Self { exponent })
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn lo(&self) -> f64 {
        ldexp(1.0, -(self.exponent as i32))
    }

    pub fn hi(&self) -> f64 {
        ldexp(1.0, self.exponent as i32)
    }

    pub fn interval(&self) -> Interval {
        Interval {
            a: self.lo(),
            b: self.hi(),
        }
    }

    /// `(0, 2^L]`, the top cell of every stopping-time descent.
    pub fn root_cell(&self) -> DyadicInterval {
        DyadicInterval::new(-(self.exponent as i32), 0)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo() < t && t <= self.hi()
    }

    pub fn contains_interval(&self, b: &Interval) -> bool {
        self.lo() <= b.a && b.b <= self.hi()
    }
}

/// A window together with the number of cells per octave, `2^resolution`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    window: Window,
    resolution: u32,
}

impl Grid {
    pub fn new(window: Window, resolution: u32) -> Result<Self> {
        if resolution > MAX_RESOLUTION {
            return domain(format!("resolution must be <= {MAX_RESOLUTION}, got {resolution}"));
        }
        Ok(Self { window, resolution })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    fn per_octave(&self) -> usize {
        1 << self.resolution
    }

    pub fn n_cells(&self) -> usize {
        2 * self.window.exponent as usize * self.per_octave()
    }

    /// Lower octave exponent `m` of cell `i`, i.e. the cell lies in `(2^m, 2^{m+1}]`.
    fn octave(&self, i: usize) -> i32 {
        (i / self.per_octave()) as i32 - self.window.exponent as i32
    }

    pub fn cell(&self, i: usize) -> DyadicInterval {
        let r = self.resolution as i32;
        let m = self.octave(i);
        let k = r - m;
        let j = self.per_octave() as u64 + (i % self.per_octave()) as u64;
        DyadicInterval::new(k, j)
    }

    /// Finest cell level present (the cells next to `2^{-L}`).
    pub fn finest_level(&self) -> i32 {
        self.resolution as i32 + self.window.exponent as i32
    }

    /// Coarsest cell level present (the cells next to `2^L`).
    pub fn coarsest_level(&self) -> i32 {
        self.resolution as i32 - self.window.exponent as i32 + 1
    }

    /// All `n_cells + 1` breakpoints in increasing order; exact dyadic values.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.n_cells() + 1);
        for i in 0..self.n_cells() {
            pts.push(self.cell(i).left());
        }
        pts.push(self.window.hi());
        pts
    }

    /// Index of the cell containing `t`, if `t` is inside the window.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !self.window.contains(t) {
            return None;
        }
        let m = ceil_log2(t) - 1;
        let r = self.resolution as i32;
        let k = r - m;
        let j = DyadicInterval::containing(t, k).index;
        let within = (j as i64 - self.per_octave() as i64).clamp(0, self.per_octave() as i64 - 1);
        let octave_index = (m + self.window.exponent as i32) as usize;
        Some(octave_index * self.per_octave() + within as usize)
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_cells())
            .map(|i| {
                let c = self.cell(i);
                0.5 * (c.left() + c.right())
            })
            .collect()
    }
}

/// Smallest integer `e` with `t <= 2^e`.
fn ceil_log2(t: f64) -> i32 {
    let mut e = t.log2().ceil() as i32;
    while ldexp(1.0, e) < t {
        e += 1;
    }
    while ldexp(1.0, e - 1) >= t {
        e -= 1;
    }
    e
}

/// Piecewise-constant function on the cells of a [`Grid`]; zero outside the window.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return domain(format!(
                "grid has {} cells but {} values were given",
                grid.n_cells(),
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("value of cell {i} is not finite"));
        }
        Ok(Self {
            breaks: grid.breakpoints(),
            grid,
            values,
        })
    }

    /// Cell values from a function of the cell endpoints.
    pub fn from_cells(grid: Grid, mut value: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let breaks = grid.breakpoints();
        let values = breaks.windows(2).map(|w| value(w[0], w[1])).collect();
        Self::new(grid, values)
    }

    /// Samples `f` at cell midpoints.
    pub fn sample(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_cells(grid, |a, b| f(0.5 * (a + b)))
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n_cells()])
    }

    /// Indicator of `(c, d]`: a cell gets 1 when its midpoint lies in `(c, d]`.
    pub fn indicator(grid: Grid, c: f64, d: f64) -> Result<Self> {
        Self::from_cells(grid, |a, b| {
            let mid = 0.5 * (a + b);
            if c < mid && mid <= d {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Cell values equal to the `kind`-average of `t^gamma`, so that
    /// integrals of `f` against that measure over any union of cells
    /// reproduce those of `t^gamma` exactly.
    pub fn power_average(grid: Grid, mu: &LambdaMeasure, kind: MeasureKind, gamma: f64) -> Result<Self> {
        let e = mu.exponent(kind);
        Self::from_cells(grid, |a, b| moment_raw(gamma + e, a, b) / moment_raw(e, a, b))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        (self.breaks[i], self.breaks[i + 1])
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.grid.locate(t).map_or(0.0, |i| self.values[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn abs(&self) -> Self {
        Self {
            grid: self.grid,
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return domain("grid functions live on different grids");
        }
        Self::new(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x * y)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Indices of the cells meeting `b`, with the length of the overlap.
    pub fn pieces(&self, b: &Interval) -> impl Iterator<Item = (usize, Interval)> + '_ {
        let start = self.breaks.partition_point(|&p| p <= b.a).saturating_sub(1);
        let b = *b;
        (start..self.n_cells()).map_while(move |i| {
            let (lo, hi) = self.cell_bounds(i);
            if lo >= b.b {
                return None;
            }
            Some(Interval { a: lo, b: hi }.intersect(&b).map(|piece| (i, piece)))
        })
        .flatten()
    }

    pub(crate) fn check_inside(&self, b: &Interval) -> Result<()> {
        if b.b > self.grid.window.hi() {
            return domain(format!(
                "interval ({}, {}) leaves the window (2^-{L}, 2^{L}]",
                b.a,
                b.b,
                L = self.grid.window.exponent
            ));
        }
        Ok(())
    }

    /// `∫_B f(t) t^beta dt`, exact for the piecewise-constant representation.
    ///
    /// The part of `B` below `2^{-L}` contributes nothing.
    pub fn integrate(&self, beta: f64, b: &Interval) -> Result<f64> {
        self.check_inside(b)?;
        Ok(self
            .pieces(b)
            .map(|(i, piece)| self.values[i] * moment_raw(beta, piece.a, piece.b))
            .sum())
    }

    /// `∫_B |f|^q t^beta dt`.
    pub fn integrate_abs_pow(&self, q: f64, beta: f64, b: &Interval) -> Result<f64> {
        self.check_inside(b)?;
        Ok(self
            .pieces(b)
            .map(|(i, piece)| self.values[i].abs().powf(q) * moment_raw(beta, piece.a, piece.b))
            .sum())
    }

    /// `(1/ν_λ(B)) ∫_B f dν_λ`.
    pub fn lambda_average(&self, b: &Interval, mu: &LambdaMeasure) -> Result<f64> {
        self.average(b, mu, MeasureKind::Nu)
    }

    pub fn average(&self, b: &Interval, mu: &LambdaMeasure, kind: MeasureKind) -> Result<f64> {
        let meas = mu.measure_of(kind, b);
        if !(meas > 0.0) {
            return domain("degenerate interval");
        }
        Ok(self.integrate(mu.exponent(kind), b)? / meas)
    }

    /// Running integrals `∫_{2^{-L}}^{t_i} f t^beta dt` at every breakpoint.
    pub fn cumulative(&self, beta: f64) -> Vec<f64> {
        cumulative(&self.breaks, self.values.iter().copied(), beta)
    }

    /// Writes `t_left,t_right,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_left", "t_right", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            let (a, b) = self.cell_bounds(i);
            out.write_record([a.to_string(), b.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `t_left,t_right,value` rows and recovers the grid they tile.
    ///
    /// Rows must be increasing, contiguous (no gaps, no overlaps) and match
    /// the cells of some window/resolution exactly.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t_left", "t_right", "value"] {
            return Err(Error::Parse {
                row: 0,
                msg: "expected header t_left,t_right,value".into(),
            });
        }
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = n + 1;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse { row, msg: "missing field".into() })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { row, msg: e.to_string() })
            };
            let (a, b, v) = (field(0)?, field(1)?, field(2)?);
            if !(b > a) {
                return Err(Error::Parse { row, msg: format!("empty cell ({a}, {b}]") });
            }
            if let Some(&(pa, pb, _)) = rows.last() {
                if a <= pa {
                    return Err(Error::Parse { row, msg: "t_left is not increasing".into() });
                }
                if a > pb {
                    return Err(Error::Parse { row, msg: format!("gap between {pb} and {a}") });
                }
                if a < pb {
                    return Err(Error::Parse { row, msg: format!("overlap: row starts at {a} before {pb}") });
                }
            }
            rows.push((a, b, v));
        }
        let Some(&(first, _, _)) = rows.first() else {
            return Err(Error::Parse { row: 0, msg: "no rows".into() });
        };
        let last = rows[rows.len() - 1].1;
        let l = (-first.log2()).round();
        if !(l >= 1.0) || ldexp(1.0, -(l as i32)) != first || ldexp(1.0, l as i32) != last {
            return Err(Error::Parse {
                row: 1,
                msg: format!("rows span ({first}, {last}], not a window (2^-L, 2^L]"),
            });
        }
        let window = Window::new(l as u32)?;
        let per_octave = rows.len() / (2 * l as usize);
        if per_octave == 0 || !per_octave.is_power_of_two() || per_octave * 2 * l as usize != rows.len() {
            return Err(Error::Parse {
                row: rows.len(),
                msg: format!("{} rows do not form 2^r cells per octave", rows.len()),
            });
        }
        let grid = Grid::new(window, per_octave.trailing_zeros())?;
        let breaks = grid.breakpoints();
        for (i, &(a, b, _)) in rows.iter().enumerate() {
            if a != breaks[i] || b != breaks[i + 1] {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("cell ({a}, {b}] is not a dyadic cell of the inferred grid"),
                });
            }
        }
        GridFunction::new(grid, rows.into_iter().map(|r| r.2).collect())
    }
}

/// Running integrals of a piecewise-constant function over `breaks`.
pub(crate) fn cumulative(breaks: &[f64], values: impl Iterator<Item = f64>, beta: f64) -> Vec<f64> {
    let mut acc = Vec::with_capacity(breaks.len());
    let mut s = 0.0;
    acc.push(0.0);
    for (w, v) in breaks.windows(2).zip(values) {
        s += v * moment_raw(beta, w[0], w[1]);
        acc.push(s);
    }
    acc
}
