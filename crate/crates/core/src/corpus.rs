//! Fixed, seeded test corpora: power weights strictly inside their classes,
//! BMO functions, and random nonnegative grid functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::measure::{Grid, GridFunction};
use crate::weights::{power_membership, BaseClass, ClassKind};

/// Seed behind every shipped corpus.
pub const CORPUS_SEED: u64 = 0x5eed_b35e;

/// `(p, λ)` pairs used across the power corpus.
pub const PARAMETERS: [(f64, f64); 3] = [(2.0, 1.0), (3.0, 0.5), (1.5, -0.25)];

/// `α ∈ {−4, −3.625, …, 8}`: 33 points.
pub fn alpha_grid() -> Vec<f64> {
    (0..33).map(|i| -4.0 + 0.375 * i as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerCase {
    pub p: f64,
    pub lambda: f64,
    pub base: BaseClass,
    pub alpha: f64,
}

impl PowerCase {
    pub fn kind(&self) -> ClassKind {
        ClassKind::global(self.base)
    }
}

/// Power weights `t^α` on the α-grid at least `margin` inside their class range.
pub fn power_corpus(margin: f64) -> Result<Vec<PowerCase>> {
    let mut out = Vec::new();
    for (p, lambda) in PARAMETERS {
        for base in [BaseClass::Ap, BaseClass::ApLambda, BaseClass::ApLambdaTilde] {
            for alpha in alpha_grid() {
                let m = power_membership(alpha, p, lambda, ClassKind::global(base))?;
                if m.range.0 + margin <= alpha && alpha <= m.range.1 - margin {
                    out.push(PowerCase { p, lambda, base, alpha });
                }
            }
        }
    }
    Ok(out)
}

/// A named member of the BMO corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct BmoCase {
    pub name: String,
    pub f: GridFunction,
}

/// `ln t`, three indicators and `staircases` seeded random walks that are
/// constant on octaves with steps in `[−1, 1]`.
pub fn bmo_corpus(grid: Grid, staircases: usize, seed: u64) -> Result<Vec<BmoCase>> {
    let mut out = vec![BmoCase { name: "ln".into(), f: GridFunction::sample(grid, f64::ln)? }];
    for (a, b) in [(1.0, 2.0), (0.0, 1.0), (0.125, 0.25)] {
        out.push(BmoCase { name: format!("indicator({a},{b}]"), f: GridFunction::indicator(grid, a, b)? });
    }
    let per_octave = 1usize << grid.resolution();
    let octaves = grid.n_cells() / per_octave;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..staircases {
        let mut level = 0.0;
        let mut vals = Vec::with_capacity(grid.n_cells());
        for _ in 0..octaves {
            level += rng.gen_range(-1.0..=1.0);
            vals.extend(std::iter::repeat_n(level, per_octave));
        }
        out.push(BmoCase { name: format!("staircase-{s}"), f: GridFunction::new(grid, vals)? });
    }
    Ok(out)
}

/// `n` nonnegative functions: uniform `[0, 1)` values with sparse spikes up to 50.
pub fn random_functions(grid: Grid, n: usize, seed: u64) -> Result<Vec<GridFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let vals = (0..grid.n_cells())
                .map(|_| {
                    let v: f64 = rng.gen();
                    if rng.gen_bool(0.05) {
                        v * 50.0
                    } else {
                        v
                    }
                })
                .collect();
            GridFunction::new(grid, vals)
        })
        .collect()
}

/// `n` signed functions with values in `[−1, 1]`, used as commutator symbols.
pub fn random_symbols(grid: Grid, n: usize, seed: u64) -> Result<Vec<GridFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| GridFunction::new(grid, (0..grid.n_cells()).map(|_| rng.gen_range(-1.0..=1.0)).collect()))
        .collect()
}
