//! Function, weight and interval arguments.

use std::fs::File;
use std::path::Path;

use bwl_core::corpus;
use bwl_core::{Grid, GridFunction, Interval, Weight};

use crate::CliError;

/// Parses a grid function spec:
/// `indicator:A:B`, `ln`, `power:G`, `random`, `symbol`, or `file:PATH` (CSV as written by the core).
pub fn function(spec: &str, grid: Grid, seed: u64) -> Result<GridFunction, CliError> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let f = match head {
        "indicator" => {
            let (a, b) = pair(rest, spec)?;
            GridFunction::indicator(grid, a, b)?
        }
        "ln" => GridFunction::sample(grid, f64::ln)?,
        "power" => {
            let g = number(rest, spec)?;
            GridFunction::sample(grid, |t| t.powf(g))?
        }
        "random" => first(corpus::random_functions(grid, 1, seed)?),
        "symbol" => first(corpus::random_symbols(grid, 1, seed)?),
        "file" => {
            let f = read_grid_csv(Path::new(rest))?;
            if f.grid() != grid {
                return Err(CliError::invalid(format!("{rest}: grid does not match L and res")));
            }
            f
        }
        _ => return Err(CliError::invalid(format!("unknown function spec {spec:?}"))),
    };
    if f.values().iter().any(|v| !v.is_finite()) {
        return Err(CliError::invalid(format!("{spec:?} is not finite on the grid")));
    }
    Ok(f)
}

/// `t^alpha` from `--alpha`, or a tabulated weight from a CSV file on `grid`.
pub fn weight(alpha: Option<f64>, file: Option<&Path>, grid: Grid) -> Result<Weight, CliError> {
    match (alpha, file) {
        (_, Some(path)) => {
            let g = read_grid_csv(path)?;
            if g.grid() != grid {
                return Err(CliError::invalid(format!("{}: grid does not match L and res", path.display())));
            }
            Ok(Weight::tabulated(g)?)
        }
        (Some(a), None) => Ok(Weight::power(a)?),
        (None, None) => Err(CliError::invalid("a weight is required: pass --alpha or --weight-file")),
    }
}

/// `A:B` with `0 ≤ A < B`.
pub fn interval(spec: &str) -> Result<Interval, CliError> {
    let (a, b) = pair(spec, spec)?;
    Ok(Interval::new(a, b)?)
}

fn read_grid_csv(path: &Path) -> Result<GridFunction, CliError> {
    let file = File::open(path).map_err(|e| CliError::invalid(format!("cannot open {}: {e}", path.display())))?;
    Ok(GridFunction::read_csv(file)?)
}

fn first(mut v: Vec<GridFunction>) -> GridFunction {
    v.swap_remove(0)
}

fn number(s: &str, spec: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| CliError::invalid(format!("bad number in {spec:?}")))
}

fn pair(s: &str, spec: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = s.split_once(':').ok_or_else(|| CliError::invalid(format!("expected A:B in {spec:?}")))?;
    Ok((number(a, spec)?, number(b, spec)?))
}
