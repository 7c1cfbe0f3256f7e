//! Global maximisation of a scalar function on the open unit interval.

use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 10_000;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Dense scan of `grid` interior points, then golden-section refinement
/// inside the cells either side of the best grid point. No unimodality is
/// assumed beyond that bracketing cell.
pub fn maximize_unit_interval_with<F: Fn(f64) -> f64>(f: F, grid: usize) -> Result<(f64, f64)> {
    let grid = grid.max(3);
    let h = 1.0 / (grid as f64 + 1.0);
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=grid {
        let v = f(k as f64 * h);
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    let (k, fk) = best.ok_or_else(|| Error::Numerical("objective is non-finite on the whole grid".into()))?;
    let wk = k as f64 * h;

    let (mut a, mut b) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
    // keep strictly inside (0, 1)
    a = a.max(f64::EPSILON);
    b = b.min(1.0 - f64::EPSILON);
    let eval = |w: f64| {
        let v = f(w);
        if v.is_finite() { v } else { f64::NEG_INFINITY }
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }
    let (w, v) = if fc >= fd { (c, fc) } else { (d, fd) };
    if v >= fk { Ok((w, v)) } else { Ok((wk, fk)) }
}

pub fn maximize_unit_interval<F: Fn(f64) -> f64>(f: F) -> Result<(f64, f64)> {
    maximize_unit_interval_with(f, DEFAULT_GRID)
}
