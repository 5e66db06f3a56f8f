use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::C64;

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Gray-labelled square QAM with unit average power. `points[label]` is the
/// symbol carrying bit label `label`.
pub fn constellation(order: usize) -> Result<Vec<C64>> {
    let per_axis: usize = match order {
        4 => 2,
        16 => 4,
        64 => 8,
        _ => return Err(Error::invalid("qam_order", format!("{order} is not one of 4, 16, 64"))),
    };
    let bits = per_axis.trailing_zeros() as usize;
    // level for each Gray label along one axis
    let mut level = vec![0.0; per_axis];
    for i in 0..per_axis {
        level[gray(i)] = (2 * i) as f64 - (per_axis - 1) as f64;
    }
    let scale = (2.0 * ((per_axis * per_axis - 1) as f64) / 3.0).sqrt();
    Ok((0..order)
        .map(|label| {
            let (hi, lo) = (label >> bits, label & (per_axis - 1));
            C64::new(level[hi] / scale, level[lo] / scale)
        })
        .collect())
}

/// `dim` independent streams of `n` uniformly drawn symbols.
pub fn gen_symbols<R: Rng + ?Sized>(order: usize, dim: usize, n: usize, rng: &mut R) -> Result<Vec<Vec<C64>>> {
    let points = constellation(order)?;
    Ok((0..dim)
        .map(|_| (0..n).map(|_| points[rng.random_range(0..order)]).collect())
        .collect())
}

/// Index of the nearest constellation point.
pub fn hard_decision(points: &[C64], y: C64) -> usize {
    points
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - y).norm_sqr().total_cmp(&(b.1 - y).norm_sqr()))
        .map(|(i, _)| i)
        .expect("nonempty constellation")
}

/// Fraction of symbols whose hard decision differs from the reference.
pub fn symbol_error_rate(order: usize, equalized: &[Vec<C64>], reference: &[Vec<C64>]) -> Result<f64> {
    let points = constellation(order)?;
    let (mut errors, mut total) = (0usize, 0usize);
    for (y, x) in equalized.iter().zip(reference) {
        for (a, b) in y.iter().zip(x) {
            errors += (hard_decision(&points, *a) != hard_decision(&points, *b)) as usize;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::invalid("traces", "no symbols to compare"));
    }
    Ok(errors as f64 / total as f64)
}

/// Error vector magnitude relative to unit reference power, in percent.
pub fn evm_percent(equalized: &[Vec<C64>], reference: &[Vec<C64>]) -> f64 {
    let (mut err, mut n) = (0.0, 0usize);
    for (y, x) in equalized.iter().zip(reference) {
        for (a, b) in y.iter().zip(x) {
            err += (a - b).norm_sqr();
            n += 1;
        }
    }
    100.0 * (err / n.max(1) as f64).sqrt()
}
