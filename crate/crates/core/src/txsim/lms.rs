use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lin_to_db, CMat, C64};
use crate::taps::TapSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct LmsConfig {
    /// Odd number of half-symbol-spaced taps per input/output pair.
    pub num_taps: usize,
    pub step_size: f64,
    /// Leading fraction of the block used for adaptation.
    pub train_fraction: f64,
}

impl Default for LmsConfig {
    fn default() -> Self {
        LmsConfig {
            num_taps: 15,
            step_size: 1e-3,
            train_fraction: 0.5,
        }
    }
}

impl LmsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_taps == 0 || self.num_taps.is_multiple_of(2) {
            return Err(Error::invalid("num_taps", "must be odd"));
        }
        if !(self.step_size > 0.0 && self.step_size < 1.0) {
            return Err(Error::invalid("step_size", "must lie in (0, 1)"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Symbols per window of the divergence monitor.
pub const DIVERGENCE_WINDOW: usize = 10_000;

#[derive(Debug, Clone)]
pub struct LmsOutput {
    pub taps: TapSet,
    /// Frozen-tap outputs over the symbols after the training window.
    pub equalized: Vec<Vec<C64>>,
    pub reference: Vec<Vec<C64>>,
    /// Mean per-stream error power (dB) in each training window.
    pub training_error_db: Vec<f64>,
    /// Mean per-stream error power (dB) of the frozen equalizer.
    pub residual_error_db: f64,
}

/// Supervised MIMO LMS over half-symbol-spaced input (`received`, two
/// samples per symbol) with reference symbols known at the receiver.
///
/// Output `n` is `Σ_t W[t]·r[2n − (t − c)]` with `c` the center tap and
/// circular indexing. Taps start as a spike on the diagonal at `c`. The
/// step size is divided by the mean received power per stream, so one
/// setting stays stable across link gains; it halves at the middle of the
/// training window. Taps are then frozen and applied to the remaining
/// symbols.
pub fn lms_equalize(received: &[Vec<C64>], reference: &[Vec<C64>], cfg: &LmsConfig, tap_spacing_s: f64) -> Result<LmsOutput> {
    cfg.validate()?;
    let d = reference.len();
    if d == 0 || received.len() != d {
        return Err(Error::DimensionMismatch {
            context: "lms_equalize streams",
            expected: d,
            found: received.len(),
        });
    }
    let n = reference[0].len();
    let m2 = 2 * n;
    if reference.iter().any(|s| s.len() != n) || received.iter().any(|s| s.len() != m2) {
        return Err(Error::invalid("received", "need two samples per reference symbol on every stream"));
    }
    let n_train = ((cfg.train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    if n_train >= n {
        return Err(Error::invalid("num_symbols", "no symbols left after training"));
    }
    let t = cfg.num_taps;
    let c = t / 2;

    // interleave for locality: r[m*d + i]
    let mut r = vec![C64::new(0.0, 0.0); m2 * d];
    for (i, s) in received.iter().enumerate() {
        for (m, v) in s.iter().enumerate() {
            r[m * d + i] = *v;
        }
    }
    let input_power = r.iter().map(|v| v.norm_sqr()).sum::<f64>() / (m2 * d) as f64;
    if !(input_power > 0.0 && input_power.is_finite()) {
        return Err(Error::invalid("received", "input must carry finite, nonzero power"));
    }
    let step = cfg.step_size / input_power;
    let mut w = vec![C64::new(0.0, 0.0); t * d * d];
    for i in 0..d {
        w[(c * d + i) * d + i] = C64::new(1.0, 0.0);
    }
    let mut x = vec![C64::new(0.0, 0.0); t * d];
    let mut y = vec![C64::new(0.0, 0.0); d];

    let gather = |x: &mut [C64], sym: usize| {
        for tt in 0..t {
            let idx = (2 * sym as isize - (tt as isize - c as isize)).rem_euclid(m2 as isize) as usize;
            x[tt * d..(tt + 1) * d].copy_from_slice(&r[idx * d..(idx + 1) * d]);
        }
    };
    let apply = |w: &[C64], x: &[C64], y: &mut [C64]| {
        for (o, yo) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for tt in 0..t {
                let row = &w[(tt * d + o) * d..(tt * d + o + 1) * d];
                let xs = &x[tt * d..(tt + 1) * d];
                for (a, b) in row.iter().zip(xs) {
                    acc += a * b;
                }
            }
            *yo = acc;
        }
    };

    let mut training_error_db = Vec::new();
    let (mut win_err, mut win_len) = (0.0, 0usize);
    let mut prev_window: Option<f64> = None;
    let mut e = vec![C64::new(0.0, 0.0); d];
    for sym in 0..n_train {
        let mu = if sym < n_train / 2 { step } else { 0.5 * step };
        gather(&mut x, sym);
        apply(&w, &x, &mut y);
        for o in 0..d {
            e[o] = reference[o][sym] - y[o];
            win_err += e[o].norm_sqr();
        }
        win_len += 1;
        for tt in 0..t {
            let xs = &x[tt * d..(tt + 1) * d];
            for o in 0..d {
                let g = e[o] * mu;
                let row = &mut w[(tt * d + o) * d..(tt * d + o + 1) * d];
                for (a, b) in row.iter_mut().zip(xs) {
                    *a += g * b.conj();
                }
            }
        }
        if win_len == DIVERGENCE_WINDOW || sym + 1 == n_train {
            let power = win_err / (win_len * d) as f64;
            if !power.is_finite() {
                return Err(Error::Divergence(format!("non-finite error power at symbol {sym}")));
            }
            if let Some(p) = prev_window {
                if power > 10.0 * p && power > 0.1 {
                    return Err(Error::Divergence(format!(
                        "error power grew from {p:.3e} to {power:.3e} by symbol {sym}"
                    )));
                }
            }
            training_error_db.push(lin_to_db(power.max(1e-300)));
            prev_window = Some(power);
            win_err = 0.0;
            win_len = 0;
        }
    }

    let rest = n - n_train;
    let mut equalized = vec![Vec::with_capacity(rest); d];
    let mut residual = 0.0;
    for sym in n_train..n {
        gather(&mut x, sym);
        apply(&w, &x, &mut y);
        for o in 0..d {
            residual += (reference[o][sym] - y[o]).norm_sqr();
            equalized[o].push(y[o]);
        }
    }
    let refs = reference.iter().map(|s| s[n_train..].to_vec()).collect();
    let taps = (0..t)
        .map(|tt| CMat::from_fn(d, d, |o, i| w[(tt * d + o) * d + i]))
        .collect();
    Ok(LmsOutput {
        taps: TapSet::new(taps, tap_spacing_s)?,
        equalized,
        reference: refs,
        training_error_db,
        residual_error_db: lin_to_db((residual / (rest * d) as f64).max(1e-300)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::txsim::qam::gen_symbols;

    fn upsample_ideal(a: &[Vec<C64>]) -> Vec<Vec<C64>> {
        // symbol instants carry the symbol, half instants a fixed mix of neighbours
        a.iter()
            .map(|s| {
                let n = s.len();
                (0..2 * n)
                    .map(|m| if m % 2 == 0 { s[m / 2] } else { 0.5 * (s[m / 2] + s[(m / 2 + 1) % n]) })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identity_converges_to_spike() {
        let a = gen_symbols(16, 2, 20_000, &mut rng_from_seed(0)).unwrap();
        let out = lms_equalize(&upsample_ideal(&a), &a, &LmsConfig::default(), 1.0 / 60e9).unwrap();
        assert!(out.residual_error_db < -40.0, "{}", out.residual_error_db);
        let c = out.taps.center();
        assert!((out.taps.taps[c][(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-3);
        assert_eq!(out.equalized[0].len(), 10_000);
    }

    #[test]
    fn crossed_streams_are_untangled() {
        let a = gen_symbols(4, 2, 40_000, &mut rng_from_seed(0)).unwrap();
        let swapped = vec![a[1].clone(), a[0].clone()];
        let cfg = LmsConfig {
            step_size: 5e-3,
            ..Default::default()
        };
        let out = lms_equalize(&upsample_ideal(&swapped), &a, &cfg, 1.0).unwrap();
        assert!(out.residual_error_db < -30.0, "{}", out.residual_error_db);
    }

    #[test]
    fn oversized_step_diverges() {
        let a = gen_symbols(16, 4, 40_000, &mut rng_from_seed(0)).unwrap();
        let cfg = LmsConfig {
            num_taps: 31,
            step_size: 0.5,
            ..Default::default()
        };
        let mut rng = rng_from_seed(1);
        let noisy: Vec<Vec<C64>> = upsample_ideal(&a)
            .into_iter()
            .map(|s| s.into_iter().map(|v| v + crate::linalg::complex_gaussian(&mut rng) * 0.1).collect())
            .collect();
        let r = lms_equalize(&noisy, &a, &cfg, 1.0);
        assert!(matches!(r, Err(Error::Divergence(_))), "{:?}", r.map(|o| o.residual_error_db));
    }

    #[test]
    fn config_validation() {
        let bad = LmsConfig {
            num_taps: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
