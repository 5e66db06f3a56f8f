use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::taps::TapSet;

/// Gaussian `amplitude · exp(−(x − center)² / (2·std²))`, in tap units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub std: f64,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (-(x - self.center).powi(2) / (2.0 * self.std * self.std)).exp()
    }
}

/// Levenberg-Marquardt on `Σ r_t(p)²`. `model` fills the residuals and the
/// Jacobian (one row per residual) for a parameter vector; `repair` keeps
/// trial points admissible.
fn levenberg_marquardt(
    mut p: DVector<f64>,
    n: usize,
    model: impl Fn(&DVector<f64>, &mut DVector<f64>, &mut DMatrix<f64>),
    repair: impl Fn(&mut DVector<f64>),
) -> DVector<f64> {
    let m = p.len();
    let (mut r, mut j) = (DVector::zeros(n), DMatrix::zeros(n, m));
    let (mut tr, mut tj) = (DVector::zeros(n), DMatrix::zeros(n, m));
    model(&p, &mut r, &mut j);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = &p + step;
            repair(&mut trial);
            model(&trial, &mut tr, &mut tj);
            let tc = tr.norm_squared();
            if tc.is_finite() && tc < cost {
                let rel = (cost - tc) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                std::mem::swap(&mut r, &mut tr);
                std::mem::swap(&mut j, &mut tj);
                cost = tc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    p
}

struct Moments {
    total: f64,
    peak: f64,
    center: f64,
    std: f64,
}

fn moments(profile: &[f64]) -> Result<Moments> {
    if profile.len() < 3 {
        return Err(Error::FitFailed("need at least three samples".into()));
    }
    if profile.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::FitFailed("profile must be finite and non-negative".into()));
    }
    let total: f64 = profile.iter().sum();
    if !(total > 0.0) {
        return Err(Error::FitFailed("profile carries no energy".into()));
    }
    let center = profile.iter().enumerate().map(|(t, v)| t as f64 * v).sum::<f64>() / total;
    let var = profile
        .iter()
        .enumerate()
        .map(|(t, v)| (t as f64 - center).powi(2) * v)
        .sum::<f64>()
        / total;
    Ok(Moments {
        total,
        peak: profile.iter().cloned().fold(0.0, f64::max),
        center,
        std: var.sqrt().max(0.3),
    })
}

/// A fit is only meaningful if the Gaussian is localized inside the window.
fn localized(g: GaussianFit, len: usize) -> Result<GaussianFit> {
    if g.std.is_finite() && g.amplitude > 0.0 && 4.0 * g.std < len as f64 {
        Ok(g)
    } else {
        Err(Error::FitFailed(format!(
            "no localized Gaussian fits the profile (std {:.3} taps over {} taps)",
            g.std, len
        )))
    }
}

/// Least-squares Gaussian fit (Levenberg-Marquardt) to a non-negative
/// profile sampled at integer positions.
///
/// On a profile made of a few isolated spikes this locks onto the tallest
/// one; [`fit_gaussian_cdf`] measures the envelope instead.
pub fn fit_gaussian(profile: &[f64]) -> Result<GaussianFit> {
    let mo = moments(profile)?;
    let p = levenberg_marquardt(
        DVector::from_vec(vec![mo.peak, mo.center, mo.std]),
        profile.len(),
        |p, r, j| {
            let (a, c, s) = (p[0], p[1], p[2]);
            for (t, v) in profile.iter().enumerate() {
                let dx = t as f64 - c;
                let e = (-dx * dx / (2.0 * s * s)).exp();
                r[t] = a * e - v;
                j[(t, 0)] = e;
                j[(t, 1)] = a * e * dx / (s * s);
                j[(t, 2)] = a * e * dx * dx / (s * s * s);
            }
        },
        |p| p[2] = p[2].abs().max(1e-6),
    );
    localized(
        GaussianFit {
            amplitude: p[0],
            center: p[1],
            std: p[2],
        },
        profile.len(),
    )
}

/// Least-squares fit of the Gaussian distribution function to the
/// normalized cumulative profile (each sample counted at its midpoint).
/// The amplitude is the one that preserves the profile's total energy.
pub fn fit_gaussian_cdf(profile: &[f64]) -> Result<GaussianFit> {
    let mo = moments(profile)?;
    let mut acc = 0.0;
    let cumulative: Vec<f64> = profile
        .iter()
        .map(|v| {
            acc += v;
            (acc - 0.5 * v) / mo.total
        })
        .collect();
    let p = levenberg_marquardt(
        DVector::from_vec(vec![mo.center, mo.std]),
        profile.len(),
        |p, r, j| {
            let (c, s) = (p[0], p[1]);
            for (t, y) in cumulative.iter().enumerate() {
                let z = (t as f64 - c) / s;
                let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                r[t] = 0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2)) - y;
                j[(t, 0)] = -pdf / s;
                j[(t, 1)] = -pdf * z / s;
            }
        },
        |p| p[1] = p[1].abs().max(1e-6),
    );
    localized(
        GaussianFit {
            amplitude: mo.total / ((2.0 * std::f64::consts::PI).sqrt() * p[1]),
            center: p[0],
            std: p[1],
        },
        profile.len(),
    )
}

/// Width of the Gaussian envelope of the tap intensity averaged over all
/// `D²` input/output pairs, in picoseconds.
///
/// With little coupling the averaged response is a handful of spikes at
/// the modal delays, so the envelope comes from [`fit_gaussian_cdf`].
pub fn impulse_response_spread(taps: &TapSet) -> Result<f64> {
    let fit = fit_gaussian_cdf(&taps.averaged_intensity())?;
    Ok(fit.std * taps.spacing_s * 1e12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMat, C64};

    fn synthetic() -> (GaussianFit, Vec<f64>) {
        let truth = GaussianFit {
            amplitude: 0.7,
            center: 30.4,
            std: 5.0,
        };
        (truth, (0..61).map(|t| truth.eval(t as f64)).collect())
    }

    #[test]
    fn recovers_synthetic_gaussian() {
        let (_, profile) = synthetic();
        let fit = fit_gaussian(&profile).unwrap();
        assert!((fit.std - 5.0).abs() < 0.1);
        assert!((fit.center - 30.4).abs() < 1e-6);
    }

    #[test]
    fn distribution_fit_agrees_on_smooth_profiles() {
        let (truth, profile) = synthetic();
        let fit = fit_gaussian_cdf(&profile).unwrap();
        assert!((fit.std - 5.0).abs() < 0.1, "{fit:?}");
        assert!((fit.center - 30.4).abs() < 0.05);
        assert!((fit.amplitude - truth.amplitude).abs() < 0.02);
    }

    #[test]
    fn distribution_fit_tracks_the_envelope_of_spikes() {
        // Equal spikes at ±5 taps: the envelope is several taps wide.
        let mut profile = vec![0.0; 41];
        profile[15] = 1.0;
        profile[25] = 1.0;
        let env = fit_gaussian_cdf(&profile).unwrap();
        assert!(env.std > 4.0 && env.std < 9.0, "{env:?}");
        assert!((env.center - 20.0).abs() < 1e-6);
    }

    #[test]
    fn single_tap_has_no_spread() {
        let mut taps = vec![CMat::zeros(2, 2); 9];
        taps[4] = CMat::identity(2, 2);
        let ts = TapSet::new(taps, 1e-11).unwrap();
        assert!(impulse_response_spread(&ts).unwrap() < 10.0);
    }

    #[test]
    fn spread_scales_with_dispersion() {
        let spread = |std_taps: f64| {
            let taps: Vec<CMat> = (0..61)
                .map(|t| {
                    let x = t as f64 - 30.0;
                    CMat::from_element(2, 2, C64::new((-x * x / (4.0 * std_taps * std_taps)).exp(), 0.0))
                })
                .collect();
            impulse_response_spread(&TapSet::new(taps, 1e-11).unwrap()).unwrap()
        };
        let ratio = spread(4.0) / spread(2.0);
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn flat_or_empty_profiles_fail() {
        assert!(fit_gaussian(&[1.0; 21]).is_err());
        assert!(fit_gaussian_cdf(&[1.0; 21]).is_err());
        assert!(fit_gaussian(&[0.0; 21]).is_err());
        let taps = vec![CMat::from_element(2, 2, C64::new(0.5, 0.0)); 15];
        assert!(impulse_response_spread(&TapSet::new(taps, 1e-11).unwrap()).is_err());
    }
}
