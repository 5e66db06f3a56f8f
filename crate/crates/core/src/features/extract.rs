use crate::channel::{average_spectra, EigenSpectrum};
use crate::error::{Error, Result};
use crate::estimators::{mmse_eigen_spectrum, SinrVector};
use crate::linalg::{db_to_lin, C64};
use crate::taps::{equalizer_transfer, TapSet};

use super::FeatureRecord;

/// Upper bound on reported SINRs; keeps noiseless traces finite.
pub const SINR_CAP_DB: f64 = 60.0;

/// Largest tolerated fraction of band bins with a singular equalizer.
pub const MAX_SKIPPED_FRACTION: f64 = 0.2;

const MIN_TRACE_SYMBOLS: usize = 1000;

#[derive(Debug, Clone)]
pub struct ExtractedFeatures {
    pub record: FeatureRecord,
    pub spectrum: EigenSpectrum,
    pub sinr: SinrVector,
    pub skipped_bins: usize,
}

/// Single-coefficient least-squares SINR per stream: fit `y ≈ a·x` and
/// compare the fitted signal power with the residual power.
pub fn ls_sinr(equalized: &[Vec<C64>], reference: &[Vec<C64>]) -> Result<SinrVector> {
    if equalized.is_empty() || equalized.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            context: "ls_sinr stream count",
            expected: reference.len(),
            found: equalized.len(),
        });
    }
    let cap = db_to_lin(SINR_CAP_DB);
    let mut out = Vec::with_capacity(equalized.len());
    for (y, x) in equalized.iter().zip(reference) {
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context: "ls_sinr trace length",
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.len() < MIN_TRACE_SYMBOLS {
            return Err(Error::invalid(
                "traces",
                format!("need at least {MIN_TRACE_SYMBOLS} symbols per stream, got {}", x.len()),
            ));
        }
        let n = x.len() as f64;
        let xx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        if !(xx > 0.0) {
            return Err(Error::invalid("reference", "reference stream has zero power"));
        }
        let yx: C64 = y.iter().zip(x).map(|(a, b)| a * b.conj()).sum();
        let a = yx / xx;
        let err: f64 = y.iter().zip(x).map(|(yi, xi)| (yi - a * xi).norm_sqr()).sum::<f64>() / n;
        let sig = a.norm_sqr() * xx / n;
        if !sig.is_finite() || !err.is_finite() {
            return Err(Error::NonFinite("equalized trace"));
        }
        let sinr = if err > 0.0 { (sig / err).min(cap) } else { cap };
        out.push(sinr.max(f64::MIN_POSITIVE));
    }
    SinrVector::new(out)
}

/// Features of a measured equalizer: the eigen spectrum of `W^{-1}W^{-H}`
/// at every frequency of `band_grid` (Hz, already restricted to the signal
/// band), averaged in dB, and the LS SINR of the equalized traces.
pub fn features_from_taps(
    taps: &TapSet,
    band_grid: &[f64],
    equalized: &[Vec<C64>],
    reference: &[Vec<C64>],
) -> Result<ExtractedFeatures> {
    if band_grid.is_empty() {
        return Err(Error::invalid("band_grid", "no frequencies in the signal band"));
    }
    if equalized.len() != taps.dim() {
        return Err(Error::DimensionMismatch {
            context: "features_from_taps streams",
            expected: taps.dim(),
            found: equalized.len(),
        });
    }
    let mut spectra = Vec::with_capacity(band_grid.len());
    let mut skipped = 0;
    for w in equalizer_transfer(taps, band_grid) {
        match mmse_eigen_spectrum(&w) {
            Ok(s) => spectra.push(s),
            Err(Error::Singular { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped as f64 > MAX_SKIPPED_FRACTION * band_grid.len() as f64 || spectra.is_empty() {
        return Err(Error::Singular {
            context: "features_from_taps",
            detail: format!("{skipped} of {} band bins singular", band_grid.len()),
        });
    }
    let spectrum = average_spectra(&spectra)?;
    let sinr = ls_sinr(equalized, reference)?;
    let record = FeatureRecord::from_parts(&spectrum, &sinr, None)?;
    Ok(ExtractedFeatures {
        record,
        spectrum,
        sinr,
        skipped_bins: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{haar_unitary, realize_link, LinkSpec, ModeTopology};
    use crate::estimators::{mmse_equalizer, Snr};
    use crate::linalg::{complex_gaussian, CMat};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn qpsk(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = rng_from_seed(seed);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..n)
            .map(|_| C64::new(if rng.random() { s } else { -s }, if rng.random() { s } else { -s }))
            .collect()
    }

    #[test]
    fn identity_noiseless_caps_sinr() {
        let taps = TapSet::new(vec![CMat::zeros(4, 4), CMat::identity(4, 4), CMat::zeros(4, 4)], 1e-11).unwrap();
        let x: Vec<_> = (0..4).map(|i| qpsk(2000, i)).collect();
        let f = features_from_taps(&taps, &[-1e9, 0.0, 1e9], &x, &x).unwrap();
        assert!(f.record.lambda_mmse_db.iter().all(|v| v.abs() < 1e-9));
        assert!(f.record.sinr_db.iter().all(|v| (v - SINR_CAP_DB).abs() < 1e-9));
        assert!(f.record.labels.is_none());
    }

    #[test]
    fn flat_taps_recover_mmse_spectrum() {
        let spec = LinkSpec::flat(ModeTopology::new(3).unwrap(), 20, 1.0, 9);
        let h = &realize_link(&spec).unwrap().matrices[0];
        let w = mmse_equalizer(h, Snr::from_db(15.0).unwrap()).unwrap();
        let oracle = mmse_eigen_spectrum(&w).unwrap();
        let taps = TapSet::single(w, 1e-11).unwrap();
        let x: Vec<_> = (0..6).map(|i| qpsk(1000, i)).collect();
        let f = features_from_taps(&taps, &[-3e9, 0.0, 5e9], &x, &x).unwrap();
        for (a, b) in f.spectrum.values_db().iter().zip(oracle.values_db()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn ls_sinr_on_awgn() {
        let x = qpsk(100_000, 1);
        let mut rng = rng_from_seed(2);
        let sigma = (0.01f64).sqrt();
        let y: Vec<_> = x.iter().map(|v| v + complex_gaussian(&mut rng) * sigma).collect();
        let s = ls_sinr(&[y], &[x]).unwrap();
        assert!((s.sorted_db()[0] - 20.0).abs() < 0.2);
    }

    #[test]
    fn ls_sinr_is_gain_invariant() {
        let x = qpsk(5000, 3);
        let mut rng = rng_from_seed(4);
        let g = C64::new(0.3, -0.7);
        let y: Vec<_> = x.iter().map(|v| g * v + complex_gaussian(&mut rng) * 0.05).collect();
        let y2: Vec<_> = y.iter().map(|v| v * 4.0).collect();
        let a = ls_sinr(&[y], std::slice::from_ref(&x)).unwrap();
        let b = ls_sinr(&[y2], &[x]).unwrap();
        assert!((a.values()[0] - b.values()[0]).abs() < 1e-9 * a.values()[0]);
    }

    #[test]
    fn short_traces_and_singular_bands_are_rejected() {
        let x = vec![qpsk(10, 0)];
        assert!(ls_sinr(&x, &x).is_err());

        let mut rng = rng_from_seed(7);
        let u = haar_unitary(2, &mut rng);
        let mut w = u.clone();
        w.column_mut(1).fill(C64::new(0.0, 0.0));
        let taps = TapSet::single(w, 1e-11).unwrap();
        let x: Vec<_> = (0..2).map(|i| qpsk(1000, i)).collect();
        assert!(matches!(
            features_from_taps(&taps, &[0.0, 1e9], &x, &x),
            Err(Error::Singular { .. })
        ));
    }
}
