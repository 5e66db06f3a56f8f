use rand::Rng;
use rustfft::FftPlanner;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, db_to_lin, lin_to_db, C64};

use super::pulse::{fft_bin_frequency, root_raised_cosine};
use super::{nearest_index, TxSimConfig};

#[derive(Debug, Clone)]
pub struct Received {
    /// Matched-filter output at two samples per symbol, noise included.
    pub samples: Vec<Vec<C64>>,
    /// The same without noise.
    pub noiseless: Vec<Vec<C64>>,
    /// Launched signal power over the in-band noise power actually added,
    /// in dB; `None` for a noiseless run.
    pub measured_snr_db: Option<f64>,
}

/// Shapes every stream with a root-raised-cosine filter, applies the
/// nearest-bin channel matrix to each FFT bin, adds white noise, matched
/// filters and decimates to two samples per symbol.
///
/// Filtering is circular over the whole block, so the transmit/receive
/// pulse pair is exactly free of intersymbol interference. The transmit
/// waveform has unit power per stream and the noise is scaled so that
/// launched power over noise power in a bandwidth equal to the symbol rate
/// equals `cfg.snr_db`.
pub fn shape_and_propagate<R: Rng + ?Sized>(
    symbols: &[Vec<C64>],
    cfg: &TxSimConfig,
    channel: &ChannelRealization,
    rng: &mut R,
) -> Result<Received> {
    let d = cfg.channel.topology.total_modes();
    if symbols.len() != d || channel.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "shape_and_propagate streams",
            expected: d,
            found: symbols.len().min(channel.dim()),
        });
    }
    let n = symbols[0].len();
    if symbols.iter().any(|s| s.len() != n) || n == 0 {
        return Err(Error::invalid("symbols", "streams must be nonempty and of equal length"));
    }
    let grid = &channel.spec.freq_grid;
    if grid.len() != 1 && grid.len() != cfg.freq_bins {
        return Err(Error::DimensionMismatch {
            context: "channel frequency bins",
            expected: cfg.freq_bins,
            found: grid.len(),
        });
    }
    let sps = cfg.samples_per_symbol;
    let len = n * sps;
    let fs = cfg.sample_rate();

    let mut planner = FftPlanner::<f64>::new();
    let fft_n = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(len);
    let spectra: Vec<Vec<C64>> = symbols
        .iter()
        .map(|s| {
            let mut buf = s.clone();
            fft_n.process(&mut buf);
            buf
        })
        .collect();

    let noise_var_bin = cfg.snr_db.map(|snr| len as f64 * sps as f64 / db_to_lin(snr));
    let zero = C64::new(0.0, 0.0);
    let mut clean = vec![vec![zero; len]; d];
    let mut noisy = noise_var_bin.map(|_| vec![vec![zero; len]; d]);
    let mut launched = 0.0;
    let mut s = vec![zero; d];
    for k in 0..len {
        let f = fft_bin_frequency(k, len, fs);
        let p = root_raised_cosine(f, cfg.baud, cfg.rolloff);
        if p == 0.0 {
            continue;
        }
        let h = &channel.matrices[nearest_index(grid, f)];
        for (i, si) in s.iter_mut().enumerate() {
            *si = spectra[i][k % n] * (sps as f64 * p);
            launched += si.norm_sqr();
        }
        for o in 0..d {
            let y: C64 = (0..d).map(|i| h[(o, i)] * s[i]).sum();
            clean[o][k] = y * p;
        }
        if let (Some(var), Some(noisy)) = (noise_var_bin, noisy.as_mut()) {
            let sd = var.sqrt();
            for o in 0..d {
                noisy[o][k] = clean[o][k] + complex_gaussian(rng) * (sd * p);
            }
        }
    }
    let launched_power = launched / (len as f64 * len as f64 * d as f64);

    let step = sps / 2;
    let to_time = |mut buf: Vec<C64>| -> Vec<C64> {
        ifft.process(&mut buf);
        buf.iter().step_by(step).map(|v| v / len as f64).collect()
    };
    let noiseless: Vec<Vec<C64>> = clean.into_iter().map(to_time).collect();
    let (samples, measured_snr_db) = match noisy {
        None => (noiseless.clone(), None),
        Some(noisy) => {
            let samples: Vec<Vec<C64>> = noisy.into_iter().map(to_time).collect();
            let count = (d * samples[0].len()) as f64;
            let noise_power: f64 = samples
                .iter()
                .zip(&noiseless)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()))
                .sum::<f64>()
                / count;
            (samples, Some(lin_to_db(launched_power / noise_power)))
        }
    };
    Ok(Received {
        samples,
        noiseless,
        measured_snr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{realize_link, LinkSpec, ModeTopology};
    use crate::features::ls_sinr;
    use crate::linalg::CMat;
    use crate::rng::rng_from_seed;
    use crate::txsim::qam::gen_symbols;

    fn cfg(snr_db: Option<f64>) -> TxSimConfig {
        let link = LinkSpec::flat(ModeTopology::new(1).unwrap(), 1, 0.0, 0);
        let mut c = TxSimConfig::desk(link, snr_db, 3);
        c.num_symbols = 20_000;
        c
    }

    fn identity(c: &TxSimConfig) -> ChannelRealization {
        let mut ch = realize_link(&c.channel).unwrap();
        ch.matrices = vec![CMat::identity(2, 2)];
        ch
    }

    fn symbol_samples(r: &[Vec<C64>]) -> Vec<Vec<C64>> {
        r.iter().map(|s| s.iter().step_by(2).cloned().collect()).collect()
    }

    #[test]
    fn identity_noiseless_is_isi_free() {
        let c = cfg(None);
        let a = gen_symbols(16, 2, c.num_symbols, &mut rng_from_seed(1)).unwrap();
        let r = shape_and_propagate(&a, &c, &identity(&c), &mut rng_from_seed(2)).unwrap();
        for (y, x) in symbol_samples(&r.samples).iter().zip(&a) {
            assert!(y.iter().zip(x).all(|(p, q)| (p - q).norm() < 1e-6));
        }
        assert!(r.measured_snr_db.is_none());
    }

    #[test]
    fn awgn_calibration() {
        let mut c = cfg(Some(20.0));
        c.num_symbols = 100_000;
        let a = gen_symbols(16, 2, c.num_symbols, &mut rng_from_seed(1)).unwrap();
        let r = shape_and_propagate(&a, &c, &identity(&c), &mut rng_from_seed(2)).unwrap();
        let sinr = ls_sinr(&symbol_samples(&r.samples), &a).unwrap().sorted_db();
        assert!(sinr.iter().all(|v| (v - 20.0).abs() < 0.2), "{sinr:?}");
        assert!((r.measured_snr_db.unwrap() - 20.0).abs() < 0.1);
    }

    #[test]
    fn diagonal_channel_power_ratio() {
        let c = cfg(None);
        let mut ch = identity(&c);
        ch.matrices[0][(0, 0)] = C64::new(2f64.sqrt(), 0.0);
        ch.matrices[0][(1, 1)] = C64::new(0.5f64.sqrt(), 0.0);
        let a = gen_symbols(16, 2, c.num_symbols, &mut rng_from_seed(1)).unwrap();
        let r = shape_and_propagate(&a, &c, &ch, &mut rng_from_seed(2)).unwrap();
        let p = |s: &[C64]| s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64;
        let ya = symbol_samples(&r.samples);
        assert!((p(&ya[0]) / p(&a[0]) / 2.0 - 1.0).abs() < 0.01);
        assert!((p(&ya[1]) / p(&a[1]) / 0.5 - 1.0).abs() < 0.01);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let c = cfg(None);
        let mut ch = identity(&c);
        ch.spec.freq_grid = vec![0.0, 1.0, 2.0];
        let a = gen_symbols(4, 2, 100, &mut rng_from_seed(1)).unwrap();
        assert!(shape_and_propagate(&a, &c, &ch, &mut rng_from_seed(2)).is_err());
    }
}
