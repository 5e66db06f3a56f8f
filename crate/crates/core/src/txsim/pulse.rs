/// Raised-cosine spectrum with unit in-band gain, as a function of baseband
/// frequency `f` for symbol rate `baud` and roll-off `beta`.
pub fn raised_cosine(f: f64, baud: f64, beta: f64) -> f64 {
    let f = f.abs();
    let edge = 0.5 * baud;
    if beta <= 0.0 {
        return if f < edge {
            1.0
        } else if f == edge {
            0.5
        } else {
            0.0
        };
    }
    let lo = (1.0 - beta) * edge;
    let hi = (1.0 + beta) * edge;
    if f <= lo {
        1.0
    } else if f >= hi {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI / (beta * baud) * (f - lo)).cos())
    }
}

/// Root-raised-cosine spectrum (the square root of [`raised_cosine`]).
pub fn root_raised_cosine(f: f64, baud: f64, beta: f64) -> f64 {
    raised_cosine(f, baud, beta).sqrt()
}

/// Frequency of FFT bin `k` for a length-`len` transform at `fs` samples/s.
pub fn fft_bin_frequency(k: usize, len: usize, fs: f64) -> f64 {
    let k = if 2 * k < len { k as f64 } else { k as f64 - len as f64 };
    k * fs / len as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nyquist_folding() {
        for beta in [0.0, 0.1, 0.5, 1.0] {
            for i in 0..50 {
                let f = -0.5 + i as f64 / 50.0;
                let s: f64 = (-2..=2).map(|k| raised_cosine(f + k as f64, 1.0, beta)).sum();
                assert!((s - 1.0).abs() < 1e-12, "beta {beta} f {f}: {s}");
            }
        }
    }

    #[test]
    fn band_edges() {
        assert_eq!(raised_cosine(0.44, 1.0, 0.1), 1.0);
        assert!((raised_cosine(0.5, 1.0, 0.1) - 0.5).abs() < 1e-12);
        assert_eq!(raised_cosine(0.56, 1.0, 0.1), 0.0);
        assert_eq!(fft_bin_frequency(3, 8, 8.0), 3.0);
        assert_eq!(fft_bin_frequency(5, 8, 8.0), -3.0);
    }
}
