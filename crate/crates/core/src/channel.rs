//! Semi-analytical multisection model of a coupled SDM link.
//!
//! A link of `K` sections is the ordered product
//!
//! ```text
//! H(f) = M_K(f) · … · M_1(f),   M_k(f) = V_k · diag(exp(g_k/2 + j2πf·τ_k)) · U_k^H
//! ```
//!
//! where `U_k`, `V_k` are Haar-random unitaries (random mode coupling), `g_k`
//! are per-mode log-power gains (mode-dependent gain of the section) and
//! `τ_k` are per-mode group delays. Gains and delays are mean-removed per
//! section, so every section is power-neutral and free of bulk delay.
//!
//! The ground-truth MDG metric is `sigma_mdg`, the population standard
//! deviation of the dB eigenvalues of `H·H^H`.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, db_to_nat, lin_to_db, nat_to_db, population_std, CMat, C64};
use crate::rng::rng_from_seed;

/// Number of spatial modes `M`; the channel dimension is `D = 2M`
/// (two polarizations per spatial mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRepr", into = "TopologyRepr")]
pub struct ModeTopology {
    spatial_modes: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyRepr {
    spatial_modes: usize,
}

impl TryFrom<TopologyRepr> for ModeTopology {
    type Error = Error;
    fn try_from(r: TopologyRepr) -> Result<Self> {
        ModeTopology::new(r.spatial_modes)
    }
}

impl From<ModeTopology> for TopologyRepr {
    fn from(t: ModeTopology) -> Self {
        TopologyRepr {
            spatial_modes: t.spatial_modes,
        }
    }
}

impl ModeTopology {
    pub fn new(spatial_modes: usize) -> Result<Self> {
        if spatial_modes == 0 {
            return Err(Error::invalid("spatial_modes", "must be at least 1"));
        }
        Ok(ModeTopology { spatial_modes })
    }

    /// Topology from the total (polarization-inclusive) mode count `D`.
    pub fn from_total_modes(total: usize) -> Result<Self> {
        if total == 0 || !total.is_multiple_of(2) {
            return Err(Error::invalid(
                "total_modes",
                format!("{total} is not a positive even count"),
            ));
        }
        Self::new(total / 2)
    }

    pub fn spatial_modes(&self) -> usize {
        self.spatial_modes
    }

    /// `D = 2M`.
    pub fn total_modes(&self) -> usize {
        2 * self.spatial_modes
    }
}

/// Per-section (per-amplifier span) statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    /// Standard deviation of the per-mode section gain, in dB.
    pub sigma_g_db: f64,
    pub span_length_km: f64,
    /// Group-delay standard deviation in ps/√km.
    pub gd_std_ps_sqrt_km: f64,
}

impl SectionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_g_db >= 0.0 && self.sigma_g_db.is_finite()) {
            return Err(Error::invalid("sigma_g_db", "must be finite and >= 0"));
        }
        if !(self.span_length_km > 0.0 && self.span_length_km.is_finite()) {
            return Err(Error::invalid("span_length_km", "must be finite and > 0"));
        }
        if !(self.gd_std_ps_sqrt_km >= 0.0 && self.gd_std_ps_sqrt_km.is_finite()) {
            return Err(Error::invalid("gd_std_ps_sqrt_km", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Per-section mode-delay standard deviation in seconds.
    pub fn delay_std_s(&self) -> f64 {
        self.gd_std_ps_sqrt_km * self.span_length_km.sqrt() * 1e-12
    }
}

/// How consecutive sections are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Independent Haar-random coupling before and after every section.
    #[default]
    Strong,
    /// No mode mixing, and a single gain/delay draw replicated over every
    /// section (one fiber traversed `K` times, as in a recirculating loop).
    /// Gains and delays then accumulate linearly with `K`.
    Uncoupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub topology: ModeTopology,
    pub num_sections: usize,
    pub section: SectionSpec,
    /// Frequencies (Hz, baseband) at which `H(f)` is evaluated.
    #[serde(default)]
    pub freq_grid: Vec<f64>,
    #[serde(default)]
    pub coupling: Coupling,
    pub seed: u64,
}

impl LinkSpec {
    /// Frequency-flat link evaluated at `f = 0` only, without modal dispersion.
    pub fn flat(topology: ModeTopology, num_sections: usize, sigma_g_db: f64, seed: u64) -> Self {
        LinkSpec {
            topology,
            num_sections,
            section: SectionSpec {
                sigma_g_db,
                span_length_km: 50.0,
                gd_std_ps_sqrt_km: 0.0,
            },
            freq_grid: vec![0.0],
            coupling: Coupling::Strong,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sections == 0 {
            return Err(Error::invalid("num_sections", "must be at least 1"));
        }
        self.section.validate()?;
        if self.freq_grid.is_empty() {
            return Err(Error::invalid("freq_grid", "must not be empty"));
        }
        if self.freq_grid.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid("freq_grid", "contains non-finite frequencies"));
        }
        if self.freq_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("freq_grid", "must be strictly increasing"));
        }
        Ok(())
    }
}

/// One realization of a link: `H(f)` on the spec's frequency grid.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub spec: LinkSpec,
    pub matrices: Vec<CMat>,
    /// Natural-log power gains of every section, kept for audit.
    pub per_section_gains: Vec<Vec<f64>>,
}

impl ChannelRealization {
    pub fn dim(&self) -> usize {
        self.spec.topology.total_modes()
    }

    /// Ground-truth `sigma_mdg` of the realization: eigen spectra of
    /// every `H(f)` averaged in dB, then the population standard deviation.
    pub fn sigma_mdg_db(&self) -> Result<f64> {
        Ok(sigma_mdg_from(&averaged_spectrum(&self.matrices)?))
    }

    /// Writes the audit CSV: `# key=value` header rows, then one
    /// `f_hz,row,col,re,im` row per matrix entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# D={}", self.dim())?;
        writeln!(w, "# K={}", self.spec.num_sections)?;
        writeln!(w, "# freq_count={}", self.spec.freq_grid.len())?;
        writeln!(w, "# seed={}", self.spec.seed)?;
        writeln!(w, "f_hz,row,col,re,im")?;
        for (f, h) in self.spec.freq_grid.iter().zip(&self.matrices) {
            for r in 0..h.nrows() {
                for c in 0..h.ncols() {
                    let z = h[(r, c)];
                    writeln!(w, "{f},{r},{c},{},{}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Eigenvalues `λ²_i` of `H·H^H` in dB, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    values_db: Vec<f64>,
}

impl EigenSpectrum {
    /// Builds a spectrum from dB values; they are sorted descending.
    pub fn from_db(mut values_db: Vec<f64>) -> Result<Self> {
        if values_db.is_empty() {
            return Err(Error::invalid("values_db", "spectrum must not be empty"));
        }
        if values_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("eigen spectrum"));
        }
        values_db.sort_by(|a, b| b.total_cmp(a));
        Ok(EigenSpectrum { values_db })
    }

    pub fn from_linear(values: &[f64]) -> Result<Self> {
        Self::from_db(values.iter().map(|&v| lin_to_db(v)).collect())
    }

    pub fn values_db(&self) -> &[f64] {
        &self.values_db
    }

    pub fn linear(&self) -> Vec<f64> {
        self.values_db.iter().map(|&v| crate::linalg::db_to_lin(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }

    pub fn max_db(&self) -> f64 {
        self.values_db[0]
    }

    pub fn min_db(&self) -> f64 {
        self.values_db[self.values_db.len() - 1]
    }
}

/// Haar-distributed `dim × dim` unitary: QR of an i.i.d. complex Gaussian
/// matrix with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    assert!(dim >= 1, "unitary dimension must be at least 1");
    let z = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..dim {
        let d = r[(c, c)];
        let n = d.norm();
        let phase = if n > 0.0 { d / n } else { C64::new(1.0, 0.0) };
        for row in 0..dim {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Per-mode natural-log power gains of one section.
///
/// Entries are zero-mean Gaussian and mean-removed across the `dim` modes.
/// The pre-removal deviation is inflated by `1/√(1 − 1/dim)` so that each
/// entry keeps marginal standard deviation `sigma_g_db · ln10/10` after the
/// removal.
pub fn draw_gains<R: Rng + ?Sized>(sigma_g_db: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    if dim < 2 || sigma_g_db == 0.0 {
        return vec![0.0; dim];
    }
    let scale = db_to_nat(sigma_g_db) / (1.0 - 1.0 / dim as f64).sqrt();
    remove_mean_scaled(&mut g, scale);
    g
}

/// Per-mode group delays (seconds) of one section, mean-removed.
fn draw_delays<R: Rng + ?Sized>(std_s: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    let mut t: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    if std_s == 0.0 {
        return vec![0.0; dim];
    }
    remove_mean_scaled(&mut t, std_s);
    t
}

fn remove_mean_scaled(v: &mut [f64], scale: f64) {
    for x in v.iter_mut() {
        *x *= scale;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

struct Section {
    u: CMat,
    v: CMat,
    gains: Vec<f64>,
    delays_s: Vec<f64>,
}

impl Section {
    fn matrix(&self, f_hz: f64) -> CMat {
        let dim = self.gains.len();
        // V · diag(d) · U^H
        let mut vd = self.v.clone();
        for c in 0..dim {
            let d = C64::from_polar(
                (self.gains[c] / 2.0).exp(),
                2.0 * std::f64::consts::PI * f_hz * self.delays_s[c],
            );
            for r in 0..dim {
                vd[(r, c)] *= d;
            }
        }
        vd * self.u.adjoint()
    }

    fn diagonal(&self, f_hz: f64) -> Vec<C64> {
        self.gains
            .iter()
            .zip(&self.delays_s)
            .map(|(g, t)| C64::from_polar((g / 2.0).exp(), 2.0 * std::f64::consts::PI * f_hz * t))
            .collect()
    }
}

fn draw_sections(spec: &LinkSpec, count: usize) -> Vec<Section> {
    let dim = spec.topology.total_modes();
    let mut rng = rng_from_seed(spec.seed);
    let delay_std = spec.section.delay_std_s();
    match spec.coupling {
        Coupling::Strong => (0..count)
            .map(|_| {
                let u = haar_unitary(dim, &mut rng);
                let v = haar_unitary(dim, &mut rng);
                let gains = draw_gains(spec.section.sigma_g_db, dim, &mut rng);
                let delays_s = draw_delays(delay_std, dim, &mut rng);
                Section { u, v, gains, delays_s }
            })
            .collect(),
        Coupling::Uncoupled => {
            let gains = draw_gains(spec.section.sigma_g_db, dim, &mut rng);
            let delays_s = draw_delays(delay_std, dim, &mut rng);
            (0..count)
                .map(|_| Section {
                    u: CMat::identity(dim, dim),
                    v: CMat::identity(dim, dim),
                    gains: gains.clone(),
                    delays_s: delays_s.clone(),
                })
                .collect()
        }
    }
}

/// Realizes `H(f)` on every grid frequency. The section tuples
/// `(U_k, V_k, g_k, τ_k)` are drawn once and shared across frequencies.
pub fn realize_link(spec: &LinkSpec) -> Result<ChannelRealization> {
    let mut out = realize_prefixes(spec, &[spec.num_sections])?;
    Ok(out.pop().expect("one prefix requested"))
}

/// Realizes the links formed by the first `K` sections of one random draw,
/// for each `K` in `section_counts`. The realization for `K = spec.num_sections`
/// is identical to [`realize_link`] with the same seed, so a distance sweep
/// observes one physical link growing section by section.
pub fn realize_prefixes(spec: &LinkSpec, section_counts: &[usize]) -> Result<Vec<ChannelRealization>> {
    spec.validate()?;
    if let Some(&bad) = section_counts
        .iter()
        .find(|&&k| k == 0 || k > spec.num_sections)
    {
        return Err(Error::invalid(
            "section_counts",
            format!("{bad} outside 1..={}", spec.num_sections),
        ));
    }
    let dim = spec.topology.total_modes();
    let sections = draw_sections(spec, spec.num_sections);
    let uncoupled = spec.coupling == Coupling::Uncoupled;

    let mut per_count: Vec<Vec<CMat>> = vec![Vec::with_capacity(spec.freq_grid.len()); section_counts.len()];
    for &f in &spec.freq_grid {
        let mut h = CMat::identity(dim, dim);
        for (k, section) in sections.iter().enumerate() {
            if uncoupled {
                let d = section.diagonal(f);
                for (i, di) in d.iter().enumerate() {
                    h[(i, i)] *= di;
                }
            } else {
                h = section.matrix(f) * h;
            }
            for (slot, &count) in section_counts.iter().enumerate() {
                if count == k + 1 {
                    per_count[slot].push(h.clone());
                }
            }
        }
    }

    Ok(section_counts
        .iter()
        .zip(per_count)
        .map(|(&count, matrices)| {
            let mut s = spec.clone();
            s.num_sections = count;
            ChannelRealization {
                spec: s,
                matrices,
                per_section_gains: sections[..count].iter().map(|x| x.gains.clone()).collect(),
            }
        })
        .collect())
}

/// Eigenvalues of the Hermitian positive semi-definite `H·H^H`, in dB.
pub fn eigen_spectrum(h: &CMat) -> Result<EigenSpectrum> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            context: "eigen_spectrum (square matrix)",
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    if !crate::linalg::all_finite(h) {
        return Err(Error::NonFinite("eigen_spectrum input"));
    }
    let gram = h * h.adjoint();
    hermitian_spectrum(&gram, "eigen_spectrum")
}

pub(crate) fn hermitian_spectrum(gram: &CMat, context: &'static str) -> Result<EigenSpectrum> {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let tol = max.abs() * f64::EPSILON * gram.nrows() as f64;
    if !(min > tol) || max <= 0.0 {
        return Err(Error::Singular {
            context,
            detail: format!("eigenvalue {min:e} not positive (max {max:e})"),
        });
    }
    EigenSpectrum::from_linear(eig.eigenvalues.as_slice())
}

/// Eigen spectra of several matrices averaged entry-wise (sorted position by
/// sorted position) in dB.
pub fn averaged_spectrum(matrices: &[CMat]) -> Result<EigenSpectrum> {
    let spectra = matrices.iter().map(eigen_spectrum).collect::<Result<Vec<_>>>()?;
    average_spectra(&spectra)
}

pub(crate) fn average_spectra(spectra: &[EigenSpectrum]) -> Result<EigenSpectrum> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::invalid("spectra", "nothing to average"))?;
    let mut acc = vec![0.0; first.len()];
    for s in spectra {
        for (a, v) in acc.iter_mut().zip(s.values_db()) {
            *a += v;
        }
    }
    let n = spectra.len() as f64;
    EigenSpectrum::from_db(acc.into_iter().map(|a| a / n).collect())
}

/// Population standard deviation of the dB eigenvalues.
pub fn sigma_mdg_from(spectrum: &EigenSpectrum) -> f64 {
    population_std(spectrum.values_db())
}

/// Largest minus smallest eigenvalue, in dB.
pub fn peak_to_peak_mdg(spectrum: &EigenSpectrum) -> f64 {
    spectrum.max_db() - spectrum.min_db()
}

/// Closed-form accumulated MDG of a strongly coupled link:
/// `σ = ξ·√(1 + ξ²/(12(1 − D⁻²)))` with `ξ = σ_g·√K`, evaluated in
/// natural-log units and returned in dB.
pub fn sigma_mdg_analytic(sigma_g_db: f64, num_sections: usize, total_modes: usize) -> f64 {
    let xi = db_to_nat(sigma_g_db * (num_sections as f64).sqrt());
    let d = total_modes as f64;
    let denom = 12.0 * (1.0 - 1.0 / (d * d));
    nat_to_db(xi * (1.0 + xi * xi / denom).sqrt())
}

/// Inverse of [`sigma_mdg_analytic`] in `sigma_g_db`, by bisection to `1e-9` dB.
/// The closed form is strictly increasing in `σ_g`.
pub fn sigma_g_for_target(target_sigma_mdg_db: f64, num_sections: usize, total_modes: usize) -> Result<f64> {
    if !(target_sigma_mdg_db >= 0.0 && target_sigma_mdg_db.is_finite()) {
        return Err(Error::invalid("sigma_mdg target", "must be finite and >= 0"));
    }
    // sigma_mdg >= xi, so sigma_g = target / sqrt(K) brackets from above.
    let mut lo = 0.0;
    let mut hi = target_sigma_mdg_db / (num_sections as f64).sqrt();
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if sigma_mdg_analytic(mid, num_sections, total_modes) < target_sigma_mdg_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
