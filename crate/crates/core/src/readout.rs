//! Photon-level readout: fluorescence during the laser pulse, Poisson
//! counting, reference-beam subtraction, and the four signals `S_A`…`S_D`.
//!
//! Time inside a record runs from the start of the readout laser pulse.
//! Counts are stored as `f64` so that noiseless (expected-value) records
//! share the same type as sampled ones; sampled counts are integral.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise_filters::{window_for_signal, IntegrationWindow, SignalScheme};

/// Steady-state photon rate that puts the shot-noise-limited `S_A`
/// sensitivity of the shipped scenario at 0.17 pT/√Hz. Reproduced by
/// `cargo run --release --example calibrate_photon_rate`.
pub const CALIBRATED_PHOTON_RATE_HZ: f64 = 1.4413e19;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutConfig {
    /// Steady-state fluorescence rate R₀ (counts/s).
    #[serde(rename = "photon_rate_Hz")]
    pub photon_rate_hz: f64,
    /// Relative fluorescence dip A_c of m_S = ±1 against m_S = 0.
    pub contrast: f64,
    /// Repolarization time constant.
    pub tau_rep_s: f64,
    pub bin_width_s: f64,
    /// Reference beam rate; defaults to R₀.
    #[serde(rename = "reference_rate_Hz", skip_serializing_if = "Option::is_none")]
    pub reference_rate_hz: Option<f64>,
    /// Weight of the reference channel in the difference detector; when
    /// absent it is matched to the first-window fluorescence at the working
    /// point (p = 1/2).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_ratio: Option<f64>,
    /// Laser pulse length t_L.
    pub laser_s: f64,
    /// Integration window Δt.
    pub window_s: f64,
    pub t_seq_s: f64,
    pub difference_detector: bool,
    pub shot_noise: bool,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig {
            photon_rate_hz: CALIBRATED_PHOTON_RATE_HZ,
            contrast: 0.04,
            tau_rep_s: 1e-6,
            bin_width_s: 1e-6,
            reference_rate_hz: None,
            reference_ratio: None,
            laser_s: 100e-6,
            window_s: 10e-6,
            t_seq_s: 160e-6,
            difference_detector: true,
            shot_noise: true,
        }
    }
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("photon_rate_Hz", self.photon_rate_hz),
            ("tau_rep_s", self.tau_rep_s),
            ("bin_width_s", self.bin_width_s),
            ("laser_s", self.laser_s),
            ("window_s", self.window_s),
            ("t_seq_s", self.t_seq_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(Error::invalid("contrast", "must lie in (0, 1)"));
        }
        if let Some(r) = self.reference_rate_hz {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid(
                    "reference_rate_Hz",
                    "must be finite and > 0",
                ));
            }
        }
        if let Some(r) = self.reference_ratio {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::invalid("reference_ratio", "must be finite and >= 0"));
            }
        }
        if self.bin_width_s > self.window_s {
            return Err(Error::invalid("bin_width_s", "must not exceed window_s"));
        }
        // both single-pulse windows must be constructible
        window_for_signal(SignalScheme::B, self.laser_s, self.window_s, self.t_seq_s)?;
        Ok(())
    }

    pub fn reference_rate(&self) -> f64 {
        self.reference_rate_hz.unwrap_or(self.photon_rate_hz)
    }

    /// Reference weight that balances the first window at p = 1/2.
    pub fn matched_ratio(&self) -> f64 {
        mean_rate_over(0.5, self, 0.0, self.window_s) / self.reference_rate()
    }

    pub fn ratio(&self) -> f64 {
        self.reference_ratio.unwrap_or_else(|| self.matched_ratio())
    }

    pub fn bins_per_pulse(&self) -> usize {
        (self.laser_s / self.bin_width_s * (1.0 - 1e-12)).ceil() as usize
    }

    pub fn window(&self, scheme: SignalScheme) -> Result<IntegrationWindow<f64>> {
        window_for_signal(scheme, self.laser_s, self.window_s, self.t_seq_s)
    }
}

/// `R₀·[1 − A_c·(1 − p)·e^{−t/τ_rep}]`.
pub fn fluorescence_expectation(p_signal: f64, cfg: &ReadoutConfig, t_s: f64) -> f64 {
    cfg.photon_rate_hz * (1.0 - cfg.contrast * (1.0 - p_signal) * (-t_s / cfg.tau_rep_s).exp())
}

/// Average of [`fluorescence_expectation`] over `[t0, t1]`.
pub fn mean_rate_over(p_signal: f64, cfg: &ReadoutConfig, t0: f64, t1: f64) -> f64 {
    let len = t1 - t0;
    if len <= 0.0 {
        return fluorescence_expectation(p_signal, cfg, t0);
    }
    let tau = cfg.tau_rep_s;
    // τ(e^{−t0/τ} − e^{−t1/τ}) = τ e^{−t0/τ}(1 − e^{−len/τ})
    let decay_mean = -tau * (-t0 / tau).exp() * (-len / tau).exp_m1() / len;
    cfg.photon_rate_hz * (1.0 - cfg.contrast * (1.0 - p_signal) * decay_mean)
}

/// Bin-averaged expected rates over one laser pulse.
pub fn expected_rates(p_signal: f64, cfg: &ReadoutConfig) -> Vec<f64> {
    let b = cfg.bin_width_s;
    (0..cfg.bins_per_pulse())
        .map(|i| {
            let t0 = i as f64 * b;
            mean_rate_over(p_signal, cfg, t0, (t0 + b).min(cfg.laser_s))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountSample {
    pub counts: Vec<f64>,
    /// Bins whose noise-modulated rate went negative and was clipped to 0.
    pub clipped: usize,
}

/// Poisson counts with mean `rate·(1 + laser_noise)·bin`; `laser_noise`
/// is per bin and may be empty (no laser noise).
pub fn sample_counts(
    rates_hz: &[f64],
    laser_noise: &[f64],
    bin_width_s: f64,
    seed: u64,
) -> Result<CountSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts_with_rng(rates_hz, laser_noise, bin_width_s, true, &mut rng)
}

/// As [`sample_counts`]; with `shot_noise = false` the expected counts are
/// returned instead of Poisson draws.
pub fn sample_counts_with_rng<R: Rng + ?Sized>(
    rates_hz: &[f64],
    laser_noise: &[f64],
    bin_width_s: f64,
    shot_noise: bool,
    rng: &mut R,
) -> Result<CountSample> {
    if !(bin_width_s > 0.0) {
        return Err(Error::invalid("bin_width_s", "must be > 0"));
    }
    if !laser_noise.is_empty() && laser_noise.len() != rates_hz.len() {
        return Err(Error::GridMismatch(format!(
            "{} rates vs {} laser-noise samples",
            rates_hz.len(),
            laser_noise.len()
        )));
    }
    let mut clipped = 0;
    let mut counts = Vec::with_capacity(rates_hz.len());
    for (i, &r) in rates_hz.iter().enumerate() {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid(
                "rates_hz",
                format!("bin {i}: rate {r} is not >= 0"),
            ));
        }
        let eps = laser_noise.get(i).copied().unwrap_or(0.0);
        let mut mean = r * (1.0 + eps) * bin_width_s;
        if mean < 0.0 {
            clipped += 1;
            mean = 0.0;
        }
        counts.push(if shot_noise { poisson(mean, rng) } else { mean });
    }
    Ok(CountSample { counts, clipped })
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    match Poisson::new(mean) {
        Ok(d) => d.sample(rng),
        // beyond the sampler's range the normal limit is exact to many digits
        Err(_) => {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            (mean + mean.sqrt() * z).round().max(0.0)
        }
    }
}

/// Signal minus `ratio` × reference, bin by bin.
pub fn difference_detector(signal: &[f64], reference: &[f64], ratio: f64) -> Result<Vec<f64>> {
    if signal.len() != reference.len() {
        return Err(Error::GridMismatch(format!(
            "signal has {} bins, reference has {}",
            signal.len(),
            reference.len()
        )));
    }
    Ok(signal
        .iter()
        .zip(reference)
        .map(|(s, r)| s - ratio * r)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutRecord {
    pub sequence_index: u64,
    /// Start of the sequence, `index · T_seq`.
    pub timestamp_s: f64,
    pub bin_width_s: f64,
    pub signal: Vec<f64>,
    pub reference: Option<Vec<f64>>,
    pub clipped_bins: usize,
}

impl ReadoutRecord {
    /// Per-bin values after the difference detector (or the bare signal
    /// channel when no reference was recorded).
    pub fn net(&self, ratio: f64) -> Result<Vec<f64>> {
        match &self.reference {
            Some(r) => difference_detector(&self.signal, r, ratio),
            None => Ok(self.signal.clone()),
        }
    }
}

/// One readout pulse for spin population `p_signal`, with relative laser
/// intensity offset `laser_noise` held over the pulse.
pub fn simulate_record<R: Rng + ?Sized>(
    p_signal: f64,
    laser_noise: f64,
    cfg: &ReadoutConfig,
    sequence_index: u64,
    rng: &mut R,
) -> Result<ReadoutRecord> {
    if !(0.0..=1.0).contains(&p_signal) {
        return Err(Error::invalid(
            "p_signal",
            format!("{p_signal} is outside [0, 1]"),
        ));
    }
    let rates = expected_rates(p_signal, cfg);
    let eps = vec![laser_noise; rates.len()];
    let sig = sample_counts_with_rng(&rates, &eps, cfg.bin_width_s, cfg.shot_noise, rng)?;
    let (reference, ref_clipped) = if cfg.difference_detector {
        let r = vec![cfg.reference_rate(); rates.len()];
        let s = sample_counts_with_rng(&r, &eps, cfg.bin_width_s, cfg.shot_noise, rng)?;
        (Some(s.counts), s.clipped)
    } else {
        (None, 0)
    };
    Ok(ReadoutRecord {
        sequence_index,
        timestamp_s: sequence_index as f64 * cfg.t_seq_s,
        bin_width_s: cfg.bin_width_s,
        signal: sig.counts,
        reference,
        clipped_bins: sig.clipped + ref_clipped,
    })
}

/// Weighted window sum over the records, normalized by `Δt·R₀`. Segment
/// times beyond `T_seq` select the following record.
pub fn extract_signal(
    records: &[ReadoutRecord],
    scheme: SignalScheme,
    cfg: &ReadoutConfig,
) -> Result<f64> {
    let needed = scheme.sequences_per_value();
    if records.len() < needed {
        return Err(Error::InsufficientData(format!(
            "scheme {scheme} needs {needed} record(s), got {}",
            records.len()
        )));
    }
    let window = cfg.window(scheme)?;
    let ratio = cfg.ratio();
    let nets: Vec<Vec<f64>> = records[..needed]
        .iter()
        .map(|r| r.net(ratio))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for seg in &window.segments {
        let idx = ((seg.start_s + 1e-12 * cfg.t_seq_s) / cfg.t_seq_s).floor() as usize;
        let offset = idx as f64 * cfg.t_seq_s;
        let (lo, hi) = (seg.start_s - offset, seg.end_s - offset);
        let rec = &records[idx];
        let net = &nets[idx];
        let b = rec.bin_width_s;
        if hi > net.len() as f64 * b * (1.0 + 1e-12) {
            return Err(Error::InsufficientData(format!(
                "window [{lo}, {hi}] s extends past the {}-bin record",
                net.len()
            )));
        }
        let first = (lo / b).floor() as usize;
        let mut sum = 0.0;
        for (i, &v) in net.iter().enumerate().skip(first) {
            let (b0, b1) = (i as f64 * b, (i + 1) as f64 * b);
            if b0 >= hi {
                break;
            }
            let overlap = (b1.min(hi) - b0.max(lo)).max(0.0);
            sum += v * overlap / b;
        }
        total += seg.weight * sum;
    }
    Ok(total / (cfg.window_s * cfg.photon_rate_hz))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutSeries {
    pub scheme: SignalScheme,
    pub spacing_s: f64,
    pub values: Vec<f64>,
}

impl ReadoutSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,time_s,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{i},{:e},{v:e}", i as f64 * self.spacing_s);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Signal values from consecutive records: one per record for A/B, one per
/// non-overlapping pair for C/D.
pub fn signal_series(
    records: &[ReadoutRecord],
    scheme: SignalScheme,
    cfg: &ReadoutConfig,
) -> Result<ReadoutSeries> {
    let per = scheme.sequences_per_value();
    let values = records
        .chunks_exact(per)
        .map(|c| extract_signal(c, scheme, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReadoutSeries {
        scheme,
        spacing_s: per as f64 * cfg.t_seq_s,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> ReadoutConfig {
        ReadoutConfig {
            photon_rate_hz: 1e12,
            ..ReadoutConfig::default()
        }
    }

    fn noiseless(c: &ReadoutConfig) -> ReadoutConfig {
        ReadoutConfig {
            shot_noise: false,
            ..c.clone()
        }
    }

    fn std(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn default_config_is_valid() {
        ReadoutConfig::default().validate().unwrap();
        let bad = ReadoutConfig {
            window_s: 100e-6,
            ..cfg()
        };
        assert!(bad.validate().is_err());
        assert!(ReadoutConfig {
            contrast: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(ReadoutConfig {
            laser_s: 200e-6,
            ..cfg()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn fluorescence_limits() {
        let c = cfg();
        for t in [0.0, 1e-7, 1e-6, 1e-5] {
            assert_eq!(fluorescence_expectation(1.0, &c, t), c.photon_rate_hz);
        }
        for p in [0.0, 0.3, 1.0] {
            assert_relative_eq!(
                fluorescence_expectation(p, &c, 1e-3),
                c.photon_rate_hz,
                max_relative = 1e-15
            );
        }
        let flat = ReadoutConfig {
            contrast: 0.0,
            ..c.clone()
        };
        assert_eq!(
            fluorescence_expectation(0.0, &flat, 0.0),
            fluorescence_expectation(1.0, &flat, 0.0)
        );
        assert_relative_eq!(
            fluorescence_expectation(0.0, &c, 0.0),
            c.photon_rate_hz * 0.96
        );
    }

    #[test]
    fn bin_mean_matches_quadrature() {
        let c = cfg();
        let (t0, t1) = (0.3e-6, 2.1e-6);
        let n = 100_000;
        let h = (t1 - t0) / n as f64;
        let q: f64 = (0..n)
            .map(|i| fluorescence_expectation(0.2, &c, t0 + (i as f64 + 0.5) * h))
            .sum::<f64>()
            / n as f64;
        assert_relative_eq!(mean_rate_over(0.2, &c, t0, t1), q, max_relative = 1e-10);
    }

    #[test]
    fn poisson_statistics() {
        let n = 100_000;
        let (rate, bin) = (3e6, 1e-5);
        let s = sample_counts(&vec![rate; n], &[], bin, 4).unwrap();
        let mean = s.counts.iter().sum::<f64>() / n as f64;
        let var = std(&s.counts).powi(2);
        let lambda = rate * bin;
        assert!((mean - lambda).abs() < 3.0 * (lambda / n as f64).sqrt());
        assert!((var / mean - 1.0).abs() < 0.05);
        assert!(s.counts.iter().all(|c| c.fract() == 0.0 && *c >= 0.0));
        let z = sample_counts(&[0.0; 10], &[], bin, 4).unwrap();
        assert!(z.counts.iter().all(|&c| c == 0.0));
        assert_eq!(
            sample_counts(&vec![rate; 50], &[], bin, 9).unwrap(),
            sample_counts(&vec![rate; 50], &[], bin, 9).unwrap()
        );
    }

    #[test]
    fn sampling_rejects_and_clips() {
        assert!(sample_counts(&[1.0, -1.0], &[], 1e-6, 0).is_err());
        assert!(sample_counts(&[1.0, 1.0], &[0.0], 1e-6, 0).is_err());
        let s = sample_counts(&[1e9, 1e9, 1e9], &[0.0, -2.0, 0.1], 1e-6, 0).unwrap();
        assert_eq!(s.clipped, 1);
        assert_eq!(s.counts[1], 0.0);
    }

    #[test]
    fn difference_detector_examples() {
        let a = [5.0, 7.0, 11.0];
        assert_eq!(difference_detector(&a, &a, 1.0).unwrap(), [0.0; 3]);
        assert!(difference_detector(&a, &a[..2], 1.0).is_err());
        // common multiplicative fluctuation, noiseless counts
        let sig = [100.0, 90.0, 95.0];
        let refc = [100.0, 100.0, 100.0];
        let eps = [0.01, -0.02, 0.005];
        let s2: Vec<f64> = sig.iter().zip(&eps).map(|(s, e)| s * (1.0 + e)).collect();
        let r2: Vec<f64> = refc.iter().zip(&eps).map(|(r, e)| r * (1.0 + e)).collect();
        let out = difference_detector(&s2, &r2, 1.0).unwrap();
        for i in 0..3 {
            assert_relative_eq!(
                out[i],
                (sig[i] - refc[i]) * (1.0 + eps[i]),
                max_relative = 1e-12
            );
        }
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn noiseless_signals() {
        let c = noiseless(&cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r0 = simulate_record(0.5, 0.0, &c, 0, &mut rng).unwrap();
        let r1 = simulate_record(0.5, 0.0, &c, 1, &mut rng).unwrap();
        for s in [SignalScheme::C, SignalScheme::D] {
            assert!(
                extract_signal(&[r0.clone(), r1.clone()], s, &c)
                    .unwrap()
                    .abs()
                    < 1e-12
            );
        }
        assert!(extract_signal(std::slice::from_ref(&r0), SignalScheme::D, &c).is_err());
        // S_B at p = 0 against the steady state: minus the mean dip of window 1
        let bare = ReadoutConfig {
            difference_detector: false,
            ..c.clone()
        };
        let dark = simulate_record(0.0, 0.0, &bare, 0, &mut rng).unwrap();
        let tau = c.tau_rep_s;
        let dip1 = tau / c.window_s * (1.0 - (-c.window_s / tau).exp());
        let t2 = c.laser_s - c.window_s;
        let dip2 = tau / c.window_s * ((-t2 / tau).exp() - (-c.laser_s / tau).exp());
        let sb = extract_signal(std::slice::from_ref(&dark), SignalScheme::B, &bare).unwrap();
        assert_relative_eq!(sb, -c.contrast * (dip1 - dip2), max_relative = 1e-10);
        let sa = extract_signal(&[dark], SignalScheme::A, &bare).unwrap();
        assert_relative_eq!(sa, 1.0 - c.contrast * dip1, max_relative = 1e-12);
        // matched reference zeroes S_A at the working point
        let sa_det = extract_signal(&[r0], SignalScheme::A, &c).unwrap();
        assert!(sa_det.abs() < 1e-12);
    }

    #[test]
    fn windows_not_aligned_to_bins() {
        let c = noiseless(&ReadoutConfig {
            window_s: 10.5e-6,
            difference_detector: false,
            ..cfg()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = simulate_record(1.0, 0.0, &c, 0, &mut rng).unwrap();
        assert_relative_eq!(
            extract_signal(&[r], SignalScheme::A, &c).unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn matched_reference_suppresses_laser_noise() {
        let c = cfg();
        let n = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut shot = Vec::with_capacity(n);
        let mut noisy = Vec::with_capacity(n);
        for i in 0..n {
            let r = simulate_record(0.5, 0.0, &c, i as u64, &mut rng).unwrap();
            shot.push(extract_signal(&[r], SignalScheme::A, &c).unwrap());
            let eps = 0.01 * rng.sample::<f64, _>(rand_distr::StandardNormal);
            let r = simulate_record(0.5, eps, &c, i as u64, &mut rng).unwrap();
            noisy.push(extract_signal(&[r], SignalScheme::A, &c).unwrap());
        }
        let (s, t) = (std(&shot), std(&noisy));
        let residual = (t * t - s * s).max(0.0).sqrt();
        assert!(residual < s, "residual {residual} vs shot {s}");
        // without the reference the same laser noise dominates
        let bare = ReadoutConfig {
            difference_detector: false,
            ..c.clone()
        };
        let mut raw = Vec::with_capacity(n);
        for i in 0..n {
            let eps = 0.01 * rng.sample::<f64, _>(rand_distr::StandardNormal);
            let r = simulate_record(0.5, eps, &bare, i as u64, &mut rng).unwrap();
            raw.push(extract_signal(&[r], SignalScheme::A, &bare).unwrap());
        }
        assert!(std(&raw) > 10.0 * s);
    }

    #[test]
    fn series_layout_and_csv() {
        let c = noiseless(&cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let recs: Vec<_> = (0..5)
            .map(|i| simulate_record(0.5, 0.0, &c, i, &mut rng).unwrap())
            .collect();
        let b = signal_series(&recs, SignalScheme::B, &c).unwrap();
        assert_eq!((b.len(), b.spacing_s), (5, 160e-6));
        let d = signal_series(&recs, SignalScheme::D, &c).unwrap();
        assert_eq!((d.len(), d.spacing_s), (2, 320e-6));
        let csv = d.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,time_s,value");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,3.2e-4,"));
    }

    #[test]
    fn config_toml_round_trip() {
        let c = ReadoutConfig {
            reference_ratio: Some(0.98),
            ..ReadoutConfig::default()
        };
        let text = toml::to_string(&c).unwrap();
        assert!(text.contains("photon_rate_Hz"));
        let back: ReadoutConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(toml::from_str::<ReadoutConfig>("photon_rate = 1.0").is_err());
    }
}
