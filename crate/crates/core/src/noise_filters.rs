//! Noise spectra, trace synthesis, and signal-window filter functions.
//!
//! Spectral densities are one-sided: the variance of a process is
//! `∫₀^∞ S(f) df`. Filter transmissions are `X(ω) = |∫ e^{iωt} C(t) dt|`
//! for a piecewise-constant window `C`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChannel {
    /// Relative laser intensity.
    LaserIntensity,
    /// Relative microwave amplitude error Δg.
    MwAmplitude,
    /// Carrier frequency deviation Δf in Hz.
    MwFrequency,
}

impl NoiseChannel {
    pub const ALL: [NoiseChannel; 3] = [
        NoiseChannel::LaserIntensity,
        NoiseChannel::MwAmplitude,
        NoiseChannel::MwFrequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseChannel::LaserIntensity => "laser_intensity",
            NoiseChannel::MwAmplitude => "mw_amplitude",
            NoiseChannel::MwFrequency => "mw_frequency",
        }
    }

    /// Offset added to a run's master seed for this channel's trace.
    pub fn seed_offset(self) -> u64 {
        match self {
            NoiseChannel::LaserIntensity => 0x1000,
            NoiseChannel::MwAmplitude => 0x2000,
            NoiseChannel::MwFrequency => 0x3000,
        }
    }
}

pub trait SpectralDensity<T: Real> {
    /// One-sided density at `f_hz`.
    fn density(&self, f_hz: T) -> T;

    /// `∫_{f_lo}^{f_hi} S(f) df`.
    fn band_power(&self, f_lo: T, f_hi: T) -> T;
}

/// `S(f) = c/f^α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlickerComponent<T> {
    pub amplitude: T,
    pub exponent: T,
}

/// White level plus power-law components, nonzero on `[f_min, f_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdModel<T> {
    pub channel: NoiseChannel,
    pub white_level: T,
    #[serde(default)]
    pub flicker: Vec<FlickerComponent<T>>,
    pub f_min_hz: T,
    pub f_max_hz: T,
}

impl<T: Real> PsdModel<T> {
    pub fn white(channel: NoiseChannel, level: T, f_max_hz: T) -> Self {
        PsdModel {
            channel,
            white_level: level,
            flicker: Vec::new(),
            f_min_hz: T::zero(),
            f_max_hz,
        }
    }

    pub fn zero(channel: NoiseChannel) -> Self {
        PsdModel::white(channel, T::zero(), T::infinity())
    }

    pub fn with_flicker(mut self, amplitude: T, exponent: T) -> Self {
        self.flicker.push(FlickerComponent {
            amplitude,
            exponent,
        });
        self
    }

    pub fn is_zero(&self) -> bool {
        self.white_level == T::zero() && self.flicker.iter().all(|c| c.amplitude == T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.white_level >= T::zero() && self.white_level.is_finite()) {
            return Err(Error::invalid("white_level", "must be finite and >= 0"));
        }
        if !(self.f_min_hz >= T::zero() && self.f_min_hz < self.f_max_hz) {
            return Err(Error::invalid("f_min_hz", "need 0 <= f_min < f_max"));
        }
        for c in &self.flicker {
            if !(c.amplitude >= T::zero() && c.amplitude.is_finite()) {
                return Err(Error::invalid(
                    "flicker.amplitude",
                    "must be finite and >= 0",
                ));
            }
            if !(c.exponent >= T::zero() && c.exponent <= T::lit(2.0)) {
                return Err(Error::invalid("flicker.exponent", "must lie in [0, 2]"));
            }
            if c.exponent >= T::one() && c.amplitude > T::zero() && self.f_min_hz == T::zero() {
                return Err(Error::invalid(
                    "f_min_hz",
                    "must be > 0 when a component with exponent >= 1 is present",
                ));
            }
        }
        Ok(())
    }
}

fn power_law_integral<T: Real>(exponent: T, a: T, b: T) -> T {
    let p = T::one() - exponent;
    if p.abs() < T::lit(1e-9) {
        (b / a).ln()
    } else {
        (b.powf(p) - a.powf(p)) / p
    }
}

impl<T: Real> SpectralDensity<T> for PsdModel<T> {
    fn density(&self, f_hz: T) -> T {
        if f_hz < self.f_min_hz || f_hz > self.f_max_hz || f_hz <= T::zero() {
            return T::zero();
        }
        self.flicker.iter().fold(self.white_level, |acc, c| {
            acc + c.amplitude / f_hz.powf(c.exponent)
        })
    }

    fn band_power(&self, f_lo: T, f_hi: T) -> T {
        let a = f_lo.max(self.f_min_hz).max(T::zero());
        let b = f_hi.min(self.f_max_hz);
        if !(b > a) {
            return T::zero();
        }
        self.flicker
            .iter()
            .fold(self.white_level * (b - a), |acc, c| {
                if c.amplitude == T::zero() {
                    acc
                } else {
                    acc + c.amplitude * power_law_integral(c.exponent, a, b)
                }
            })
    }
}

/// Tabulated density with linear interpolation between grid points and
/// zero outside the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSpectrum<T> {
    pub freqs_hz: Vec<T>,
    pub density: Vec<T>,
}

impl<T: Real> SampledSpectrum<T> {
    pub fn new(freqs_hz: Vec<T>, density: Vec<T>) -> Result<Self> {
        let s = SampledSpectrum { freqs_hz, density };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs_hz.len() != self.density.len() {
            return Err(Error::GridMismatch(format!(
                "{} frequencies vs {} densities",
                self.freqs_hz.len(),
                self.density.len()
            )));
        }
        if self.freqs_hz.len() < 2 {
            return Err(Error::InsufficientData(
                "spectrum needs at least 2 points".into(),
            ));
        }
        if self.freqs_hz[0] < T::zero() || self.freqs_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "freqs_hz",
                "must be non-negative and strictly increasing",
            ));
        }
        if self
            .density
            .iter()
            .any(|&d| !(d >= T::zero() && d.is_finite()))
        {
            return Err(Error::invalid("density", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    /// Frequency resolution of a uniform grid (first spacing).
    pub fn resolution_hz(&self) -> T {
        self.freqs_hz[1] - self.freqs_hz[0]
    }

    /// Reads two-column `frequency, density` text. Columns may be separated
    /// by commas, tabs, semicolons, or spaces; `#` starts a comment and a
    /// non-numeric first row is treated as a header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut freqs = Vec::new();
        let mut dens = Vec::new();
        let mut seen_data = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed: Option<(f64, f64)> = match cols.as_slice() {
                [f, s, ..] => f.parse().ok().zip(s.parse().ok()),
                _ => None,
            };
            match parsed {
                Some((f, s)) => {
                    freqs.push(T::lit(f));
                    dens.push(T::lit(s));
                    seen_data = true;
                }
                None if !seen_data => continue,
                None => {
                    return Err(Error::invalid(
                        "spectrum",
                        format!(
                            "line {}: expected two numeric columns, got {raw:?}",
                            lineno + 1
                        ),
                    ))
                }
            }
        }
        SampledSpectrum::new(freqs, dens)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("f_Hz,density\n");
        for (f, s) in self.freqs_hz.iter().zip(&self.density) {
            let _ = writeln!(out, "{f:e},{s:e}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    fn segment_integral(&self, i: usize, a: T, b: T) -> T {
        // exact integral of the linear interpolant on [a, b] ⊂ [f_i, f_{i+1}]
        let (f0, f1) = (self.freqs_hz[i], self.freqs_hz[i + 1]);
        let (s0, s1) = (self.density[i], self.density[i + 1]);
        let slope = (s1 - s0) / (f1 - f0);
        let sa = s0 + slope * (a - f0);
        let sb = s0 + slope * (b - f0);
        (sa + sb) * (b - a) / T::lit(2.0)
    }
}

impl<T: Real> SpectralDensity<T> for SampledSpectrum<T> {
    fn density(&self, f_hz: T) -> T {
        let n = self.freqs_hz.len();
        if n == 0 || f_hz < self.freqs_hz[0] || f_hz > self.freqs_hz[n - 1] {
            return T::zero();
        }
        let i = self
            .freqs_hz
            .partition_point(|&f| f <= f_hz)
            .clamp(1, n - 1)
            - 1;
        let (f0, f1) = (self.freqs_hz[i], self.freqs_hz[i + 1]);
        let w = (f_hz - f0) / (f1 - f0);
        self.density[i] * (T::one() - w) + self.density[i + 1] * w
    }

    fn band_power(&self, f_lo: T, f_hi: T) -> T {
        let n = self.freqs_hz.len();
        if n < 2 {
            return T::zero();
        }
        let a = f_lo.max(self.freqs_hz[0]);
        let b = f_hi.min(self.freqs_hz[n - 1]);
        if !(b > a) {
            return T::zero();
        }
        let start = self.freqs_hz.partition_point(|&f| f <= a).clamp(1, n - 1) - 1;
        let mut total = T::zero();
        for i in start..n - 1 {
            let lo = a.max(self.freqs_hz[i]);
            let hi = b.min(self.freqs_hz[i + 1]);
            if hi > lo {
                total = total + self.segment_integral(i, lo, hi);
            }
            if self.freqs_hz[i + 1] >= b {
                break;
            }
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace<T> {
    pub samples: Vec<T>,
    pub dt_s: T,
    pub channel: NoiseChannel,
    pub seed: u64,
}

impl<T: Real> NoiseTrace<T> {
    pub fn zeros(n: usize, dt_s: T, channel: NoiseChannel) -> Self {
        NoiseTrace {
            samples: vec![T::zero(); n],
            dt_s,
            channel,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> T {
        self.dt_s * T::from_count(self.samples.len())
    }

    /// Sample at index `i`, or zero past the end.
    pub fn get(&self, i: usize) -> T {
        self.samples.get(i).copied().unwrap_or_else(T::zero)
    }
}

fn sample_count<T: Real>(duration_s: T, dt_s: T) -> Result<usize> {
    if !(dt_s > T::zero() && dt_s.is_finite()) {
        return Err(Error::invalid("dt_s", "must be finite and > 0"));
    }
    if !(duration_s >= T::lit(2.0) * dt_s && duration_s.is_finite()) {
        return Err(Error::invalid("duration_s", "must be finite and >= 2·dt"));
    }
    // tolerate durations that are a multiple of dt up to rounding
    let n = (duration_s / dt_s * (T::one() + T::lit(1e-12))).floor();
    n.to_usize()
        .ok_or_else(|| Error::invalid("duration_s", "sample count overflows usize"))
}

/// Stationary Gaussian trace with one-sided density `model`, from
/// frequency-domain shaping of white noise seeded by `seed`.
pub fn synthesize_trace<T: Real + FftNum>(
    model: &PsdModel<T>,
    duration_s: T,
    dt_s: T,
    seed: u64,
) -> Result<NoiseTrace<T>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = synthesize_with_rng(model, model.channel, duration_s, dt_s, &mut rng)?;
    trace.seed = seed;
    Ok(trace)
}

/// Shaping core shared by parametric and tabulated spectra.
///
/// Bin `k` of an `N`-point record at spacing `Δf = 1/(NΔt)` carries the
/// band power of `[max(Δf, f_k − Δf/2), min(f_k + Δf/2, 1/(2Δt))]` split
/// between independent cosine and sine quadratures, so the expected sample
/// variance equals `∫ S df` over `[1/duration, 1/(2Δt)]`. DC is zero.
pub fn synthesize_with_rng<T, S, R>(
    spectrum: &S,
    channel: NoiseChannel,
    duration_s: T,
    dt_s: T,
    rng: &mut R,
) -> Result<NoiseTrace<T>>
where
    T: Real + FftNum,
    S: SpectralDensity<T> + ?Sized,
    R: Rng + ?Sized,
{
    let n = sample_count(duration_s, dt_s)?;
    let df = T::one() / (T::from_count(n) * dt_s);
    let nyquist = T::one() / (T::lit(2.0) * dt_s);
    let half = T::lit(0.5);
    let mut spec = vec![Complex::new(T::zero(), T::zero()); n];
    let mut any = false;
    for k in 1..=n / 2 {
        let fk = df * T::from_count(k);
        let lo = (fk - half * df).max(df);
        let hi = (fk + half * df).min(nyquist);
        let power = spectrum.band_power(lo, hi).max(T::zero());
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        if power == T::zero() {
            continue;
        }
        any = true;
        let sd = power.sqrt();
        if 2 * k == n {
            spec[k] = Complex::new(sd * T::lit(a), T::zero());
        } else {
            let c = Complex::new(sd * T::lit(a) * half, -sd * T::lit(b) * half);
            spec[k] = c;
            spec[n - k] = c.conj();
        }
    }
    let samples = if any {
        let fft = FftPlanner::new().plan_fft_inverse(n);
        fft.process(&mut spec);
        spec.iter().map(|c| c.re).collect()
    } else {
        vec![T::zero(); n]
    };
    Ok(NoiseTrace {
        samples,
        dt_s,
        channel,
        seed: 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaperWindow {
    Rectangular,
    Hann,
}

impl TaperWindow {
    fn weights<T: Real>(self, n: usize) -> Vec<T> {
        match self {
            TaperWindow::Rectangular => vec![T::one(); n],
            TaperWindow::Hann => (0..n)
                .map(|i| {
                    let x = T::TAU() * T::from_count(i) / T::from_count(n);
                    T::lit(0.5) * (T::one() - x.cos())
                })
                .collect(),
        }
    }
}

/// Welch estimate with a Hann taper and 50% overlap.
pub fn estimate_psd<T: Real + FftNum>(
    trace: &NoiseTrace<T>,
    segment_len: usize,
) -> Result<SampledSpectrum<T>> {
    estimate_psd_with(trace, segment_len, TaperWindow::Hann)
}

/// Averaged one-sided periodogram on the grid `k/(L·Δt)`, `k = 0..=L/2`.
/// Segments of length `L` advance by `L/2`; at least two are required.
pub fn estimate_psd_with<T: Real + FftNum>(
    trace: &NoiseTrace<T>,
    segment_len: usize,
    taper: TaperWindow,
) -> Result<SampledSpectrum<T>> {
    if segment_len < 2 {
        return Err(Error::invalid("segment_len", "must be >= 2"));
    }
    let hop = segment_len / 2;
    let n = trace.samples.len();
    if n < segment_len + hop {
        return Err(Error::InsufficientData(format!(
            "{n} samples do not cover two overlapping segments of {segment_len}"
        )));
    }
    let w: Vec<T> = taper.weights(segment_len);
    let u = w.iter().fold(T::zero(), |a, &x| a + x * x);
    let fs = T::one() / trace.dt_s;
    let fft: Arc<dyn Fft<T>> = FftPlanner::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let mut acc = vec![T::zero(); bins];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); segment_len];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment_len <= n {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(trace.samples[start + i] * w[i], T::zero());
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a = *a + buf[k].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let norm = fs * u * T::from_count(count);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || 2 * k == segment_len {
                T::one()
            } else {
                T::lit(2.0)
            };
            one_sided * p / norm
        })
        .collect();
    let df = fs / T::from_count(segment_len);
    let freqs_hz = (0..bins).map(|k| df * T::from_count(k)).collect();
    Ok(SampledSpectrum { freqs_hz, density })
}

/// `sqrt(∫_{f_low}^{f} S df)`.
pub fn cumulative_rss<T: Real, S: SpectralDensity<T> + ?Sized>(
    spectrum: &S,
    f_low: T,
    f: T,
) -> Result<T> {
    if !(f >= f_low) {
        return Err(Error::invalid(
            "f",
            format!("{f} Hz is below f_low = {f_low} Hz"),
        ));
    }
    Ok(spectrum.band_power(f_low, f).max(T::zero()).sqrt())
}

/// `cumulative_rss` evaluated on an ascending grid.
pub fn cumulative_rss_curve<T: Real, S: SpectralDensity<T> + ?Sized>(
    spectrum: &S,
    f_low: T,
    grid_hz: &[T],
) -> Result<Vec<T>> {
    check_ascending(f_low, grid_hz)?;
    let mut acc = T::zero();
    let mut prev = f_low;
    let mut out = Vec::with_capacity(grid_hz.len());
    for &f in grid_hz {
        acc = acc + spectrum.band_power(prev, f).max(T::zero());
        prev = f;
        out.push(acc.sqrt());
    }
    Ok(out)
}

fn check_ascending<T: Real>(f_low: T, grid_hz: &[T]) -> Result<()> {
    if grid_hz.first().is_some_and(|&f| !(f >= f_low)) {
        return Err(Error::invalid("grid_hz", "first frequency is below f_low"));
    }
    if grid_hz.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::invalid("grid_hz", "must be non-decreasing"));
    }
    Ok(())
}

/// Ways of forming a scalar from the readout fluorescence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalScheme {
    /// Counts in `[0, Δt]` of one pulse.
    A,
    /// Start window minus end window of the same pulse.
    B,
    /// `S_A` of one sequence minus `S_A` of the next.
    C,
    /// `S_B` of one sequence minus `S_B` of the next.
    D,
}

impl SignalScheme {
    pub const ALL: [SignalScheme; 4] = [
        SignalScheme::A,
        SignalScheme::B,
        SignalScheme::C,
        SignalScheme::D,
    ];

    pub fn sequences_per_value(self) -> usize {
        match self {
            SignalScheme::A | SignalScheme::B => 1,
            SignalScheme::C | SignalScheme::D => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalScheme::A => "A",
            SignalScheme::B => "B",
            SignalScheme::C => "C",
            SignalScheme::D => "D",
        }
    }
}

impl std::fmt::Display for SignalScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SignalScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(SignalScheme::A),
            "B" => Ok(SignalScheme::B),
            "C" => Ok(SignalScheme::C),
            "D" => Ok(SignalScheme::D),
            _ => Err(Error::invalid("scheme", format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSegment<T> {
    pub start_s: T,
    pub end_s: T,
    pub weight: T,
}

impl<T: Real> WindowSegment<T> {
    pub fn duration_s(&self) -> T {
        self.end_s - self.start_s
    }
}

/// Piecewise-constant weighting `C(t)` with time measured from the start of
/// the first readout laser pulse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationWindow<T> {
    pub segments: Vec<WindowSegment<T>>,
    pub span_s: T,
}

impl<T: Real> IntegrationWindow<T> {
    /// `∫ C(t) dt`.
    pub fn integral(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |a, s| a + s.weight * s.duration_s())
    }
}

/// Builds `C_A`…`C_D` for readout pulses of length `t_L`, windows of
/// length `Δt`, and sequence period `T_seq`.
pub fn window_for_signal<T: Real>(
    scheme: SignalScheme,
    t_l_s: T,
    dt_s: T,
    t_seq_s: T,
) -> Result<IntegrationWindow<T>> {
    if !(dt_s > T::zero()) {
        return Err(Error::invalid("dt_s", "window length must be > 0"));
    }
    if !(dt_s < t_l_s) {
        return Err(Error::invalid(
            "dt_s",
            "window length must be shorter than the laser pulse",
        ));
    }
    if !(t_l_s <= t_seq_s) {
        return Err(Error::invalid(
            "t_l_s",
            "laser pulse must fit in the sequence period",
        ));
    }
    let referenced = matches!(scheme, SignalScheme::B | SignalScheme::D);
    if referenced && dt_s > t_l_s / T::lit(2.0) {
        return Err(Error::invalid(
            "dt_s",
            "start and end windows overlap; need Δt <= t_L/2",
        ));
    }
    let one = T::one();
    let seg = |start_s: T, end_s: T, weight: T| WindowSegment {
        start_s,
        end_s,
        weight,
    };
    let single = |offset: T, sign: T| {
        let mut v = vec![seg(offset, offset + dt_s, sign)];
        if referenced {
            v.push(seg(offset + t_l_s - dt_s, offset + t_l_s, -sign));
        }
        v
    };
    let (segments, span_s) = match scheme {
        SignalScheme::A | SignalScheme::B => (single(T::zero(), one), t_seq_s),
        SignalScheme::C | SignalScheme::D => {
            let mut v = single(T::zero(), one);
            v.extend(single(t_seq_s, -one));
            (v, T::lit(2.0) * t_seq_s)
        }
    };
    Ok(IntegrationWindow { segments, span_s })
}

fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

/// `|∫ e^{iωt} C(t) dt|` as a sum of exact segment integrals
/// `w·L·e^{iω·mid}·sinc(ωL/2)`. Even in ω.
pub fn filter_transmission_numeric<T: Real>(window: &IntegrationWindow<T>, omega: T) -> T {
    let omega = omega.abs();
    let half = T::lit(0.5);
    let (re, im) = window
        .segments
        .iter()
        .fold((T::zero(), T::zero()), |(re, im), s| {
            let len = s.duration_s();
            let mid = half * (s.start_s + s.end_s);
            let amp = s.weight * len * sinc(half * omega * len);
            let (sin, cos) = (omega * mid).sin_cos();
            (re + amp * cos, im + amp * sin)
        });
    re.hypot(im)
}

/// Closed form of `X_B`,
/// `sqrt|2/ω²·[2 − 2cos ωΔt + cos ω(t_L−2Δt) + cos ωt_L − 2cos ω(t_L−Δt)]|`,
/// evaluated through the identity that the bracket equals
/// `8 sin²(ωΔt/2) sin²(ω(t_L−Δt)/2)`, which avoids cancellation at small ω.
pub fn filter_transmission_analytic_b<T: Real>(omega: T, t_l_s: T, dt_s: T) -> T {
    let omega = omega.abs();
    if omega == T::zero() {
        return T::zero();
    }
    let half = T::lit(0.5);
    let s1 = (half * omega * dt_s).sin();
    let s2 = (half * omega * (t_l_s - dt_s)).sin();
    T::lit(4.0) * (s1 * s2).abs() / omega
}

/// The same closed form evaluated term by term.
pub fn filter_transmission_b_expanded<T: Real>(omega: T, t_l_s: T, dt_s: T) -> T {
    let w = omega;
    let two = T::lit(2.0);
    let bracket =
        two - two * (w * dt_s).cos() + (w * (t_l_s - two * dt_s)).cos() + (w * t_l_s).cos()
            - two * (w * (t_l_s - dt_s)).cos();
    (two / (w * w) * bracket).abs().sqrt()
}

/// 8-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [(f64, f64); 4] = [
    (0.183_434_642_495_65, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn gauss_legendre<T: Real>(f: &impl Fn(T) -> T, a: T, b: T) -> T {
    let c = T::lit(0.5) * (a + b);
    let h = T::lit(0.5) * (b - a);
    let sum = GL_NODES.iter().fold(T::zero(), |acc, &(x, w)| {
        let dx = h * T::lit(x);
        acc + T::lit(w) * (f(c - dx) + f(c + dx))
    });
    sum * h
}

/// Panel boundaries on `[a, b]`: log-spaced (16 per decade) and no wider
/// than `max_width`.
fn panels<T: Real>(a: T, b: T, max_width: T) -> Vec<T> {
    let mut edges = vec![a];
    if !(b > a) {
        return edges;
    }
    let ratio = T::lit(10f64.powf(1.0 / 16.0));
    let mut x = if a > T::zero() { a } else { b * T::lit(1e-9) };
    if a == T::zero() {
        edges.push(x);
    }
    while x < b {
        let next = (x * ratio).min(x + max_width).min(b);
        edges.push(next);
        x = next;
    }
    edges
}

/// Cumulative filtered noise
/// `sqrt(∫_{f_low}^{f} S(f′) X̂(2πf′)² df′)` with `X̂ = X/Δt`, where `Δt` is
/// the length of the window's first segment.
pub fn filtered_cumulative_noise<T: Real, S: SpectralDensity<T> + ?Sized>(
    spectrum: &S,
    window: &IntegrationWindow<T>,
    f_low: T,
    f: T,
) -> Result<T> {
    Ok(filtered_cumulative_curve(spectrum, window, f_low, &[f])?[0])
}

/// `filtered_cumulative_noise` on an ascending grid.
pub fn filtered_cumulative_curve<T: Real, S: SpectralDensity<T> + ?Sized>(
    spectrum: &S,
    window: &IntegrationWindow<T>,
    f_low: T,
    grid_hz: &[T],
) -> Result<Vec<T>> {
    if !(f_low >= T::zero()) {
        return Err(Error::invalid("f_low", "must be >= 0"));
    }
    check_ascending(f_low, grid_hz)?;
    let gain = window
        .segments
        .first()
        .map(|s| s.duration_s())
        .filter(|&d| d > T::zero())
        .ok_or_else(|| Error::invalid("window", "needs a non-empty first segment"))?;
    let extent = window
        .segments
        .iter()
        .fold(T::zero(), |m, s| m.max(s.end_s))
        .max(gain);
    // resolve the filter's oscillation period 1/extent in frequency
    let max_width = T::one() / (T::lit(4.0) * extent);
    let integrand = |fp: T| {
        let x = filter_transmission_numeric(window, T::TAU() * fp) / gain;
        spectrum.density(fp) * x * x
    };
    let mut acc = T::zero();
    let mut prev = f_low;
    let mut out = Vec::with_capacity(grid_hz.len());
    for &f in grid_hz {
        let edges = panels(prev, f, max_width);
        for w in edges.windows(2) {
            acc = acc + gauss_legendre(&integrand, w[0], w[1]);
        }
        prev = f;
        out.push(acc.max(T::zero()).sqrt());
    }
    Ok(out)
}
