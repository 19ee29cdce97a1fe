//! Scenario files, experiment runners, and the `nvmag` command line.
//!
//! A scenario is a TOML file whose physical keys carry unit suffixes
//! (`_s`, `_Hz`, `_T`, `_rad`). Runs are deterministic in the scenario and
//! seed: noise traces are synthesized up front, one sample per sequence,
//! and each readout pair draws from its own ChaCha stream, so the worker
//! count never changes the numbers.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    allan_deviation, log_time_grid, optimal_phase_time, optimized_projection_limit,
    projection_coefficient, projection_limit_eq2, sensitivity_eq1, std_vs_time, ScalingCurve,
    SensitivityInputs,
};
use crate::error::{Error, Result};
use crate::noise_filters::{
    filtered_cumulative_curve, synthesize_with_rng, FlickerComponent, NoiseChannel, PsdModel,
    SampledSpectrum, SignalScheme, SpectralDensity,
};
use crate::readout::{
    extract_signal, simulate_record, ReadoutConfig, ReadoutRecord, ReadoutSeries,
};
use crate::sequences::{
    analytic_echo_phase, hahn_echo, pulse_error_response, simulate_sequence, AcField,
    CoherenceDecay, ErrorPoint, ErrorScanConfig, PulseErrors, PulseSequence, SimulationOptions,
    SpinModelKind,
};
use crate::spin_model::HamiltonianParams;

const READOUT_SEED_OFFSET: u64 = 0x4000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    pub t_phi_s: f64,
    #[serde(rename = "rabi_Hz")]
    pub rabi_hz: f64,
    /// Final π/2 phase of the first (and every odd) sequence.
    pub final_phase_rad: f64,
    /// Final π/2 phase of the second sequence of each pair.
    pub second_final_phase_rad: f64,
    pub model: SpinModelKind,
    pub hyperfine_average: bool,
    pub substeps_per_period: usize,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            t_phi_s: 50e-6,
            rabi_hz: 5e6,
            final_phase_rad: std::f64::consts::FRAC_PI_2,
            second_final_phase_rad: -std::f64::consts::FRAC_PI_2,
            model: SpinModelKind::TwoLevel,
            hyperfine_average: true,
            substeps_per_period: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HamiltonianConfig {
    #[serde(rename = "zero_field_splitting_Hz")]
    pub zero_field_splitting_hz: f64,
    #[serde(rename = "gamma_e_Hz_per_T")]
    pub gamma_e_hz_per_t: f64,
    #[serde(rename = "gamma_n_Hz_per_T")]
    pub gamma_n_hz_per_t: f64,
    #[serde(rename = "hyperfine_Hz")]
    pub hyperfine_hz: f64,
    #[serde(rename = "b_z_T")]
    pub b_z_t: f64,
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        let p = HamiltonianParams::<f64>::default();
        HamiltonianConfig {
            zero_field_splitting_hz: p.zero_field_splitting_hz,
            gamma_e_hz_per_t: p.gamma_e_hz_per_t,
            gamma_n_hz_per_t: p.gamma_n_hz_per_t,
            hyperfine_hz: p.hyperfine_hz,
            b_z_t: p.b_z_t,
        }
    }
}

impl HamiltonianConfig {
    pub fn params(&self) -> HamiltonianParams<f64> {
        HamiltonianParams {
            zero_field_splitting_hz: self.zero_field_splitting_hz,
            gamma_e_hz_per_t: self.gamma_e_hz_per_t,
            gamma_n_hz_per_t: self.gamma_n_hz_per_t,
            hyperfine_hz: self.hyperfine_hz,
            b_z_t: self.b_z_t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// Coherence time; `inf` disables decay.
    pub t2_s: f64,
    pub exponent: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            t2_s: 100e-6,
            exponent: 1.0,
        }
    }
}

impl DecayConfig {
    pub fn decay(&self) -> CoherenceDecay<f64> {
        if self.t2_s.is_infinite() {
            CoherenceDecay::none()
        } else {
            CoherenceDecay {
                t2_s: Some(self.t2_s),
                exponent: self.exponent,
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcFieldConfig {
    #[serde(rename = "amplitude_T")]
    pub amplitude_t: f64,
    /// Defaults to `1/T_φ`.
    #[serde(rename = "frequency_Hz", skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    pub phase_rad: f64,
}

impl AcFieldConfig {
    pub fn field(&self, amplitude_t: f64, t_phi_s: f64) -> AcField<f64> {
        AcField {
            amplitude_t,
            frequency_hz: self.frequency_hz.unwrap_or(1.0 / t_phi_s),
            phase_rad: self.phase_rad,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlickerConfig {
    /// `c` in `S(f) = c/f^α`.
    pub coefficient: f64,
    pub exponent: f64,
}

/// One noise channel: either a parametric spectrum or a two-column file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelNoiseConfig {
    #[serde(rename = "white_per_Hz")]
    pub white_per_hz: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flicker: Vec<FlickerConfig>,
    /// Lower cutoff; defaults to `1/duration` of the run.
    #[serde(rename = "f_min_Hz", skip_serializing_if = "Option::is_none")]
    pub f_min_hz: Option<f64>,
    #[serde(rename = "f_max_Hz", skip_serializing_if = "Option::is_none")]
    pub f_max_hz: Option<f64>,
    /// Measured spectrum, relative to the scenario file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_file: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub laser_intensity: Option<ChannelNoiseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mw_amplitude: Option<ChannelNoiseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mw_frequency: Option<ChannelNoiseConfig>,
}

impl NoiseConfig {
    pub fn channel(&self, c: NoiseChannel) -> Option<&ChannelNoiseConfig> {
        match c {
            NoiseChannel::LaserIntensity => self.laser_intensity.as_ref(),
            NoiseChannel::MwAmplitude => self.mw_amplitude.as_ref(),
            NoiseChannel::MwFrequency => self.mw_frequency.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    pub n_centres: f64,
    pub total_time_s: f64,
    /// Per-evaluation deviation for the shot-noise formula, if known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast: Option<f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            n_centres: 1.4e11,
            total_time_s: 1.0,
            sigma1: None,
            contrast: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(rename = "amplitude_max_T")]
    pub amplitude_max_t: f64,
    pub points: usize,
    pub pairs_per_point: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            amplitude_max_t: 6e-7,
            points: 25,
            pairs_per_point: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorScalingConfig {
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    #[serde(rename = "frequency_min_Hz")]
    pub frequency_min_hz: f64,
    #[serde(rename = "frequency_max_Hz")]
    pub frequency_max_hz: f64,
    pub points_per_decade: usize,
}

impl Default for ErrorScalingConfig {
    fn default() -> Self {
        ErrorScalingConfig {
            amplitude_min: 1e-5,
            amplitude_max: 1e-1,
            frequency_min_hz: 10.0,
            frequency_max_hz: 1e5,
            points_per_decade: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub points_per_decade: usize,
    pub min_blocks: usize,
    /// Also write the full per-sequence series (large for long runs).
    pub write_series: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            points_per_decade: 5,
            min_blocks: 10,
            write_series: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    #[serde(rename = "f_min_Hz")]
    pub f_min_hz: f64,
    /// Upper end of the budget; defaults to `1/T_seq`.
    #[serde(rename = "f_max_Hz", skip_serializing_if = "Option::is_none")]
    pub f_max_hz: Option<f64>,
    pub points: usize,
    /// Shot-noise-only pairs used to measure σ₁.
    pub sigma1_pairs: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            f_min_hz: 1e-3,
            f_max_hz: None,
            points: 100,
            sigma1_pairs: 2000,
        }
    }
}

fn all_schemes() -> Vec<SignalScheme> {
    SignalScheme::ALL.to_vec()
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n_sequences: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<SignalScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sequence: SequenceConfig,
    #[serde(default)]
    pub hamiltonian: HamiltonianConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub readout: ReadoutConfig,
    #[serde(default)]
    pub ac_field: AcFieldConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub error_scaling: ErrorScalingConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    /// Directory that relative paths in the file resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "default".into(),
            n_sequences: 10_000,
            seed: default_seed(),
            schemes: all_schemes(),
            output_dir: None,
            sequence: SequenceConfig::default(),
            hamiltonian: HamiltonianConfig::default(),
            decay: DecayConfig::default(),
            readout: ReadoutConfig::default(),
            ac_field: AcFieldConfig::default(),
            noise: NoiseConfig::default(),
            sensitivity: SensitivityConfig::default(),
            sweep: SweepConfig::default(),
            error_scaling: ErrorScalingConfig::default(),
            scaling: ScalingConfig::default(),
            budget: BudgetConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl Scenario {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })?;
        s.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s = Self::parse(&text, path)?;
        s.validate().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("scenario", e.to_string()))
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        if self.n_sequences < 2 {
            return Err(Error::invalid("n_sequences", "must be >= 2"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "select at least one scheme"));
        }
        self.hamiltonian.params().validate()?;
        self.decay.decay().validate()?;
        self.readout.validate()?;
        self.sequences()?;
        if self.sequence.substeps_per_period == 0 {
            return Err(Error::invalid(
                "sequence.substeps_per_period",
                "must be >= 1",
            ));
        }
        if !self.ac_field.amplitude_t.is_finite() {
            return Err(Error::invalid("ac_field.amplitude_T", "must be finite"));
        }
        for c in NoiseChannel::ALL {
            if let Some(cfg) = self.noise.channel(c) {
                self.channel_spectrum(c, cfg, self.duration_s())?;
            }
        }
        let s = &self.sensitivity;
        if !(s.n_centres > 0.0 && s.total_time_s > 0.0) {
            return Err(Error::invalid(
                "sensitivity",
                "n_centres and total_time_s must be > 0",
            ));
        }
        if self.sweep.points < 2 || self.sweep.pairs_per_point == 0 {
            return Err(Error::invalid(
                "sweep",
                "need >= 2 points and >= 1 pair per point",
            ));
        }
        let e = &self.error_scaling;
        if !(e.amplitude_min > 0.0 && e.amplitude_min < e.amplitude_max)
            || !(e.frequency_min_hz > 0.0 && e.frequency_min_hz < e.frequency_max_hz)
            || e.points_per_decade == 0
        {
            return Err(Error::invalid(
                "error_scaling",
                "need 0 < min < max and points_per_decade >= 1",
            ));
        }
        if self.scaling.points_per_decade == 0 || self.scaling.min_blocks < 2 {
            return Err(Error::invalid(
                "scaling",
                "need points_per_decade >= 1 and min_blocks >= 2",
            ));
        }
        let b = &self.budget;
        if !(b.f_min_hz > 0.0) || b.points < 2 || b.sigma1_pairs < 2 {
            return Err(Error::invalid(
                "budget",
                "need f_min_Hz > 0, points >= 2, sigma1_pairs >= 2",
            ));
        }
        if !(self.budget_f_max() > b.f_min_hz) {
            return Err(Error::invalid("budget.f_max_Hz", "must exceed f_min_Hz"));
        }
        Ok(())
    }

    pub fn t_seq_s(&self) -> f64 {
        self.readout.t_seq_s
    }

    pub fn duration_s(&self) -> f64 {
        self.n_sequences as f64 * self.t_seq_s()
    }

    fn budget_f_max(&self) -> f64 {
        self.budget.f_max_hz.unwrap_or(1.0 / self.t_seq_s())
    }

    /// The two sequences of a referencing pair, each followed by readout.
    pub fn sequences(&self) -> Result<[PulseSequence<f64>; 2]> {
        let s = &self.sequence;
        let build = |phase| {
            hahn_echo(s.t_phi_s, s.rabi_hz, phase)?
                .with_readout(self.readout.laser_s, self.readout.t_seq_s)
        };
        Ok([build(s.final_phase_rad)?, build(s.second_final_phase_rad)?])
    }

    pub fn simulation_options(&self) -> SimulationOptions<f64> {
        SimulationOptions {
            model: self.sequence.model,
            substeps_per_period: self.sequence.substeps_per_period,
            hyperfine_average: self.sequence.hyperfine_average,
            static_offset_t: 0.0,
        }
    }

    fn channel_spectrum(
        &self,
        channel: NoiseChannel,
        cfg: &ChannelNoiseConfig,
        duration_s: f64,
    ) -> Result<ChannelSpectrum> {
        if let Some(file) = &cfg.spectrum_file {
            let path = self.base_dir.join(file);
            return SampledSpectrum::read(&path).map(ChannelSpectrum::Sampled);
        }
        let model = PsdModel {
            channel,
            white_level: cfg.white_per_hz,
            flicker: cfg
                .flicker
                .iter()
                .map(|f| FlickerComponent {
                    amplitude: f.coefficient,
                    exponent: f.exponent,
                })
                .collect(),
            f_min_hz: cfg.f_min_hz.unwrap_or(1.0 / duration_s),
            f_max_hz: cfg.f_max_hz.unwrap_or(f64::INFINITY),
        };
        model
            .validate()
            .map_err(|e| Error::invalid("noise", format!("{}: {e}", channel.name())))?;
        Ok(ChannelSpectrum::Model(model))
    }
}

#[derive(Clone, Debug)]
enum ChannelSpectrum {
    Model(PsdModel<f64>),
    Sampled(SampledSpectrum<f64>),
}

impl SpectralDensity<f64> for ChannelSpectrum {
    fn density(&self, f_hz: f64) -> f64 {
        match self {
            ChannelSpectrum::Model(m) => m.density(f_hz),
            ChannelSpectrum::Sampled(s) => s.density(f_hz),
        }
    }

    fn band_power(&self, f_lo: f64, f_hi: f64) -> f64 {
        match self {
            ChannelSpectrum::Model(m) => m.band_power(f_lo, f_hi),
            ChannelSpectrum::Sampled(s) => s.band_power(f_lo, f_hi),
        }
    }
}

/// Per-sequence noise samples for every configured channel.
#[derive(Clone, Debug, Default)]
struct Traces {
    laser: Option<Vec<f64>>,
    amplitude: Option<Vec<f64>>,
    frequency: Option<Vec<f64>>,
}

impl Traces {
    fn synthesize(s: &Scenario, n: usize) -> Result<Self> {
        let dt = s.t_seq_s();
        let duration = n as f64 * dt;
        let one = |c: NoiseChannel| -> Result<Option<Vec<f64>>> {
            let Some(cfg) = s.noise.channel(c) else {
                return Ok(None);
            };
            let spec = s.channel_spectrum(c, cfg, duration)?;
            if let ChannelSpectrum::Model(m) = &spec {
                if m.is_zero() {
                    return Ok(None);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(c.seed_offset()));
            let t = synthesize_with_rng(&spec, c, duration, dt, &mut rng)?;
            Ok(Some(t.samples))
        };
        Ok(Traces {
            laser: one(NoiseChannel::LaserIntensity)?,
            amplitude: one(NoiseChannel::MwAmplitude)?,
            frequency: one(NoiseChannel::MwFrequency)?,
        })
    }

    fn mw_quiet(&self) -> bool {
        self.amplitude.is_none() && self.frequency.is_none()
    }

    fn at(&self, i: usize) -> (f64, PulseErrors<f64>) {
        let get = |v: &Option<Vec<f64>>| v.as_ref().and_then(|v| v.get(i).copied()).unwrap_or(0.0);
        (
            get(&self.laser),
            PulseErrors {
                amplitude: get(&self.amplitude),
                frequency_hz: get(&self.frequency),
            },
        )
    }
}

/// Signals from one referencing pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSignals {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: f64,
    pub d: f64,
}

impl PairSignals {
    pub fn scheme(&self, s: SignalScheme) -> f64 {
        match s {
            SignalScheme::A => self.a[0],
            SignalScheme::B => self.b[0],
            SignalScheme::C => self.c,
            SignalScheme::D => self.d,
        }
    }
}

struct RunContext<'a> {
    scenario: &'a Scenario,
    sequences: [PulseSequence<f64>; 2],
    params: HamiltonianParams<f64>,
    decay: CoherenceDecay<f64>,
    options: SimulationOptions<f64>,
    traces: Traces,
}

impl<'a> RunContext<'a> {
    fn new(scenario: &'a Scenario, traces: Traces) -> Result<Self> {
        scenario.validate()?;
        Ok(RunContext {
            scenario,
            sequences: scenario.sequences()?,
            params: scenario.hamiltonian.params(),
            decay: scenario.decay.decay(),
            options: scenario.simulation_options(),
            traces,
        })
    }

    fn population(
        &self,
        which: usize,
        field: &AcField<f64>,
        errors: PulseErrors<f64>,
    ) -> Result<f64> {
        let p = simulate_sequence(
            &self.sequences[which],
            &self.params,
            errors,
            field,
            &self.decay,
            &self.options,
        )?;
        Ok(p.clamp(0.0, 1.0))
    }

    /// Simulates `n_pairs` pairs starting at sequence 0; pair `j` reads
    /// noise samples `2j, 2j+1` and readout stream `stream_base + j`.
    fn simulate_pairs(
        &self,
        field: &AcField<f64>,
        n_pairs: usize,
        stream_base: u64,
    ) -> Result<Vec<PairSignals>> {
        let fixed = if self.traces.mw_quiet() {
            Some([
                self.population(0, field, PulseErrors::default())?,
                self.population(1, field, PulseErrors::default())?,
            ])
        } else {
            None
        };
        let cfg = &self.scenario.readout;
        let seed = self.scenario.seed.wrapping_add(READOUT_SEED_OFFSET);
        (0..n_pairs)
            .into_par_iter()
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream_base.wrapping_add(j as u64));
                let mut recs: Vec<ReadoutRecord> = Vec::with_capacity(2);
                for k in 0..2 {
                    let i = 2 * j + k;
                    let (eps, errors) = self.traces.at(i);
                    let p = match fixed {
                        Some(p) => p[k],
                        None => self.population(k, field, errors)?,
                    };
                    recs.push(simulate_record(p, eps, cfg, i as u64, &mut rng)?);
                }
                let one = |k: usize, s| extract_signal(&recs[k..k + 1], s, cfg);
                Ok(PairSignals {
                    a: [one(0, SignalScheme::A)?, one(1, SignalScheme::A)?],
                    b: [one(0, SignalScheme::B)?, one(1, SignalScheme::B)?],
                    c: extract_signal(&recs, SignalScheme::C, cfg)?,
                    d: extract_signal(&recs, SignalScheme::D, cfg)?,
                })
            })
            .collect()
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

fn series_from_pairs(pairs: &[PairSignals], scheme: SignalScheme, t_seq_s: f64) -> ReadoutSeries {
    let (values, spacing_s) = match scheme {
        SignalScheme::A => (pairs.iter().flat_map(|p| p.a).collect(), t_seq_s),
        SignalScheme::B => (pairs.iter().flat_map(|p| p.b).collect(), t_seq_s),
        SignalScheme::C => (pairs.iter().map(|p| p.c).collect(), 2.0 * t_seq_s),
        SignalScheme::D => (pairs.iter().map(|p| p.d).collect(), 2.0 * t_seq_s),
    };
    ReadoutSeries {
        scheme,
        spacing_s,
        values,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeFit {
    pub scheme: SignalScheme,
    /// Signal at zero accumulated phase.
    pub offset: f64,
    /// `K` in `S = offset + K·sin φ`.
    pub amplitude: f64,
    /// Modulation amplitude in the linearized sensitivity formula,
    /// `A = 2K/π`, so that `dS/dB = γ A T_φ` at the working point.
    pub contrast: f64,
    pub residual_rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub amplitudes_t: Vec<f64>,
    pub phases_rad: Vec<f64>,
    /// Mean signal per amplitude, one column per scheme.
    pub means: Vec<(SignalScheme, Vec<f64>)>,
    pub fits: Vec<SchemeFit>,
}

/// Least squares `y = a + k·x`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let k = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - k * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(u, v)| (v - a - k * u).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    (a, k, rms)
}

/// Mean signal versus AC amplitude, fitted to `offset + K·sin φ(B)`.
pub fn run_ac_sweep(scenario: &Scenario, amplitudes_t: &[f64]) -> Result<SweepResult> {
    if amplitudes_t.len() < 2 {
        return Err(Error::invalid("amplitudes_t", "need at least 2 amplitudes"));
    }
    let pairs = scenario.sweep.pairs_per_point;
    let traces = Traces::synthesize(scenario, 2 * pairs)?;
    let ctx = RunContext::new(scenario, traces)?;
    let t_phi = scenario.sequence.t_phi_s;
    let gamma = scenario.hamiltonian.gamma_e_hz_per_t;
    let mut means: Vec<(SignalScheme, Vec<f64>)> =
        scenario.schemes.iter().map(|&s| (s, Vec::new())).collect();
    for (k, &b) in amplitudes_t.iter().enumerate() {
        let field = scenario.ac_field.field(b, t_phi);
        let out = ctx.simulate_pairs(&field, pairs, (k as u64) << 32)?;
        for (s, col) in means.iter_mut() {
            let v: Vec<f64> = out.iter().map(|p| p.scheme(*s)).collect();
            col.push(mean(&v));
        }
    }
    let phases_rad: Vec<f64> = amplitudes_t
        .iter()
        .map(|&b| analytic_echo_phase(b, t_phi, gamma))
        .collect();
    let sin_phi: Vec<f64> = phases_rad.iter().map(|p| p.sin()).collect();
    let fits = means
        .iter()
        .map(|(s, col)| {
            let (offset, amplitude, residual_rms) = fit_line(&sin_phi, col);
            SchemeFit {
                scheme: *s,
                offset,
                amplitude,
                contrast: 2.0 * amplitude / std::f64::consts::PI,
                residual_rms,
            }
        })
        .collect();
    Ok(SweepResult {
        amplitudes_t: amplitudes_t.to_vec(),
        phases_rad,
        means,
        fits,
    })
}

/// Amplitude grid of the configured sweep, `0..=amplitude_max_T`.
pub fn sweep_amplitudes(scenario: &Scenario) -> Vec<f64> {
    let n = scenario.sweep.points;
    (0..n)
        .map(|i| scenario.sweep.amplitude_max_t * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub series: Vec<ReadoutSeries>,
    pub allan: Vec<ScalingCurve<f64>>,
    pub std: Vec<ScalingCurve<f64>>,
}

impl ScalingResult {
    pub fn std_curve(&self, s: SignalScheme) -> Option<&ScalingCurve<f64>> {
        self.series
            .iter()
            .position(|x| x.scheme == s)
            .map(|i| &self.std[i])
    }

    pub fn allan_curve(&self, s: SignalScheme) -> Option<&ScalingCurve<f64>> {
        self.series
            .iter()
            .position(|x| x.scheme == s)
            .map(|i| &self.allan[i])
    }
}

/// `n_sequences` consecutive evaluations at the working point with the AC
/// field off; per-scheme series and their Allan and std scaling curves.
pub fn run_scaling_experiment(scenario: &Scenario) -> Result<ScalingResult> {
    let n_pairs = scenario.n_sequences / 2;
    let traces = Traces::synthesize(scenario, 2 * n_pairs)?;
    let ctx = RunContext::new(scenario, traces)?;
    let pairs = ctx.simulate_pairs(&AcField::off(), n_pairs, 0)?;
    let cfg = &scenario.scaling;
    let mut out = ScalingResult {
        series: Vec::new(),
        allan: Vec::new(),
        std: Vec::new(),
    };
    for &s in &scenario.schemes {
        let series = series_from_pairs(&pairs, s, scenario.t_seq_s());
        let grid = log_time_grid(
            series.len(),
            series.spacing_s,
            cfg.min_blocks,
            cfg.points_per_decade,
        );
        out.allan
            .push(allan_deviation(&series.values, series.spacing_s, &grid)?);
        out.std
            .push(std_vs_time(&series.values, series.spacing_s, &grid)?);
        out.series.push(series);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorScalingResult {
    pub amplitude: Vec<ErrorPoint<f64>>,
    pub frequency: Vec<ErrorPoint<f64>>,
}

pub fn log_grid(min: f64, max: f64, per_decade: usize) -> Vec<f64> {
    let decades = (max / min).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=n)
        .map(|i| min * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}

/// Δz against Δg at Δf = 0 and against Δf at Δg = 0.
pub fn run_error_scaling(
    scenario: &Scenario,
    g_grid: &[f64],
    f_grid: &[f64],
) -> Result<ErrorScalingResult> {
    scenario.validate()?;
    let cfg = ErrorScanConfig {
        t_phi_s: scenario.sequence.t_phi_s,
        rabi_hz: scenario.sequence.rabi_hz,
        params: scenario.hamiltonian.params(),
        decay: scenario.decay.decay(),
        options: scenario.simulation_options(),
    };
    Ok(ErrorScalingResult {
        amplitude: pulse_error_response(g_grid, &[0.0], &cfg)?,
        frequency: pulse_error_response(&[0.0], f_grid, &cfg)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelBudget {
    pub channel: NoiseChannel,
    /// `sqrt(∫_f^{f_max} S)` in channel units.
    pub unfiltered: Vec<f64>,
    /// Scheme-D filtered budget in signal units, integrated from `f_max`
    /// down to `f`.
    pub filtered_d: Vec<f64>,
    /// `|∂S_B/∂x|` of one sequence.
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetResult {
    pub freqs_hz: Vec<f64>,
    pub f_max_hz: f64,
    pub channels: Vec<ChannelBudget>,
    /// Shot-noise-only per-evaluation deviations.
    pub sigma1_a: f64,
    pub sigma1_d: f64,
}

/// Per-sequence signal gains `|∂S_B/∂x|` for each channel at the working
/// point, by finite differences through the noiseless pipeline.
fn channel_gains(ctx: &RunContext) -> Result<[(NoiseChannel, f64); 3]> {
    let cfg = ReadoutConfig {
        shot_noise: false,
        ..ctx.scenario.readout.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sb = |p: f64, eps: f64, rng: &mut ChaCha8Rng| -> Result<f64> {
        let r = simulate_record(p, eps, &cfg, 0, rng)?;
        extract_signal(&[r], SignalScheme::B, &cfg)
    };
    let off = AcField::off();
    let p0 = ctx.population(0, &off, PulseErrors::default())?;
    let laser = (sb(p0, 1e-3, &mut rng)? - sb(p0, 0.0, &mut rng)?).abs() / 1e-3;
    let per_p = sb(1.0, 0.0, &mut rng)? - sb(0.0, 0.0, &mut rng)?;
    let slope = |e: PulseErrors<f64>, neg: PulseErrors<f64>, h: f64| -> Result<f64> {
        let up = (ctx.population(0, &off, e)? - p0).abs();
        let down = (ctx.population(0, &off, neg)? - p0).abs();
        Ok(0.5 * (up + down) / h)
    };
    let hg = 1e-4;
    let amp = slope(
        PulseErrors {
            amplitude: hg,
            frequency_hz: 0.0,
        },
        PulseErrors {
            amplitude: -hg,
            frequency_hz: 0.0,
        },
        hg,
    )?;
    let hf = 100.0;
    let freq = slope(
        PulseErrors {
            amplitude: 0.0,
            frequency_hz: hf,
        },
        PulseErrors {
            amplitude: 0.0,
            frequency_hz: -hf,
        },
        hf,
    )?;
    Ok([
        (NoiseChannel::LaserIntensity, laser),
        (NoiseChannel::MwAmplitude, per_p.abs() * amp),
        (NoiseChannel::MwFrequency, per_p.abs() * freq),
    ])
}

/// Cumulative noise from `f_max` (default `1/T_seq`) down to each grid
/// frequency: raw per channel, and scheme-D filtered in signal units with
/// `X_D` for the laser and `X_C` for the microwave channels.
pub fn run_noise_budget(scenario: &Scenario) -> Result<BudgetResult> {
    let ctx = RunContext::new(scenario, Traces::default())?;
    let f_max = scenario.budget_f_max();
    let n = scenario.budget.points;
    let (lo, hi) = (scenario.budget.f_min_hz.ln(), f_max.ln());
    let mut freqs_hz: Vec<f64> = (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect();
    freqs_hz[n - 1] = f_max;
    let gains = channel_gains(&ctx)?;
    let duration = scenario.duration_s();
    let mut channels = Vec::new();
    for (c, gain) in gains {
        let spec = match scenario.noise.channel(c) {
            Some(cfg) => scenario.channel_spectrum(c, cfg, duration)?,
            None => ChannelSpectrum::Model(PsdModel::zero(c)),
        };
        let unfiltered = freqs_hz
            .iter()
            .map(|&f| spec.band_power(f, f_max).max(0.0).sqrt())
            .collect();
        let scheme = match c {
            NoiseChannel::LaserIntensity => SignalScheme::D,
            _ => SignalScheme::C,
        };
        let window = scenario.readout.window(scheme)?;
        let up = filtered_cumulative_curve(&spec, &window, freqs_hz[0], &freqs_hz)?;
        let total = up[up.len() - 1];
        let filtered_d = up
            .iter()
            .map(|&v| gain * (total * total - v * v).max(0.0).sqrt())
            .collect();
        channels.push(ChannelBudget {
            channel: c,
            unfiltered,
            filtered_d,
            gain,
        });
    }
    let quiet = RunContext::new(scenario, Traces::default())?;
    let pairs = quiet.simulate_pairs(&AcField::off(), scenario.budget.sigma1_pairs, 0)?;
    let a: Vec<f64> = pairs.iter().flat_map(|p| p.a).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.d).collect();
    Ok(BudgetResult {
        freqs_hz,
        f_max_hz: f_max,
        channels,
        sigma1_a: std_dev(&a),
        sigma1_d: std_dev(&d),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferencingReport {
    /// `S_A` without the difference detector.
    pub sigma_a_bare: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_d: f64,
}

impl ReferencingReport {
    /// `σ(S_D)/σ(S_A)` at equal total measurement time.
    pub fn per_unit_time_ratio(&self) -> f64 {
        self.sigma_d * 2f64.sqrt() / self.sigma_a_bare
    }
}

/// Shot-noise-only deviations along the referencing chain: detector,
/// window pair, sequence pair.
pub fn referencing_penalty(scenario: &Scenario, n_sequences: usize) -> Result<ReferencingReport> {
    let mut quiet = scenario.clone();
    quiet.noise = NoiseConfig::default();
    quiet.readout.shot_noise = true;
    let n_pairs = n_sequences / 2;
    let mut bare = quiet.clone();
    bare.readout.difference_detector = false;
    let with_det =
        RunContext::new(&quiet, Traces::default())?.simulate_pairs(&AcField::off(), n_pairs, 0)?;
    let without = RunContext::new(&bare, Traces::default())?.simulate_pairs(
        &AcField::off(),
        n_pairs,
        1 << 40,
    )?;
    let col = |v: &[PairSignals], f: fn(&PairSignals) -> Vec<f64>| -> Vec<f64> {
        v.iter().flat_map(f).collect()
    };
    Ok(ReferencingReport {
        sigma_a_bare: std_dev(&col(&without, |p| p.a.to_vec())),
        sigma_a: std_dev(&col(&with_det, |p| p.a.to_vec())),
        sigma_b: std_dev(&col(&with_det, |p| p.b.to_vec())),
        sigma_d: std_dev(&col(&with_det, |p| vec![p.d])),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityReport {
    /// Spin-projection limit at the scenario timings.
    pub b_qpn_t: f64,
    pub projection_coefficient: f64,
    pub optimal_t_phi_s: Option<f64>,
    /// Projection limit at `T_φ = T_seq = T₂/2`.
    pub b_qpn_optimized_t: Option<f64>,
    /// Shot-noise formula, when σ₁ and the contrast are configured.
    pub b_min_t: Option<f64>,
}

pub fn run_sensitivity(scenario: &Scenario) -> Result<SensitivityReport> {
    scenario.validate()?;
    let s = &scenario.sensitivity;
    let gamma = scenario.hamiltonian.gamma_e_hz_per_t;
    let decay = scenario.decay.decay();
    let inputs = SensitivityInputs {
        sigma1: s.sigma1.unwrap_or(0.0),
        contrast: s.contrast.unwrap_or(1.0),
        t_phi_s: scenario.sequence.t_phi_s,
        t_seq_s: scenario.t_seq_s(),
        total_time_s: s.total_time_s,
        n_centres: s.n_centres,
        gamma_e_hz_per_t: gamma,
        decay,
    };
    let b_min_t = match (s.sigma1, s.contrast) {
        (Some(_), Some(_)) => Some(sensitivity_eq1(&inputs)?),
        _ => None,
    };
    let optimal_t_phi_s = decay
        .t2_s
        .map(|t2| optimal_phase_time(t2, decay.exponent))
        .transpose()?;
    let b_qpn_optimized_t = match (decay.t2_s, decay.exponent == 1.0) {
        (Some(t2), true) => Some(optimized_projection_limit(
            s.n_centres,
            s.total_time_s,
            t2,
            gamma,
        )),
        _ => None,
    };
    Ok(SensitivityReport {
        b_qpn_t: projection_limit_eq2(&inputs)?,
        projection_coefficient: projection_coefficient(gamma),
        optimal_t_phi_s,
        b_qpn_optimized_t,
        b_min_t,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub files: Vec<FileDigest>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct OutputDir {
    dir: PathBuf,
    files: Vec<FileDigest>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(FileDigest {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }
}

fn table(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn curve_table(c: &ScalingCurve<f64>, x_name: &str) -> String {
    table(
        &format!("{x_name},deviation"),
        c.points().map(|(t, d)| vec![t, d]),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Sweep,
    Scaling,
    ErrorScaling,
    Budget,
    Sensitivity,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::Scaling => "scaling",
            Experiment::ErrorScaling => "error-scaling",
            Experiment::Budget => "budget",
            Experiment::Sensitivity => "sensitivity",
        }
    }
}

/// Runs one experiment, writes its tables and the manifest into `out_dir`,
/// and returns the manifest together with a short human-readable summary.
pub fn run_experiment(
    exp: Experiment,
    scenario: &Scenario,
    out_dir: &Path,
) -> Result<(RunManifest, String)> {
    let started = unix_now();
    let mut out = OutputDir::create(out_dir)?;
    let mut summary = String::new();
    match exp {
        Experiment::Sweep => {
            let r = run_ac_sweep(scenario, &sweep_amplitudes(scenario))?;
            let header = std::iter::once("B_ac_T,phase_rad".to_string())
                .chain(r.means.iter().map(|(s, _)| format!("S_{s}")))
                .collect::<Vec<_>>()
                .join(",");
            let rows = (0..r.amplitudes_t.len()).map(|i| {
                let mut row = vec![r.amplitudes_t[i], r.phases_rad[i]];
                row.extend(r.means.iter().map(|(_, c)| c[i]));
                row
            });
            out.write("sweep.csv", &table(&header, rows))?;
            let mut fit = String::from("scheme,offset,amplitude,contrast,residual_rms\n");
            for f in &r.fits {
                let _ = writeln!(
                    fit,
                    "{},{:e},{:e},{:e},{:e}",
                    f.scheme, f.offset, f.amplitude, f.contrast, f.residual_rms
                );
                let _ = writeln!(
                    summary,
                    "S_{}: modulation amplitude {:.4e}",
                    f.scheme, f.amplitude
                );
            }
            out.write("sweep_fit.csv", &fit)?;
        }
        Experiment::Scaling => {
            let r = run_scaling_experiment(scenario)?;
            for (i, series) in r.series.iter().enumerate() {
                let s = series.scheme;
                if scenario.scaling.write_series {
                    out.write(&format!("series_{s}.csv"), &series.to_csv())?;
                }
                out.write(
                    &format!("allan_{s}.csv"),
                    &curve_table(&r.allan[i], "tau_s"),
                )?;
                out.write(&format!("std_{s}.csv"), &curve_table(&r.std[i], "t_s"))?;
                let _ = writeln!(
                    summary,
                    "S_{s}: {} values, spacing {:e} s",
                    series.len(),
                    series.spacing_s
                );
            }
        }
        Experiment::ErrorScaling => {
            let e = &scenario.error_scaling;
            let g = log_grid(e.amplitude_min, e.amplitude_max, e.points_per_decade);
            let f = log_grid(e.frequency_min_hz, e.frequency_max_hz, e.points_per_decade);
            let r = run_error_scaling(scenario, &g, &f)?;
            out.write(
                "error_scaling_amplitude.csv",
                &table(
                    "delta_g,delta_z",
                    r.amplitude
                        .iter()
                        .map(|p| vec![p.amplitude_error, p.delta_z]),
                ),
            )?;
            out.write(
                "error_scaling_frequency.csv",
                &table(
                    "delta_f_Hz,delta_z",
                    r.frequency
                        .iter()
                        .map(|p| vec![p.frequency_error_hz, p.delta_z]),
                ),
            )?;
            let _ = writeln!(
                summary,
                "{} amplitude and {} frequency points",
                g.len(),
                f.len()
            );
        }
        Experiment::Budget => {
            let r = run_noise_budget(scenario)?;
            for c in &r.channels {
                let name = c.channel.name();
                out.write(
                    &format!("budget_unfiltered_{name}.csv"),
                    &table(
                        "f_Hz,cumulative_value",
                        r.freqs_hz
                            .iter()
                            .zip(&c.unfiltered)
                            .map(|(f, v)| vec![*f, *v]),
                    ),
                )?;
                out.write(
                    &format!("budget_filtered_D_{name}.csv"),
                    &table(
                        "f_Hz,cumulative_value",
                        r.freqs_hz
                            .iter()
                            .zip(&c.filtered_d)
                            .map(|(f, v)| vec![*f, *v]),
                    ),
                )?;
            }
            let mut refs = String::from("quantity,value\n");
            let _ = writeln!(refs, "sigma1_A,{:e}", r.sigma1_a);
            let _ = writeln!(refs, "sigma1_D,{:e}", r.sigma1_d);
            for c in &r.channels {
                let _ = writeln!(refs, "gain_{},{:e}", c.channel.name(), c.gain);
            }
            out.write("budget_reference.csv", &refs)?;
            let _ = writeln!(
                summary,
                "sigma1(S_A) = {:.4e}, sigma1(S_D) = {:.4e}",
                r.sigma1_a, r.sigma1_d
            );
        }
        Experiment::Sensitivity => {
            let r = run_sensitivity(scenario)?;
            let mut t = String::from("quantity,value,unit\n");
            let _ = writeln!(t, "B_QPN,{:e},T/sqrt(Hz)", r.b_qpn_t);
            let _ = writeln!(
                t,
                "projection_coefficient,{:e},T*sqrt(s)",
                r.projection_coefficient
            );
            let _ = writeln!(
                summary,
                "B_QPN = {:.4e} T/sqrt(Hz) ({:.3} fT/sqrt(Hz))",
                r.b_qpn_t,
                r.b_qpn_t * 1e15
            );
            let _ = writeln!(
                summary,
                "sqrt(2e)/gamma = {:.4e} T*sqrt(s)",
                r.projection_coefficient
            );
            if let Some(t_opt) = r.optimal_t_phi_s {
                let _ = writeln!(t, "optimal_t_phi,{t_opt:e},s");
                let _ = writeln!(summary, "optimal T_phi = {t_opt:.4e} s");
            }
            if let Some(b) = r.b_qpn_optimized_t {
                let _ = writeln!(t, "B_QPN_optimized,{b:e},T/sqrt(Hz)");
                let _ = writeln!(summary, "B_QPN at T_phi = T_seq = T2/2: {b:.4e} T/sqrt(Hz)");
            }
            if let Some(b) = r.b_min_t {
                let _ = writeln!(t, "B_min,{b:e},T/sqrt(Hz)");
                let _ = writeln!(summary, "B_min = {b:.4e} T/sqrt(Hz)");
            }
            out.write("sensitivity.csv", &t)?;
        }
    }
    let manifest = RunManifest {
        command: exp.name().to_string(),
        scenario: scenario.name.clone(),
        scenario_sha256: scenario.digest()?,
        seed: scenario.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        files: out.files.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::invalid("manifest", e.to_string()))?;
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok((manifest, summary))
}

#[derive(Parser, Debug)]
#[command(
    name = "nvmag",
    version,
    about = "NV-ensemble pulsed magnetometry experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean signal versus AC field amplitude.
    Sweep(RunArgs),
    /// Allan and std scaling of each signal at the working point.
    Scaling(RunArgs),
    /// Population error versus pulse amplitude and frequency errors.
    ErrorScaling(RunArgs),
    /// Cumulative raw and filtered noise budgets.
    Budget(RunArgs),
    /// Closed-form sensitivity limits.
    Sensitivity(RunArgs),
    /// Check a scenario file without running anything.
    Validate(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

/// Command-line entry point. Returns the process exit code: 0 on success,
/// 1 for usage or configuration errors, 2 for failures while running.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (exp, args) = match cli.command {
        Command::Sweep(a) => (Some(Experiment::Sweep), a),
        Command::Scaling(a) => (Some(Experiment::Scaling), a),
        Command::ErrorScaling(a) => (Some(Experiment::ErrorScaling), a),
        Command::Budget(a) => (Some(Experiment::Budget), a),
        Command::Sensitivity(a) => (Some(Experiment::Sensitivity), a),
        Command::Validate(a) => (None, a),
    };
    let mut scenario = match Scenario::load(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let Some(exp) = exp else {
        println!(
            "scenario '{}' in {} is valid",
            scenario.name,
            args.config.display()
        );
        return 0;
    };
    let out_dir = args
        .out
        .or_else(|| {
            scenario
                .output_dir
                .as_ref()
                .map(|d| scenario.base_dir.join(d))
        })
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return 1;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| run_experiment(exp, &scenario, &out_dir)) {
        Ok((manifest, summary)) => {
            print!("{summary}");
            println!(
                "wrote {} file(s) and {} to {}",
                manifest.files.len(),
                MANIFEST_FILE,
                out_dir.display()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
