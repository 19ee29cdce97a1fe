//! Pulsed measurement sequences and their simulation.
//!
//! The AC magnetometry protocol is a Hahn echo `(π/2)_x - T_φ/2 - (π)_x -
//! T_φ/2 - (π/2)_ϕ` phase-locked to a sine of period `T_φ`, followed by a
//! laser pulse for readout and re-polarization.
//!
//! Timing convention for the AC field: the field clock runs during free
//! evolution only and starts at the end of the first π/2 pulse, so the
//! zero crossing of a phase-locked sine falls exactly on the π pulse. The
//! field is not applied during pulses.

use nalgebra::{Complex, RealField};
use num_traits::Float;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_model::{
    self, apply2, build_operators, two_level_hamiltonian, two_level_propagator, DriveParams,
    HamiltonianParams, QuantumState, SPIN_PROJECTIONS,
};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaserRole {
    /// Spin readout at the start of the pulse, re-polarization for the rest.
    ReadoutAndInit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceElement<T> {
    Pulse {
        duration_s: T,
        phase_rad: T,
        /// Nominal rotation angle; together with the duration it fixes the
        /// nominal Rabi frequency `rotation / (2π duration)`.
        rotation_rad: T,
        amplitude_scale: T,
    },
    Delay {
        duration_s: T,
    },
    Laser {
        duration_s: T,
        role: LaserRole,
    },
}

impl<T: Real> SequenceElement<T> {
    pub fn duration_s(&self) -> T {
        match *self {
            SequenceElement::Pulse { duration_s, .. }
            | SequenceElement::Delay { duration_s }
            | SequenceElement::Laser { duration_s, .. } => duration_s,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.duration_s();
        if !(d > T::zero() && d.is_finite()) {
            return Err(Error::invalid("duration_s", "must be finite and > 0"));
        }
        if let SequenceElement::Pulse {
            rotation_rad,
            amplitude_scale,
            phase_rad,
            ..
        } = *self
        {
            if !(rotation_rad > T::zero() && rotation_rad <= T::TAU()) {
                return Err(Error::invalid("rotation_rad", "must lie in (0, 2π]"));
            }
            if !(amplitude_scale > T::zero() && amplitude_scale.is_finite()) {
                return Err(Error::invalid("amplitude_scale", "must be finite and > 0"));
            }
            if !phase_rad.is_finite() {
                return Err(Error::invalid("phase_rad", "must be finite"));
            }
        }
        Ok(())
    }
}

/// One field evaluation: microwave preparation, free evolution and readout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence<T> {
    pub elements: Vec<SequenceElement<T>>,
    /// Total free phase-accumulation time.
    pub t_phi_s: T,
    /// Total length of the sequence.
    pub t_seq_s: T,
}

impl<T: Real> PulseSequence<T> {
    fn sum_by(&self, pick: impl Fn(&SequenceElement<T>) -> bool) -> T {
        self.elements
            .iter()
            .filter(|e| pick(e))
            .fold(T::zero(), |acc, e| acc + e.duration_s())
    }

    pub fn total_pulse_time_s(&self) -> T {
        self.sum_by(|e| matches!(e, SequenceElement::Pulse { .. }))
    }

    pub fn total_laser_time_s(&self) -> T {
        self.sum_by(|e| matches!(e, SequenceElement::Laser { .. }))
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.elements {
            e.validate()?;
        }
        let required = self.t_phi_s + self.total_pulse_time_s() + self.total_laser_time_s();
        if self.t_seq_s < required * (T::one() - T::lit(1e-12)) {
            return Err(Error::invalid(
                "t_seq_s",
                format!(
                    "{} s is shorter than the {} s of content",
                    self.t_seq_s, required
                ),
            ));
        }
        Ok(())
    }

    /// Appends a readout laser pulse and pads with a delay to `t_seq_s`.
    pub fn with_readout(mut self, laser_s: T, t_seq_s: T) -> Result<Self> {
        if !(laser_s > T::zero()) {
            return Err(Error::invalid("laser_s", "must be > 0"));
        }
        let used = self
            .elements
            .iter()
            .fold(T::zero(), |a, e| a + e.duration_s())
            + laser_s;
        let padding = t_seq_s - used;
        if padding < -(t_seq_s * T::lit(1e-12)) {
            return Err(Error::invalid(
                "t_seq_s",
                format!("{t_seq_s} s cannot hold {used} s of sequence content"),
            ));
        }
        self.elements.push(SequenceElement::Laser {
            duration_s: laser_s,
            role: LaserRole::ReadoutAndInit,
        });
        if padding > T::zero() {
            self.elements.push(SequenceElement::Delay {
                duration_s: padding,
            });
        }
        self.t_seq_s = t_seq_s;
        self.validate()?;
        Ok(self)
    }

    /// Final microwave pulse phase, if any.
    pub fn final_phase_rad(&self) -> Option<T> {
        self.elements.iter().rev().find_map(|e| match *e {
            SequenceElement::Pulse { phase_rad, .. } => Some(phase_rad),
            _ => None,
        })
    }
}

/// Hahn echo `(π/2)_x - T_φ/2 - (π)_x - T_φ/2 - (π/2)_{final_phase}`.
pub fn hahn_echo<T: Real>(t_phi_s: T, rabi_hz: T, final_phase_rad: T) -> Result<PulseSequence<T>> {
    if !(t_phi_s > T::zero() && t_phi_s.is_finite()) {
        return Err(Error::invalid("t_phi_s", "must be finite and > 0"));
    }
    if !(rabi_hz > T::zero() && rabi_hz.is_finite()) {
        return Err(Error::invalid("rabi_hz", "must be finite and > 0"));
    }
    let half = t_phi_s / T::lit(2.0);
    let t_half_pi = T::one() / (T::lit(4.0) * rabi_hz);
    let t_pi = T::one() / (T::lit(2.0) * rabi_hz);
    if t_pi > half {
        return Err(Error::invalid(
            "t_phi_s",
            format!("π pulse of {t_pi} s does not fit in T_φ/2 = {half} s"),
        ));
    }
    let pulse = |duration_s, rotation_rad, phase_rad| SequenceElement::Pulse {
        duration_s,
        phase_rad,
        rotation_rad,
        amplitude_scale: T::one(),
    };
    let elements = vec![
        pulse(t_half_pi, T::FRAC_PI_2(), T::zero()),
        SequenceElement::Delay { duration_s: half },
        pulse(t_pi, T::PI(), T::zero()),
        SequenceElement::Delay { duration_s: half },
        pulse(t_half_pi, T::FRAC_PI_2(), final_phase_rad),
    ];
    let seq = PulseSequence {
        t_phi_s,
        t_seq_s: t_phi_s + t_half_pi + t_pi + t_half_pi,
        elements,
    };
    seq.validate()?;
    Ok(seq)
}

/// Sinusoidal test field `B(τ) = B_ac sin(2π f τ + phase)` on the
/// free-evolution clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcField<T> {
    pub amplitude_t: T,
    pub frequency_hz: T,
    pub phase_rad: T,
}

impl<T: Real> AcField<T> {
    pub fn off() -> Self {
        Self {
            amplitude_t: T::zero(),
            frequency_hz: T::zero(),
            phase_rad: T::zero(),
        }
    }

    /// Frequency `1/T_φ`, zero crossing on the π pulse.
    pub fn phase_locked(amplitude_t: T, t_phi_s: T) -> Self {
        Self {
            amplitude_t,
            frequency_hz: T::one() / t_phi_s,
            phase_rad: T::zero(),
        }
    }

    pub fn value_at(&self, tau_s: T) -> T {
        self.amplitude_t * Float::sin(T::TAU() * self.frequency_hz * tau_s + self.phase_rad)
    }

    /// Exact mean of the field over `[t0, t1]`.
    pub fn mean_over(&self, t0: T, t1: T) -> T {
        let w = T::TAU() * self.frequency_hz;
        let span = t1 - t0;
        if self.amplitude_t == T::zero() {
            return T::zero();
        }
        if w * span == T::zero() {
            return self.value_at(t0);
        }
        // ∫ sin(wt + φ) = [cos(w t0 + φ) - cos(w t1 + φ)] / w, written as a
        // product to avoid cancellation on short sub-steps
        let mid = w * (t0 + t1) / T::lit(2.0) + self.phase_rad;
        let half = w * span / T::lit(2.0);
        self.amplitude_t * T::lit(2.0) * Float::sin(mid) * Float::sin(half) / (w * span)
    }
}

/// Closed-form echo phase `φ = (2/π) γ B_ac T_φ` (γ in rad/(s·T)) for an
/// in-phase sine of period `T_φ`.
pub fn analytic_echo_phase<T: Real>(b_ac_t: T, t_phi_s: T, gamma_e_hz_per_t: T) -> T {
    T::lit(2.0) / T::PI() * (T::TAU() * gamma_e_hz_per_t) * b_ac_t * t_phi_s
}

/// `p_{m_S=0} = ½(1 + cos(φ + ϕ))`.
pub fn population_from_phase<T: Real>(phi: T, final_phase: T) -> T {
    T::lit(0.5) * (T::one() + Float::cos(phi + final_phase))
}

/// Echo decay `e^{-δ(T_φ)}` with `δ = (T_φ / T₂)^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceDecay<T> {
    /// `None` disables decay.
    pub t2_s: Option<T>,
    pub exponent: T,
}

impl<T: Real> Default for CoherenceDecay<T> {
    fn default() -> Self {
        Self::none()
    }
}

impl<T: Real> CoherenceDecay<T> {
    pub fn none() -> Self {
        Self {
            t2_s: None,
            exponent: T::one(),
        }
    }

    pub fn exponential(t2_s: T) -> Self {
        Self {
            t2_s: Some(t2_s),
            exponent: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t2) = self.t2_s {
            if !(t2 > T::zero() && t2.is_finite()) {
                return Err(Error::invalid("t2_s", "must be finite and > 0"));
            }
        }
        if !(self.exponent > T::zero() && self.exponent.is_finite()) {
            return Err(Error::invalid("exponent", "must be finite and > 0"));
        }
        Ok(())
    }

    /// δ(T_φ).
    pub fn delta(&self, t_phi_s: T) -> T {
        match self.t2_s {
            Some(t2) => Float::powf(t_phi_s / t2, self.exponent),
            None => T::zero(),
        }
    }

    pub fn envelope(&self, t_phi_s: T) -> T {
        Float::exp(-self.delta(t_phi_s))
    }
}

/// Microwave errors held constant over one sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseErrors<T> {
    /// Relative amplitude error Δg.
    pub amplitude: T,
    /// Carrier frequency error Δf.
    pub frequency_hz: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinModelKind {
    /// Independent `{0, -1}` blocks with closed-form propagators.
    TwoLevel,
    /// Full 9-dimensional electron ⊗ nucleus space.
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions<T> {
    pub model: SpinModelKind,
    /// Minimum free-evolution sub-steps per AC field period.
    pub substeps_per_period: usize,
    /// Average over `m_I ∈ {-1, 0, +1}`; otherwise only `m_I = 0`.
    pub hyperfine_average: bool,
    /// Additional static axial field during free evolution.
    pub static_offset_t: T,
}

impl<T: Real> Default for SimulationOptions<T> {
    fn default() -> Self {
        Self {
            model: SpinModelKind::TwoLevel,
            substeps_per_period: 64,
            hyperfine_average: true,
            static_offset_t: T::zero(),
        }
    }
}

/// Population of `m_S = 0` after `seq`, starting from `m_S = 0`.
///
/// Evolution stops at the first laser element. The decay envelope multiplies
/// the interference term, `p = ½ + e^{-δ}(p_coherent - ½)`.
pub fn simulate_sequence<T: Real + RealField>(
    seq: &PulseSequence<T>,
    params: &HamiltonianParams<T>,
    errors: PulseErrors<T>,
    field: &AcField<T>,
    decay: &CoherenceDecay<T>,
    options: &SimulationOptions<T>,
) -> Result<T> {
    seq.validate()?;
    params.validate()?;
    decay.validate()?;
    if options.substeps_per_period == 0 {
        return Err(Error::invalid("substeps_per_period", "must be >= 1"));
    }
    let nuclear: &[i8] = if options.hyperfine_average {
        &SPIN_PROJECTIONS
    } else {
        &[0]
    };
    let mut total = T::zero();
    for &m_i in nuclear {
        total += match options.model {
            SpinModelKind::TwoLevel => two_level_block(seq, params, errors, field, options, m_i)?,
            SpinModelKind::Product => product_block(seq, params, errors, field, options, m_i)?,
        };
    }
    let coherent = total / T::from_count(nuclear.len());
    let half = T::lit(0.5);
    Ok(half + decay.envelope(seq.t_phi_s) * (coherent - half))
}

fn drive_for<T: Real>(
    duration_s: T,
    rotation_rad: T,
    amplitude_scale: T,
    phase_rad: T,
    errors: PulseErrors<T>,
) -> Result<DriveParams<T>> {
    let d = DriveParams {
        rabi_hz: rotation_rad / (T::TAU() * duration_s) * amplitude_scale,
        carrier_detuning_hz: errors.frequency_hz,
        amplitude_error: errors.amplitude,
        phase_rad,
    };
    d.validate()?;
    Ok(d)
}

/// Sub-step count for a free evolution of length `duration_s`.
fn substeps<T: Real>(field: &AcField<T>, duration_s: T, per_period: usize) -> usize {
    if field.amplitude_t == T::zero() || field.frequency_hz == T::zero() {
        return 1;
    }
    let periods = duration_s * Float::abs(field.frequency_hz);
    let n = Float::ceil(periods * T::from_count(per_period));
    n.to_usize().unwrap_or(1).max(1)
}

/// Field means over the sub-steps of one free evolution starting at `tau0`.
fn field_cells<T: Real>(
    field: &AcField<T>,
    tau0: T,
    duration_s: T,
    per_period: usize,
) -> impl Iterator<Item = (T, T)> + '_ {
    let n = substeps(field, duration_s, per_period);
    let h = duration_s / T::from_count(n);
    (0..n).map(move |k| {
        let a = tau0 + h * T::from_count(k);
        let b = if k + 1 == n { tau0 + duration_s } else { a + h };
        (b - a, field.mean_over(a, b))
    })
}

fn two_level_block<T: Real + RealField>(
    seq: &PulseSequence<T>,
    params: &HamiltonianParams<T>,
    errors: PulseErrors<T>,
    field: &AcField<T>,
    options: &SimulationOptions<T>,
    m_i: i8,
) -> Result<T> {
    let gamma = params.gamma_e_rad();
    let static_split = -T::TAU() * (params.hyperfine_hz * T::lit(m_i as f64) + errors.frequency_hz);
    let mut psi = [
        Complex::new(T::one(), T::zero()),
        Complex::new(T::zero(), T::zero()),
    ];
    let mut tau = T::zero();
    for element in &seq.elements {
        match *element {
            SequenceElement::Pulse {
                duration_s,
                phase_rad,
                rotation_rad,
                amplitude_scale,
            } => {
                let d = drive_for(duration_s, rotation_rad, amplitude_scale, phase_rad, errors)?;
                let h = two_level_hamiltonian(
                    params,
                    m_i,
                    d.carrier_detuning_hz,
                    d.effective_rabi_hz(),
                    d.phase_rad,
                    T::zero(),
                );
                let u = two_level_propagator(h[(0, 0)].re, h[(1, 1)].re, h[(0, 1)], duration_s);
                psi = apply2(&u, psi);
            }
            SequenceElement::Delay { duration_s } => {
                // diagonal: accumulate the |-1> phase over field cells
                let mut phase = T::zero();
                for (dt, b_mean) in field_cells(field, tau, duration_s, options.substeps_per_period)
                {
                    let split = static_split - gamma * (b_mean + options.static_offset_t);
                    phase += split * dt;
                }
                let (s, c) = Float::sin_cos(phase);
                psi[1] *= Complex::new(c, -s);
                tau += duration_s;
            }
            SequenceElement::Laser { .. } => break,
        }
    }
    Ok(psi[0].norm_sqr())
}

fn product_block<T: Real + RealField>(
    seq: &PulseSequence<T>,
    params: &HamiltonianParams<T>,
    errors: PulseErrors<T>,
    field: &AcField<T>,
    options: &SimulationOptions<T>,
    m_i: i8,
) -> Result<T> {
    let h_free = spin_model::free_hamiltonian_rotating(params, errors.frequency_hz, T::zero())?;
    let zeeman = build_operators::<T>().s_z * Complex::new(params.gamma_e_rad(), T::zero());
    let mut state = QuantumState::product(0, m_i);
    let mut tau = T::zero();
    for element in &seq.elements {
        match *element {
            SequenceElement::Pulse {
                duration_s,
                phase_rad,
                rotation_rad,
                amplitude_scale,
            } => {
                let d = drive_for(duration_s, rotation_rad, amplitude_scale, phase_rad, errors)?;
                let h = spin_model::drive_hamiltonian_rotating(params, &d)?;
                state = spin_model::evolve(&state, &h, duration_s)?;
            }
            SequenceElement::Delay { duration_s } => {
                for (dt, b_mean) in field_cells(field, tau, duration_s, options.substeps_per_period)
                {
                    let b = b_mean + options.static_offset_t;
                    let h = &h_free + &zeeman * Complex::new(b, T::zero());
                    state = spin_model::evolve(&state, &h, dt)?;
                }
                tau += duration_s;
            }
            SequenceElement::Laser { .. } => break,
        }
    }
    Ok(state.population(0))
}

/// Settings for a pulse-error scan at the working point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorScanConfig<T> {
    pub t_phi_s: T,
    pub rabi_hz: T,
    pub params: HamiltonianParams<T>,
    pub decay: CoherenceDecay<T>,
    pub options: SimulationOptions<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint<T> {
    pub amplitude_error: T,
    pub frequency_error_hz: T,
    /// `|p(Δg, Δf) - p(0, 0)|` at the working point.
    pub delta_z: T,
}

/// Population error `Δz` over the product grid of amplitude and frequency
/// errors, for a Hahn echo at `ϕ = π/2` without test field.
pub fn pulse_error_response<T: Real + RealField>(
    amplitude_errors: &[T],
    frequency_errors_hz: &[T],
    cfg: &ErrorScanConfig<T>,
) -> Result<Vec<ErrorPoint<T>>> {
    for &g in amplitude_errors {
        if !g.is_finite() {
            return Err(Error::invalid("amplitude_errors", "must be finite"));
        }
    }
    for &f in frequency_errors_hz {
        if !f.is_finite() {
            return Err(Error::invalid("frequency_errors_hz", "must be finite"));
        }
    }
    let seq = hahn_echo(cfg.t_phi_s, cfg.rabi_hz, T::FRAC_PI_2())?;
    let off = AcField::off();
    let run = |errors| simulate_sequence(&seq, &cfg.params, errors, &off, &cfg.decay, &cfg.options);
    let reference = run(PulseErrors::default())?;
    let grid: Vec<(T, T)> = amplitude_errors
        .iter()
        .flat_map(|&g| frequency_errors_hz.iter().map(move |&f| (g, f)))
        .collect();
    grid.par_iter()
        .map(|&(g, f)| {
            let p = run(PulseErrors {
                amplitude: g,
                frequency_hz: f,
            })?;
            Ok(ErrorPoint {
                amplitude_error: g,
                frequency_error_hz: f,
                delta_z: Float::abs(p - reference),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    type P = HamiltonianParams<f64>;

    fn ideal() -> SimulationOptions<f64> {
        SimulationOptions {
            hyperfine_average: false,
            ..SimulationOptions::default()
        }
    }

    fn echo(final_phase: f64) -> PulseSequence<f64> {
        hahn_echo(50e-6, 5e6, final_phase).unwrap()
    }

    /// Midpoint-rule quadrature of γ ∫ B(t) s(t) dt with s = ±1 switching at
    /// T_φ/2.
    fn echo_phase_oracle(b_ac: f64, t_phi: f64, gamma_hz: f64) -> f64 {
        let n = 200_000;
        let h = t_phi / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let t = (k as f64 + 0.5) * h;
            let b = b_ac * (2.0 * PI * t / t_phi).sin();
            let s = if t < t_phi / 2.0 { 1.0 } else { -1.0 };
            acc += b * s * h;
        }
        2.0 * PI * gamma_hz * acc
    }

    #[test]
    fn pulse_durations_follow_rabi_frequency() {
        let seq = echo(FRAC_PI_2);
        let pulses: Vec<f64> = seq
            .elements
            .iter()
            .filter_map(|e| match e {
                SequenceElement::Pulse { duration_s, .. } => Some(*duration_s),
                _ => None,
            })
            .collect();
        assert_relative_eq!(pulses[0], 50e-9, max_relative = 1e-12);
        assert_relative_eq!(pulses[1], 100e-9, max_relative = 1e-12);
        assert_relative_eq!(pulses[2], 50e-9, max_relative = 1e-12);
        assert_eq!(seq.final_phase_rad(), Some(FRAC_PI_2));
        let delays: Vec<f64> = seq
            .elements
            .iter()
            .filter_map(|e| match e {
                SequenceElement::Delay { duration_s } => Some(*duration_s),
                _ => None,
            })
            .collect();
        assert_eq!(delays, vec![25e-6, 25e-6]);
    }

    #[test]
    fn readout_padding_reaches_sequence_length() {
        let seq = echo(FRAC_PI_2).with_readout(100e-6, 160e-6).unwrap();
        assert_eq!(seq.t_seq_s, 160e-6);
        assert_relative_eq!(seq.total_pulse_time_s(), 0.2e-6, max_relative = 1e-9);
        let total: f64 = seq.elements.iter().map(|e| e.duration_s()).sum();
        assert_relative_eq!(total, 160e-6, max_relative = 1e-12);
        assert!(echo(0.0).with_readout(100e-6, 120e-6).is_err());
    }

    #[test]
    fn pulses_longer_than_half_free_time_rejected() {
        assert!(hahn_echo(150e-9, 5e6, 0.0).is_err());
        assert!(hahn_echo(0.0, 5e6, 0.0).is_err());
        assert!(hahn_echo(50e-6, 0.0, 0.0).is_err());
    }

    #[test]
    fn analytic_phase_matches_quadrature() {
        assert_eq!(analytic_echo_phase(0.0, 50e-6, 28.7e9), 0.0);
        let phi = analytic_echo_phase(1e-9, 50e-6, 28.7e9);
        let oracle = echo_phase_oracle(1e-9, 50e-6, 28.7e9);
        assert_relative_eq!(phi, oracle, max_relative = 1e-8);
        assert!((phi - 5.74e-3).abs() < 1e-5);
        assert_relative_eq!(
            analytic_echo_phase(2e-9, 50e-6, 28.7e9),
            2.0 * phi,
            max_relative = 1e-15
        );
    }

    #[test]
    fn population_formula_examples() {
        assert_eq!(population_from_phase(0.0, 0.0), 1.0);
        assert_relative_eq!(population_from_phase(0.0, FRAC_PI_2), 0.5, epsilon = 1e-15);
        assert!(population_from_phase(PI, 0.0).abs() < 1e-15);
    }

    #[test]
    fn field_cell_means_are_exact() {
        let f = AcField::phase_locked(1e-9, 50e-6);
        // first half-period integrates to B T/π
        let n = 64;
        let h = 25e-6 / n as f64;
        let sum: f64 = (0..n)
            .map(|k| f.mean_over(k as f64 * h, (k + 1) as f64 * h) * h)
            .sum();
        assert_relative_eq!(sum, 1e-9 * 50e-6 / PI, max_relative = 1e-12);
    }

    #[test]
    fn ideal_echo_refocuses_to_bright_state() {
        let p = simulate_sequence(
            &echo(0.0),
            &P::default(),
            PulseErrors::default(),
            &AcField::off(),
            &CoherenceDecay::none(),
            &ideal(),
        )
        .unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simulated_phase_matches_analytic_oracle() {
        let params = P::default();
        for b in [1e-9, 5e-9, 2e-8] {
            let field = AcField::phase_locked(b, 50e-6);
            let p = simulate_sequence(
                &echo(FRAC_PI_2),
                &params,
                PulseErrors::default(),
                &field,
                &CoherenceDecay::none(),
                &ideal(),
            )
            .unwrap();
            let phi_sim = (1.0 - 2.0 * p).asin();
            let phi = analytic_echo_phase(b, 50e-6, params.gamma_e_hz_per_t);
            assert!((phi_sim - phi).abs() <= 0.01 * phi, "{phi_sim} vs {phi}");
            assert_relative_eq!(
                p,
                population_from_phase(phi, FRAC_PI_2),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn static_offsets_refocus() {
        let params = P::default();
        let base = simulate_sequence(
            &echo(0.0),
            &params,
            PulseErrors::default(),
            &AcField::off(),
            &CoherenceDecay::none(),
            &ideal(),
        )
        .unwrap();
        for db in [1e-9, 1e-7, 3e-6] {
            let opts = SimulationOptions {
                static_offset_t: db,
                ..ideal()
            };
            let p = simulate_sequence(
                &echo(0.0),
                &params,
                PulseErrors::default(),
                &AcField::off(),
                &CoherenceDecay::none(),
                &opts,
            )
            .unwrap();
            assert!((p - base).abs() < 1e-9, "{db}: {p}");
        }
    }

    #[test]
    fn phase_is_linear_in_field_amplitude() {
        let params = P::default();
        let phase_of = |b: f64| {
            let p = simulate_sequence(
                &echo(FRAC_PI_2),
                &params,
                PulseErrors::default(),
                &AcField::phase_locked(b, 50e-6),
                &CoherenceDecay::none(),
                &ideal(),
            )
            .unwrap();
            (1.0 - 2.0 * p).asin()
        };
        let b_ref = 5e-9;
        let slope = phase_of(b_ref) / b_ref;
        let b_max = 0.3 / (4.0 * params.gamma_e_hz_per_t * 50e-6);
        for k in 1..=10 {
            let b = b_max * k as f64 / 10.0;
            let phi = phase_of(b);
            assert!(phi < 0.3 + 1e-9);
            assert!((phi - slope * b).abs() < 0.01 * slope * b);
        }
    }

    #[test]
    fn working_point_has_steepest_response() {
        // finite-difference |dp/dφ| over the final phase
        let slope_at = |final_phase: f64| {
            let h = 1e-4;
            (population_from_phase(h, final_phase) - population_from_phase(-h, final_phase)).abs()
                / (2.0 * h)
        };
        let best = (0..=180)
            .map(|k| k as f64 * PI / 180.0)
            .max_by(|a, b| slope_at(*a).partial_cmp(&slope_at(*b)).unwrap())
            .unwrap();
        assert!((best - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn two_level_path_matches_product_space() {
        let params = P::default();
        let field = AcField::phase_locked(3e-9, 50e-6);
        let errors = PulseErrors {
            amplitude: 0.01,
            frequency_hz: 2e4,
        };
        for hyperfine_average in [false, true] {
            let two = SimulationOptions {
                hyperfine_average,
                ..SimulationOptions::default()
            };
            let full = SimulationOptions {
                model: SpinModelKind::Product,
                ..two
            };
            let run = |o: &SimulationOptions<f64>, e| {
                simulate_sequence(
                    &echo(FRAC_PI_2),
                    &params,
                    e,
                    &field,
                    &CoherenceDecay::none(),
                    o,
                )
                .unwrap()
            };
            assert!(
                (run(&two, PulseErrors::default()) - run(&full, PulseErrors::default())).abs()
                    < 1e-6
            );
            assert!((run(&two, errors) - run(&full, errors)).abs() < 1e-6);
        }
    }

    #[test]
    fn substep_doubling_is_converged() {
        let params = P::default();
        let field = AcField::phase_locked(2e-8, 50e-6);
        let run = |n| {
            let opts = SimulationOptions {
                substeps_per_period: n,
                ..ideal()
            };
            let p = simulate_sequence(
                &echo(FRAC_PI_2),
                &params,
                PulseErrors::default(),
                &field,
                &CoherenceDecay::none(),
                &opts,
            )
            .unwrap();
            (1.0 - 2.0 * p).asin()
        };
        let (a, b) = (run(64), run(128));
        assert!((a - b).abs() < 1e-4 * a.abs());
    }

    #[test]
    fn decay_scales_interference_term() {
        let decay = CoherenceDecay::exponential(100e-6);
        assert_relative_eq!(decay.delta(50e-6), 0.5, max_relative = 1e-15);
        let p = simulate_sequence(
            &echo(0.0),
            &P::default(),
            PulseErrors::default(),
            &AcField::off(),
            &decay,
            &ideal(),
        )
        .unwrap();
        assert_relative_eq!(p, 0.5 * (1.0 + (-0.5f64).exp()), max_relative = 1e-12);
        let k2 = CoherenceDecay {
            t2_s: Some(100e-6),
            exponent: 2.0,
        };
        assert_relative_eq!(k2.delta(50e-6), 0.25, max_relative = 1e-15);
    }

    fn scan_cfg() -> ErrorScanConfig<f64> {
        ErrorScanConfig {
            t_phi_s: 50e-6,
            rabi_hz: 5e6,
            params: P::default(),
            decay: CoherenceDecay::none(),
            options: SimulationOptions::default(),
        }
    }

    fn log_slope(x: &[f64], y: &[f64]) -> f64 {
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn error_free_point_has_zero_delta_z() {
        let pts = pulse_error_response(&[0.0], &[0.0], &scan_cfg()).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].delta_z < 1e-12);
    }

    #[test]
    fn delta_z_is_linear_in_both_error_axes() {
        let gs: Vec<f64> = (0..=10)
            .map(|k| 1e-4 * 10f64.powf(k as f64 / 10.0))
            .collect();
        let pts = pulse_error_response(&gs, &[0.0], &scan_cfg()).unwrap();
        let dz: Vec<f64> = pts.iter().map(|p| p.delta_z).collect();
        let s = log_slope(&gs, &dz);
        assert!((s - 1.0).abs() <= 0.05, "Δg slope {s}");

        let fs: Vec<f64> = (0..=10)
            .map(|k| 1e2 * 10f64.powf(k as f64 / 10.0))
            .collect();
        let pts = pulse_error_response(&[0.0], &fs, &scan_cfg()).unwrap();
        let dz: Vec<f64> = pts.iter().map(|p| p.delta_z).collect();
        let s = log_slope(&fs, &dz);
        assert!((s - 1.0).abs() <= 0.05, "Δf slope {s}");
    }

    #[test]
    fn grid_is_row_major_over_amplitude_then_frequency() {
        let pts = pulse_error_response(&[0.0, 1e-3], &[0.0, 1e3, 2e3], &scan_cfg()).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[4].amplitude_error, 1e-3);
        assert_eq!(pts[4].frequency_error_hz, 1e3);
    }

    #[test]
    fn sequence_serializes() {
        let seq = echo(FRAC_PI_2).with_readout(100e-6, 160e-6).unwrap();
        let s = serde_json::to_string(&seq).unwrap();
        let back: PulseSequence<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, seq);
    }
}
