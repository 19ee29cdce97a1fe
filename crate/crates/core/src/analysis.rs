//! Scaling estimators and closed-form sensitivity limits.
//!
//! `allan_deviation` is the non-overlapping two-sample deviation of block
//! means; `std_vs_time` is the plain standard deviation of the same block
//! means. Both return a [`ScalingCurve`] over averaging times that are
//! integer multiples of the sample spacing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::CoherenceDecay;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Allan,
    Std,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve<T> {
    /// Averaging times τ (Allan) or t (std), seconds.
    pub grid_s: Vec<T>,
    pub deviation: Vec<T>,
    pub estimator: Estimator,
    /// Sample spacing t′.
    pub spacing_s: T,
}

impl<T: Real> ScalingCurve<T> {
    pub fn len(&self) -> usize {
        self.grid_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_s.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.grid_s
            .iter()
            .copied()
            .zip(self.deviation.iter().copied())
    }
}

/// Number of samples per block for averaging time `tau_s`.
pub fn block_length<T: Real>(tau_s: T, spacing_s: T) -> Result<usize> {
    if !(spacing_s > T::zero() && spacing_s.is_finite()) {
        return Err(Error::invalid("spacing_s", "must be finite and > 0"));
    }
    let ratio = tau_s / spacing_s;
    let m = ratio.round();
    if !(m >= T::one()) || (ratio - m).abs() > T::lit(1e-6) * m {
        return Err(Error::invalid(
            "tau_s",
            format!("{tau_s} s is not a positive multiple of the spacing {spacing_s} s"),
        ));
    }
    m.to_usize()
        .ok_or_else(|| Error::invalid("tau_s", "block length overflows usize"))
}

fn block_means<T: Real>(samples: &[T], m: usize) -> Vec<T> {
    let scale = T::from_count(m);
    samples
        .chunks_exact(m)
        .map(|block| block.iter().fold(T::zero(), |acc, &x| acc + x) / scale)
        .collect()
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "grid",
            "averaging times must be strictly increasing",
        ));
    }
    Ok(())
}

fn blocks_for<T: Real>(samples: &[T], tau: T, spacing_s: T) -> Result<Vec<T>> {
    let m = block_length(tau, spacing_s)?;
    let means = block_means(samples, m);
    if means.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "τ = {tau} s gives {} complete block(s) of {m} samples; need at least 2",
            means.len()
        )));
    }
    Ok(means)
}

/// Non-overlapping Allan deviation `σ_A(τ) = sqrt(½ <(x_{i+1} - x_i)²>)`
/// where `x_i` is the mean of the i-th block of `τ/t′` samples. A trailing
/// partial block is discarded.
pub fn allan_deviation<T: Real>(
    samples: &[T],
    spacing_s: T,
    taus_s: &[T],
) -> Result<ScalingCurve<T>> {
    check_grid(taus_s)?;
    let mut deviation = Vec::with_capacity(taus_s.len());
    for &tau in taus_s {
        let means = blocks_for(samples, tau, spacing_s)?;
        let sum_sq = means
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .fold(T::zero(), |acc, d| acc + d);
        let mean_sq = sum_sq / T::from_count(means.len() - 1);
        deviation.push((T::lit(0.5) * mean_sq).sqrt());
    }
    Ok(ScalingCurve {
        grid_s: taus_s.to_vec(),
        deviation,
        estimator: Estimator::Allan,
        spacing_s,
    })
}

/// Standard deviation (n-1 normalization) of block means versus block
/// duration.
pub fn std_vs_time<T: Real>(samples: &[T], spacing_s: T, times_s: &[T]) -> Result<ScalingCurve<T>> {
    check_grid(times_s)?;
    let mut deviation = Vec::with_capacity(times_s.len());
    for &t in times_s {
        let means = blocks_for(samples, t, spacing_s)?;
        let k = T::from_count(means.len());
        let mean = means.iter().fold(T::zero(), |a, &x| a + x) / k;
        let ss = means
            .iter()
            .fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
        deviation.push((ss / (k - T::one())).sqrt());
    }
    Ok(ScalingCurve {
        grid_s: times_s.to_vec(),
        deviation,
        estimator: Estimator::Std,
        spacing_s,
    })
}

/// Log-spaced averaging times `m·t′` with at least `min_blocks` complete
/// blocks, roughly `per_decade` points per decade, duplicates removed.
pub fn log_time_grid<T: Real>(
    n_samples: usize,
    spacing_s: T,
    min_blocks: usize,
    per_decade: usize,
) -> Vec<T> {
    let min_blocks = min_blocks.max(2);
    let per_decade = per_decade.max(1);
    let m_max = n_samples / min_blocks;
    if m_max == 0 {
        return Vec::new();
    }
    let mut ms: Vec<usize> = Vec::new();
    let mut k = 0usize;
    loop {
        let m = 10f64.powf(k as f64 / per_decade as f64).round() as usize;
        if m > m_max {
            break;
        }
        if ms.last() != Some(&m) {
            ms.push(m);
        }
        k += 1;
    }
    ms.into_iter()
        .map(|m| spacing_s * T::from_count(m))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogFit<T> {
    pub slope: T,
    /// Natural-log intercept: `ln y ≈ intercept + slope·ln x`.
    pub intercept: T,
}

/// Unweighted least-squares line through `(ln t, ln σ)` for points with
/// `t_min ≤ t ≤ t_max`.
pub fn fit_log_slope<T: Real>(curve: &ScalingCurve<T>, t_min: T, t_max: T) -> Result<LogFit<T>> {
    let pts: Vec<(T, T)> = curve
        .points()
        .filter(|&(t, _)| t >= t_min && t <= t_max)
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} point(s) in [{t_min}, {t_max}]; need at least 3",
            pts.len()
        )));
    }
    if pts.iter().any(|&(t, y)| !(t > T::zero() && y > T::zero())) {
        return Err(Error::invalid("curve", "log fit needs positive values"));
    }
    let n = T::from_count(pts.len());
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |(a, b), &(t, y)| {
        (a + t.ln(), b + y.ln())
    });
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((T::zero(), T::zero()), |(a, b), &(t, y)| {
        let dx = t.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    let slope = sxy / sxx;
    Ok(LogFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Inputs to the pulsed-detection sensitivity formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInputs<T> {
    /// Deviation of a single field evaluation.
    pub sigma1: T,
    /// Signal modulation amplitude A.
    pub contrast: T,
    pub t_phi_s: T,
    pub t_seq_s: T,
    pub total_time_s: T,
    pub n_centres: T,
    pub gamma_e_hz_per_t: T,
    pub decay: CoherenceDecay<T>,
}

impl<T: Real> SensitivityInputs<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("contrast", self.contrast),
            ("t_phi_s", self.t_phi_s),
            ("t_seq_s", self.t_seq_s),
            ("total_time_s", self.total_time_s),
            ("n_centres", self.n_centres),
            ("gamma_e_hz_per_t", self.gamma_e_hz_per_t),
        ];
        for (name, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        if !(self.sigma1 >= T::zero() && self.sigma1.is_finite()) {
            return Err(Error::invalid("sigma1", "must be finite and >= 0"));
        }
        if self.t_phi_s > self.t_seq_s {
            return Err(Error::invalid("t_phi_s", "must not exceed t_seq_s"));
        }
        self.decay.validate()
    }

    /// Number of field evaluations `n = t / T_seq`.
    pub fn evaluations(&self) -> T {
        self.total_time_s / self.t_seq_s
    }

    fn gamma_rad(&self) -> T {
        T::TAU() * self.gamma_e_hz_per_t
    }
}

/// `B_min = σ₁ / (γ A T_φ sqrt(n))`, γ in rad/(s·T).
pub fn sensitivity_eq1<T: Real>(inputs: &SensitivityInputs<T>) -> Result<T> {
    inputs.validate()?;
    if inputs.evaluations() < T::one() {
        return Err(Error::invalid(
            "total_time_s",
            "must cover at least one sequence",
        ));
    }
    Ok(inputs.sigma1
        / (inputs.gamma_rad() * inputs.contrast * inputs.t_phi_s * inputs.evaluations().sqrt()))
}

/// Spin-projection limit `1 / (γ sqrt(N) sqrt(t/T_seq) T_φ e^{-δ(T_φ)})`.
pub fn projection_limit_eq2<T: Real>(inputs: &SensitivityInputs<T>) -> Result<T> {
    inputs.validate()?;
    let envelope = inputs.decay.envelope(inputs.t_phi_s);
    Ok(T::one()
        / (inputs.gamma_rad()
            * inputs.n_centres.sqrt()
            * inputs.evaluations().sqrt()
            * inputs.t_phi_s
            * envelope))
}

/// `sqrt(2e)/γ`, the coefficient of the optimized projection limit
/// `sqrt(2e) / (γ sqrt(N t T₂))`, in T·sqrt(s).
pub fn projection_coefficient<T: Real>(gamma_e_hz_per_t: T) -> T {
    (T::lit(2.0) * T::E()).sqrt() / (T::TAU() * gamma_e_hz_per_t)
}

/// Projection limit at `T_seq = T_φ = T₂/2` with exponential decay.
pub fn optimized_projection_limit<T: Real>(
    n_centres: T,
    total_time_s: T,
    t2_s: T,
    gamma_e_hz_per_t: T,
) -> T {
    projection_coefficient(gamma_e_hz_per_t) / (n_centres * total_time_s * t2_s).sqrt()
}

/// Phase time minimizing the projection limit when `T_seq = T_φ` and
/// `δ = (T_φ/T₂)^k`.
///
/// The objective is `e^{(T/T₂)^k} / sqrt(T)`; setting its log-derivative to
/// zero gives `(T/T₂)^k = 1/(2k)`, i.e. `T* = T₂ (2k)^{-1/k}`.
pub fn optimal_phase_time<T: Real>(t2_s: T, exponent: T) -> Result<T> {
    if !(t2_s > T::zero() && t2_s.is_finite()) {
        return Err(Error::invalid("t2_s", "must be finite and > 0"));
    }
    if !(exponent > T::zero() && exponent.is_finite()) {
        return Err(Error::invalid("exponent", "must be finite and > 0"));
    }
    if exponent == T::one() {
        return Ok(t2_s / T::lit(2.0));
    }
    let two_k = T::lit(2.0) * exponent;
    Ok(t2_s * two_k.powf(-exponent.recip()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Direct evaluation of the block-mean definitions with index loops.
    fn allan_oracle(samples: &[f64], m: usize) -> f64 {
        let k = samples.len() / m;
        let mut x = vec![0.0; k];
        for i in 0..k {
            let mut s = 0.0;
            for j in 0..m {
                s += samples[i * m + j];
            }
            x[i] = s / m as f64;
        }
        let mut acc = 0.0;
        for i in 0..k - 1 {
            let d = x[i + 1] - x[i];
            acc += d * d;
        }
        (0.5 * (acc / (k - 1) as f64)).sqrt()
    }

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_series_has_zero_deviation() {
        let s = vec![3.25; 1000];
        let taus = [1e-3, 1e-2, 1e-1];
        let a = allan_deviation(&s, 1e-3, &taus).unwrap();
        assert!(a.deviation.iter().all(|&d| d == 0.0));
        let st = std_vs_time(&s, 1e-3, &taus).unwrap();
        assert!(st.deviation.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn alternating_series_gives_a_sqrt2() {
        let a = 0.7;
        let s: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { a } else { -a }).collect();
        let c = allan_deviation(&s, 1.0, &[1.0]).unwrap();
        assert_relative_eq!(c.deviation[0], a * 2f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn rejects_non_multiples_and_short_records() {
        let s = vec![0.0; 10];
        assert!(allan_deviation(&s, 1.0, &[1.5]).is_err());
        assert!(allan_deviation(&s, 1.0, &[6.0]).is_err());
        assert!(allan_deviation(&s, 1.0, &[0.0]).is_err());
        assert!(std_vs_time(&s, 1.0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn trailing_partial_block_is_dropped() {
        let mut s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let a = allan_deviation(&s, 1.0, &[3.0]).unwrap().deviation[0];
        s.push(1e6);
        let b = allan_deviation(&s, 1.0, &[3.0]).unwrap().deviation[0];
        assert_eq!(a, b);
    }

    #[test]
    fn white_noise_allan_slope() {
        let s = white(1_000_000, 11);
        let taus = log_time_grid(s.len(), 1.0, 1000, 5);
        let c = allan_deviation(&s, 1.0, &taus).unwrap();
        let fit = fit_log_slope(&c, 1.0, 1e3).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn white_noise_std_slope() {
        let s = white(1_000_000, 12);
        let ts = log_time_grid(s.len(), 1.0, 1000, 5);
        let c = std_vs_time(&s, 1.0, &ts).unwrap();
        let fit = fit_log_slope(&c, 1.0, 1e3).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn ramp_drift_rises_at_long_times() {
        let noise = white(100_000, 13);
        let s: Vec<f64> = noise
            .iter()
            .enumerate()
            .map(|(i, x)| x + 1e-3 * i as f64)
            .collect();
        let ts = log_time_grid(s.len(), 1.0, 10, 5);
        let c = allan_deviation(&s, 1.0, &ts).unwrap();
        let fit = fit_log_slope(&c, 1e3, 1e4).unwrap();
        assert!(fit.slope > 0.8, "{}", fit.slope);
    }

    #[test]
    fn log_slope_of_exact_power_law() {
        let grid: Vec<f64> = (1..20).map(|k| k as f64 * 0.1).collect();
        let curve = ScalingCurve {
            deviation: grid.iter().map(|t| 3.0 * t.powf(-0.37)).collect(),
            grid_s: grid,
            estimator: Estimator::Std,
            spacing_s: 0.1,
        };
        let fit = fit_log_slope(&curve, 0.0, 10.0).unwrap();
        assert!((fit.slope + 0.37).abs() < 1e-10);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);

        let flat = ScalingCurve {
            deviation: vec![2.0; curve.len()],
            ..curve.clone()
        };
        assert!(fit_log_slope(&flat, 0.0, 10.0).unwrap().slope.abs() < 1e-12);
        let bad = ScalingCurve {
            deviation: vec![0.0; curve.len()],
            ..curve
        };
        assert!(fit_log_slope(&bad, 0.0, 10.0).is_err());
    }

    #[test]
    fn matches_oracle_bit_for_bit() {
        let s = white(10_000, 99);
        let taus = log_time_grid(s.len(), 0.5, 2, 7);
        let c = allan_deviation(&s, 0.5, &taus).unwrap();
        for (&tau, &dev) in c.grid_s.iter().zip(&c.deviation) {
            let m = (tau / 0.5).round() as usize;
            assert_eq!(dev.to_bits(), allan_oracle(&s, m).to_bits(), "m = {m}");
        }
    }

    proptest! {
        #[test]
        fn oracle_equivalence(samples in prop::collection::vec(-1e3f64..1e3, 4..400), m in 1usize..20) {
            prop_assume!(samples.len() / m >= 2);
            let c = allan_deviation(&samples, 1.0, &[m as f64]).unwrap();
            prop_assert_eq!(c.deviation[0].to_bits(), allan_oracle(&samples, m).to_bits());
        }

        #[test]
        fn scale_equivariance(samples in prop::collection::vec(-10f64..10.0, 8..200), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = samples.iter().map(|x| c * x).collect();
            let a = allan_deviation(&samples, 1.0, &[1.0, 2.0]).unwrap();
            let b = allan_deviation(&scaled, 1.0, &[1.0, 2.0]).unwrap();
            for (x, y) in a.deviation.iter().zip(&b.deviation) {
                prop_assert!((c * x - y).abs() <= 1e-9 * (c * x).abs().max(1e-12));
            }
        }

        #[test]
        fn offset_invariance(samples in prop::collection::vec(-10f64..10.0, 8..200), off in -100f64..100.0) {
            let shifted: Vec<f64> = samples.iter().map(|x| x + off).collect();
            let a = allan_deviation(&samples, 1.0, &[1.0, 2.0]).unwrap();
            let b = allan_deviation(&shifted, 1.0, &[1.0, 2.0]).unwrap();
            for (x, y) in a.deviation.iter().zip(&b.deviation) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + off.abs()));
            }
        }
    }

    fn reference_inputs() -> SensitivityInputs<f64> {
        SensitivityInputs {
            sigma1: 0.01,
            contrast: 0.04,
            t_phi_s: 50e-6,
            t_seq_s: 160e-6,
            total_time_s: 1.0,
            n_centres: 1.4e11,
            gamma_e_hz_per_t: 28.7e9,
            decay: CoherenceDecay::exponential(100e-6),
        }
    }

    #[test]
    fn eq1_examples() {
        let p = reference_inputs();
        let b = sensitivity_eq1(&p).unwrap();
        // 0.01 / (2π·28.7e9 · 0.04 · 50e-6 · sqrt(6250))
        let direct = 0.01 / (2.0 * std::f64::consts::PI * 28.7e9 * 0.04 * 50e-6 * 6250f64.sqrt());
        assert_relative_eq!(b, direct, max_relative = 1e-14);
        assert!((b - 3.5e-10).abs() < 0.05e-10);
        let zero = SensitivityInputs { sigma1: 0.0, ..p };
        assert_eq!(sensitivity_eq1(&zero).unwrap(), 0.0);
        let doubled = SensitivityInputs {
            total_time_s: 2.0,
            ..p
        };
        assert_relative_eq!(
            sensitivity_eq1(&doubled).unwrap(),
            b / 2f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn eq2_examples() {
        let p = reference_inputs();
        let b = projection_limit_eq2(&p).unwrap();
        assert!((b - 6e-15).abs() < 0.6e-15, "{b}");
        let quad = SensitivityInputs {
            n_centres: 4.0 * p.n_centres,
            ..p
        };
        assert_relative_eq!(
            projection_limit_eq2(&quad).unwrap(),
            b / 2.0,
            max_relative = 1e-14
        );
        let coeff = projection_coefficient(28.7e9f64);
        assert!((coeff - 1.29e-11).abs() < 0.005e-11, "{coeff}");
    }

    #[test]
    fn eq2_reduces_to_optimized_form() {
        for t2 in [1e-5, 1e-4, 2e-3] {
            let t_phi = optimal_phase_time(t2, 1.0).unwrap();
            let inputs = SensitivityInputs {
                t_phi_s: t_phi,
                t_seq_s: t_phi,
                decay: CoherenceDecay::exponential(t2),
                ..reference_inputs()
            };
            let full = projection_limit_eq2(&inputs).unwrap();
            let short =
                optimized_projection_limit(inputs.n_centres, inputs.total_time_s, t2, 28.7e9);
            assert_relative_eq!(full, short, max_relative = 1e-12);
        }
    }

    #[test]
    fn monotonicity() {
        let p = SensitivityInputs {
            decay: CoherenceDecay::none(),
            ..reference_inputs()
        };
        let b = sensitivity_eq1(&p).unwrap();
        assert!(
            sensitivity_eq1(&SensitivityInputs {
                total_time_s: 2.0,
                ..p
            })
            .unwrap()
                < b
        );
        assert!(
            sensitivity_eq1(&SensitivityInputs {
                contrast: 0.05,
                ..p
            })
            .unwrap()
                < b
        );
        assert!(
            sensitivity_eq1(&SensitivityInputs {
                t_phi_s: 60e-6,
                ..p
            })
            .unwrap()
                < b
        );
        let q = projection_limit_eq2(&p).unwrap();
        assert!(
            projection_limit_eq2(&SensitivityInputs {
                n_centres: 2e11,
                ..p
            })
            .unwrap()
                < q
        );
        assert!(
            projection_limit_eq2(&SensitivityInputs {
                total_time_s: 3.0,
                ..p
            })
            .unwrap()
                < q
        );
    }

    fn grid_search_optimum(t2: f64, k: f64) -> f64 {
        let objective = |t: f64| (t / t2).powf(k).exp() / t.sqrt();
        let (lo, hi) = (1e-3 * t2, 3.0 * t2);
        let mut best = lo;
        let mut span = hi - lo;
        let mut start = lo;
        // successive 10⁴-point grid refinements around the best point
        for _ in 0..4 {
            let n = 10_000;
            let mut best_v = f64::INFINITY;
            for i in 0..=n {
                let t = start + span * i as f64 / n as f64;
                let v = objective(t);
                if v < best_v {
                    best_v = v;
                    best = t;
                }
            }
            span *= 4.0 / n as f64;
            start = (best - span / 2.0).max(lo);
        }
        best
    }

    #[test]
    fn optimal_phase_time_examples() {
        assert_eq!(optimal_phase_time(2e-3, 1.0).unwrap(), 1e-3);
        assert_eq!(optimal_phase_time(100e-6, 1.0).unwrap(), 50e-6);
        // stationarity of e^{T/T₂}/sqrt(T) at T₂/2
        let t2: f64 = 2e-3;
        let g = |t: f64| (t / t2).exp() / t.sqrt();
        let t = 1e-3;
        let h = 1e-9;
        assert!(((g(t + h) - g(t - h)) / (2.0 * h)).abs() < 1e-6 * g(t) / t);
        for k in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let got = optimal_phase_time(t2, k).unwrap();
            let oracle = grid_search_optimum(t2, k);
            assert_relative_eq!(got, oracle, max_relative = 1e-6);
        }
        assert_relative_eq!(
            optimal_phase_time(t2, 2.0).unwrap(),
            t2 / 2.0,
            max_relative = 1e-15
        );
        assert!(optimal_phase_time(0.0, 1.0).is_err());
    }

    #[test]
    fn works_in_f32() {
        let s: Vec<f32> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let c = allan_deviation(&s, 1.0f32, &[1.0]).unwrap();
        assert!((c.deviation[0] - 2f32.sqrt()).abs() < 1e-6);
    }
}
