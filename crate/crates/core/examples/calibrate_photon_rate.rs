//! Solves for the photon rate R₀ at which the shot-noise-limited `S_A`
//! sensitivity of the default scenario equals 0.9 pT/√Hz / 5.3, and compares
//! it with `CALIBRATED_PHOTON_RATE_HZ`.
//!
//! `S_A` here is the bare window count (no reference subtraction), so its
//! shot noise is `sqrt(R̄ Δt)` counts.

use nvmag::experiments::Scenario;
use nvmag::readout::{mean_rate_over, CALIBRATED_PHOTON_RATE_HZ};
use nvmag::sequences::{simulate_sequence, PulseErrors};

const TARGET_T_PER_SQRT_HZ: f64 = 0.9e-12 / 5.3;

fn main() -> nvmag::Result<()> {
    let s = Scenario::default();
    let [seq, _] = s.sequences()?;
    let params = s.hamiltonian.params();
    let decay = s.decay.decay();
    let opts = s.simulation_options();
    let p = |b: f64| {
        let field = s.ac_field.field(b, s.sequence.t_phi_s);
        simulate_sequence(&seq, &params, PulseErrors::default(), &field, &decay, &opts)
    };
    let mut cfg = s.readout.clone();
    cfg.photon_rate_hz = 1.0;
    let h = 1e-12;
    let p0 = p(0.0)?;
    let slope_p = (p(h)? - p(-h)?) / (2.0 * h);
    let dt = cfg.window_s;
    // per unit R₀
    let rate0 = mean_rate_over(p0, &cfg, 0.0, dt);
    let d_rate =
        (mean_rate_over(1.0, &cfg, 0.0, dt) - mean_rate_over(0.0, &cfg, 0.0, dt)) * slope_p;
    // η(R₀) = sqrt(rate0 R₀ Δt) sqrt(T_seq) / (|d_rate| R₀ Δt) ∝ R₀^{-1/2}
    let eta_unit = (rate0 * dt).sqrt() * cfg.t_seq_s.sqrt() / (d_rate.abs() * dt);
    let r0 = (eta_unit / TARGET_T_PER_SQRT_HZ).powi(2);
    println!("p at working point      {p0:.6}");
    println!("dp/dB                   {slope_p:.6e} 1/T");
    println!("target sensitivity      {TARGET_T_PER_SQRT_HZ:.4e} T/sqrt(Hz)");
    println!("calibrated R0           {r0:.6e} counts/s");
    println!("library constant        {CALIBRATED_PHOTON_RATE_HZ:.4e} counts/s");
    let rel = (r0 / CALIBRATED_PHOTON_RATE_HZ - 1.0).abs();
    println!("relative difference     {rel:.2e}");
    if rel > 1e-4 {
        eprintln!("constant is out of date");
        std::process::exit(1);
    }
    Ok(())
}
