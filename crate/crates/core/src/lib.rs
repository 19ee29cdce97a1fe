//! Simulation and analysis toolkit for NV-ensemble pulsed magnetometry.
//!
//! The crate models one field evaluation end to end: Hahn-echo spin dynamics
//! under imperfect microwave control ([`spin_model`], [`sequences`]), photon
//! readout with shot noise and reference subtraction ([`readout`]), the
//! integration-window filters that referencing imposes on slow noise
//! ([`noise_filters`]), and the estimators used to judge how sensitivity
//! scales with averaging time ([`analysis`]). [`experiments`] wires these
//! together behind scenario files and the `nvmag` command line tool.
//!
//! Core numerics are generic over the floating-point type. The aliases at
//! the crate root fix the common `f64` (and a few `f32`) instantiations.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod noise_filters;
pub mod readout;
mod scalar;
pub mod sequences;
pub mod spin_model;

pub use error::{Error, Result};
pub use scalar::Real;

pub type HamiltonianParamsF64 = spin_model::HamiltonianParams<f64>;
pub type DriveParamsF64 = spin_model::DriveParams<f64>;
pub type SpinOperatorSetF64 = spin_model::SpinOperatorSet<f64>;
pub type QuantumStateF64 = spin_model::QuantumState<f64>;
pub type PulseSequenceF64 = sequences::PulseSequence<f64>;
pub type AcFieldF64 = sequences::AcField<f64>;
pub type CoherenceDecayF64 = sequences::CoherenceDecay<f64>;
pub type PsdModelF64 = noise_filters::PsdModel<f64>;
pub type SampledSpectrumF64 = noise_filters::SampledSpectrum<f64>;
pub type NoiseTraceF64 = noise_filters::NoiseTrace<f64>;
pub type IntegrationWindowF64 = noise_filters::IntegrationWindow<f64>;
pub type ScalingCurveF64 = analysis::ScalingCurve<f64>;
pub type SensitivityInputsF64 = analysis::SensitivityInputs<f64>;

pub type IntegrationWindowF32 = noise_filters::IntegrationWindow<f32>;
pub type ScalingCurveF32 = analysis::ScalingCurve<f32>;
pub type PsdModelF32 = noise_filters::PsdModel<f32>;
