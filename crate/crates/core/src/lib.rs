//! Simulation toolkit for an SOA-MZI photonic sampling mixer used as a
//! frequency up-converter.
//!
//! The crate is organised bottom-up:
//!
//! * [`soa`] holds the static physics of a single semiconductor optical
//!   amplifier (gain, phase and the derived scalar constants).
//! * [`signals`] builds the two optical stimuli (mode-locked pulse train and
//!   the data signal) and decomposes periodic waveforms into harmonics.
//! * [`smallsignal`] is the closed-form perturbation model of the
//!   interferometer and its conversion gain for both architectures.
//! * [`timedomain`] integrates the nonlinear carrier rate equations and acts
//!   as an independent oracle for the analytic model.
//! * [`rf_chain`] emulates the photodetection / electrical measurement chain.
//! * [`dsp`] generates, shapes and demodulates QPSK / 16-QAM data and
//!   computes EVM.
//! * [`presets`] collects the reference operating conditions.
//!
//! All complex modulation coefficients use the convention
//! `X(t) = X̄ + ½(x·e^{jωt} + x*·e^{−jωt})`.

pub mod consts;
pub mod dsp;
pub mod error;
pub mod presets;
pub mod rf_chain;
pub mod signals;
pub mod smallsignal;
pub mod soa;
pub mod timedomain;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use signals::{DataMode, DataSignalSpec, HarmonicSpectrum, PulseShape, PulseTrainSpec, WaveformGrid};
pub use smallsignal::{Architecture, OperatingPoint};
pub use soa::SoaParams;
