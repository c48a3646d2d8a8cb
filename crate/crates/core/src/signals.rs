//! Optical stimuli: the mode-locked sampling pulse train and the data signal,
//! plus harmonic decomposition of periodic power waveforms.
//!
//! Only optical power envelopes are modelled; field phase and chirp are not.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, ModFormat};
use crate::{Error, Result};

/// FWHM = 2·√(2 ln 2)·σ for a Gaussian intensity profile.
const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
/// FWHM = 2·ln(1 + √2)·t₀ for a sech² intensity profile.
const SECH2_FWHM_PER_T0: f64 = 1.762_747_174_039_086;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    #[default]
    Gaussian,
    Sech2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTrainSpec {
    pub rep_rate_hz: f64,
    pub fwhm_s: f64,
    #[serde(default)]
    pub shape: PulseShape,
    pub avg_power_w: f64,
    pub wavelength_m: f64,
}

impl Default for PulseTrainSpec {
    fn default() -> Self {
        Self {
            rep_rate_hz: 10e9,
            fwhm_s: 2e-12,
            shape: PulseShape::Gaussian,
            avg_power_w: 1e-3,
            wavelength_m: 1550e-9,
        }
    }
}

impl PulseTrainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite()) {
            return Err(Error::InvalidSpec(format!("rep_rate_hz must be > 0, got {}", self.rep_rate_hz)));
        }
        if !(self.fwhm_s > 0.0 && self.fwhm_s < self.period()) {
            return Err(Error::InvalidSpec(format!(
                "pulse FWHM {} s must lie in (0, period = {} s)",
                self.fwhm_s,
                self.period()
            )));
        }
        if !(self.avg_power_w > 0.0 && self.avg_power_w.is_finite()) {
            return Err(Error::InvalidSpec(format!("avg_power_w must be > 0, got {}", self.avg_power_w)));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(Error::InvalidSpec("wavelength_m must be > 0".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rep_rate_hz
    }

    pub fn with_avg_power(self, avg_power_w: f64) -> Self {
        Self { avg_power_w, ..self }
    }

    /// Width parameter of the shape: σ for Gaussian, t₀ for sech².
    fn width_param(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian => self.fwhm_s / GAUSSIAN_FWHM_PER_SIGMA,
            PulseShape::Sech2 => self.fwhm_s / SECH2_FWHM_PER_T0,
        }
    }

    /// Peak power of a single pulse given the average power.
    pub fn peak_power(&self) -> f64 {
        let w = self.width_param();
        let area = match self.shape {
            PulseShape::Gaussian => w * (2.0 * PI).sqrt(),
            PulseShape::Sech2 => 2.0 * w,
        };
        self.avg_power_w * self.period() / area
    }

    /// Instantaneous power; pulses are centred on integer multiples of the
    /// period.
    pub fn power_at(&self, t: f64) -> f64 {
        let period = self.period();
        let w = self.width_param();
        let peak = self.peak_power();
        let centred = t - (t / period).round() * period;
        // Neighbouring pulses only matter for very wide pulses.
        let reach = ((8.0 * self.fwhm_s) / period).ceil() as i64;
        let mut acc = 0.0;
        for k in -reach..=reach {
            let x = centred - k as f64 * period;
            acc += match self.shape {
                PulseShape::Gaussian => (-0.5 * (x / w).powi(2)).exp(),
                PulseShape::Sech2 => {
                    let s = 1.0 / (x / w).cosh();
                    s * s
                }
            };
        }
        peak * acc
    }

    /// Analytic harmonic coefficient p_i of the ideal train (real, since
    /// pulses are centred at t = 0).
    pub fn harmonic(&self, index: usize) -> Complex64 {
        let omega = 2.0 * PI * index as f64 * self.rep_rate_hz;
        let w = self.width_param();
        let shape = match self.shape {
            PulseShape::Gaussian => (-0.5 * (omega * w).powi(2)).exp(),
            PulseShape::Sech2 => {
                let x = 0.5 * PI * omega * w;
                if x == 0.0 {
                    1.0
                } else {
                    x / x.sinh()
                }
            }
        };
        Complex64::new(2.0 * self.avg_power_w * shape, 0.0)
    }

    pub fn analytic_spectrum(&self, max_index: usize) -> HarmonicSpectrum {
        HarmonicSpectrum {
            fundamental_hz: self.rep_rate_hz,
            dc: self.avg_power_w,
            coeffs: (1..=max_index).map(|i| self.harmonic(i)).collect(),
        }
    }
}

/// Harmonic content of a periodic power waveform,
/// `P(t) = dc + ½ Σᵢ (pᵢ e^{jiω₀t} + c.c.)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpectrum {
    pub fundamental_hz: f64,
    pub dc: f64,
    /// `coeffs[i - 1]` is the coefficient of harmonic `i`.
    pub coeffs: Vec<Complex64>,
}

impl HarmonicSpectrum {
    pub fn max_index(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, index: usize) -> Result<Complex64> {
        if index == 0 || index > self.coeffs.len() {
            return Err(Error::HarmonicOutOfRange { index, max: self.coeffs.len() });
        }
        Ok(self.coeffs[index - 1])
    }

    pub fn frequency(&self, index: usize) -> f64 {
        index as f64 * self.fundamental_hz
    }

    /// Mean-square of the represented waveform (Parseval).
    pub fn mean_square(&self) -> f64 {
        self.dc * self.dc + 0.5 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Evaluates the truncated Fourier series at time `t`.
    pub fn reconstruct(&self, t: f64) -> f64 {
        let w0 = 2.0 * PI * self.fundamental_hz;
        self.dc
            + self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| (c * Complex64::from_polar(1.0, w0 * (k + 1) as f64 * t)).re)
                .sum::<f64>()
    }

    /// CSV columns: index, freq_Hz, re_W, im_W, abs_W. Row 0 is the average.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "freq_Hz", "re_W", "im_W", "abs_W"])?;
        w.write_record(["0", "0", &fmt(self.dc), "0", &fmt(self.dc.abs())])?;
        for (k, c) in self.coeffs.iter().enumerate() {
            let i = k + 1;
            w.write_record([
                i.to_string(),
                fmt(self.frequency(i)),
                fmt(c.re),
                fmt(c.im),
                fmt(c.norm()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform sampling description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    /// Time of the first sample.
    pub t0_s: f64,
}

impl GridSpec {
    /// `n_periods` whole periods of `fundamental_hz` at `samples_per_period`.
    pub fn periods(fundamental_hz: f64, samples_per_period: usize, n_periods: usize) -> Self {
        Self {
            sample_rate_hz: fundamental_hz * samples_per_period as f64,
            n_samples: samples_per_period * n_periods,
            t0_s: 0.0,
        }
    }

    pub fn with_start(self, t0_s: f64) -> Self {
        Self { t0_s, ..self }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0_s + k as f64 / self.sample_rate_hz
    }
}

/// Uniformly sampled instantaneous optical power, W.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformGrid {
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub samples: Vec<f64>,
}

impl WaveformGrid {
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Self {
            sample_rate_hz: grid.sample_rate_hz,
            t0_s: grid.t0_s,
            samples: (0..grid.n_samples).map(|k| f(grid.time(k))).collect(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0_s + k as f64 / self.sample_rate_hz
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    /// CSV columns: time_s, power_W.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "power_W"])?;
        for (k, p) in self.samples.iter().enumerate() {
            w.write_record([fmt(self.time(k)), fmt(*p)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:e}")
}

/// Samples the pulse train on `grid`.
pub fn synthesize_pulse_train(spec: &PulseTrainSpec, grid: GridSpec) -> Result<WaveformGrid> {
    spec.validate()?;
    let per_fwhm = spec.fwhm_s * grid.sample_rate_hz;
    if per_fwhm < 4.0 {
        return Err(Error::InvalidSpec(format!(
            "grid resolves the pulse FWHM with only {per_fwhm:.2} samples (need >= 4)"
        )));
    }
    Ok(WaveformGrid::from_fn(grid, |t| spec.power_at(t)))
}

/// Extracts the DC term and harmonics `1..=max_index` of `fundamental_hz`.
///
/// The waveform must span an integer number of periods.
pub fn harmonics(wave: &WaveformGrid, fundamental_hz: f64, max_index: usize) -> Result<HarmonicSpectrum> {
    let n = wave.samples.len();
    let periods = wave.duration() * fundamental_hz;
    let whole = periods.round();
    if whole < 1.0 || (periods - whole).abs() > 1e-6 * periods.max(1.0) {
        return Err(Error::Leakage { periods, fundamental_hz });
    }
    let m = whole as usize;
    let shortest = wave.sample_rate_hz / (max_index as f64 * fundamental_hz);
    if shortest < 8.0 {
        return Err(Error::InvalidSpec(format!(
            "harmonic {max_index} has only {shortest:.2} samples per period (need >= 8)"
        )));
    }
    let mut buf: Vec<Complex64> = wave.samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 2.0 / n as f64;
    let coeffs = (1..=max_index)
        .map(|i| {
            let omega = 2.0 * PI * i as f64 * fundamental_hz;
            buf[i * m] * scale * Complex64::from_polar(1.0, -omega * wave.t0_s)
        })
        .collect();
    Ok(HarmonicSpectrum { fundamental_hz, dc: buf[0].re / n as f64, coeffs })
}

/// Data (to-be-sampled) signal description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSignalSpec {
    pub wavelength_m: f64,
    pub avg_power_w: f64,
    pub mode: DataMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataMode {
    Sinusoid {
        freq_hz: f64,
        modulation_index: f64,
    },
    /// RRC-shaped QPSK / 16-QAM on an RF carrier. The modulation index is
    /// the peak excursion relative to the average power.
    Complex {
        format: ModFormat,
        baud_hz: f64,
        rf_carrier_hz: f64,
        rolloff: f64,
        modulation_index: f64,
        n_symbols: usize,
        seed: u32,
    },
}

impl DataSignalSpec {
    pub fn sinusoid(wavelength_m: f64, avg_power_w: f64, freq_hz: f64, modulation_index: f64) -> Self {
        Self { wavelength_m, avg_power_w, mode: DataMode::Sinusoid { freq_hz, modulation_index } }
    }

    pub fn cw(wavelength_m: f64, avg_power_w: f64) -> Self {
        Self::sinusoid(wavelength_m, avg_power_w, 1e9, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.avg_power_w >= 0.0 && self.avg_power_w.is_finite()) {
            return Err(Error::InvalidSpec(format!("avg_power_w must be >= 0, got {}", self.avg_power_w)));
        }
        match self.mode {
            DataMode::Sinusoid { freq_hz, modulation_index } => {
                if !(0.0..=1.0).contains(&modulation_index) {
                    return Err(Error::InvalidSpec(format!(
                        "modulation index {modulation_index} outside [0, 1]: power would go negative"
                    )));
                }
                if !(freq_hz > 0.0) {
                    return Err(Error::InvalidSpec("sinusoid frequency must be > 0".into()));
                }
            }
            DataMode::Complex { baud_hz, rf_carrier_hz, rolloff, modulation_index, n_symbols, .. } => {
                if !(baud_hz > 0.0) {
                    return Err(Error::InvalidSpec("baud must be > 0".into()));
                }
                if !(0.0..=1.0).contains(&rolloff) {
                    return Err(Error::InvalidSpec(format!("rolloff {rolloff} outside [0, 1]")));
                }
                if !(0.0..=1.0).contains(&modulation_index) {
                    return Err(Error::InvalidSpec(format!("modulation index {modulation_index} outside [0, 1]")));
                }
                if rf_carrier_hz <= baud_hz * (1.0 + rolloff) / 2.0 {
                    return Err(Error::InvalidSpec(format!(
                        "RF carrier {rf_carrier_hz} Hz must exceed half the occupied bandwidth {} Hz",
                        baud_hz * (1.0 + rolloff) / 2.0
                    )));
                }
                if n_symbols == 0 {
                    return Err(Error::InvalidSpec("n_symbols must be > 0".into()));
                }
            }
        }
        Ok(())
    }

    /// Centre frequency of the modulation (tone or RF carrier).
    pub fn frequency(&self) -> f64 {
        match self.mode {
            DataMode::Sinusoid { freq_hz, .. } => freq_hz,
            DataMode::Complex { rf_carrier_hz, .. } => rf_carrier_hz,
        }
    }

    /// Complex modulation coefficient p_dat of a sinusoidal signal.
    pub fn tone_coefficient(&self) -> Complex64 {
        match self.mode {
            DataMode::Sinusoid { modulation_index, .. } => Complex64::new(modulation_index * self.avg_power_w, 0.0),
            DataMode::Complex { .. } => Complex64::new(0.0, 0.0),
        }
    }

    pub fn build(&self) -> Result<DataSignal> {
        DataSignal::new(*self)
    }
}

/// A data signal ready for evaluation at arbitrary times.
#[derive(Debug, Clone)]
pub struct DataSignal {
    spec: DataSignalSpec,
    baseband: Option<dsp::Baseband>,
    /// Peak envelope magnitude used to normalise the modulation depth.
    peak: f64,
}

impl DataSignal {
    pub fn new(spec: DataSignalSpec) -> Result<Self> {
        spec.validate()?;
        match spec.mode {
            DataMode::Sinusoid { .. } => Ok(Self { spec, baseband: None, peak: 1.0 }),
            DataMode::Complex { format, baud_hz, rolloff, n_symbols, seed, .. } => {
                let bits = dsp::prbs_bits(seed, n_symbols * format.bits_per_symbol());
                let bb = dsp::modulate(&bits, format, baud_hz, rolloff, dsp::DEFAULT_SPS)?;
                let peak = bb.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
                Ok(Self { spec, baseband: Some(bb), peak })
            }
        }
    }

    pub fn spec(&self) -> &DataSignalSpec {
        &self.spec
    }

    pub fn baseband(&self) -> Option<&dsp::Baseband> {
        self.baseband.as_ref()
    }

    /// Complex modulation envelope p_dat(t) (W) around the data frequency.
    pub fn envelope_at(&self, t: f64) -> Complex64 {
        match (self.spec.mode, &self.baseband) {
            (DataMode::Sinusoid { .. }, _) => self.spec.tone_coefficient(),
            (DataMode::Complex { modulation_index, .. }, Some(bb)) => {
                bb.sample_at(t) * (modulation_index * self.spec.avg_power_w / self.peak)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn power_at(&self, t: f64) -> f64 {
        let w = 2.0 * PI * self.spec.frequency();
        self.spec.avg_power_w + (self.envelope_at(t) * Complex64::from_polar(1.0, w * t)).re
    }
}

/// Samples the data signal on `grid`. For complex modulation the residual
/// mean of the finite record is removed so the average power is exact.
pub fn synthesize_data_signal(spec: &DataSignalSpec, grid: GridSpec) -> Result<WaveformGrid> {
    let signal = DataSignal::new(*spec)?;
    let mut wave = WaveformGrid::from_fn(grid, |t| signal.power_at(t));
    if matches!(spec.mode, DataMode::Complex { .. }) {
        let offset = wave.mean() - spec.avg_power_w;
        wave.samples.iter_mut().for_each(|x| *x -= offset);
    }
    if let Some(min) = wave.samples.iter().copied().reduce(f64::min) {
        if min < -1e-15 * spec.avg_power_w.max(1e-300) {
            return Err(Error::InvalidSpec(format!("synthesized power goes negative ({min:e} W)")));
        }
    }
    Ok(wave)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn clock() -> PulseTrainSpec {
        PulseTrainSpec::default()
    }

    fn measured_fwhm(w: &WaveformGrid, period_samples: usize) -> f64 {
        // Pulse centred on sample 0 of the grid; search the first period.
        let x = &w.samples[..period_samples];
        let peak = x.iter().copied().fold(0.0, f64::max);
        let half = 0.5 * peak;
        let n = x.len();
        let idx = |k: isize| x[k.rem_euclid(n as isize) as usize];
        let mut right = 0.0;
        for k in 0..(n as isize / 2) {
            if idx(k) >= half && idx(k + 1) < half {
                right = k as f64 + (idx(k) - half) / (idx(k) - idx(k + 1));
                break;
            }
        }
        let mut left = 0.0;
        for k in 0..(n as isize / 2) {
            if idx(-k) >= half && idx(-k - 1) < half {
                left = k as f64 + (idx(-k) - half) / (idx(-k) - idx(-k - 1));
                break;
            }
        }
        (left + right) / w.sample_rate_hz
    }

    #[test]
    fn pulse_train_average_and_width() {
        for shape in [PulseShape::Gaussian, PulseShape::Sech2] {
            let spec = PulseTrainSpec { shape, ..clock() };
            let w = synthesize_pulse_train(&spec, GridSpec::periods(10e9, 2048, 4)).unwrap();
            assert_relative_eq!(w.mean(), 1e-3, max_relative = 1e-9);
            let fwhm = measured_fwhm(&w, 2048);
            assert!((fwhm - 2e-12).abs() < 0.01 * 2e-12, "{shape:?}: {fwhm:e}");
            assert!(w.samples.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn gaussian_peak_power() {
        // P̄·T/(σ√(2π)), σ = FWHM/2.3548.
        assert_relative_eq!(clock().peak_power(), 4.697_186_393_498_257e-2, max_relative = 1e-12);
    }

    #[test]
    fn rejects_full_duty_cycle() {
        let spec = PulseTrainSpec { fwhm_s: 100e-12, ..clock() };
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn average_power_invariant_under_shift() {
        let g = GridSpec::periods(10e9, 2048, 3);
        let a = synthesize_pulse_train(&clock(), g).unwrap();
        let b = synthesize_pulse_train(&clock(), g.with_start(37.3e-12)).unwrap();
        assert_relative_eq!(a.mean(), b.mean(), max_relative = 1e-12);
    }

    #[test]
    fn gaussian_harmonics_match_analytic_transform() {
        let w = synthesize_pulse_train(&clock(), GridSpec::periods(10e9, 2048, 2)).unwrap();
        let s = harmonics(&w, 10e9, 6).unwrap();
        assert_relative_eq!(s.dc, 1e-3, max_relative = 1e-9);
        let r1 = s.coeff(1).unwrap().norm() / 2e-3;
        let r4 = s.coeff(4).unwrap().norm() / 2e-3;
        assert_relative_eq!(r1, 0.998_577_130_307_835, max_relative = 1e-9);
        assert_relative_eq!(r4, 0.977_475_426_156_969, max_relative = 1e-9);
        for i in 1..=6 {
            let got = s.coeff(i).unwrap();
            assert!((got - clock().harmonic(i)).norm() < 1e-9 * 2e-3);
        }
    }

    #[test]
    fn sech2_harmonics_match_analytic_transform() {
        let spec = PulseTrainSpec { shape: PulseShape::Sech2, ..clock() };
        let w = synthesize_pulse_train(&spec, GridSpec::periods(10e9, 2048, 1)).unwrap();
        let s = harmonics(&w, 10e9, 6).unwrap();
        for i in 1..=6 {
            assert!((s.coeff(i).unwrap() - spec.harmonic(i)).norm() < 1e-9 * 2e-3);
        }
    }

    #[test]
    fn single_tone_identity() {
        let spec = DataSignalSpec::sinusoid(1557.4e-9, 2e-4, 1e9, 0.3);
        let w = synthesize_data_signal(&spec, GridSpec::periods(1e9, 256, 5)).unwrap();
        let s = harmonics(&w, 1e9, 4).unwrap();
        assert_relative_eq!(s.dc, 2e-4, max_relative = 1e-12);
        assert!((s.coeff(1).unwrap() - Complex64::new(0.3 * 2e-4, 0.0)).norm() < 1e-15);
        for i in 2..=4 {
            assert!(s.coeff(i).unwrap().norm() < 1e-16);
        }
    }

    #[test]
    fn modulation_index_half() {
        let spec = DataSignalSpec::sinusoid(1550e-9, 1e-4, 1e9, 0.5);
        let w = synthesize_data_signal(&spec, GridSpec::periods(1e9, 64, 2)).unwrap();
        let s = harmonics(&w, 1e9, 1).unwrap();
        assert_relative_eq!(s.coeff(1).unwrap().re, 0.5e-4, max_relative = 1e-12);
    }

    #[test]
    fn cw_limit_is_constant() {
        let spec = DataSignalSpec::sinusoid(1550e-9, 1e-4, 1e9, 0.0);
        let w = synthesize_data_signal(&spec, GridSpec::periods(1e9, 64, 2)).unwrap();
        assert!(w.samples.iter().all(|&p| p == 1e-4));
    }

    #[test]
    fn dirac_comb_limit() {
        let spec = PulseTrainSpec { fwhm_s: 1e-15, ..clock() };
        for i in 1..=6 {
            assert_relative_eq!(spec.harmonic(i).norm(), 2e-3, max_relative = 1e-6);
        }
    }

    #[test]
    fn non_integer_period_count_is_leakage() {
        let w = synthesize_pulse_train(&clock(), GridSpec { sample_rate_hz: 20.48e12, n_samples: 3000, t0_s: 0.0 })
            .unwrap();
        assert!(matches!(harmonics(&w, 10e9, 4), Err(Error::Leakage { .. })));
    }

    #[test]
    fn out_of_range_harmonic() {
        let s = clock().analytic_spectrum(6);
        assert!(matches!(s.coeff(7), Err(Error::HarmonicOutOfRange { index: 7, max: 6 })));
        assert!(s.coeff(0).is_err());
    }

    #[test]
    fn round_trip_reconstruction() {
        let g = GridSpec::periods(10e9, 2048, 1);
        let w = synthesize_pulse_train(&clock(), g).unwrap();
        let s = harmonics(&w, 10e9, 160).unwrap();
        let peak = clock().peak_power();
        for (k, &x) in w.samples.iter().enumerate().step_by(7) {
            assert!((s.reconstruct(w.time(k)) - x).abs() < 1e-6 * peak);
        }
        assert_relative_eq!(s.mean_square(), w.mean_square(), max_relative = 1e-8);
    }

    #[test]
    fn qpsk_signal_is_non_negative_with_exact_mean() {
        let spec = DataSignalSpec {
            wavelength_m: 1550e-9,
            avg_power_w: 1e-4,
            mode: DataMode::Complex {
                format: ModFormat::Qpsk,
                baud_hz: 256e6,
                rf_carrier_hz: 0.75e9,
                rolloff: 0.35,
                modulation_index: 1.0,
                n_symbols: 256,
                seed: 1,
            },
        };
        let grid = GridSpec { sample_rate_hz: 16e9, n_samples: 16_384, t0_s: 0.0 };
        let w = synthesize_data_signal(&spec, grid).unwrap();
        assert_relative_eq!(w.mean(), 1e-4, max_relative = 1e-9);
        assert!(w.samples.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn complex_mode_rejects_low_carrier() {
        let spec = DataSignalSpec {
            wavelength_m: 1550e-9,
            avg_power_w: 1e-4,
            mode: DataMode::Complex {
                format: ModFormat::Qpsk,
                baud_hz: 1e9,
                rf_carrier_hz: 0.5e9,
                rolloff: 0.35,
                modulation_index: 1.0,
                n_symbols: 16,
                seed: 1,
            },
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spectrum_csv_layout() {
        let mut buf = Vec::new();
        clock().analytic_spectrum(2).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,freq_Hz,re_W,im_W,abs_W");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("2,2e10,"));
    }
}
