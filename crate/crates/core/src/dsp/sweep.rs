//! End-to-end EVM of up-converted QPSK / 16-QAM signals.
//!
//! The data signal is an RRC-shaped constellation on an RF carrier `f_c`
//! intensity-modulating the optical data input. The mixer output is taken at
//! the lower product `i·f_ck − f_c`, whose envelope is the conjugate of the
//! input envelope filtered by the mixer transfer. Output noise is white in the
//! port-J modulation domain.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{add_complex_noise, bin_freq, demodulate_and_evm, fec_threshold, fft, ifft, prbs_bits, ModFormat};
use crate::rf_chain::{downconvert, ChainSpec, Envelope};
use crate::signals::{fmt, DataMode, DataSignalSpec, HarmonicSpectrum, PulseTrainSpec};
use crate::smallsignal::{upconverted_power, Architecture, DataTone, Mode, OperatingPoint};
use crate::timedomain::{Integrator, MixerSetup};
use crate::{Error, Result};

/// Data power of the input reference; its EVM does not depend on it.
const INPUT_REFERENCE_POWER_W: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum MixerModel {
    /// Small-signal transfer applied across the signal spectrum.
    SmallSignal { mode: Mode },
    /// Rate-equation oracle; `base` supplies everything but the data signal.
    TimeDomain { base: Box<MixerSetup>, samples_per_period: usize },
}

/// Operating point and input powers of one architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchDrive {
    pub op: OperatingPoint,
    pub clock_avg_power_w: f64,
    pub data_avg_power_w: f64,
}

/// Everything an EVM point needs besides its scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EvmSetup {
    /// Pulse shape and rate; the average power comes from each `ArchDrive`.
    pub clock: PulseTrainSpec,
    pub switching: Option<ArchDrive>,
    pub modulation: Option<ArchDrive>,
    pub modulation_index: f64,
    pub carrier_hz: f64,
    pub rolloff: f64,
    pub n_symbols: usize,
    /// Samples per symbol of the received record.
    pub sps: usize,
    pub seed: u64,
    pub chain: ChainSpec,
    /// One-sided noise density of the port-J modulation envelope, W²/Hz.
    pub noise_psd: f64,
    pub mixer: MixerModel,
}

/// One EVM point. `arch = None` is the input reference measured at `f_c`
/// without the mixer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvmScenario {
    pub format: ModFormat,
    pub baud_hz: f64,
    pub arch: Option<Architecture>,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseAnchor {
    pub format: ModFormat,
    pub baud_hz: f64,
    pub arch: Architecture,
    pub index: usize,
    pub evm_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvmReport {
    pub format: ModFormat,
    pub baud_hz: f64,
    /// "switching", "modulation" or "input".
    pub arch: String,
    pub f_target_hz: f64,
    pub evm_rms_pct: f64,
    pub ber: f64,
    pub n_symbols: usize,
    pub rolloff: f64,
    pub fec_threshold_pct: f64,
    pub fec_pass: bool,
    pub constellation: Vec<Complex64>,
    pub reference: Vec<Complex64>,
}

impl EvmSetup {
    fn drive(&self, arch: Architecture) -> Result<&ArchDrive> {
        match arch {
            Architecture::Switching => self.switching.as_ref(),
            Architecture::Modulation => self.modulation.as_ref(),
        }
        .ok_or_else(|| Error::InvalidSpec(format!("no operating point for {arch}")))
    }

    fn check(&self, sc: &EvmScenario) -> Result<()> {
        let period = self.n_symbols as f64 / sc.baud_hz;
        let cycles = |f: f64| {
            let c = f * period;
            (c - c.round()).abs() < 1e-6 * c.max(1.0)
        };
        if !cycles(self.carrier_hz) || !cycles(self.clock.rep_rate_hz) {
            return Err(Error::InvalidSpec(format!(
                "{} symbols at {:e} Bd do not span whole carrier and clock periods",
                self.n_symbols, sc.baud_hz
            )));
        }
        if sc.arch.is_some() && sc.index == 0 {
            return Err(Error::InvalidSpec("harmonic index must be >= 1".into()));
        }
        Ok(())
    }

    pub fn target_hz(&self, sc: &EvmScenario) -> f64 {
        match sc.arch {
            Some(_) => sc.index as f64 * self.clock.rep_rate_hz - self.carrier_hz,
            None => self.carrier_hz,
        }
    }

    fn data_avg(&self, sc: &EvmScenario) -> Result<f64> {
        match sc.arch {
            Some(arch) => Ok(self.drive(arch)?.data_avg_power_w),
            None => Ok(INPUT_REFERENCE_POWER_W),
        }
    }

    fn data_spec(&self, sc: &EvmScenario) -> Result<DataSignalSpec> {
        Ok(DataSignalSpec {
            wavelength_m: 1557.4e-9,
            avg_power_w: self.data_avg(sc)?,
            mode: DataMode::Complex {
                format: sc.format,
                baud_hz: sc.baud_hz,
                rf_carrier_hz: self.carrier_hz,
                rolloff: self.rolloff,
                modulation_index: self.modulation_index,
                n_symbols: self.n_symbols,
                seed: (self.seed & 0x7fff) as u32,
            },
        })
    }

    fn bits(&self, format: ModFormat) -> Vec<u8> {
        prbs_bits((self.seed & 0x7fff) as u32, self.n_symbols * format.bits_per_symbol())
    }

    /// Data modulation envelope p_dat(t) at `sps` samples per symbol.
    fn data_envelope(&self, sc: &EvmScenario) -> Result<Vec<Complex64>> {
        // Same shaping and scaling as the optical stimulus.
        let fine = self.data_spec(sc)?.build()?;
        let bb = fine.baseband().ok_or_else(|| Error::InvalidSpec("complex data expected".into()))?;
        let fs = self.sps as f64 * sc.baud_hz;
        let mut x: Vec<Complex64> = (0..self.n_symbols * self.sps).map(|k| fine.envelope_at(k as f64 / fs)).collect();
        if bb.sps % self.sps == 0 {
            let step = bb.sps / self.sps;
            let scale = fine.envelope_at(0.0) / bb.samples[0];
            x = bb.samples.iter().step_by(step).map(|v| v * scale).collect();
        }
        Ok(x)
    }

    /// Complex envelope (in the port-J modulation domain, W) of the product
    /// at the scenario's target, noise-free.
    fn mixer_output(&self, sc: &EvmScenario) -> Result<Envelope> {
        let fs = self.sps as f64 * sc.baud_hz;
        let center = self.target_hz(sc);
        let samples = match (sc.arch, &self.mixer) {
            (None, _) => self.data_envelope(sc)?,
            (Some(arch), MixerModel::SmallSignal { mode }) => {
                let drive = self.drive(arch)?;
                let spectrum = self.clock.with_avg_power(drive.clock_avg_power_w).analytic_spectrum(sc.index.max(1));
                let mut a = self.data_envelope(sc)?;
                let n = a.len();
                fft(&mut a);
                for (k, v) in a.iter_mut().enumerate() {
                    let d = bin_freq(k, n, fs);
                    let t = transfer(&drive.op, &spectrum, drive.data_avg_power_w, self.carrier_hz + d, sc.index, *mode)?;
                    *v *= t.conj();
                }
                ifft(&mut a);
                // Physical orientation around the product frequency.
                a.iter().map(|v| v.conj()).collect()
            }
            (Some(arch), MixerModel::TimeDomain { base, samples_per_period }) => {
                let mut setup = (**base).clone();
                setup.arch = arch;
                setup.clock = self.clock.with_avg_power(self.drive(arch)?.clock_avg_power_w);
                setup.data = self.data_spec(sc)?;
                simulate_product(&setup, *samples_per_period, center, self.n_symbols as f64 / sc.baud_hz, fs)?
            }
        };
        Ok(Envelope { center_hz: center, sample_rate_hz: fs, samples })
    }

    fn scenario_seed(&self, sc: &EvmScenario) -> u64 {
        let a = match sc.arch {
            None => 0u64,
            Some(Architecture::Switching) => 1,
            Some(Architecture::Modulation) => 2,
        };
        let f = match sc.format {
            ModFormat::Qpsk => 0u64,
            ModFormat::Qam16 => 1,
        };
        self.seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add((sc.baud_hz as u64) ^ (a << 60) ^ (f << 58) ^ ((sc.index as u64) << 48))
    }
}

/// p_J / p_dat* for a data tone at `freq_hz`.
fn transfer(
    op: &OperatingPoint,
    clock: &HarmonicSpectrum,
    data_avg: f64,
    freq_hz: f64,
    index: usize,
    mode: Mode,
) -> Result<Complex64> {
    let tone = DataTone { freq_hz, avg_power_w: data_avg, coeff: Complex64::new(1.0, 0.0) };
    Ok(upconverted_power(op, clock, &tone, index, mode)?.p_j)
}

/// Quadratic B-spline over three clock periods (transform sinc³).
fn bspline2(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.5 {
        0.75 - a * a
    } else if a < 1.5 {
        0.5 * (1.5 - a) * (1.5 - a)
    } else {
        0.0
    }
}

/// Runs the oracle over one record period and demodulates the port-J power
/// at `center_hz` into an envelope at `fs_out`.
fn simulate_product(
    setup: &MixerSetup,
    samples_per_period: usize,
    center_hz: f64,
    record_s: f64,
    fs_out: f64,
) -> Result<Vec<Complex64>> {
    let f_ck = setup.clock.rep_rate_hz;
    let t_ck = 1.0 / f_ck;
    let m = (record_s * f_ck).round() as usize;
    let n_out = (record_s * fs_out).round() as usize;
    if m < n_out {
        return Err(Error::InvalidSpec("clock rate below the envelope sample rate".into()));
    }
    let dt = t_ck / samples_per_period as f64;
    let lifetime = setup.soa1.carrier_lifetime_s.max(setup.soa2.carrier_lifetime_s);
    let lead_periods = ((25.0 * lifetime * f_ck).ceil() as usize).max(16);
    let lead = lead_periods * samples_per_period;
    let mut integ = Integrator::new(setup, dt, -(lead as f64) * dt)?;
    for k in 0..lead {
        integ.step()?;
        integ.t = (k as f64 + 1.0 - lead as f64) * dt;
    }
    integ.t = 0.0;
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    let w = 2.0 * PI * center_hz;
    let total = m * samples_per_period;
    for n in 0..total {
        let s = integ.sample()?;
        let t = n as f64 * dt;
        let phase = (w * t).rem_euclid(2.0 * PI);
        let v = s.port_j * Complex64::from_polar(1.0, -phase);
        let x = t / t_ck;
        let c = x.round() as i64;
        for j in (c - 1)..=(c + 1) {
            let wt = bspline2(x - j as f64);
            if wt > 0.0 {
                z[j.rem_euclid(m as i64) as usize] += v * wt;
            }
        }
        integ.step()?;
        integ.t = (n + 1) as f64 * dt;
    }
    let norm = 2.0 / samples_per_period as f64;
    z.iter_mut().for_each(|v| *v *= norm);
    fft(&mut z);
    let mut out = vec![Complex64::new(0.0, 0.0); n_out];
    for k in 0..n_out {
        let d = bin_freq(k, n_out, fs_out);
        let src = (d * record_s).round() as i64;
        let x = d / f_ck;
        let droop = if x == 0.0 { 1.0 } else { ((PI * x).sin() / (PI * x)).powi(3) };
        out[k] = z[src.rem_euclid(m as i64) as usize] / droop * (n_out as f64 / m as f64);
    }
    ifft(&mut out);
    Ok(out)
}

/// Runs one scenario through mixer, noise, chain and demodulator.
pub fn evm_point(setup: &EvmSetup, sc: &EvmScenario) -> Result<EvmReport> {
    setup.check(sc)?;
    let mut env = setup.mixer_output(sc)?;
    if sc.arch.is_some() && setup.noise_psd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(setup.scenario_seed(sc));
        add_complex_noise(&mut env.samples, setup.noise_psd * env.sample_rate_hz, &mut rng);
    }
    let d = downconvert(&env, &setup.chain)?;
    if let Some(w) = d.warning {
        return Err(Error::InvalidSpec(w));
    }
    // Lower product: undo the spectral inversion.
    let rx: Vec<Complex64> = if sc.arch.is_some() {
        d.envelope.samples.iter().map(|v| v.conj()).collect()
    } else {
        d.envelope.samples
    };
    let bits = setup.bits(sc.format);
    let dm = demodulate_and_evm(&rx, setup.sps, setup.rolloff, &bits, sc.format)?;
    let thr = fec_threshold(sc.format);
    Ok(EvmReport {
        format: sc.format,
        baud_hz: sc.baud_hz,
        arch: sc.arch.map(|a| a.name().to_string()).unwrap_or_else(|| "input".into()),
        f_target_hz: setup.target_hz(sc),
        evm_rms_pct: dm.evm_rms_pct,
        ber: dm.ber,
        n_symbols: dm.n_symbols,
        rolloff: setup.rolloff,
        fec_threshold_pct: thr,
        fec_pass: dm.evm_rms_pct <= thr,
        constellation: dm.constellation,
        reference: dm.reference,
    })
}

/// Runs every scenario in order.
pub fn evm_sweep(setup: &EvmSetup, scenarios: &[EvmScenario]) -> Result<Vec<EvmReport>> {
    scenarios.iter().map(|sc| evm_point(setup, sc)).collect()
}

/// Noise density that puts the anchor scenario at its EVM.
pub fn calibrate_noise_psd(setup: &EvmSetup, anchor: &NoiseAnchor) -> Result<f64> {
    let sc = EvmScenario { format: anchor.format, baud_hz: anchor.baud_hz, arch: Some(anchor.arch), index: anchor.index };
    let quiet = EvmSetup { noise_psd: 0.0, ..setup.clone() };
    let floor = evm_point(&quiet, &sc)?.evm_rms_pct;
    if floor >= anchor.evm_pct {
        return Err(Error::Domain(format!(
            "noise-free EVM {floor:.2}% already exceeds the anchor {:.2}%",
            anchor.evm_pct
        )));
    }
    quiet.check(&sc)?;
    let env = quiet.mixer_output(&sc)?;
    let p_sig = env.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / env.samples.len() as f64;
    let excess = (anchor.evm_pct / 100.0).powi(2) - (floor / 100.0).powi(2);
    Ok(excess * p_sig / anchor.baud_hz)
}

/// CSV columns: format, baud_Hz, arch, f_target_Hz, evm_rms_pct, ber,
/// n_symbols, rolloff, fec_threshold_pct, fec_pass.
pub fn write_evm_csv<W: Write>(reports: &[EvmReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "format",
        "baud_Hz",
        "arch",
        "f_target_Hz",
        "evm_rms_pct",
        "ber",
        "n_symbols",
        "rolloff",
        "fec_threshold_pct",
        "fec_pass",
    ])?;
    for r in reports {
        w.write_record([
            r.format.name().to_string(),
            fmt(r.baud_hz),
            r.arch.clone(),
            fmt(r.f_target_hz),
            format!("{:.4}", r.evm_rms_pct),
            fmt(r.ber),
            r.n_symbols.to_string(),
            format!("{}", r.rolloff),
            format!("{:.4}", r.fec_threshold_pct),
            r.fec_pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV columns: I, Q, ref_I, ref_Q.
pub fn write_constellation_csv<W: Write>(report: &EvmReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["I", "Q", "ref_I", "ref_Q"])?;
    for (r, s) in report.constellation.iter().zip(&report.reference) {
        w.write_record([fmt(r.re), fmt(r.im), fmt(s.re), fmt(s.im)])?;
    }
    w.flush()?;
    Ok(())
}
