//! Photodetection and electrical measurement chain.
//!
//! Optical modulation coefficients are turned into electrical powers with
//! `P = ½·|r·p|²·R` and pushed through fixed gains and losses. The conversion
//! gain is always reported referenced to the interferometer ports, so the
//! chain's own gain is removed again.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{bin_freq, fft, ifft};
use crate::signals::fmt;
use crate::units::{db_to_amplitude, db_to_lin, lin_to_db, w_to_dbm, wavelength_span_to_hz};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSpec {
    pub obpf_center_m: f64,
    /// −3 dB width of the optical filter.
    pub obpf_bw_m: f64,
    /// Raised-cosine transition width as a fraction of the −3 dB width.
    pub obpf_edge_fraction: f64,
    /// Fraction of the light sent to the detector branch.
    pub tap_ratio: f64,
    /// Combined loss of the optical filter and the tap coupler.
    pub optical_loss_db: f64,
    pub responsivity_a_per_w: f64,
    /// Largest modulation amplitude the detector handles linearly.
    pub detector_max_w: f64,
    pub amp1_gain_db: f64,
    pub mixer_conv_loss_db: f64,
    /// Local oscillator; `None` places it `if_hz` below the RF carrier.
    pub lo_freq_hz: Option<f64>,
    pub lo_power_dbm: f64,
    pub if_hz: f64,
    pub elec_filter_bw_hz: f64,
    pub amp2_gain_db: f64,
    pub load_ohm: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            obpf_center_m: 1557.4e-9,
            obpf_bw_m: 0.7e-9,
            obpf_edge_fraction: 0.2,
            tap_ratio: 0.9,
            optical_loss_db: 7.5,
            responsivity_a_per_w: 0.71,
            detector_max_w: 10e-3,
            amp1_gain_db: 33.0,
            mixer_conv_loss_db: 10.0,
            lo_freq_hz: None,
            lo_power_dbm: 13.0,
            if_hz: 450e6,
            elec_filter_bw_hz: 1e9,
            amp2_gain_db: 40.0,
            load_ohm: 50.0,
        }
    }
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.optical_loss_db,
            self.amp1_gain_db,
            self.mixer_conv_loss_db,
            self.amp2_gain_db,
            self.lo_power_dbm,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("chain gains and losses must be finite".into()));
        }
        if !(self.responsivity_a_per_w > 0.0) {
            return Err(Error::InvalidSpec("responsivity must be > 0".into()));
        }
        if !(self.load_ohm > 0.0 && self.elec_filter_bw_hz > 0.0 && self.obpf_bw_m > 0.0) {
            return Err(Error::InvalidSpec("load, filter and optical bandwidths must be > 0".into()));
        }
        if !(self.tap_ratio > 0.0 && self.tap_ratio <= 1.0) {
            return Err(Error::InvalidSpec("tap ratio must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.obpf_edge_fraction) {
            return Err(Error::InvalidSpec("obpf edge fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn obpf_bw_hz(&self) -> f64 {
        wavelength_span_to_hz(self.obpf_bw_m, self.obpf_center_m)
    }

    pub fn lo_for(&self, rf_hz: f64) -> f64 {
        self.lo_freq_hz.unwrap_or(rf_hz - self.if_hz)
    }

    /// Power gain in dB from the squared optical modulation amplitude (W²)
    /// to the electrical power after the first amplifier (W).
    pub fn detection_gain_db(&self) -> f64 {
        let r = self.responsivity_a_per_w * db_to_lin(-self.optical_loss_db);
        lin_to_db(0.5 * r * r * self.load_ohm) + self.amp1_gain_db
    }
}

/// Power transmission of the optical filter at `offset_hz` from its centre.
pub fn obpf_transmission(offset_hz: f64, spec: &ChainSpec) -> f64 {
    let half = 0.5 * spec.obpf_bw_hz();
    let e = spec.obpf_edge_fraction;
    let f = offset_hz.abs();
    if e == 0.0 {
        return if f <= half { 1.0 } else { 0.0 };
    }
    let f1 = half * (1.0 - e);
    let f2 = half * (1.0 + e);
    if f <= f1 {
        1.0
    } else if f >= f2 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (f - f1) / (f2 - f1)).cos())
    }
}

/// Filters field components given as (offset from centre, amplitude).
pub fn obpf(components: &[(f64, Complex64)], spec: &ChainSpec) -> Vec<(f64, Complex64)> {
    components.iter().map(|&(f, a)| (f, a * obpf_transmission(f, spec).sqrt())).collect()
}

/// Scaling of an intensity-modulation tone at `f_mod` by the (symmetric)
/// optical filter centred on the carrier.
pub fn obpf_tone_factor(f_mod: f64, spec: &ChainSpec) -> f64 {
    obpf_transmission(f_mod, spec).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detected {
    /// Modulation photocurrent coefficient, A.
    pub current: Complex64,
    /// Electrical power into the load, W.
    pub power_w: f64,
    pub clipped: bool,
}

/// Photodetects an optical modulation coefficient `p` (after the optical
/// loss of the chain).
pub fn photodetect(p: Complex64, spec: &ChainSpec) -> Detected {
    let p = p * db_to_lin(-spec.optical_loss_db);
    let clipped = p.norm() > spec.detector_max_w;
    let current = p * spec.responsivity_a_per_w;
    Detected { current, power_w: 0.5 * current.norm_sqr() * spec.load_ohm, clipped }
}

/// A tone observed at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub freq_hz: f64,
    /// Optical modulation coefficient, W.
    pub coeff: Complex64,
}

/// Electrical power (dBm) of `tone` after detection and the first
/// amplifier.
pub fn measured_dbm(tone: &Tone, spec: &ChainSpec) -> f64 {
    let d = photodetect(tone.coeff, spec);
    w_to_dbm(d.power_w) + spec.amp1_gain_db
}

/// Electrical power referenced back to the interferometer port.
pub fn referenced_dbm(measured_dbm: f64, spec: &ChainSpec) -> f64 {
    measured_dbm - spec.detection_gain_db() - 30.0
}

/// Conversion gain from chain measurements of the input tone at f_dat and the
/// output tone at the product frequency.
pub fn measure_cg(input: Option<&Tone>, output: Option<&Tone>, spec: &ChainSpec) -> Result<f64> {
    let input = input.ok_or(Error::MissingTone(f64::NAN))?;
    let output = output.ok_or(Error::MissingTone(f64::NAN))?;
    if input.coeff.norm() == 0.0 {
        return Err(Error::MissingTone(input.freq_hz));
    }
    if output.coeff.norm() == 0.0 {
        return Err(Error::MissingTone(output.freq_hz));
    }
    Ok(referenced_dbm(measured_dbm(output, spec), spec) - referenced_dbm(measured_dbm(input, spec), spec))
}

/// Uniformly sampled complex envelope around `center_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub center_hz: f64,
    pub sample_rate_hz: f64,
    pub samples: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Downconverted {
    pub envelope: Envelope,
    pub lo_hz: f64,
    /// Set when the IF falls outside the electrical filter.
    pub warning: Option<String>,
}

/// Ideal mixer with conversion loss followed by a brick-wall low-pass of
/// width `elec_filter_bw_hz`. A high-side LO inverts the spectrum, which is
/// undone by conjugation so the envelope keeps its orientation.
pub fn downconvert(env: &Envelope, spec: &ChainSpec) -> Result<Downconverted> {
    spec.validate()?;
    let lo = spec.lo_for(env.center_hz);
    let if_hz = (env.center_hz - lo).abs();
    let gain = db_to_amplitude(-spec.mixer_conv_loss_db);
    let mut x: Vec<Complex64> = env.samples.iter().map(|v| v * gain).collect();
    if if_hz >= spec.elec_filter_bw_hz {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        return Ok(Downconverted {
            envelope: Envelope { center_hz: if_hz, sample_rate_hz: env.sample_rate_hz, samples: x },
            lo_hz: lo,
            warning: Some(format!(
                "IF {if_hz:e} Hz outside the {:e} Hz electrical filter; signal removed",
                spec.elec_filter_bw_hz
            )),
        });
    }
    let inverted = lo > env.center_hz;
    let n = x.len();
    fft(&mut x);
    for (k, v) in x.iter_mut().enumerate() {
        let d = bin_freq(k, n, env.sample_rate_hz);
        let f_if = if inverted { if_hz - d } else { if_hz + d };
        if !(f_if > 0.0 && f_if < spec.elec_filter_bw_hz) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    ifft(&mut x);
    Ok(Downconverted {
        envelope: Envelope { center_hz: if_hz, sample_rate_hz: env.sample_rate_hz, samples: x },
        lo_hz: lo,
        warning: None,
    })
}

/// Power at each node of the chain for an optical modulation tone.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRow {
    pub stage: &'static str,
    pub power_dbm: f64,
}

pub fn stage_report(tone: &Tone, spec: &ChainSpec) -> Vec<StageRow> {
    let optical = w_to_dbm(tone.coeff.norm());
    let mut rows = vec![
        StageRow { stage: "mzi_output_optical", power_dbm: optical },
        StageRow { stage: "monitor_tap_optical", power_dbm: optical + lin_to_db(1.0 - spec.tap_ratio) },
        StageRow { stage: "detector_input_optical", power_dbm: optical - spec.optical_loss_db },
    ];
    let pd = w_to_dbm(photodetect(tone.coeff, spec).power_w);
    let amp1 = pd + spec.amp1_gain_db;
    let mixer = amp1 - spec.mixer_conv_loss_db;
    let if_hz = (tone.freq_hz - spec.lo_for(tone.freq_hz)).abs();
    let filtered = if if_hz < spec.elec_filter_bw_hz { mixer } else { f64::NEG_INFINITY };
    rows.extend([
        StageRow { stage: "photodetector_electrical", power_dbm: pd },
        StageRow { stage: "amp1_output", power_dbm: amp1 },
        StageRow { stage: "mixer_output", power_dbm: mixer },
        StageRow { stage: "if_filter_output", power_dbm: filtered },
        StageRow { stage: "amp2_output", power_dbm: filtered + spec.amp2_gain_db },
    ]);
    rows
}

/// CSV columns: stage, power_dBm.
pub fn write_stage_csv<W: Write>(rows: &[StageRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "power_dBm"])?;
    for r in rows {
        w.write_record([r.stage.to_string(), fmt(r.power_dbm)])?;
    }
    w.flush()?;
    Ok(())
}
