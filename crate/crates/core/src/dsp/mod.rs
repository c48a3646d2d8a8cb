//! QPSK / 16-QAM generation, root-raised-cosine shaping, data-aided
//! demodulation and EVM.
//!
//! Shaped waveforms are circular: a record of `n` symbols repeats with period
//! `n / baud`, so every filter is applied exactly in the frequency domain.

mod sweep;

pub use sweep::{
    calibrate_noise_psd, evm_point, evm_sweep, write_constellation_csv, write_evm_csv, ArchDrive, EvmReport, EvmScenario, EvmSetup,
    MixerModel, NoiseAnchor,
};

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Samples per symbol of generated stimuli.
pub const DEFAULT_SPS: usize = 16;
pub const DEFAULT_ROLLOFF: f64 = 0.35;
/// Pre-FEC bit error rate limit.
pub const FEC_BER: f64 = 3.8e-3;
pub const MIN_EVM_SYMBOLS: usize = 1000;
pub const SYNC_THRESHOLD: f64 = 0.5;

const FEC_MC_SYMBOLS: usize = 1 << 20;
const FEC_MC_SEED: u64 = 0x5eed_fec0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModFormat {
    Qpsk,
    Qam16,
}

impl ModFormat {
    pub const ALL: [ModFormat; 2] = [ModFormat::Qpsk, ModFormat::Qam16];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModFormat::Qpsk => 2,
            ModFormat::Qam16 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModFormat::Qpsk => "qpsk",
            ModFormat::Qam16 => "qam16",
        }
    }

    /// Reference constellation indexed by the symbol's bit pattern (MSB
    /// first), unit average energy.
    pub fn constellation(self) -> Vec<Complex64> {
        (0..1usize << self.bits_per_symbol())
            .map(|v| {
                let bits: Vec<u8> =
                    (0..self.bits_per_symbol()).rev().map(|k| ((v >> k) & 1) as u8).collect();
                self.map_symbol(&bits)
            })
            .collect()
    }

    fn map_symbol(self, bits: &[u8]) -> Complex64 {
        match self {
            ModFormat::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                Complex64::new(s * (1.0 - 2.0 * bits[0] as f64), s * (1.0 - 2.0 * bits[1] as f64))
            }
            ModFormat::Qam16 => {
                let s = 1.0 / 10f64.sqrt();
                Complex64::new(s * gray4(bits[0], bits[1]), s * gray4(bits[2], bits[3]))
            }
        }
    }

    /// Gray-coded bits to symbols.
    pub fn map(self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let b = self.bits_per_symbol();
        if bits.len() % b != 0 {
            return Err(Error::InvalidSpec(format!(
                "{} bits is not a multiple of {b} bits per symbol",
                bits.len()
            )));
        }
        Ok(bits.chunks(b).map(|c| self.map_symbol(c)).collect())
    }

    /// Hard decision back to bits.
    pub fn demap(self, z: Complex64, out: &mut Vec<u8>) {
        match self {
            ModFormat::Qpsk => {
                out.push((z.re < 0.0) as u8);
                out.push((z.im < 0.0) as u8);
            }
            ModFormat::Qam16 => {
                let s = 10f64.sqrt();
                let (a, b) = gray4_inv(z.re * s);
                let (c, d) = gray4_inv(z.im * s);
                out.extend_from_slice(&[a, b, c, d]);
            }
        }
    }
}

impl std::fmt::Display for ModFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// 00 → −3, 01 → −1, 11 → +1, 10 → +3.
fn gray4(b0: u8, b1: u8) -> f64 {
    match (b0, b1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

fn gray4_inv(x: f64) -> (u8, u8) {
    if x < -2.0 {
        (0, 0)
    } else if x < 0.0 {
        (0, 1)
    } else if x < 2.0 {
        (1, 1)
    } else {
        (1, 0)
    }
}

/// PRBS-15 (x¹⁵ + x¹⁴ + 1). A zero seed is replaced by 1.
pub fn prbs_bits(seed: u32, n: usize) -> Vec<u8> {
    let mut state = seed & 0x7fff;
    if state == 0 {
        state = 1;
    }
    (0..n)
        .map(|_| {
            let bit = ((state >> 14) ^ (state >> 13)) & 1;
            state = ((state << 1) | bit) & 0x7fff;
            bit as u8
        })
        .collect()
}

/// Root-raised-cosine amplitude response at frequency `f` for symbol rate
/// `baud`, unity in the passband.
pub fn rrc_response(f: f64, baud: f64, rolloff: f64) -> f64 {
    let f = f.abs() / baud;
    let f1 = (1.0 - rolloff) / 2.0;
    let f2 = (1.0 + rolloff) / 2.0;
    if f <= f1 {
        1.0
    } else if f >= f2 {
        0.0
    } else {
        (0.5 * (1.0 + (PI / rolloff * (f - f1)).cos())).sqrt()
    }
}

/// Time-domain RRC taps spanning `span` symbols, unit energy.
pub fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    let n = span * sps + 1;
    let mid = (n / 2) as f64;
    let b = rolloff;
    let mut h: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 - mid) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 - b + 4.0 * b / PI
            } else if b > 0.0 && (t.abs() - 1.0 / (4.0 * b)).abs() < 1e-9 {
                b / 2f64.sqrt() * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                ((PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos())
                    / (PI * t * (1.0 - (4.0 * b * t).powi(2)))
            }
        })
        .collect();
    let e = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    h.iter_mut().for_each(|x| *x /= e);
    h
}

/// Signed frequency of FFT bin `k` for an `n`-point transform at rate `fs`.
pub fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k * fs / n as f64
}

pub fn fft(x: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(x.len()).process(x);
}

/// Inverse FFT including the 1/n factor.
pub fn ifft(x: &mut [Complex64]) {
    let n = x.len();
    FftPlanner::new().plan_fft_inverse(n).process(x);
    let s = 1.0 / n as f64;
    x.iter_mut().for_each(|v| *v *= s);
}

/// Applies the RRC response circularly, scaled so that RRC·RRC has unit
/// amplitude at the symbol instants.
fn rrc_filter(x: &mut [Complex64], sps: usize, rolloff: f64) {
    let n = x.len();
    fft(x);
    let g = (sps as f64).sqrt();
    for (k, v) in x.iter_mut().enumerate() {
        *v *= g * rrc_response(bin_freq(k, n, sps as f64), 1.0, rolloff);
    }
    ifft(x);
}

/// A circular, RRC-shaped complex baseband record.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseband {
    pub format: ModFormat,
    pub baud_hz: f64,
    pub rolloff: f64,
    pub sps: usize,
    pub bits: Vec<u8>,
    pub symbols: Vec<Complex64>,
    /// Unit average power samples at `sps·baud`.
    pub samples: Vec<Complex64>,
}

impl Baseband {
    pub fn sample_rate(&self) -> f64 {
        self.sps as f64 * self.baud_hz
    }

    pub fn period(&self) -> f64 {
        self.symbols.len() as f64 / self.baud_hz
    }

    /// Periodic Catmull-Rom interpolation of the samples.
    pub fn sample_at(&self, t: f64) -> Complex64 {
        let n = self.samples.len();
        let x = (t * self.sample_rate()).rem_euclid(n as f64);
        let k = x.floor() as usize % n;
        let u = x - x.floor();
        let at = |d: isize| self.samples[(k as isize + d).rem_euclid(n as isize) as usize];
        let (p0, p1, p2, p3) = (at(-1), at(0), at(1), at(2));
        let u2 = u * u;
        let u3 = u2 * u;
        (p1 * 2.0 + (p2 - p0) * u + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * u2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * u3) * 0.5
    }
}

/// Maps and RRC-shapes `bits`.
pub fn modulate(bits: &[u8], format: ModFormat, baud_hz: f64, rolloff: f64, sps: usize) -> Result<Baseband> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(Error::InvalidSpec(format!("rolloff {rolloff} outside [0, 1]")));
    }
    if sps < 2 {
        return Err(Error::InvalidSpec("at least 2 samples per symbol are required".into()));
    }
    if !(baud_hz > 0.0) {
        return Err(Error::InvalidSpec("baud must be > 0".into()));
    }
    let symbols = format.map(bits)?;
    if symbols.is_empty() {
        return Err(Error::InvalidSpec("no symbols to modulate".into()));
    }
    let mut x = vec![Complex64::new(0.0, 0.0); symbols.len() * sps];
    for (k, s) in symbols.iter().enumerate() {
        x[k * sps] = *s;
    }
    rrc_filter(&mut x, sps, rolloff);
    let p = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
    let g = 1.0 / p.sqrt();
    x.iter_mut().for_each(|v| *v *= g);
    Ok(Baseband { format, baud_hz, rolloff, sps, bits: bits.to_vec(), symbols, samples: x })
}

/// Data-aided demodulation result.
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub evm_rms_pct: f64,
    pub ber: f64,
    pub n_symbols: usize,
    /// Received symbols after the least-squares complex scale.
    pub constellation: Vec<Complex64>,
    pub reference: Vec<Complex64>,
    /// Peak normalised correlation used for synchronisation.
    pub sync_peak: f64,
}

/// Matched-filters `rx` (circular, `sps` samples per symbol), recovers symbol
/// timing and lag against the reference, normalises by one least-squares
/// complex scale and computes EVM and hard-decision BER.
pub fn demodulate_and_evm(
    rx: &[Complex64],
    sps: usize,
    rolloff: f64,
    reference_bits: &[u8],
    format: ModFormat,
) -> Result<Demodulated> {
    let reference = format.map(reference_bits)?;
    let n = reference.len();
    if n < MIN_EVM_SYMBOLS {
        return Err(Error::InvalidSpec(format!("{n} symbols is below the minimum of {MIN_EVM_SYMBOLS}")));
    }
    if rx.len() != n * sps {
        return Err(Error::InvalidSpec(format!(
            "received record has {} samples, expected {} symbols x {sps}",
            rx.len(),
            n
        )));
    }
    let mut y = rx.to_vec();
    rrc_filter(&mut y, sps, rolloff);

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut sref = reference.clone();
    fwd.process(&mut sref);
    let ref_norm = reference.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt();

    let mut best = (0.0, 0usize, 0usize);
    for phase in 0..sps {
        let mut c: Vec<Complex64> = (0..n).map(|k| y[k * sps + phase]).collect();
        let norm = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        fwd.process(&mut c);
        for (a, b) in c.iter_mut().zip(&sref) {
            *a *= b.conj();
        }
        inv.process(&mut c);
        for (lag, v) in c.iter().enumerate() {
            let r = v.norm() / (n as f64 * norm * ref_norm);
            if r > best.0 {
                best = (r, phase, lag);
            }
        }
    }
    let (peak, phase, lag) = best;
    if peak < SYNC_THRESHOLD {
        return Err(Error::SyncFailure { peak, threshold: SYNC_THRESHOLD });
    }
    let r: Vec<Complex64> = (0..n).map(|k| y[((k + lag) % n) * sps + phase]).collect();
    let num: Complex64 = r.iter().zip(&reference).map(|(r, s)| s * r.conj()).sum();
    let den: f64 = r.iter().map(|v| v.norm_sqr()).sum();
    let a = num / den;
    let constellation: Vec<Complex64> = r.iter().map(|v| v * a).collect();
    let err: f64 = constellation.iter().zip(&reference).map(|(r, s)| (r - s).norm_sqr()).sum();
    let pwr: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    let mut bits = Vec::with_capacity(reference_bits.len());
    for z in &constellation {
        format.demap(*z, &mut bits);
    }
    let errors = bits.iter().zip(reference_bits).filter(|(a, b)| a != b).count();
    Ok(Demodulated {
        evm_rms_pct: 100.0 * (err / pwr).sqrt(),
        ber: errors as f64 / reference_bits.len() as f64,
        n_symbols: n,
        constellation,
        reference,
        sync_peak: peak,
    })
}

/// Circular complex Gaussian noise with variance `var` per sample.
pub fn add_complex_noise<R: Rng>(x: &mut [Complex64], var: f64, rng: &mut R) {
    let s = (0.5 * var).sqrt();
    for v in x {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(re * s, im * s);
    }
}

/// Adds noise so that the matched-filtered symbol SNR equals `snr_db`.
pub fn add_awgn<R: Rng>(x: &mut [Complex64], snr_db: f64, sps: usize, rng: &mut R) {
    let p = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
    add_complex_noise(x, p * sps as f64 * 10f64.powf(-snr_db / 10.0), rng);
}

/// EVM (%) at which hard-decision BER on an AWGN channel equals
/// [`FEC_BER`]. Computed once per format by Monte Carlo over 2²⁰ symbols
/// with common random numbers and bisection.
pub fn fec_threshold(format: ModFormat) -> f64 {
    static QPSK: OnceLock<f64> = OnceLock::new();
    static QAM16: OnceLock<f64> = OnceLock::new();
    let cell = match format {
        ModFormat::Qpsk => &QPSK,
        ModFormat::Qam16 => &QAM16,
    };
    *cell.get_or_init(|| fec_threshold_mc(format, FEC_MC_SYMBOLS, FEC_MC_SEED))
}

/// Monte Carlo EVM-at-FEC-limit search.
pub fn fec_threshold_mc(format: ModFormat, n_symbols: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = format.bits_per_symbol();
    let bits: Vec<u8> = (0..n_symbols * b).map(|_| rng.random_range(0..2u8)).collect();
    let symbols = format.map(&bits).unwrap_or_default();
    let mut noise = vec![Complex64::new(0.0, 0.0); n_symbols];
    add_complex_noise(&mut noise, 1.0, &mut rng);
    let ber = |evm: f64| {
        let mut out = Vec::with_capacity(b);
        let mut errors = 0usize;
        for (k, (s, n)) in symbols.iter().zip(&noise).enumerate() {
            out.clear();
            format.demap(s + n * evm, &mut out);
            errors += out.iter().zip(&bits[k * b..(k + 1) * b]).filter(|(x, y)| x != y).count();
        }
        errors as f64 / bits.len() as f64
    };
    let (mut lo, mut hi) = (0.01, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ber(mid) > FEC_BER {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    100.0 * 0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn qpsk_gray_map() {
        let pts = ModFormat::Qpsk.map(&[0, 0, 0, 1, 1, 1, 1, 0]).unwrap();
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!((pts[i] - pts[j]).norm() > 1.0);
            }
            // Neighbours around the circle differ by one bit, hence 90°.
            let next = pts[(i + 1) % 4];
            assert_relative_eq!((next / pts[i]).arg().abs(), PI / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn constellations_are_unit_energy() {
        for f in ModFormat::ALL {
            let c = f.constellation();
            let avg = c.iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert_relative_eq!(avg, 1.0, max_relative = 1e-12);
        }
        let c = ModFormat::Qam16.constellation();
        let peak = c.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        assert_relative_eq!(peak, 1.8, max_relative = 1e-12);
    }

    #[test]
    fn qam16_nearest_neighbours_differ_by_one_bit() {
        let f = ModFormat::Qam16;
        let c = f.constellation();
        let d = 2.0 / 10f64.sqrt();
        for (i, a) in c.iter().enumerate() {
            for (j, b) in c.iter().enumerate() {
                if ((a - b).norm() - d).abs() < 1e-9 {
                    assert_eq!((i ^ j).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn demap_inverts_map() {
        for f in ModFormat::ALL {
            let bits = prbs_bits(7, 400 * f.bits_per_symbol());
            let mut out = Vec::new();
            for z in f.map(&bits).unwrap() {
                f.demap(z, &mut out);
            }
            assert_eq!(out, bits);
        }
    }

    #[test]
    fn prbs15_period() {
        let b = prbs_bits(1, 2 * 32767);
        assert_eq!(&b[..32767], &b[32767..]);
        assert_ne!(&b[..100], &b[1..101]);
        let ones = b[..32767].iter().filter(|&&x| x == 1).count();
        assert_eq!(ones, 16384);
    }

    #[test]
    fn rrc_taps_unit_energy_and_symmetric() {
        let h = rrc_taps(0.35, 8, 16);
        assert_relative_eq!(h.iter().map(|x| x * x).sum::<f64>(), 1.0, max_relative = 1e-12);
        for k in 0..h.len() / 2 {
            assert_relative_eq!(h[k], h[h.len() - 1 - k], max_relative = 1e-12);
        }
    }

    #[test]
    fn rrc_taps_match_frequency_response() {
        // Sum of the squared response over the band equals the tap energy
        // scaled by sps.
        let sps = 8;
        let h = rrc_taps(0.35, sps, 32);
        let f = 0.2;
        let hf: Complex64 = h
            .iter()
            .enumerate()
            .map(|(k, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * f * k as f64 / sps as f64))
            .sum();
        let h0: f64 = h.iter().sum();
        assert_relative_eq!(hf.norm() / h0, rrc_response(f, 1.0, 0.35), max_relative = 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(modulate(&[0, 1, 1], ModFormat::Qpsk, 1e6, 0.35, 8).is_err());
        assert!(modulate(&[0, 1], ModFormat::Qpsk, 1e6, 1.5, 8).is_err());
    }

    #[test]
    fn modulated_power_and_occupancy() {
        let bits = prbs_bits(3, 2048 * 2);
        let bb = modulate(&bits, ModFormat::Qpsk, 1.0, 0.35, 8).unwrap();
        let p = bb.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / bb.samples.len() as f64;
        assert_relative_eq!(p, 1.0, max_relative = 1e-12);
        let mut x = bb.samples.clone();
        fft(&mut x);
        let n = x.len();
        let total: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let outside: f64 = x
            .iter()
            .enumerate()
            .filter(|(k, _)| bin_freq(*k, n, 8.0).abs() > 0.5 * 1.35 + 1e-9)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        assert!(outside / total < 1e-20);
    }

    #[test]
    fn clean_loopback() {
        for f in ModFormat::ALL {
            let bits = prbs_bits(11, 2048 * f.bits_per_symbol());
            let bb = modulate(&bits, f, 256e6, 0.35, 8).unwrap();
            let d = demodulate_and_evm(&bb.samples, 8, 0.35, &bits, f).unwrap();
            assert!(d.evm_rms_pct < 0.1, "{f}: {}", d.evm_rms_pct);
            assert_eq!(d.ber, 0.0);
        }
    }

    #[test]
    fn evm_ignores_rotation_scale_and_delay() {
        let f = ModFormat::Qam16;
        let bits = prbs_bits(5, 1024 * 4);
        let bb = modulate(&bits, f, 1.0, 0.35, 8).unwrap();
        let mut rx = bb.samples.clone();
        rx.rotate_left(8 * 37 + 3);
        let g = Complex64::from_polar(0.3, 1.1);
        rx.iter_mut().for_each(|v| *v *= g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = rx.clone();
        add_awgn(&mut a, 25.0, 8, &mut rng);
        let base = {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut b = bb.samples.clone();
            b.rotate_left(8 * 37 + 3);
            add_awgn(&mut b, 25.0, 8, &mut rng);
            demodulate_and_evm(&b, 8, 0.35, &bits, f).unwrap().evm_rms_pct
        };
        let d = demodulate_and_evm(&a, 8, 0.35, &bits, f).unwrap();
        assert!(d.evm_rms_pct > 0.0);
        assert!((d.evm_rms_pct - base).abs() < 0.05, "{} vs {base}", d.evm_rms_pct);
    }

    #[test]
    fn sync_failure_on_noise() {
        let bits = prbs_bits(9, 1024 * 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rx = vec![Complex64::new(0.0, 0.0); 1024 * 8];
        add_complex_noise(&mut rx, 1.0, &mut rng);
        let e = demodulate_and_evm(&rx, 8, 0.35, &bits, ModFormat::Qpsk);
        assert!(matches!(e, Err(Error::SyncFailure { .. })));
    }

    #[test]
    fn awgn_evm_follows_snr() {
        let f = ModFormat::Qpsk;
        let bits = prbs_bits(13, 4096 * 2);
        let bb = modulate(&bits, f, 1.0, 0.35, 8).unwrap();
        for snr in [10.0, 20.0, 30.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(snr as u64);
            let mut rx = bb.samples.clone();
            add_awgn(&mut rx, snr, 8, &mut rng);
            let d = demodulate_and_evm(&rx, 8, 0.35, &bits, f).unwrap();
            let expect = 100.0 * 10f64.powf(-snr / 20.0);
            assert!((d.evm_rms_pct / expect - 1.0).abs() < 0.05, "SNR {snr}: {} vs {expect}", d.evm_rms_pct);
        }
    }

    #[test]
    fn compression_pulls_outer_points_inward() {
        let f = ModFormat::Qam16;
        let bits = prbs_bits(17, 2048 * 4);
        let symbols = f.map(&bits).unwrap();
        let sps = 4;
        let mut x = vec![Complex64::new(0.0, 0.0); symbols.len() * sps];
        for (k, s) in symbols.iter().enumerate() {
            // Saturating memoryless gain applied at the symbol instants.
            let m = s.norm();
            x[k * sps] = s * (1.0 / (1.0 + 0.25 * m * m));
        }
        rrc_filter(&mut x, sps, 0.35);
        let d = demodulate_and_evm(&x, sps, 0.35, &bits, f).unwrap();
        assert!(d.evm_rms_pct > 2.0);
        let corner = Complex64::new(3.0, 3.0) / 10f64.sqrt();
        let (mut radial, mut phase, mut count) = (0.0, 0.0, 0);
        for (r, s) in d.constellation.iter().zip(&d.reference) {
            if (s - corner).norm() < 1e-9 {
                radial += r.norm() - s.norm();
                phase += (r / s).arg().abs();
                count += 1;
            }
        }
        let radial = radial / count as f64;
        let phase = phase / count as f64;
        assert!(radial < -0.02, "corner points should move inward: {radial}");
        assert!(phase < 0.01);
    }

    #[test]
    fn fec_thresholds() {
        let q = fec_threshold(ModFormat::Qpsk);
        let m = fec_threshold(ModFormat::Qam16);
        assert!((q - 37.4).abs() < 1.0, "QPSK {q}");
        assert!(m < q);
        assert!((m - 16.9).abs() < 1.0, "16-QAM {m}");
    }

    #[test]
    fn interpolation_is_accurate() {
        let bits = prbs_bits(21, 1024 * 2);
        let bb = modulate(&bits, ModFormat::Qpsk, 1e9, 0.35, DEFAULT_SPS).unwrap();
        let dt = 1.0 / bb.sample_rate();
        for k in (0..bb.samples.len()).step_by(97) {
            assert!((bb.sample_at(k as f64 * dt) - bb.samples[k]).norm() < 1e-12);
            assert!((bb.sample_at((k as f64 + bb.samples.len() as f64) * dt) - bb.samples[k]).norm() < 1e-9);
        }
        // Half-sample points against exact band-limited interpolation.
        let n = bb.samples.len();
        let mut spec = bb.samples.clone();
        fft(&mut spec);
        let t = (100.5) * dt;
        let exact: Complex64 = spec
            .iter()
            .enumerate()
            .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * bin_freq(k, n, bb.sample_rate()) * t))
            .sum::<Complex64>()
            / n as f64;
        assert!((bb.sample_at(t) - exact).norm() < 2e-3);
    }
}
