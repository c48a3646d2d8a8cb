//! Closed-form small-signal model of the SOA-MZI sampling mixer.
//!
//! SOA1 is the arm that receives the control port A; both arms receive half of
//! port C. The port-J output power is
//! `P_J = ⅛·P_in·(G₁ + G₂ − 2√(G₁G₂)·cos(Φ₁ − Φ₂ + Φ₀))`.
//! Perturbing the carrier density of SOA1 around its operating point yields
//! the up-converted product at `i·f_ck − f_dat`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::signals::{fmt, HarmonicSpectrum};
use crate::soa::{self, SoaParams};
use crate::units::lin_to_db;
use crate::{Error, Result};

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Data enters port C, pulse train controls through port A.
    Switching,
    /// Pulse train enters port C, data controls through port A.
    Modulation,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::Switching, Architecture::Modulation];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Switching => "switching",
            Architecture::Modulation => "modulation",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Power division from each input port to SOA1: incident power is the port
/// power divided by the factor. Port A reaches only SOA1, port C is split
/// equally between the arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Couplings {
    pub port_a: f64,
    pub port_c: f64,
}

impl Default for Couplings {
    fn default() -> Self {
        Self { port_a: 2.0, port_c: 4.0 }
    }
}

impl Couplings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("port_a", self.port_a), ("port_c", self.port_c)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("coupling divisor {name} must be >= 1, got {v}")));
            }
        }
        Ok(())
    }

    /// (η, κ): divisors applied to the clock and data powers reaching SOA1.
    pub fn for_arch(&self, arch: Architecture) -> (f64, f64) {
        match arch {
            Architecture::Switching => (self.port_a, self.port_c),
            Architecture::Modulation => (self.port_c, self.port_a),
        }
    }
}

/// Steady state of the interferometer for one architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub arch: Architecture,
    pub soa: SoaParams,
    /// Wavelength used for the photon-energy constants.
    pub wavelength_m: f64,
    pub g1: f64,
    pub g2: f64,
    /// Φ̄₁ − Φ̄₂, rad.
    pub dphi: f64,
    pub phi0: f64,
    pub tau_d: f64,
    /// Clock attenuation toward SOA1.
    pub eta: f64,
    /// Data attenuation toward SOA1.
    pub kappa: f64,
}

impl OperatingPoint {
    /// Builds an operating point whose phase difference follows the gains
    /// through the Henry factor.
    pub fn new(
        arch: Architecture,
        soa: SoaParams,
        wavelength_m: f64,
        g1: f64,
        g2: f64,
        tau_d: f64,
        couplings: Couplings,
    ) -> Result<Self> {
        soa.validate()?;
        couplings.validate()?;
        if !(g1 > 0.0 && g2 > 0.0 && g1.is_finite() && g2.is_finite()) {
            return Err(Error::Domain(format!("gains must be positive, got G1 = {g1}, G2 = {g2}")));
        }
        if !(tau_d > 0.0 && tau_d.is_finite()) {
            return Err(Error::Domain(format!("differential lifetime must be > 0, got {tau_d}")));
        }
        let (eta, kappa) = couplings.for_arch(arch);
        Ok(Self {
            arch,
            soa,
            wavelength_m,
            g1,
            g2,
            dphi: soa::differential_phase(g1, g2, soa.henry_factor),
            phi0: 0.0,
            tau_d,
            eta,
            kappa,
        })
    }

    pub fn with_phi0(self, phi0: f64) -> Self {
        Self { phi0, ..self }
    }

    pub fn with_tau_d(self, tau_d: f64) -> Self {
        Self { tau_d, ..self }
    }

    pub fn k(&self) -> f64 {
        self.soa.k_constant(self.wavelength_m)
    }

    pub fn p_sat(&self) -> f64 {
        self.soa.saturation_power(self.wavelength_m)
    }

    pub fn dg_dn(&self) -> f64 {
        self.soa.gain_derivative(self.g1)
    }

    pub fn dphi_dn(&self) -> f64 {
        self.soa.phase_derivative()
    }

    /// Total static phase Φ̄₁ − Φ̄₂ + Φ₀ seen by the output coupler.
    fn bias_phase(&self) -> f64 {
        self.dphi + self.phi0
    }

    pub fn c_op(&self) -> f64 {
        soa::c_op(self.g1, self.g2, self.bias_phase(), self.dg_dn(), self.dphi_dn())
    }

    /// K_a = K·C_OP/32.
    pub fn k_a(&self) -> f64 {
        self.k() * self.c_op() / 32.0
    }

    pub fn k_a_closed_form(&self) -> f64 {
        soa::k_a_closed_form(self.g1, self.g2, self.soa.henry_factor, self.p_sat(), self.soa.carrier_lifetime_s)
    }

    /// XPM cut-off frequency 1/(2π·τ_d).
    pub fn cutoff_hz(&self) -> f64 {
        1.0 / (2.0 * PI * self.tau_d)
    }
}

/// Port-J output power of the interferometer.
pub fn mzi_output_power(p_in: f64, g1: f64, g2: f64, phi1: f64, phi2: f64, phi0: f64) -> f64 {
    0.125 * p_in * (g1 + g2 - 2.0 * (g1 * g2).sqrt() * (phi1 - phi2 + phi0).cos())
}

/// Port-I (complementary) output power.
pub fn mzi_output_power_port_i(p_in: f64, g1: f64, g2: f64, phi1: f64, phi2: f64, phi0: f64) -> f64 {
    0.125 * p_in * (g1 + g2 + 2.0 * (g1 * g2).sqrt() * (phi1 - phi2 + phi0).cos())
}

/// Average port-J power at the operating point.
pub fn steady_output(op: &OperatingPoint, p_in_avg: f64) -> f64 {
    mzi_output_power(p_in_avg, op.g1, op.g2, op.dphi, 0.0, op.phi0)
}

/// First-order change of `P_J / P_in` for small gain and phase changes in
/// both arms.
pub fn delta_g_phi(op: &OperatingPoint, dg1: f64, dg2: f64, dphi1: f64, dphi2: f64) -> f64 {
    let root = (op.g1 * op.g2).sqrt();
    let x = op.bias_phase();
    0.125 * (dg1 + dg2 - root * (dg1 / op.g1 + dg2 / op.g2) * x.cos() + 2.0 * root * (dphi1 - dphi2) * x.sin())
}

/// Bracket of [`delta_g_phi`] when only SOA1 is perturbed (without the ⅛).
pub fn delta_g_phi_single(op: &OperatingPoint, dg1: f64, dphi1: f64) -> f64 {
    let root = (op.g1 * op.g2).sqrt();
    let x = op.bias_phase();
    dg1 - root / op.g1 * x.cos() * dg1 + 2.0 * root * x.sin() * dphi1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Coefficient at +ω.
    Plus,
    /// Conjugate coefficient (the −ω line).
    Conjugate,
}

/// First-order carrier-density coefficient of SOA1 driven by the power
/// coefficient `p` at angular frequency `omega`, attenuated by `att`.
pub fn first_order_density(op: &OperatingPoint, p: Complex64, omega: f64, direction: Direction, att: f64) -> Complex64 {
    let scale = -op.k() * op.g1 * op.tau_d / att;
    match direction {
        Direction::Plus => p * scale / (1.0 + J * omega * op.tau_d),
        Direction::Conjugate => p.conj() * scale / (1.0 - J * omega * op.tau_d),
    }
}

/// Second-order carrier-density coefficient at ω_cki − ω_dat.
pub fn second_order_density(
    op: &OperatingPoint,
    n1_cki: Complex64,
    n1_dat_conj: Complex64,
    p_cki: Complex64,
    p_dat_conj: Complex64,
    omega_cki: f64,
    omega_dat: f64,
) -> Complex64 {
    let d2r = op.k() * op.dg_dn();
    -(n1_cki * p_dat_conj * d2r / op.kappa + n1_dat_conj * p_cki * d2r / op.eta) * op.tau_d
        / (2.0 * (1.0 + J * (omega_cki - omega_dat) * op.tau_d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Includes the second-order carrier term.
    Full,
    /// Keeps only the dominant first-order term.
    Simplified,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Simplified => "simplified",
        }
    }
}

/// Sinusoidal data stimulus as seen by the small-signal model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataTone {
    pub freq_hz: f64,
    pub avg_power_w: f64,
    /// Modulation coefficient p_dat, W.
    pub coeff: Complex64,
}

impl DataTone {
    pub fn new(freq_hz: f64, avg_power_w: f64, modulation_index: f64) -> Self {
        Self { freq_hz, avg_power_w, coeff: Complex64::new(modulation_index * avg_power_w, 0.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpconversionResult {
    pub index: usize,
    /// Output frequency i·f_ck − f_dat.
    pub freq_hz: f64,
    /// Port-J modulation coefficient at the product frequency, W.
    pub p_j: Complex64,
    /// |p_J / p_dat*|².
    pub cg: f64,
    pub mode: Mode,
}

impl UpconversionResult {
    pub fn cg_db(&self) -> f64 {
        lin_to_db(self.cg)
    }
}

/// Port-J coefficient at `i·f_ck − f_dat`.
pub fn upconverted_power(
    op: &OperatingPoint,
    clock: &HarmonicSpectrum,
    data: &DataTone,
    index: usize,
    mode: Mode,
) -> Result<UpconversionResult> {
    let p_cki = clock.coeff(index)?;
    let w_ck = 2.0 * PI * clock.frequency(index);
    let w_dat = 2.0 * PI * data.freq_hz;
    let p_dat_conj = data.coeff.conj();
    let n_cki = first_order_density(op, p_cki, w_ck, Direction::Plus, op.eta);
    let n_dat_conj = first_order_density(op, data.coeff, w_dat, Direction::Conjugate, op.kappa);
    let c = op.c_op() / 16.0;
    let (first, avg_in) = match op.arch {
        Architecture::Switching => (p_dat_conj * n_cki, data.avg_power_w),
        Architecture::Modulation => (p_cki * n_dat_conj, clock.dc),
    };
    let p_j = match mode {
        Mode::Simplified => c * first,
        Mode::Full => {
            let n2 = second_order_density(op, n_cki, n_dat_conj, p_cki, p_dat_conj, w_ck, w_dat);
            c * (first + avg_in * 2.0 * n2)
        }
    };
    let cg = if data.coeff.norm() > 0.0 { (p_j / p_dat_conj).norm_sqr() } else { 0.0 };
    Ok(UpconversionResult { index, freq_hz: clock.frequency(index) - data.freq_hz, p_j, cg, mode })
}

/// Closed-form product coefficient written with K_a.
pub fn upconverted_power_closed_form(
    op: &OperatingPoint,
    clock: &HarmonicSpectrum,
    data: &DataTone,
    index: usize,
) -> Result<Complex64> {
    let p_cki = clock.coeff(index)?;
    let num = -op.k_a() * data.coeff.conj() * p_cki * op.g1 * op.tau_d;
    Ok(match op.arch {
        Architecture::Switching => num / (1.0 + J * 2.0 * PI * clock.frequency(index) * op.tau_d),
        Architecture::Modulation => num / (1.0 - J * 2.0 * PI * data.freq_hz * op.tau_d),
    })
}

/// Conversion gain (linear) at harmonic `index`, independent of the data
/// modulation depth.
pub fn conversion_gain(op: &OperatingPoint, clock: &HarmonicSpectrum, data_freq_hz: f64, index: usize) -> Result<f64> {
    let p_cki = clock.coeff(index)?;
    let den = match op.arch {
        Architecture::Switching => 1.0 + J * 2.0 * PI * clock.frequency(index) * op.tau_d,
        Architecture::Modulation => 1.0 - J * 2.0 * PI * data_freq_hz * op.tau_d,
    };
    Ok((op.k_a() * p_cki * op.g1 * op.tau_d / den).norm_sqr())
}

pub fn conversion_gain_db(op: &OperatingPoint, clock: &HarmonicSpectrum, data_freq_hz: f64, index: usize) -> Result<f64> {
    conversion_gain(op, clock, data_freq_hz, index).map(lin_to_db)
}

/// One row of a CG sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CgRow {
    pub arch: Architecture,
    pub index: usize,
    pub f_target_hz: f64,
    pub cg_db: f64,
    pub mode: String,
    pub m_dat: f64,
}

/// CSV columns: arch, i, f_target_Hz, CG_dB, mode, m_dat.
pub fn write_cg_csv<W: Write>(rows: &[CgRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["arch", "i", "f_target_Hz", "CG_dB", "mode", "m_dat"])?;
    for r in rows {
        w.write_record([
            r.arch.name().to_string(),
            r.index.to_string(),
            fmt(r.f_target_hz),
            format!("{:.6}", r.cg_db),
            r.mode.clone(),
            format!("{}", r.m_dat),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A measured conversion gain used to identify operating points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub arch: Architecture,
    pub index: usize,
    pub cg_db: f64,
}

/// Fixed quantities of the calibration problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSetup {
    pub soa: SoaParams,
    pub wavelength_m: f64,
    pub couplings: Couplings,
    /// Clock spectrum seen by each architecture.
    pub clock_switching: HarmonicSpectrum,
    pub clock_modulation: HarmonicSpectrum,
    pub data_freq_hz: f64,
    /// Gain of the unsaturated arm, held fixed.
    pub g2: f64,
    pub tau_d_bounds: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub tau_d: f64,
    pub switching: Option<OperatingPoint>,
    pub modulation: Option<OperatingPoint>,
    /// (anchor, model CG dB, residual dB = model − anchor).
    pub residuals: Vec<(Anchor, f64, f64)>,
}

impl CalibrationResult {
    pub fn op(&self, arch: Architecture) -> Option<&OperatingPoint> {
        match arch {
            Architecture::Switching => self.switching.as_ref(),
            Architecture::Modulation => self.modulation.as_ref(),
        }
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.2.abs()).fold(0.0, f64::max)
    }

    pub fn rms_residual(&self) -> f64 {
        (self.residuals.iter().map(|r| r.2 * r.2).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

impl CalibrationSetup {
    fn clock(&self, arch: Architecture) -> &HarmonicSpectrum {
        match arch {
            Architecture::Switching => &self.clock_switching,
            Architecture::Modulation => &self.clock_modulation,
        }
    }

    /// Operating point with G₁ = G₂·e^{−u}.
    pub fn op_for(&self, arch: Architecture, u: f64, tau_d: f64) -> Result<OperatingPoint> {
        OperatingPoint::new(arch, self.soa, self.wavelength_m, self.g2 * (-u).exp(), self.g2, tau_d, self.couplings)
    }

    fn model_db(&self, arch: Architecture, u: f64, tau_d: f64, index: usize) -> Result<f64> {
        let op = self.op_for(arch, u, tau_d)?;
        conversion_gain_db(&op, self.clock(arch), self.data_freq_hz, index)
    }

    /// Upper end of the first branch on which CG rises with the imbalance u.
    fn branch_end(&self, arch: Architecture, tau_d: f64) -> Result<f64> {
        let u_max = 2.0 * PI / self.soa.henry_factor.abs().max(1e-3);
        let n = 400;
        let mut best = (f64::NEG_INFINITY, u_max);
        for k in 1..=n {
            let u = u_max * k as f64 / n as f64;
            let v = self.model_db(arch, u, tau_d, 1)?;
            if v > best.0 {
                best = (v, u);
            } else if v < best.0 - 1e-9 {
                break;
            }
        }
        Ok(best.1)
    }

    fn arch_cost(&self, arch: Architecture, anchors: &[Anchor], u: f64, tau_d: f64) -> Result<f64> {
        let mut cost = 0.0;
        for a in anchors.iter().filter(|a| a.arch == arch) {
            let r = self.model_db(arch, u, tau_d, a.index)? - a.cg_db;
            cost += r * r;
        }
        Ok(cost)
    }

    /// Best imbalance for one architecture at fixed τ_d, with its cost.
    fn fit_u(&self, arch: Architecture, anchors: &[Anchor], tau_d: f64) -> Result<(f64, f64)> {
        let hi = self.branch_end(arch, tau_d)?;
        let f = |u: f64| self.arch_cost(arch, anchors, u, tau_d);
        // Coarse scan then golden-section refinement on the bracketing cell.
        let n = 200;
        let lo = hi * 1e-4;
        let grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let mut vals = Vec::with_capacity(grid.len());
        for &u in &grid {
            vals.push(f(u)?);
        }
        let k = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let a = grid[k.saturating_sub(1)];
        let b = grid[(k + 1).min(n)];
        golden(f, a, b)
    }

    fn profile_cost(&self, anchors: &[Anchor], archs: &[Architecture], tau_d: f64) -> Result<f64> {
        let mut c = 0.0;
        for &arch in archs {
            c += self.fit_u(arch, anchors, tau_d)?.1;
        }
        Ok(c)
    }
}

fn golden(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Least-squares identification of the operating points from conversion-gain
/// anchors.
///
/// τ_d is shared by both architectures and bounded; each architecture gets its
/// own gain imbalance `u = ln(G₂/G₁)` with G₂ held at `setup.g2`. The fit is
/// separable: for each τ_d the imbalances are solved independently, and τ_d is
/// refined by golden-section search on the profile cost.
pub fn calibrate(anchors: &[Anchor], setup: &CalibrationSetup) -> Result<CalibrationResult> {
    let mut archs = Vec::new();
    for arch in Architecture::ALL {
        let n = anchors.iter().filter(|a| a.arch == arch).count();
        match n {
            0 => {}
            1 => {
                return Err(Error::Underdetermined {
                    free: vec![format!("u_{arch}"), "tau_d".into()],
                    detail: format!("{arch} has a single anchor, at least 2 are required"),
                })
            }
            _ => archs.push(arch),
        }
    }
    if archs.is_empty() {
        return Err(Error::Underdetermined {
            free: vec!["tau_d".into(), "u_switching".into(), "u_modulation".into()],
            detail: "no anchors".into(),
        });
    }
    let mut sw_idx: Vec<usize> = anchors.iter().filter(|a| a.arch == Architecture::Switching).map(|a| a.index).collect();
    sw_idx.sort_unstable();
    sw_idx.dedup();
    if sw_idx.len() < 2 {
        return Err(Error::Underdetermined {
            free: vec!["tau_d".into()],
            detail: "tau_d needs switching anchors at two distinct harmonics".into(),
        });
    }
    for a in anchors {
        setup.clock(a.arch).coeff(a.index)?;
    }
    let (lo, hi) = setup.tau_d_bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidSpec(format!("invalid tau_d bounds [{lo}, {hi}]")));
    }
    // Log-spaced scan of τ_d, then golden refinement.
    let n = 60;
    let grid: Vec<f64> = (0..=n).map(|k| lo * (hi / lo).powf(k as f64 / n as f64)).collect();
    let mut vals = Vec::with_capacity(grid.len());
    for &t in &grid {
        vals.push(setup.profile_cost(anchors, &archs, t)?);
    }
    let k = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
    let (tau_d, _) = golden(
        |t| setup.profile_cost(anchors, &archs, t),
        grid[k.saturating_sub(1)],
        grid[(k + 1).min(n)],
    )?;

    let mut result = CalibrationResult { tau_d, switching: None, modulation: None, residuals: Vec::new() };
    for &arch in &archs {
        let (u, _) = setup.fit_u(arch, anchors, tau_d)?;
        let op = setup.op_for(arch, u, tau_d)?;
        match arch {
            Architecture::Switching => result.switching = Some(op),
            Architecture::Modulation => result.modulation = Some(op),
        }
    }
    for a in anchors {
        if let Some(op) = result.op(a.arch) {
            let model = conversion_gain_db(op, setup.clock(a.arch), setup.data_freq_hz, a.index)?;
            result.residuals.push((*a, model, model - a.cg_db));
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::PulseTrainSpec;
    use approx::assert_relative_eq;

    fn soa() -> SoaParams {
        SoaParams { carrier_lifetime_s: 200e-12, ..SoaParams::default() }
    }

    fn op(arch: Architecture) -> OperatingPoint {
        OperatingPoint::new(arch, soa(), 1557.4e-9, 100.0, 50.0, 26.525_823_848_649_22e-12, Couplings::default()).unwrap()
    }

    fn clock() -> HarmonicSpectrum {
        PulseTrainSpec::default().analytic_spectrum(6)
    }

    #[test]
    fn output_port_examples() {
        assert_eq!(mzi_output_power(1e-3, 80.0, 80.0, 0.4, 0.4, 0.0), 0.0);
        assert_relative_eq!(mzi_output_power(1e-3, 80.0, 80.0, 0.4, 0.4, PI), 1e-3 * 40.0, max_relative = 1e-14);
        assert_relative_eq!(
            mzi_output_power(1e-3, 100.0, 50.0, 0.3, 0.0, 0.0),
            1.861_877_255_608_389e-3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn port_complementarity() {
        let (g1, g2, p) = (123.0, 45.0, 2e-4);
        for k in 0..20 {
            let phi = 0.37 * k as f64;
            let s = mzi_output_power(p, g1, g2, phi, 0.1, 0.2) + mzi_output_power_port_i(p, g1, g2, phi, 0.1, 0.2);
            assert_relative_eq!(s, 0.25 * p * (g1 + g2), max_relative = 1e-13);
        }
    }

    #[test]
    fn steady_output_balanced_is_dark() {
        let o = OperatingPoint::new(Architecture::Switching, soa(), 1.55e-6, 70.0, 70.0, 30e-12, Couplings::default())
            .unwrap();
        assert_eq!(steady_output(&o, 1e-3), 0.0);
        let o = op(Architecture::Switching);
        assert_relative_eq!(steady_output(&o, 2e-3), 2.0 * steady_output(&o, 1e-3), max_relative = 1e-14);
    }

    #[test]
    fn perturbation_factor_is_the_gradient() {
        let o = op(Architecture::Switching);
        assert_eq!(delta_g_phi(&o, 0.0, 0.0, 0.0, 0.0), 0.0);
        let (dg, dp) = (0.3, -0.01);
        assert_relative_eq!(delta_g_phi(&o, dg, 0.0, dp, 0.0), delta_g_phi_single(&o, dg, dp) / 8.0, max_relative = 1e-14);
        // Taylor error shrinks quadratically with the step.
        let p_in = 1e-3;
        let base = mzi_output_power(p_in, o.g1, o.g2, o.dphi, 0.0, 0.0);
        let err = |h: f64| {
            let (dg1, dg2, dp1, dp2) = (2.0 * h, -1.0 * h, 0.02 * h, 0.01 * h);
            let exact = mzi_output_power(p_in, o.g1 + dg1, o.g2 + dg2, o.dphi + dp1, dp2, 0.0) - base;
            (exact - p_in * delta_g_phi(&o, dg1, dg2, dp1, dp2)).abs()
        };
        let slope = (err(1e-2) / err(1e-3)).log10();
        assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn single_arm_factor_matches_c_op() {
        let o = op(Architecture::Switching);
        let dn = 1e19;
        let f = delta_g_phi_single(&o, o.dg_dn() * dn, o.dphi_dn() * dn);
        assert_relative_eq!(f, o.c_op() * dn, max_relative = 1e-12);
    }

    #[test]
    fn first_order_density_one_pole() {
        let o = op(Architecture::Switching);
        let p = Complex64::new(1e-3, 0.0);
        let dc = first_order_density(&o, p, 0.0, Direction::Plus, 2.0);
        assert_relative_eq!(dc.re, -1e-3 * o.k() * o.g1 * o.tau_d / 2.0, max_relative = 1e-14);
        let wc = 1.0 / o.tau_d;
        let at_corner = first_order_density(&o, p, wc, Direction::Plus, 2.0);
        assert_relative_eq!(at_corner.norm(), dc.norm() / 2f64.sqrt(), max_relative = 1e-12);
        let at10 = first_order_density(&o, p, 2.0 * PI * 10e9, Direction::Plus, 2.0);
        assert_relative_eq!(dc.norm() / at10.norm(), 1.943_650_631_615_100, max_relative = 1e-9);
        let conj = first_order_density(&o, p, 2.0 * PI * 10e9, Direction::Conjugate, 2.0);
        assert_relative_eq!((conj - at10.conj()).norm(), 0.0, epsilon = 1e-12 * dc.norm());
    }

    #[test]
    fn second_order_density_structure() {
        let o = op(Architecture::Switching);
        let z = Complex64::new(0.0, 0.0);
        let n = Complex64::new(1e20, 3e19);
        let p = Complex64::new(1e-3, -2e-4);
        assert_eq!(second_order_density(&o, z, z, z, p, 1e10, 1e9), z);
        assert_eq!(second_order_density(&o, n, z, p, z, 1e10, 1e9), z);
        let a = second_order_density(&o, n, n * 0.5, p, p.conj(), 6e10, 6e9);
        let b = second_order_density(&o, n.conj(), n.conj() * 0.5, p.conj(), p, -6e10, -6e9);
        assert_relative_eq!((a - b.conj()).norm(), 0.0, epsilon = 1e-12 * a.norm());
    }

    #[test]
    fn closed_form_equals_simplified() {
        let data = DataTone::new(1e9, 1e-4, 0.1);
        for arch in Architecture::ALL {
            let o = op(arch);
            for i in 1..=4 {
                let s = upconverted_power(&o, &clock(), &data, i, Mode::Simplified).unwrap();
                let c = upconverted_power_closed_form(&o, &clock(), &data, i).unwrap();
                assert!((s.p_j - c).norm() < 1e-12 * c.norm(), "{arch} i={i}");
                let cg = conversion_gain(&o, &clock(), 1e9, i).unwrap();
                assert_relative_eq!(s.cg, cg, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_product() {
        let data = DataTone::new(1e9, 1e-4, 0.0);
        for mode in [Mode::Full, Mode::Simplified] {
            let r = upconverted_power(&op(Architecture::Modulation), &clock(), &data, 1, mode).unwrap();
            assert_eq!(r.p_j.norm(), 0.0);
        }
    }

    #[test]
    fn harmonic_ratios() {
        let data = DataTone::new(1e9, 1e-4, 0.1);
        let flat = HarmonicSpectrum {
            fundamental_hz: 10e9,
            dc: 1e-3,
            coeffs: vec![Complex64::new(2e-3, 0.0); 4],
        };
        let o = op(Architecture::Switching);
        let r1 = upconverted_power(&o, &flat, &data, 1, Mode::Simplified).unwrap();
        let r4 = upconverted_power(&o, &flat, &data, 4, Mode::Simplified).unwrap();
        assert_relative_eq!(r4.p_j.norm() / r1.p_j.norm(), 0.288_322_015_031_94, max_relative = 1e-9);
        let o = op(Architecture::Modulation);
        let r1 = upconverted_power(&o, &clock(), &data, 1, Mode::Simplified).unwrap();
        let r4 = upconverted_power(&o, &clock(), &data, 4, Mode::Simplified).unwrap();
        assert_relative_eq!(r4.p_j.norm() / r1.p_j.norm(), 0.978_868_228_091_343, max_relative = 1e-9);
    }

    #[test]
    fn cg_drops() {
        let s = op(Architecture::Switching);
        let m = op(Architecture::Modulation);
        let drop = |o: &OperatingPoint| {
            conversion_gain_db(o, &clock(), 1e9, 1).unwrap() - conversion_gain_db(o, &clock(), 1e9, 4).unwrap()
        };
        assert_relative_eq!(drop(&s), 10.987_959_259_789, max_relative = 1e-9);
        assert_relative_eq!(drop(&m), 0.185_515_350_138_13, max_relative = 1e-8);
    }

    #[test]
    fn cg_independent_of_modulation_index() {
        for arch in Architecture::ALL {
            for mode in [Mode::Full, Mode::Simplified] {
                let cgs: Vec<f64> = [0.02, 0.05, 0.1, 0.5]
                    .iter()
                    .map(|&m| upconverted_power(&op(arch), &clock(), &DataTone::new(1e9, 1e-4, m), 2, mode).unwrap().cg)
                    .collect();
                for c in &cgs {
                    assert_relative_eq!(*c, cgs[0], max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn harmonic_out_of_range() {
        let data = DataTone::new(1e9, 1e-4, 0.1);
        let e = upconverted_power(&op(Architecture::Switching), &clock(), &data, 9, Mode::Full);
        assert!(matches!(e, Err(Error::HarmonicOutOfRange { index: 9, max: 6 })));
    }

    #[test]
    fn k_a_identity() {
        for arch in Architecture::ALL {
            let o = op(arch);
            assert_relative_eq!(o.k_a(), o.k_a_closed_form(), max_relative = 1e-10);
        }
    }

    fn setup() -> CalibrationSetup {
        let clock = PulseTrainSpec::default().analytic_spectrum(6);
        CalibrationSetup {
            soa: SoaParams::default(),
            wavelength_m: 1557.4e-9,
            couplings: Couplings::default(),
            clock_switching: clock.clone(),
            clock_modulation: clock,
            data_freq_hz: 1e9,
            g2: 1000.0,
            tau_d_bounds: (10e-12, 100e-12),
        }
    }

    #[test]
    fn calibration_round_trip() {
        let s = setup();
        let (tau, us, um) = (40e-12, 0.25, 0.15);
        let mut anchors = Vec::new();
        for (arch, u) in [(Architecture::Switching, us), (Architecture::Modulation, um)] {
            for i in [1, 4] {
                anchors.push(Anchor { arch, index: i, cg_db: s.model_db(arch, u, tau, i).unwrap() });
            }
        }
        let r = calibrate(&anchors, &s).unwrap();
        assert_relative_eq!(r.tau_d, tau, max_relative = 1e-2);
        assert_relative_eq!(r.switching.unwrap().g1, 1000.0 * (-us).exp(), max_relative = 1e-2);
        assert_relative_eq!(r.modulation.unwrap().g1, 1000.0 * (-um).exp(), max_relative = 1e-2);
        assert!(r.max_abs_residual() < 1e-3);
    }

    #[test]
    fn calibration_rejects_single_anchor() {
        let a = [Anchor { arch: Architecture::Switching, index: 1, cg_db: 16.0 }];
        assert!(matches!(calibrate(&a, &setup()), Err(Error::Underdetermined { .. })));
        let a = [
            Anchor { arch: Architecture::Switching, index: 1, cg_db: 16.0 },
            Anchor { arch: Architecture::Switching, index: 1, cg_db: 15.0 },
        ];
        assert!(matches!(calibrate(&a, &setup()), Err(Error::Underdetermined { .. })));
    }

    #[test]
    fn switching_anchor_pair_fits() {
        let a = [
            Anchor { arch: Architecture::Switching, index: 1, cg_db: 16.0 },
            Anchor { arch: Architecture::Switching, index: 4, cg_db: 4.0 },
        ];
        let r = calibrate(&a, &setup()).unwrap();
        assert!(r.max_abs_residual() < 1.0, "{:?}", r.residuals);
    }

    #[test]
    fn cg_csv_layout() {
        let rows = vec![CgRow {
            arch: Architecture::Modulation,
            index: 4,
            f_target_hz: 39e9,
            cg_db: 12.5,
            mode: "full".into(),
            m_dat: 0.05,
        }];
        let mut buf = Vec::new();
        write_cg_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "arch,i,f_target_Hz,CG_dB,mode,m_dat");
        assert_eq!(s.lines().nth(1).unwrap(), "modulation,4,3.9e10,12.500000,full,0.05");
    }
}
