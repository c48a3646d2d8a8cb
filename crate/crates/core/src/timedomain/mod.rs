//! Nonlinear time-domain oracle.
//!
//! Each SOA is a single lumped section obeying
//! `dN/dt = I/(qV) − N/τ − K·(G(N) − 1)·P_inc(t)`, integrated with a fixed-step
//! RK4 scheme. Port A reaches SOA1 only; port C is split between the arms.
//! The two arm outputs are recombined with the same interferometer law as the
//! analytic model, evaluated with the instantaneous gains and phases.

mod linearity;

pub use linearity::{
    check_sweep_grid, control_setup, find_linearity_point, quasi_static_sweep, sweep_point, LinearityPoint, Port, SweepRow, SweepTable,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::signals::{DataSignal, DataSignalSpec, GridSpec, PulseTrainSpec, WaveformGrid};
use crate::smallsignal::{mzi_output_power, mzi_output_power_port_i, Architecture, Couplings, OperatingPoint};
use crate::soa::SoaParams;
use crate::{Error, Result};

/// Physical set-up of the mixer.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerSetup {
    pub soa1: SoaParams,
    pub soa2: SoaParams,
    pub arch: Architecture,
    pub clock: PulseTrainSpec,
    pub data: DataSignalSpec,
    pub couplings: Couplings,
    pub phi0: f64,
    /// Wavelength used for the photon-energy constant K.
    pub reference_wavelength_m: f64,
}

impl MixerSetup {
    pub fn validate(&self) -> Result<()> {
        self.soa1.validate()?;
        self.soa2.validate()?;
        self.clock.validate()?;
        self.data.validate()?;
        self.couplings.validate()
    }

    /// Average power entering ports A and C.
    pub fn port_averages(&self) -> (f64, f64) {
        match self.arch {
            Architecture::Switching => (self.clock.avg_power_w, self.data.avg_power_w),
            Architecture::Modulation => (self.data.avg_power_w, self.clock.avg_power_w),
        }
    }

    /// Average power incident on SOA1 and SOA2.
    pub fn incident_averages(&self) -> (f64, f64) {
        let (a, c) = self.port_averages();
        (a / self.couplings.port_a + c / self.couplings.port_c, c / self.couplings.port_c)
    }

    /// Operating point implied by the CW steady state at the average input
    /// powers.
    pub fn operating_point(&self) -> Result<OperatingPoint> {
        let lambda = self.reference_wavelength_m;
        let (p1, p2) = self.incident_averages();
        let n1 = steady_state_density(&self.soa1, lambda, p1)?;
        let n2 = steady_state_density(&self.soa2, lambda, p2)?;
        let g1 = self.soa1.gain(n1)?;
        let g2 = self.soa2.gain(n2)?;
        let tau_d = differential_lifetime(&self.soa1, lambda, g1, p1);
        let op = OperatingPoint::new(self.arch, self.soa1, lambda, g1, g2, tau_d, self.couplings)?;
        // Arms may differ in bias; the static phase follows each arm's gain.
        let dphi = self.soa1.phase(g1)? - self.soa2.phase(g2)?;
        Ok(OperatingPoint { dphi, ..op.with_phi0(self.phi0) })
    }
}

/// Carrier density solving the CW rate equation for incident power `p_inc`.
pub fn steady_state_density(soa: &SoaParams, wavelength_m: f64, p_inc: f64) -> Result<f64> {
    soa.validate()?;
    if !(p_inc >= 0.0 && p_inc.is_finite()) {
        return Err(Error::Domain(format!("incident power must be >= 0, got {p_inc}")));
    }
    let k = soa.k_constant(wavelength_m);
    let pump = soa.pump_rate();
    let tau = soa.carrier_lifetime_s;
    // f(N) is strictly decreasing; the root lies in (0, pump·τ].
    let f = |n: f64| pump - n / tau - k * (soa.log_gain(n).exp() - 1.0) * p_inc;
    let mut hi = pump * tau;
    if f(hi) >= 0.0 {
        return Ok(hi);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// τ_d = 1/(1/τ + K·(dG/dN)·P̄).
pub fn differential_lifetime(soa: &SoaParams, wavelength_m: f64, g: f64, p_inc: f64) -> f64 {
    1.0 / (1.0 / soa.carrier_lifetime_s + soa.k_constant(wavelength_m) * soa.gain_derivative(g) * p_inc)
}

/// Integration and analysis-window settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub samples_per_period: usize,
    /// Length of the recorded window in clock periods.
    pub analysis_periods: usize,
    /// Discarded lead-in; `None` picks max(16 periods, 25 relaxation times).
    pub transient_periods: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { samples_per_period: 2048, analysis_periods: 80, transient_periods: None }
    }
}

impl SimConfig {
    pub fn grid(&self, clock: &PulseTrainSpec) -> GridSpec {
        GridSpec::periods(clock.rep_rate_hz, self.samples_per_period, self.analysis_periods)
    }

    pub fn with_samples_per_period(self, samples_per_period: usize) -> Self {
        Self { samples_per_period, ..self }
    }
}

/// Recorded output of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub port_i: WaveformGrid,
    pub port_j: WaveformGrid,
    /// Power entering port C (the interferometer input).
    pub input_c: WaveformGrid,
    pub gain1: Vec<f64>,
    pub gain2: Vec<f64>,
    pub density1: Vec<f64>,
    pub density2: Vec<f64>,
    pub transient_periods: usize,
}

impl SimOutput {
    pub fn duration(&self) -> f64 {
        self.port_j.duration()
    }
}

/// Fixed-step integrator state for both arms.
pub struct Integrator<'a> {
    setup: &'a MixerSetup,
    data: DataSignal,
    k: [f64; 2],
    pump: [f64; 2],
    inv_tau: [f64; 2],
    n: [f64; 2],
    n_ref: [f64; 2],
    pub t: f64,
    pub dt: f64,
}

/// Instantaneous outputs at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub port_i: f64,
    pub port_j: f64,
    pub input_c: f64,
    pub g1: f64,
    pub g2: f64,
    pub n1: f64,
    pub n2: f64,
}

impl<'a> Integrator<'a> {
    /// Starts from the CW steady state at time `t0`.
    pub fn new(setup: &'a MixerSetup, dt: f64, t0: f64) -> Result<Self> {
        setup.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidSpec("time step must be > 0".into()));
        }
        let lambda = setup.reference_wavelength_m;
        let (p1, p2) = setup.incident_averages();
        let n = [
            steady_state_density(&setup.soa1, lambda, p1)?,
            steady_state_density(&setup.soa2, lambda, p2)?,
        ];
        Ok(Self {
            setup,
            data: setup.data.build()?,
            k: [setup.soa1.k_constant(lambda), setup.soa2.k_constant(lambda)],
            pump: [setup.soa1.pump_rate(), setup.soa2.pump_rate()],
            inv_tau: [1.0 / setup.soa1.carrier_lifetime_s, 1.0 / setup.soa2.carrier_lifetime_s],
            n,
            n_ref: n,
            t: t0,
            dt,
        })
    }

    fn ports(&self, t: f64) -> (f64, f64) {
        let ck = self.setup.clock.power_at(t);
        let dat = self.data.power_at(t);
        match self.setup.arch {
            Architecture::Switching => (ck, dat),
            Architecture::Modulation => (dat, ck),
        }
    }

    fn incident(&self, t: f64) -> [f64; 2] {
        let (a, c) = self.ports(t);
        let c = c / self.setup.couplings.port_c;
        [a / self.setup.couplings.port_a + c, c]
    }

    fn rhs(&self, n: [f64; 2], p: [f64; 2]) -> [f64; 2] {
        let s = [&self.setup.soa1, &self.setup.soa2];
        let mut d = [0.0; 2];
        for i in 0..2 {
            let g = s[i].log_gain(n[i]).exp();
            d[i] = self.pump[i] - n[i] * self.inv_tau[i] - self.k[i] * (g - 1.0) * p[i];
        }
        d
    }

    /// Advances one RK4 step.
    pub fn step(&mut self) -> Result<()> {
        let (t, h) = (self.t, self.dt);
        let p0 = self.incident(t);
        let pm = self.incident(t + 0.5 * h);
        let p1 = self.incident(t + h);
        let n = self.n;
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let k1 = self.rhs(n, p0);
        let k2 = self.rhs(add(n, k1, 0.5 * h), pm);
        let k3 = self.rhs(add(n, k2, 0.5 * h), pm);
        let k4 = self.rhs(add(n, k3, h), p1);
        for i in 0..2 {
            self.n[i] = n[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.t = t + h;
        for i in 0..2 {
            let v = self.n[i];
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Unstable { time_s: self.t, reason: format!("SOA{} carrier density {v:e}", i + 1) });
            }
            if v > 10.0 * self.n_ref[i] {
                return Err(Error::Unstable {
                    time_s: self.t,
                    reason: format!("SOA{} carrier density {v:e} exceeds 10x its steady value", i + 1),
                });
            }
        }
        Ok(())
    }

    /// Outputs at the current time.
    pub fn sample(&self) -> Result<Sample> {
        let s = self.setup;
        let (_, c) = self.ports(self.t);
        let g1 = s.soa1.gain(self.n[0])?;
        let g2 = s.soa2.gain(self.n[1])?;
        let phi1 = s.soa1.phase(g1)?;
        let phi2 = s.soa2.phase(g2)?;
        Ok(Sample {
            t: self.t,
            port_i: mzi_output_power_port_i(c, g1, g2, phi1, phi2, s.phi0),
            port_j: mzi_output_power(c, g1, g2, phi1, phi2, s.phi0),
            input_c: c,
            g1,
            g2,
            n1: self.n[0],
            n2: self.n[1],
        })
    }
}

fn transient_periods(setup: &MixerSetup, cfg: &SimConfig) -> Result<usize> {
    if let Some(p) = cfg.transient_periods {
        return Ok(p);
    }
    let lambda = setup.reference_wavelength_m;
    let (p1, p2) = setup.incident_averages();
    let mut slowest: f64 = 0.0;
    for (soa, p) in [(&setup.soa1, p1), (&setup.soa2, p2)] {
        let g = soa.gain(steady_state_density(soa, lambda, p)?)?;
        slowest = slowest.max(differential_lifetime(soa, lambda, g, p));
    }
    let by_lifetime = (25.0 * slowest * setup.clock.rep_rate_hz).ceil() as usize;
    Ok(by_lifetime.max(16))
}

/// Runs the oracle and records `cfg.analysis_periods` clock periods starting
/// at t = 0.
pub fn simulate(setup: &MixerSetup, cfg: &SimConfig) -> Result<SimOutput> {
    if cfg.samples_per_period < 16 || cfg.analysis_periods == 0 {
        return Err(Error::InvalidSpec("need >= 16 samples per period and a non-empty window".into()));
    }
    let grid = cfg.grid(&setup.clock);
    if setup.clock.fwhm_s * grid.sample_rate_hz < 16.0 {
        return Err(Error::InvalidSpec(format!(
            "step {:e} s does not resolve the pulse FWHM with 16 samples",
            grid.dt()
        )));
    }
    let transient = transient_periods(setup, cfg)?;
    let dt = grid.dt();
    let lead = transient * cfg.samples_per_period;
    let mut integ = Integrator::new(setup, dt, -(lead as f64) * dt)?;
    for k in 0..lead {
        integ.step()?;
        integ.t = (k as f64 + 1.0 - lead as f64) * dt;
    }
    integ.t = 0.0;
    let n = grid.n_samples;
    let mut out = SimOutput {
        port_i: WaveformGrid { sample_rate_hz: grid.sample_rate_hz, t0_s: 0.0, samples: Vec::with_capacity(n) },
        port_j: WaveformGrid { sample_rate_hz: grid.sample_rate_hz, t0_s: 0.0, samples: Vec::with_capacity(n) },
        input_c: WaveformGrid { sample_rate_hz: grid.sample_rate_hz, t0_s: 0.0, samples: Vec::with_capacity(n) },
        gain1: Vec::with_capacity(n),
        gain2: Vec::with_capacity(n),
        density1: Vec::with_capacity(n),
        density2: Vec::with_capacity(n),
        transient_periods: transient,
    };
    for k in 0..n {
        let s = integ.sample()?;
        out.port_i.samples.push(s.port_i);
        out.port_j.samples.push(s.port_j);
        out.input_c.samples.push(s.input_c);
        out.gain1.push(s.g1);
        out.gain2.push(s.g2);
        out.density1.push(s.n1);
        out.density2.push(s.n2);
        integ.step()?;
        integ.t = (k + 1) as f64 * dt;
    }
    Ok(out)
}

/// Complex coefficient `p` of the component `½(p·e^{jωt} + c.c.)` at `f`;
/// `f = 0` returns the mean.
pub fn extract_tone(wave: &WaveformGrid, f: f64) -> Result<Complex64> {
    let duration = wave.duration();
    let cycles = f * duration;
    let resolution = 1.0 / duration;
    if (cycles - cycles.round()).abs() > 1e-6 * cycles.abs().max(1.0) {
        return Err(Error::OffGrid { freq_hz: f, resolution_hz: resolution });
    }
    if 2.0 * f.abs() >= wave.sample_rate_hz {
        return Err(Error::OffGrid { freq_hz: f, resolution_hz: resolution });
    }
    let n = wave.samples.len();
    if f == 0.0 {
        return Ok(Complex64::new(wave.mean(), 0.0));
    }
    let w = 2.0 * PI * f;
    // Phase of sample k reduced modulo one cycle to keep the argument small.
    let cyc = cycles.round() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &x) in wave.samples.iter().enumerate() {
        let m = (k as i64 * cyc).rem_euclid(n as i64) as f64;
        acc += x * Complex64::from_polar(1.0, -2.0 * PI * m / n as f64);
    }
    Ok(acc * (2.0 / n as f64) * Complex64::from_polar(1.0, -w * wave.t0_s))
}

/// Single-SOA response to a weak sinusoidal power modulation: returns the
/// carrier-density coefficient at `freq_hz` relative to the power
/// coefficient (m⁻³/W).
pub fn density_transfer(soa: &SoaParams, wavelength_m: f64, p_avg: f64, freq_hz: f64, depth: f64) -> Result<Complex64> {
    let k = soa.k_constant(wavelength_m);
    let pump = soa.pump_rate();
    let tau = soa.carrier_lifetime_s;
    let n0 = steady_state_density(soa, wavelength_m, p_avg)?;
    let g = soa.gain(n0)?;
    let tau_d = differential_lifetime(soa, wavelength_m, g, p_avg);
    let period = 1.0 / freq_hz;
    let steps_per_period = ((period / (tau_d / 200.0)).ceil() as usize).max(256);
    let dt = period / steps_per_period as f64;
    let settle = ((30.0 * tau_d / period).ceil() as usize).max(4);
    let p = |t: f64| p_avg * (1.0 + depth * (2.0 * PI * freq_hz * t).cos());
    let rhs = |n: f64, pw: f64| pump - n / tau - k * (soa.log_gain(n).exp() - 1.0) * pw;
    let mut n = n0;
    let mut t = 0.0;
    let mut acc = Complex64::new(0.0, 0.0);
    for period_idx in 0..settle + 1 {
        for s in 0..steps_per_period {
            if period_idx == settle {
                acc += (n - n0) * Complex64::from_polar(1.0, -2.0 * PI * s as f64 / steps_per_period as f64);
            }
            let k1 = rhs(n, p(t));
            let k2 = rhs(n + 0.5 * dt * k1, p(t + 0.5 * dt));
            let k3 = rhs(n + 0.5 * dt * k2, p(t + 0.5 * dt));
            let k4 = rhs(n + dt * k3, p(t + dt));
            n += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = (period_idx * steps_per_period + s + 1) as f64 * dt;
        }
    }
    Ok(acc * (2.0 / steps_per_period as f64) / (depth * p_avg))
}

/// Relaxation time of a single SOA after a small step of incident power from
/// `p0` to `p0·(1 + step)`, from a log-linear fit of the density decay.
pub fn relaxation_time(soa: &SoaParams, wavelength_m: f64, p0: f64, step: f64) -> Result<f64> {
    let k = soa.k_constant(wavelength_m);
    let pump = soa.pump_rate();
    let tau = soa.carrier_lifetime_s;
    let p1 = p0 * (1.0 + step);
    let n_start = steady_state_density(soa, wavelength_m, p0)?;
    let n_end = steady_state_density(soa, wavelength_m, p1)?;
    let g = soa.gain(n_end)?;
    let tau_d = differential_lifetime(soa, wavelength_m, g, p1);
    let dt = tau_d / 2000.0;
    let rhs = |n: f64| pump - n / tau - k * (soa.log_gain(n).exp() - 1.0) * p1;
    let mut n = n_start;
    let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in 0..(6 * 2000) {
        let t = s as f64 * dt;
        if t >= tau_d && t <= 5.0 * tau_d {
            let y = (n - n_end).abs().ln();
            sx += t;
            sy += y;
            sxx += t * t;
            sxy += t * y;
            m += 1.0;
        }
        let k1 = rhs(n);
        let k2 = rhs(n + 0.5 * dt * k1);
        let k3 = rhs(n + 0.5 * dt * k2);
        let k4 = rhs(n + dt * k3);
        n += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    Ok(-1.0 / slope)
}
