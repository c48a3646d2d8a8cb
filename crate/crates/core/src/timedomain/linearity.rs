//! Quasi-static characterisation and the linearity-point search.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::{extract_tone, simulate, MixerSetup, SimConfig};
use crate::signals::{fmt, DataSignalSpec};
use crate::smallsignal::Architecture;
use crate::{Error, Result};

const POLY_ORDER: usize = 5;
const SCAN_POINTS: usize = 4000;

/// One point of a quasi-static sweep. For Switching the port values are the
/// modulation amplitudes |p| at the clock frequency; for Modulation they are
/// average output powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub p_ctrl_w: f64,
    pub port_i_w: f64,
    pub port_j_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    I,
    J,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub arch: Architecture,
    pub rows: Vec<SweepRow>,
    /// Set when a point failed; `rows` then holds the points before it.
    pub failure: Option<String>,
}

impl SweepTable {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn p_ctrl(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p_ctrl_w).collect()
    }

    pub fn port_j(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.port_j_w).collect()
    }

    pub fn port_i(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.port_i_w).collect()
    }

    /// Curve whose curvature defines the linearity point: the detected RF
    /// power at the clock frequency (∝ |p|²) for Switching, the average
    /// output power for Modulation.
    pub fn response(&self, port: Port) -> Vec<f64> {
        let raw = match port {
            Port::I => self.port_i(),
            Port::J => self.port_j(),
        };
        match self.arch {
            Architecture::Switching => raw.iter().map(|v| v * v).collect(),
            Architecture::Modulation => raw,
        }
    }

    pub fn linearity_point(&self, port: Port) -> Result<LinearityPoint> {
        find_linearity_point(&self.p_ctrl(), &self.response(port))
    }

    /// CSV columns: arch, P_ctrl_W, port_I_W, port_J_W.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["arch", "P_ctrl_W", "port_I_W", "port_J_W"])?;
        for r in &self.rows {
            w.write_record([self.arch.name().to_string(), fmt(r.p_ctrl_w), fmt(r.port_i_w), fmt(r.port_j_w)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Set-up with the control power at port A replaced by `p_ctrl_w` and the
/// data held CW.
pub fn control_setup(base: &MixerSetup, p_ctrl_w: f64) -> MixerSetup {
    let mut s = base.clone();
    match s.arch {
        Architecture::Switching => {
            s.clock.avg_power_w = p_ctrl_w;
            s.data = DataSignalSpec::cw(base.data.wavelength_m, base.data.avg_power_w);
        }
        Architecture::Modulation => {
            s.data = DataSignalSpec::cw(base.data.wavelength_m, p_ctrl_w);
        }
    }
    s
}

/// Simulates one sweep point.
pub fn sweep_point(base: &MixerSetup, p_ctrl_w: f64, cfg: &SimConfig) -> Result<SweepRow> {
    let s = control_setup(base, p_ctrl_w);
    let out = simulate(&s, cfg)?;
    let (i, j) = match s.arch {
        Architecture::Switching => {
            let f = s.clock.rep_rate_hz;
            (extract_tone(&out.port_i, f)?.norm(), extract_tone(&out.port_j, f)?.norm())
        }
        Architecture::Modulation => (out.port_i.mean(), out.port_j.mean()),
    };
    Ok(SweepRow { p_ctrl_w, port_i_w: i, port_j_w: j })
}

pub fn check_sweep_grid(p_ctrl: &[f64]) -> Result<()> {
    if p_ctrl.len() < 20 {
        return Err(Error::InvalidSpec(format!("sweep needs >= 20 points, got {}", p_ctrl.len())));
    }
    if p_ctrl.windows(2).any(|w| !(w[1] > w[0])) || p_ctrl[0] <= 0.0 {
        return Err(Error::InvalidSpec("control powers must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Steady-state response of the interferometer to a swept control power at
/// port A.
pub fn quasi_static_sweep(base: &MixerSetup, p_ctrl: &[f64], cfg: &SimConfig) -> Result<SweepTable> {
    check_sweep_grid(p_ctrl)?;
    let mut table = SweepTable { arch: base.arch, rows: Vec::with_capacity(p_ctrl.len()), failure: None };
    for &p in p_ctrl {
        match sweep_point(base, p, cfg) {
            Ok(r) => table.rows.push(r),
            Err(e) => {
                table.failure = Some(format!("P_ctrl = {p:e} W: {e}"));
                break;
            }
        }
    }
    Ok(table)
}

/// Zero of the second derivative of a 5th-order polynomial fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearityPoint {
    /// Smallest second-derivative zero inside the sweep, W.
    pub p_ctrl_w: f64,
    /// Every zero found inside the sweep, ascending, W.
    pub roots_w: Vec<f64>,
    /// Polynomial in u = (x_mW − center)/half_width, ascending powers.
    pub coeffs: Vec<f64>,
    pub center_mw: f64,
    pub half_width_mw: f64,
}

impl LinearityPoint {
    fn u(&self, x_w: f64) -> f64 {
        (x_w * 1e3 - self.center_mw) / self.half_width_mw
    }

    pub fn fit_at(&self, x_w: f64) -> f64 {
        poly(&self.coeffs, self.u(x_w))
    }

    /// Second derivative with respect to power in mW.
    pub fn sd_at(&self, x_w: f64) -> f64 {
        poly(&deriv2(&self.coeffs), self.u(x_w)) / (self.half_width_mw * self.half_width_mw)
    }
}

fn poly(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * u + v)
}

fn deriv2(c: &[f64]) -> Vec<f64> {
    (2..c.len()).map(|k| c[k] * (k * (k - 1)) as f64).collect()
}

/// Fits a 5th-order polynomial in linear mW and returns the zero crossings
/// of its second derivative inside the data range.
pub fn find_linearity_point(x_w: &[f64], y: &[f64]) -> Result<LinearityPoint> {
    if x_w.len() != y.len() {
        return Err(Error::InvalidSpec("x and y lengths differ".into()));
    }
    if x_w.len() < 10 {
        return Err(Error::InvalidSpec(format!("need >= 10 sweep points, got {}", x_w.len())));
    }
    let lo = x_w.iter().copied().fold(f64::INFINITY, f64::min) * 1e3;
    let hi = x_w.iter().copied().fold(f64::NEG_INFINITY, f64::max) * 1e3;
    if !(hi > lo) {
        return Err(Error::InvalidSpec("sweep has no extent".into()));
    }
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let m = x_w.len();
    let a = DMatrix::from_fn(m, POLY_ORDER + 1, |r, c| ((x_w[r] * 1e3 - center) / half).powi(c as i32));
    let b = DVector::from_iterator(m, y.iter().map(|v| v / scale));
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Domain(format!("polynomial fit failed: {e}")))?;
    let coeffs: Vec<f64> = sol.iter().map(|v| v * scale).collect();
    let d2 = deriv2(&coeffs);
    let f = |u: f64| poly(&d2, u);
    let mut roots = Vec::new();
    let mut prev = (-1.0, f(-1.0));
    for k in 1..=SCAN_POINTS {
        let u = -1.0 + 2.0 * k as f64 / SCAN_POINTS as f64;
        let v = f(u);
        if prev.1 == 0.0 {
            roots.push(prev.0);
        } else if prev.1 * v < 0.0 {
            let (mut a, mut b, fa) = (prev.0, u, prev.1);
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if f(mid) * fa > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = (u, v);
    }
    let to_w = |u: f64| (center + half * u) * 1e-3;
    if roots.is_empty() {
        let sd_curve = (0..=100)
            .map(|k| {
                let u = -1.0 + 0.02 * k as f64;
                (to_w(u), f(u) / (half * half))
            })
            .collect();
        return Err(Error::LinearityNotFound { lo: lo * 1e-3, hi: hi * 1e-3, sd_curve });
    }
    let roots_w: Vec<f64> = roots.into_iter().map(to_w).collect();
    Ok(LinearityPoint { p_ctrl_w: roots_w[0], roots_w, coeffs, center_mw: center, half_width_mw: half })
}
