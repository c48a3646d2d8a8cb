//! Static physics of a single semiconductor optical amplifier.
//!
//! The SOA is treated as one lumped section: its single-pass gain is an
//! exponential function of the carrier density and its phase follows the gain
//! through the Henry factor. Everything here is a pure function of
//! [`SoaParams`].

use serde::{Deserialize, Serialize};

use crate::consts::{ELEMENTARY_CHARGE, PLANCK, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Structural and material constants of one SOA.
///
/// `internal_loss_per_m` is signed and enters the gain exponent as
/// `+a_int·L`, so a lossy waveguide has a negative value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoaParams {
    /// Optical confinement factor Γ, in (0, 1].
    pub confinement: f64,
    /// Peak (differential) gain coefficient, m².
    pub gain_coeff_m2: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    /// Carrier density at transparency, m⁻³.
    pub transparency_density_m3: f64,
    /// Signed internal loss, m⁻¹ (loss < 0).
    pub internal_loss_per_m: f64,
    /// Linewidth enhancement (Henry) factor.
    pub henry_factor: f64,
    /// Spontaneous carrier lifetime, s.
    pub carrier_lifetime_s: f64,
    pub bias_current_a: f64,
}

impl Default for SoaParams {
    /// Generic 1550 nm bulk SOA: about 22 dB small-signal gain at 360 mA and
    /// a saturation power near 9.4 mW.
    fn default() -> Self {
        Self {
            confinement: 0.3,
            gain_coeff_m2: 6e-20,
            length_m: 1e-3,
            width_m: 2e-6,
            height_m: 0.2e-6,
            transparency_density_m3: 1.4e24,
            internal_loss_per_m: 0.0,
            henry_factor: 5.0,
            carrier_lifetime_s: 300e-12,
            bias_current_a: 0.36,
        }
    }
}

impl SoaParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gain_coeff_m2", self.gain_coeff_m2),
            ("length_m", self.length_m),
            ("width_m", self.width_m),
            ("height_m", self.height_m),
            ("transparency_density_m3", self.transparency_density_m3),
            ("henry_factor", self.henry_factor),
            ("carrier_lifetime_s", self.carrier_lifetime_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.confinement > 0.0 && self.confinement <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "confinement must lie in (0, 1], got {}",
                self.confinement
            )));
        }
        if !self.internal_loss_per_m.is_finite() || !self.bias_current_a.is_finite() {
            return Err(Error::InvalidSpec("internal loss and bias current must be finite".into()));
        }
        Ok(())
    }

    /// Active volume w·d·L, m³.
    pub fn volume(&self) -> f64 {
        self.width_m * self.height_m * self.length_m
    }

    /// Γ·a·L, the change of ln G per unit carrier density (m³).
    pub fn gain_slope(&self) -> f64 {
        self.confinement * self.gain_coeff_m2 * self.length_m
    }

    /// Carrier injection rate I/(qV), m⁻³·s⁻¹.
    pub fn pump_rate(&self) -> f64 {
        self.bias_current_a / (ELEMENTARY_CHARGE * self.volume())
    }

    /// ln G as a function of carrier density.
    pub fn log_gain(&self, n: f64) -> f64 {
        self.gain_slope() * (n - self.transparency_density_m3) + self.internal_loss_per_m * self.length_m
    }

    /// Single-pass linear gain `exp(Γ·a·(N − N₀)·L + a_int·L)`.
    pub fn gain(&self, n: f64) -> Result<f64> {
        if !(n > 0.0) {
            return Err(Error::Domain(format!("carrier density must be > 0, got {n}")));
        }
        let g = self.log_gain(n).exp();
        if !g.is_finite() || g == 0.0 {
            return Err(Error::Domain(format!("gain not representable at N = {n:e} m^-3")));
        }
        Ok(g)
    }

    /// Carrier density that produces linear gain `g`.
    pub fn density_for_gain(&self, g: f64) -> Result<f64> {
        if !(g > 0.0) {
            return Err(Error::Domain(format!("gain must be > 0, got {g}")));
        }
        Ok(self.transparency_density_m3 + (g.ln() - self.internal_loss_per_m * self.length_m) / self.gain_slope())
    }

    /// ∂G/∂N = Γ·a·L·G, m³.
    pub fn gain_derivative(&self, g: f64) -> f64 {
        self.gain_slope() * g
    }

    /// Phase imprinted on the optical field, −(α_H/2)·ln G.
    pub fn phase(&self, g: f64) -> Result<f64> {
        if !(g > 0.0) {
            return Err(Error::Domain(format!("gain must be > 0, got {g}")));
        }
        Ok(-0.5 * self.henry_factor * g.ln())
    }

    /// ∂Φ/∂N = −(α_H/2)·Γ·a·L; independent of the operating point.
    pub fn phase_derivative(&self) -> f64 {
        -0.5 * self.henry_factor * self.gain_slope()
    }

    /// Saturation power h·c·w·d / (λ·Γ·a·τ), W.
    pub fn saturation_power(&self, wavelength_m: f64) -> f64 {
        PLANCK * SPEED_OF_LIGHT * self.width_m * self.height_m
            / (wavelength_m * self.confinement * self.gain_coeff_m2 * self.carrier_lifetime_s)
    }

    /// K = λ / (h·c·w·d·L): converts optical power into a carrier
    /// recombination rate density (J⁻¹·m⁻³).
    pub fn k_constant(&self, wavelength_m: f64) -> f64 {
        wavelength_m / (PLANCK * SPEED_OF_LIGHT * self.volume())
    }

    pub fn derived(&self, wavelength_m: f64, g: f64) -> DerivedConstants {
        DerivedConstants {
            k: self.k_constant(wavelength_m),
            p_sat: self.saturation_power(wavelength_m),
            dg_dn: self.gain_derivative(g),
            dphi_dn: self.phase_derivative(),
        }
    }
}

/// Carrier density of one SOA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoaState(f64);

impl SoaState {
    pub fn new(carrier_density_m3: f64) -> Result<Self> {
        if carrier_density_m3 > 0.0 && carrier_density_m3.is_finite() {
            Ok(Self(carrier_density_m3))
        } else {
            Err(Error::Domain(format!("carrier density must be > 0, got {carrier_density_m3}")))
        }
    }

    pub fn carrier_density(self) -> f64 {
        self.0
    }
}

/// Scalar constants derived from [`SoaParams`] at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub k: f64,
    pub p_sat: f64,
    pub dg_dn: f64,
    pub dphi_dn: f64,
}

/// Differential phase Φ̄₁ − Φ̄₂ = −(α_H/2)·ln(G₁/G₂) between two arms with
/// identical Henry factor and internal loss.
pub fn differential_phase(g1: f64, g2: f64, henry_factor: f64) -> f64 {
    -0.5 * henry_factor * (g1 / g2).ln()
}

/// Operating-point constant C_OP weighting the SOA1 carrier perturbation in
/// the port-J output power.
pub fn c_op(g1: f64, g2: f64, dphi: f64, dg_dn: f64, dphi_dn: f64) -> f64 {
    let root = (g1 * g2).sqrt();
    dg_dn - dg_dn / g1 * root * dphi.cos() + dphi_dn * 2.0 * root * dphi.sin()
}

/// Closed form of K_a = K·C_OP/32 written in terms of the saturation power.
pub fn k_a_closed_form(g1: f64, g2: f64, henry_factor: f64, p_sat: f64, lifetime_s: f64) -> f64 {
    let x = -0.5 * henry_factor * (g1 / g2).ln();
    g1 / (32.0 * p_sat * lifetime_s) * (1.0 - (g2 / g1).sqrt() * (x.cos() + henry_factor * x.sin()))
}
