//! Reference operating conditions of the measured mixer.
//!
//! Port C always carries −15 dBm. The control power at port A is the
//! linearity point of each architecture: the clock for Switching, the data
//! carrier for Modulation.

use crate::dsp::{ArchDrive, EvmSetup, MixerModel, ModFormat, NoiseAnchor, DEFAULT_ROLLOFF};
use crate::rf_chain::ChainSpec;
use crate::signals::{DataSignalSpec, PulseTrainSpec};
use crate::smallsignal::{calibrate, Anchor, Architecture, CalibrationResult, CalibrationSetup, Couplings, Mode};
use crate::soa::SoaParams;
use crate::timedomain::MixerSetup;
use crate::units::dbm_to_w;
use crate::Result;

pub const CONTROL_WAVELENGTH_M: f64 = 1550e-9;
pub const INPUT_WAVELENGTH_M: f64 = 1557.4e-9;
pub const PORT_C_POWER_DBM: f64 = -15.0;
pub const SWITCHING_CONTROL_W: f64 = 0.114e-3;
pub const MODULATION_CONTROL_W: f64 = 0.04e-3;
/// Sinusoidal data frequency for conversion-gain runs.
pub const DATA_FREQ_HZ: f64 = 1e9;
/// RF carrier of the complex-modulated data.
pub const RF_CARRIER_HZ: f64 = 0.75e9;
pub const EVM_MODULATION_INDEX: f64 = 0.5;
pub const EVM_SYMBOLS: usize = 1024;
/// Gain of the reference arm held fixed during calibration.
pub const CALIBRATION_G2: f64 = 1000.0;
pub const TAU_D_BOUNDS_S: (f64, f64) = (10e-12, 100e-12);

pub fn port_c_power_w() -> f64 {
    dbm_to_w(PORT_C_POWER_DBM)
}

/// (clock average power, data average power) for `arch`.
pub fn drive_powers(arch: Architecture) -> (f64, f64) {
    match arch {
        Architecture::Switching => (SWITCHING_CONTROL_W, port_c_power_w()),
        Architecture::Modulation => (port_c_power_w(), MODULATION_CONTROL_W),
    }
}

/// (clock, data) wavelengths for `arch`.
pub fn wavelengths(arch: Architecture) -> (f64, f64) {
    match arch {
        Architecture::Switching => (CONTROL_WAVELENGTH_M, INPUT_WAVELENGTH_M),
        Architecture::Modulation => (INPUT_WAVELENGTH_M, CONTROL_WAVELENGTH_M),
    }
}

pub fn clock(arch: Architecture) -> PulseTrainSpec {
    PulseTrainSpec {
        avg_power_w: drive_powers(arch).0,
        wavelength_m: wavelengths(arch).0,
        ..PulseTrainSpec::default()
    }
}

/// Mixer at its reference point driven by a sinusoid of depth `m_dat`.
pub fn mixer_setup(arch: Architecture, modulation_index: f64) -> MixerSetup {
    let (_, p_dat) = drive_powers(arch);
    let lambda = wavelengths(arch).1;
    let data = if modulation_index > 0.0 {
        DataSignalSpec::sinusoid(lambda, p_dat, DATA_FREQ_HZ, modulation_index)
    } else {
        DataSignalSpec::cw(lambda, p_dat)
    };
    MixerSetup {
        soa1: SoaParams::default(),
        soa2: SoaParams::default(),
        arch,
        clock: clock(arch),
        data,
        couplings: Couplings::default(),
        phi0: 0.0,
        reference_wavelength_m: INPUT_WAVELENGTH_M,
    }
}

/// Linearity sweep grid: 60 points from 2 µW to 300 µW.
pub fn linearity_grid() -> Vec<f64> {
    let (lo, hi, n) = (2e-6, 300e-6, 60);
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Measured conversion gains at the 9 GHz and 39 GHz products.
pub fn anchors() -> [Anchor; 4] {
    [
        Anchor { arch: Architecture::Switching, index: 1, cg_db: 16.0 },
        Anchor { arch: Architecture::Switching, index: 4, cg_db: 4.0 },
        Anchor { arch: Architecture::Modulation, index: 1, cg_db: 15.0 },
        Anchor { arch: Architecture::Modulation, index: 4, cg_db: 9.0 },
    ]
}

pub fn calibration_setup() -> CalibrationSetup {
    let spectrum = |arch| clock(arch).analytic_spectrum(6);
    CalibrationSetup {
        soa: SoaParams::default(),
        wavelength_m: INPUT_WAVELENGTH_M,
        couplings: Couplings::default(),
        clock_switching: spectrum(Architecture::Switching),
        clock_modulation: spectrum(Architecture::Modulation),
        data_freq_hz: DATA_FREQ_HZ,
        g2: CALIBRATION_G2,
        tau_d_bounds: TAU_D_BOUNDS_S,
    }
}

pub fn calibrated() -> Result<CalibrationResult> {
    calibrate(&anchors(), &calibration_setup())
}

/// EVM set-up on the calibrated operating points, noise-free.
pub fn evm_setup(cal: &CalibrationResult, mode: Mode) -> EvmSetup {
    let drive = |arch| {
        cal.op(arch).map(|op| {
            let (clock_avg_power_w, data_avg_power_w) = drive_powers(arch);
            ArchDrive { op: *op, clock_avg_power_w, data_avg_power_w }
        })
    };
    EvmSetup {
        clock: PulseTrainSpec::default(),
        switching: drive(Architecture::Switching),
        modulation: drive(Architecture::Modulation),
        modulation_index: EVM_MODULATION_INDEX,
        carrier_hz: RF_CARRIER_HZ,
        rolloff: DEFAULT_ROLLOFF,
        n_symbols: EVM_SYMBOLS,
        sps: 8,
        seed: 1,
        chain: ChainSpec::default(),
        noise_psd: 0.0,
        mixer: MixerModel::SmallSignal { mode },
    }
}

/// Switching QPSK at the 39.25 GHz product and 256 MBaud sits on the FEC
/// limit.
pub fn noise_anchor() -> NoiseAnchor {
    NoiseAnchor { format: ModFormat::Qpsk, baud_hz: 256e6, arch: Architecture::Switching, index: 4, evm_pct: 35.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_c_is_minus_15_dbm() {
        approx::assert_relative_eq!(port_c_power_w(), 31.622_776_601_683_79e-6, max_relative = 1e-12);
    }

    #[test]
    fn setups_validate() {
        for arch in Architecture::ALL {
            mixer_setup(arch, 0.02).validate().unwrap();
            mixer_setup(arch, 0.0).validate().unwrap();
        }
        assert_eq!(linearity_grid().len(), 60);
    }
}
