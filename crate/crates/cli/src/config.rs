//! Experiment configuration: TOML with units in every key name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use soamix_core::dsp::{ArchDrive, EvmScenario, EvmSetup, MixerModel, ModFormat, NoiseAnchor, MIN_EVM_SYMBOLS};
use soamix_core::presets;
use soamix_core::rf_chain::ChainSpec;
use soamix_core::smallsignal::{Anchor, CalibrationResult, CalibrationSetup, Couplings, Mode};
use soamix_core::timedomain::{MixerSetup, SimConfig};
use soamix_core::units::dbm_to_w;
use soamix_core::{Architecture, DataSignalSpec, PulseShape, PulseTrainSpec, SoaParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Analytic,
    Oracle,
    Both,
}

impl RunMode {
    pub fn analytic(self) -> bool {
        matches!(self, RunMode::Analytic | RunMode::Both)
    }

    pub fn oracle(self) -> bool {
        matches!(self, RunMode::Oracle | RunMode::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    /// Overrides each command's own default when set.
    pub mode: Option<RunMode>,
    pub out_dir: PathBuf,
    /// Worker threads for independent sweep points; 0 uses every core.
    pub workers: usize,
    pub soa1: SoaParams,
    pub soa2: SoaParams,
    pub couplings: Couplings,
    pub clock: ClockConfig,
    pub operating: OperatingConfig,
    pub chain: ChainSpec,
    pub oracle: SimConfig,
    pub calibration: CalibrationConfig,
    pub cg_sweep: CgSweepConfig,
    pub linearity: LinearityConfig,
    pub evm: EvmConfig,
    pub validate: ValidateConfig,
    pub pulse_spectrum: PulseSpectrumConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClockConfig {
    pub rep_rate_hz: f64,
    pub fwhm_s: f64,
    pub shape: PulseShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatingConfig {
    pub archs: Vec<Architecture>,
    /// Clock power at port A in the Switching architecture.
    pub switching_control_w: f64,
    /// Data power at port A in the Modulation architecture.
    pub modulation_control_w: f64,
    pub port_c_power_dbm: f64,
    pub control_wavelength_m: f64,
    pub input_wavelength_m: f64,
    pub data_freq_hz: f64,
    pub phi0_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub anchors: Vec<Anchor>,
    pub g2: f64,
    pub tau_d_min_s: f64,
    pub tau_d_max_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CgSweepConfig {
    pub modulation_indices: Vec<f64>,
    pub harmonics: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearityConfig {
    pub p_ctrl_min_w: f64,
    pub p_ctrl_max_w: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Switching,
    Modulation,
    /// Input signal at the RF carrier, no mixer.
    Input,
}

impl Target {
    pub fn arch(self) -> Option<Architecture> {
        match self {
            Target::Switching => Some(Architecture::Switching),
            Target::Modulation => Some(Architecture::Modulation),
            Target::Input => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationPoint {
    pub format: ModFormat,
    pub baud_hz: f64,
    pub arch: Target,
    #[serde(default)]
    pub index: usize,
}

impl ConstellationPoint {
    pub fn scenario(&self) -> EvmScenario {
        EvmScenario { format: self.format, baud_hz: self.baud_hz, arch: self.arch.arch(), index: self.index }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvmConfig {
    pub formats: Vec<ModFormat>,
    pub bauds_hz: Vec<f64>,
    pub harmonics: Vec<usize>,
    pub include_input: bool,
    pub n_symbols: usize,
    pub samples_per_symbol: usize,
    pub rolloff: f64,
    pub modulation_index: f64,
    pub carrier_hz: f64,
    /// Scale output noise so `noise_anchor` lands on its EVM.
    pub calibrate_noise: bool,
    pub noise_anchor: NoiseAnchor,
    /// Samples per clock period of the time-domain path.
    pub oracle_samples_per_period: usize,
    pub constellations: Vec<ConstellationPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Multiplies the analytic τ_d; anything but 1 is a deliberate fault.
    pub tau_d_scale: f64,
    pub modulation_index: f64,
    pub modulation_indices: Vec<f64>,
    pub harmonics: Vec<usize>,
    pub identity_points: usize,
    pub identity_rel_tol: f64,
    pub max_magnitude_db: f64,
    pub max_phase_deg: f64,
    pub max_index_spread_db: f64,
    pub max_step_change_db: f64,
    pub max_conservation_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSpectrumConfig {
    pub max_index: usize,
    pub avg_power_w: f64,
    pub samples_per_period: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            mode: None,
            out_dir: PathBuf::from("out"),
            workers: 0,
            soa1: SoaParams::default(),
            soa2: SoaParams::default(),
            couplings: Couplings::default(),
            clock: ClockConfig::default(),
            operating: OperatingConfig::default(),
            chain: ChainSpec::default(),
            oracle: SimConfig { samples_per_period: 1024, analysis_periods: 20, transient_periods: None },
            calibration: CalibrationConfig::default(),
            cg_sweep: CgSweepConfig::default(),
            linearity: LinearityConfig::default(),
            evm: EvmConfig::default(),
            validate: ValidateConfig::default(),
            pulse_spectrum: PulseSpectrumConfig::default(),
        }
    }
}

impl Default for ClockConfig {
    fn default() -> Self {
        let p = PulseTrainSpec::default();
        Self { rep_rate_hz: p.rep_rate_hz, fwhm_s: p.fwhm_s, shape: p.shape }
    }
}

impl Default for OperatingConfig {
    fn default() -> Self {
        Self {
            archs: Architecture::ALL.to_vec(),
            switching_control_w: presets::SWITCHING_CONTROL_W,
            modulation_control_w: presets::MODULATION_CONTROL_W,
            port_c_power_dbm: presets::PORT_C_POWER_DBM,
            control_wavelength_m: presets::CONTROL_WAVELENGTH_M,
            input_wavelength_m: presets::INPUT_WAVELENGTH_M,
            data_freq_hz: presets::DATA_FREQ_HZ,
            phi0_rad: 0.0,
        }
    }
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            anchors: presets::anchors().to_vec(),
            g2: presets::CALIBRATION_G2,
            tau_d_min_s: presets::TAU_D_BOUNDS_S.0,
            tau_d_max_s: presets::TAU_D_BOUNDS_S.1,
        }
    }
}

impl Default for CgSweepConfig {
    fn default() -> Self {
        Self { modulation_indices: vec![0.02, 0.05, 0.1], harmonics: vec![1, 4] }
    }
}

impl Default for LinearityConfig {
    fn default() -> Self {
        Self { p_ctrl_min_w: 2e-6, p_ctrl_max_w: 300e-6, points: 60 }
    }
}

impl Default for EvmConfig {
    fn default() -> Self {
        Self {
            formats: ModFormat::ALL.to_vec(),
            bauds_hz: vec![32e6, 64e6, 128e6, 256e6, 512e6],
            harmonics: vec![1, 4],
            include_input: true,
            n_symbols: presets::EVM_SYMBOLS,
            samples_per_symbol: 8,
            rolloff: soamix_core::dsp::DEFAULT_ROLLOFF,
            modulation_index: presets::EVM_MODULATION_INDEX,
            carrier_hz: presets::RF_CARRIER_HZ,
            calibrate_noise: true,
            noise_anchor: presets::noise_anchor(),
            oracle_samples_per_period: 256,
            constellations: vec![
                ConstellationPoint { format: ModFormat::Qpsk, baud_hz: 256e6, arch: Target::Switching, index: 4 },
                ConstellationPoint { format: ModFormat::Qam16, baud_hz: 128e6, arch: Target::Modulation, index: 4 },
            ],
        }
    }
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            tau_d_scale: 1.0,
            modulation_index: 0.02,
            modulation_indices: vec![0.02, 0.05, 0.1],
            harmonics: vec![1, 4],
            identity_points: 1000,
            identity_rel_tol: 1e-10,
            max_magnitude_db: 0.5,
            max_phase_deg: 5.0,
            max_index_spread_db: 0.1,
            max_step_change_db: 0.01,
            max_conservation_rel: 1e-9,
        }
    }
}

impl Default for PulseSpectrumConfig {
    fn default() -> Self {
        Self { max_index: 8, avg_power_w: 1e-3, samples_per_period: 4096 }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Read { path: path.to_owned(), source: e })?;
        Self::parse(&text)
    }

    /// Parses and validates; every unknown key and every violated
    /// constraint is reported, not just the first.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = toml::from_str(text)?;
        let unknown = unknown_keys(&table, &schema_exemplar());
        if !unknown.is_empty() {
            return Err(CliError::UnknownKeys(unknown));
        }
        let cfg: Config = toml::Value::Table(table).try_into()?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(problems))
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let mut core = |name: &str, r: soamix_core::Result<()>| {
            if let Err(e) = r {
                p.push(format!("{name}: {e}"));
            }
        };
        core("soa1", self.soa1.validate());
        core("soa2", self.soa2.validate());
        core("couplings", self.couplings.validate());
        core("clock", self.clock_spec(Architecture::Switching).validate());
        core("chain", self.chain.validate());

        let o = &self.operating;
        if o.archs.is_empty() {
            p.push("operating.archs: at least one architecture required".into());
        }
        for (k, v) in [
            ("operating.switching_control_w", o.switching_control_w),
            ("operating.modulation_control_w", o.modulation_control_w),
            ("operating.control_wavelength_m", o.control_wavelength_m),
            ("operating.input_wavelength_m", o.input_wavelength_m),
            ("operating.data_freq_hz", o.data_freq_hz),
            ("calibration.g2", self.calibration.g2),
            ("evm.carrier_hz", self.evm.carrier_hz),
            ("pulse_spectrum.avg_power_w", self.pulse_spectrum.avg_power_w),
            ("validate.tau_d_scale", self.validate.tau_d_scale),
        ] {
            positive(&mut p, k, v);
        }
        if !o.port_c_power_dbm.is_finite() {
            p.push("operating.port_c_power_dbm: must be finite".into());
        }
        if !o.phi0_rad.is_finite() {
            p.push("operating.phi0_rad: must be finite".into());
        }
        if o.data_freq_hz >= 0.5 * self.clock.rep_rate_hz {
            p.push("operating.data_freq_hz: must lie below half the clock rate".into());
        }
        if self.oracle.samples_per_period < 16 || self.oracle.analysis_periods == 0 {
            p.push("oracle: samples_per_period must be >= 16 and analysis_periods >= 1".into());
        }

        let c = &self.calibration;
        if !(c.tau_d_min_s > 0.0 && c.tau_d_min_s < c.tau_d_max_s) {
            p.push("calibration: need 0 < tau_d_min_s < tau_d_max_s".into());
        }
        indices(&mut p, "cg_sweep.modulation_indices", &self.cg_sweep.modulation_indices);
        harmonics(&mut p, "cg_sweep.harmonics", &self.cg_sweep.harmonics);

        let l = &self.linearity;
        if !(l.p_ctrl_min_w > 0.0 && l.p_ctrl_min_w < l.p_ctrl_max_w) {
            p.push("linearity: need 0 < p_ctrl_min_w < p_ctrl_max_w".into());
        }
        if l.points < 8 {
            p.push("linearity.points: at least 8 points required".into());
        }

        let e = &self.evm;
        if e.formats.is_empty() {
            p.push("evm.formats: at least one format required".into());
        }
        if e.bauds_hz.is_empty() || e.bauds_hz.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            p.push("evm.bauds_hz: non-empty list of positive rates required".into());
        }
        harmonics(&mut p, "evm.harmonics", &e.harmonics);
        if e.n_symbols < MIN_EVM_SYMBOLS {
            p.push(format!("evm.n_symbols: at least {MIN_EVM_SYMBOLS} symbols required"));
        }
        if e.samples_per_symbol < 2 {
            p.push("evm.samples_per_symbol: must be >= 2".into());
        }
        if !(0.0..=1.0).contains(&e.rolloff) {
            p.push("evm.rolloff: must lie in [0, 1]".into());
        }
        if !(e.modulation_index > 0.0 && e.modulation_index <= 1.0) {
            p.push("evm.modulation_index: must lie in (0, 1]".into());
        }
        if e.oracle_samples_per_period < 16 {
            p.push("evm.oracle_samples_per_period: must be >= 16".into());
        }
        for (k, pt) in e.constellations.iter().enumerate() {
            if pt.arch != Target::Input && pt.index == 0 {
                p.push(format!("evm.constellations[{k}].index: must be >= 1"));
            }
            if !(pt.baud_hz > 0.0) {
                p.push(format!("evm.constellations[{k}].baud_hz: must be > 0"));
            }
        }

        let v = &self.validate;
        if !(v.modulation_index > 0.0 && v.modulation_index <= 1.0) {
            p.push("validate.modulation_index: must lie in (0, 1]".into());
        }
        indices(&mut p, "validate.modulation_indices", &v.modulation_indices);
        harmonics(&mut p, "validate.harmonics", &v.harmonics);
        if self.pulse_spectrum.max_index == 0 {
            p.push("pulse_spectrum.max_index: must be >= 1".into());
        }
        p
    }

    pub fn port_c_power_w(&self) -> f64 {
        dbm_to_w(self.operating.port_c_power_dbm)
    }

    /// (clock average power, data average power) for `arch`.
    pub fn drive_powers(&self, arch: Architecture) -> (f64, f64) {
        match arch {
            Architecture::Switching => (self.operating.switching_control_w, self.port_c_power_w()),
            Architecture::Modulation => (self.port_c_power_w(), self.operating.modulation_control_w),
        }
    }

    /// (clock, data) wavelengths for `arch`.
    pub fn wavelengths(&self, arch: Architecture) -> (f64, f64) {
        let o = &self.operating;
        match arch {
            Architecture::Switching => (o.control_wavelength_m, o.input_wavelength_m),
            Architecture::Modulation => (o.input_wavelength_m, o.control_wavelength_m),
        }
    }

    pub fn clock_spec(&self, arch: Architecture) -> PulseTrainSpec {
        PulseTrainSpec {
            rep_rate_hz: self.clock.rep_rate_hz,
            fwhm_s: self.clock.fwhm_s,
            shape: self.clock.shape,
            avg_power_w: self.drive_powers(arch).0,
            wavelength_m: self.wavelengths(arch).0,
        }
    }

    /// Mixer at its configured point; `m_dat = 0` holds the data CW.
    pub fn mixer_setup(&self, arch: Architecture, m_dat: f64) -> MixerSetup {
        let p_dat = self.drive_powers(arch).1;
        let lambda = self.wavelengths(arch).1;
        let data = if m_dat > 0.0 {
            DataSignalSpec::sinusoid(lambda, p_dat, self.operating.data_freq_hz, m_dat)
        } else {
            DataSignalSpec::cw(lambda, p_dat)
        };
        MixerSetup {
            soa1: self.soa1,
            soa2: self.soa2,
            arch,
            clock: self.clock_spec(arch),
            data,
            couplings: self.couplings,
            phi0: self.operating.phi0_rad,
            reference_wavelength_m: self.operating.input_wavelength_m,
        }
    }

    pub fn linearity_grid(&self) -> Vec<f64> {
        let l = &self.linearity;
        (0..l.points).map(|k| l.p_ctrl_min_w + (l.p_ctrl_max_w - l.p_ctrl_min_w) * k as f64 / (l.points - 1) as f64).collect()
    }

    pub fn calibration_setup(&self) -> CalibrationSetup {
        let spectrum = |arch| self.clock_spec(arch).analytic_spectrum(6);
        CalibrationSetup {
            soa: self.soa1,
            wavelength_m: self.operating.input_wavelength_m,
            couplings: self.couplings,
            clock_switching: spectrum(Architecture::Switching),
            clock_modulation: spectrum(Architecture::Modulation),
            data_freq_hz: self.operating.data_freq_hz,
            g2: self.calibration.g2,
            tau_d_bounds: (self.calibration.tau_d_min_s, self.calibration.tau_d_max_s),
        }
    }

    /// EVM set-up on the calibrated operating points, noise-free.
    pub fn evm_setup(&self, cal: &CalibrationResult, model: EvmModel) -> EvmSetup {
        let drive = |arch| {
            cal.op(arch).map(|op| {
                let (clock_avg_power_w, data_avg_power_w) = self.drive_powers(arch);
                ArchDrive { op: *op, clock_avg_power_w, data_avg_power_w }
            })
        };
        let e = &self.evm;
        let mixer = match model {
            EvmModel::Analytic => MixerModel::SmallSignal { mode: Mode::Full },
            EvmModel::Oracle => MixerModel::TimeDomain {
                base: Box::new(self.mixer_setup(Architecture::Switching, 0.0)),
                samples_per_period: e.oracle_samples_per_period,
            },
        };
        EvmSetup {
            clock: self.clock_spec(Architecture::Switching),
            switching: drive(Architecture::Switching),
            modulation: drive(Architecture::Modulation),
            modulation_index: e.modulation_index,
            carrier_hz: e.carrier_hz,
            rolloff: e.rolloff,
            n_symbols: e.n_symbols,
            sps: e.samples_per_symbol,
            seed: self.seed,
            chain: self.chain,
            noise_psd: 0.0,
            mixer,
        }
    }

    pub fn evm_scenarios(&self) -> Vec<EvmScenario> {
        let e = &self.evm;
        let mut out = Vec::new();
        for &format in &e.formats {
            for &baud_hz in &e.bauds_hz {
                if e.include_input {
                    out.push(EvmScenario { format, baud_hz, arch: None, index: 0 });
                }
                for &arch in &self.operating.archs {
                    for &index in &e.harmonics {
                        out.push(EvmScenario { format, baud_hz, arch: Some(arch), index });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvmModel {
    Analytic,
    Oracle,
}

impl EvmModel {
    pub fn name(self) -> &'static str {
        match self {
            EvmModel::Analytic => "analytic",
            EvmModel::Oracle => "oracle",
        }
    }
}

fn positive(p: &mut Vec<String>, key: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        p.push(format!("{key}: must be > 0, got {v}"));
    }
}

fn indices(p: &mut Vec<String>, key: &str, v: &[f64]) {
    if v.is_empty() || v.iter().any(|m| !(*m > 0.0 && *m <= 1.0)) {
        p.push(format!("{key}: non-empty list of values in (0, 1] required"));
    }
}

fn harmonics(p: &mut Vec<String>, key: &str, v: &[usize]) {
    if v.is_empty() || v.contains(&0) {
        p.push(format!("{key}: non-empty list of indices >= 1 required"));
    }
}

/// Default config with every optional field and list populated, so its
/// serialised form names every accepted key.
fn schema_exemplar() -> toml::Value {
    let mut cfg = Config::default();
    cfg.mode = Some(RunMode::Both);
    cfg.chain.lo_freq_hz = Some(0.0);
    cfg.oracle.transient_periods = Some(0);
    toml::Value::try_from(&cfg).expect("config serialises")
}

fn unknown_keys(table: &toml::Table, schema: &toml::Value) -> Vec<String> {
    let mut out = Vec::new();
    walk(table, schema, "", &mut out);
    out
}

fn walk(table: &toml::Table, schema: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    let Some(schema) = schema.as_table() else { return };
    for (key, value) in table {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        let Some(expected) = schema.get(key) else {
            out.push(path);
            continue;
        };
        match (value, expected) {
            (toml::Value::Table(t), _) => walk(t, expected, &path, out),
            (toml::Value::Array(items), toml::Value::Array(proto)) => {
                if let Some(first) = proto.first() {
                    for (k, item) in items.iter().enumerate() {
                        if let toml::Value::Table(t) = item {
                            walk(t, first, &format!("{path}[{k}]"), out);
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

/// Annotated config with every default written out.
pub fn default_toml() -> &'static str {
    include_str!("../default.toml")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_match_built_in() {
        assert_eq!(Config::parse(default_toml()).unwrap(), Config::default());
    }

    #[test]
    fn serialised_defaults_parse_back() {
        let text = toml::to_string(&Config::default()).unwrap();
        assert_eq!(Config::parse(&text).unwrap(), Config::default());
    }

    fn leaf_keys(v: &toml::Value, out: &mut Vec<String>) {
        match v {
            toml::Value::Table(t) => {
                for (k, v) in t {
                    if v.is_table() || v.as_array().is_some_and(|a| a.iter().all(toml::Value::is_table) && !a.is_empty()) {
                        leaf_keys(v, out);
                    } else {
                        out.push(k.clone());
                    }
                }
            }
            toml::Value::Array(a) => a.iter().take(1).for_each(|v| leaf_keys(v, out)),
            _ => {}
        }
    }

    #[test]
    fn shipped_defaults_document_every_key() {
        let mut keys = Vec::new();
        leaf_keys(&schema_exemplar(), &mut keys);
        let text = default_toml();
        for k in keys {
            assert!(text.contains(&format!("{k} =")), "{k} missing from default.toml");
        }
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = Config::parse("[soa1]\nhenry_factor = 3.0\n[chain]\nlo_freq_hz = 8.5e9\n").unwrap();
        assert_eq!(cfg.soa1.henry_factor, 3.0);
        assert_eq!(cfg.soa1.bias_current_a, SoaParams::default().bias_current_a);
        assert_eq!(cfg.chain.lo_freq_hz, Some(8.5e9));
    }

    #[test]
    fn every_unknown_key_is_listed() {
        let text = "colour = 1\n[soa1]\nalpha = 5\n[evm]\nbaud = [1.0]\n[[evm.constellations]]\nformat = \"qpsk\"\nbaud_hz = 1e8\narch = \"input\"\nextra = 2\n[nope]\nx = 1\n";
        match Config::parse(text) {
            Err(CliError::UnknownKeys(keys)) => {
                assert_eq!(keys, ["colour", "evm.baud", "evm.constellations[0].extra", "nope", "soa1.alpha"]);
            }
            other => panic!("expected unknown keys, got {other:?}"),
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "[soa1]\nconfinement = 2.0\n[linearity]\npoints = 3\n[evm]\nrolloff = 1.5\n";
        match Config::parse(text) {
            Err(CliError::Invalid(p)) => {
                assert_eq!(p.len(), 3, "{p:?}");
                assert!(p[0].starts_with("soa1"));
            }
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn type_errors_name_the_key() {
        let err = Config::parse("[clock]\nrep_rate_hz = \"fast\"\n").unwrap_err().to_string();
        assert!(err.contains("rep_rate_hz"), "{err}");
    }

    #[test]
    fn mixer_setup_matches_presets() {
        let cfg = Config::default();
        for arch in Architecture::ALL {
            assert_eq!(cfg.mixer_setup(arch, 0.02), presets::mixer_setup(arch, 0.02));
        }
        assert_eq!(cfg.calibration_setup(), presets::calibration_setup());
    }
}
