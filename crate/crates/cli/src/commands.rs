//! Subcommand implementations. Each writes CSVs into the output directory
//! and renders their figures from the written files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use soamix_core::dsp::{calibrate_noise_psd, evm_point, write_constellation_csv, write_evm_csv, EvmReport};
use soamix_core::signals::{harmonics, synthesize_pulse_train, GridSpec};
use soamix_core::smallsignal::{
    calibrate, upconverted_power, write_cg_csv, Architecture, CalibrationResult, CgRow, Couplings, DataTone, Mode,
    OperatingPoint,
};
use soamix_core::timedomain::{check_sweep_grid, extract_tone, simulate, sweep_point, Port, SimConfig, SweepTable};
use soamix_core::units::w_to_dbm;
use soamix_core::{Complex64, PulseTrainSpec, SoaParams};

use crate::config::{Config, EvmModel, RunMode};
use crate::error::CliError;
use crate::plots::plot_csv;

pub struct Runner {
    pub cfg: Config,
    pub out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(cfg: Config) -> Result<Self, CliError> {
        let out = cfg.out_dir.clone();
        std::fs::create_dir_all(&out)?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
        Ok(Self { cfg, out, pool })
    }

    /// Maps `f` over `items` on the worker pool; results keep input order.
    fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    fn csv_writer(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.out.join(name);
        let f = File::create(&path)?;
        Ok((path, BufWriter::new(f)))
    }

    fn emit(&self, csv: &Path, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
        written.push(csv.to_owned());
        if let Some(svg) = plot_csv(csv, &self.out)? {
            written.push(svg);
        }
        Ok(())
    }

    fn calibrated(&self) -> Result<CalibrationResult, CliError> {
        Ok(calibrate(&self.cfg.calibration.anchors, &self.cfg.calibration_setup())?)
    }
}

fn db20(x: f64) -> f64 {
    20.0 * x.log10()
}

/// Oracle run at depth `m_dat`, returning the tone at each product over
/// the input tone.
fn oracle_products(cfg: &Config, arch: Architecture, m_dat: f64, idx: &[usize], sim: &SimConfig) -> Result<Vec<Complex64>, CliError> {
    let s = cfg.mixer_setup(arch, m_dat);
    let out = simulate(&s, sim)?;
    let p_dat = s.data.tone_coefficient();
    idx.iter()
        .map(|&i| {
            let f = i as f64 * s.clock.rep_rate_hz - cfg.operating.data_freq_hz;
            Ok(extract_tone(&out.port_j, f)? / p_dat.norm())
        })
        .collect()
}

/// Full-mode analytic product coefficient over |p_dat| at the physical
/// operating point, with τ_d scaled by `tau_d_scale`.
fn analytic_product(cfg: &Config, arch: Architecture, m_dat: f64, i: usize, tau_d_scale: f64) -> Result<Complex64, CliError> {
    let s = cfg.mixer_setup(arch, m_dat);
    let op = s.operating_point()?;
    let op = op.with_tau_d(op.tau_d * tau_d_scale);
    let tone = DataTone::new(cfg.operating.data_freq_hz, s.data.avg_power_w, m_dat);
    let r = upconverted_power(&op, &s.clock.analytic_spectrum(i.max(6)), &tone, i, Mode::Full)?;
    Ok(r.p_j / tone.coeff.norm())
}

pub fn cg_sweep(r: &Runner, mode: RunMode) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &r.cfg;
    let idx = &cfg.cg_sweep.harmonics;
    let combos: Vec<(Architecture, f64)> = cfg
        .operating
        .archs
        .iter()
        .flat_map(|&a| cfg.cg_sweep.modulation_indices.iter().map(move |&m| (a, m)))
        .collect();
    let f_ck = cfg.clock.rep_rate_hz;
    let f_dat = cfg.operating.data_freq_hz;
    let row = |arch, index: usize, p: Complex64, mode: &str, m_dat| CgRow {
        arch,
        index,
        f_target_hz: index as f64 * f_ck - f_dat,
        cg_db: db20(p.norm()),
        mode: mode.into(),
        m_dat,
    };
    let mut rows = Vec::new();
    if mode.analytic() {
        for &(arch, m) in &combos {
            for &i in idx {
                rows.push(row(arch, i, analytic_product(cfg, arch, m, i, 1.0)?, "analytic", m));
            }
        }
    }
    if mode.oracle() {
        let results = r.par_map(&combos, |&(arch, m)| oracle_products(cfg, arch, m, idx, &cfg.oracle));
        for (&(arch, m), res) in combos.iter().zip(results) {
            for (&i, p) in idx.iter().zip(res?) {
                rows.push(row(arch, i, p, "oracle", m));
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.arch, a.index, &a.mode).cmp(&(b.arch, b.index, &b.mode)).then(a.m_dat.total_cmp(&b.m_dat))
    });
    let (path, w) = r.csv_writer("cg_sweep.csv")?;
    write_cg_csv(&rows, w)?;
    let mut written = Vec::new();
    r.emit(&path, &mut written)?;
    Ok(written)
}

/// Quasi-static sweeps are always time-domain runs, whatever the mode.
pub fn linearity(r: &Runner) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &r.cfg;
    let grid = cfg.linearity_grid();
    check_sweep_grid(&grid)?;
    let mut written = Vec::new();
    let mut summary = csv::Writer::from_path(r.out.join("linearity_points.csv")).map_err(core_csv)?;
    summary.write_record(["arch", "port", "p_lin_W", "p_lin_dBm", "roots_W", "status"]).map_err(core_csv)?;
    let mut first_error = None;
    for &arch in &cfg.operating.archs {
        let base = cfg.mixer_setup(arch, 0.0);
        let points = r.par_map(&grid, |&p| sweep_point(&base, p, &cfg.oracle));
        let mut table = SweepTable { arch, rows: Vec::with_capacity(grid.len()), failure: None };
        for (p, res) in grid.iter().zip(points) {
            match res {
                Ok(row) => table.rows.push(row),
                Err(e) => {
                    table.failure = Some(format!("P_ctrl = {p:e} W: {e}"));
                    break;
                }
            }
        }
        let (path, w) = r.csv_writer(&format!("linearity_{}.csv", arch.name()))?;
        table.write_csv(w)?;
        if let Some(f) = &table.failure {
            summary.write_record([arch.name(), "", "", "", "", &format!("sweep incomplete: {f}")]).map_err(core_csv)?;
            written.push(path);
            first_error.get_or_insert(CliError::Incomplete(format!("{arch}: {f}")));
            continue;
        }
        r.emit(&path, &mut written)?;
        for (port, name) in [(Port::I, "I"), (Port::J, "J")] {
            match table.linearity_point(port) {
                Ok(lp) => {
                    let roots: Vec<String> = lp.roots_w.iter().map(|v| format!("{v:e}")).collect();
                    summary
                        .write_record([
                            arch.name(),
                            name,
                            &format!("{:e}", lp.p_ctrl_w),
                            &format!("{:.3}", w_to_dbm(lp.p_ctrl_w)),
                            &roots.join(";"),
                            "ok",
                        ])
                        .map_err(core_csv)?;
                }
                Err(e) => {
                    summary.write_record([arch.name(), name, "", "", "", &e.to_string()]).map_err(core_csv)?;
                    if port == Port::J {
                        first_error.get_or_insert(e.into());
                    }
                }
            }
        }
    }
    summary.flush()?;
    written.push(r.out.join("linearity_points.csv"));
    match first_error {
        Some(e) => Err(e),
        None => Ok(written),
    }
}

fn core_csv(e: csv::Error) -> CliError {
    CliError::Core(e.into())
}

pub fn evm_sweep(r: &Runner, mode: RunMode) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &r.cfg;
    let cal = r.calibrated()?;
    let mut written = vec![write_calibration(r, &cal)?];
    let models: Vec<EvmModel> = [(mode.analytic(), EvmModel::Analytic), (mode.oracle(), EvmModel::Oracle)]
        .into_iter()
        .filter_map(|(on, m)| on.then_some(m))
        .collect();
    let scenarios = cfg.evm_scenarios();
    for model in models {
        let mut setup = cfg.evm_setup(&cal, model);
        if cfg.evm.calibrate_noise {
            setup.noise_psd = calibrate_noise_psd(&setup, &cfg.evm.noise_anchor)?;
        }
        let reports: Vec<EvmReport> = r
            .par_map(&scenarios, |sc| evm_point(&setup, sc))
            .into_iter()
            .collect::<Result<_, _>>()?;
        let (path, w) = r.csv_writer(&format!("evm_{}.csv", model.name()))?;
        write_evm_csv(&reports, w)?;
        r.emit(&path, &mut written)?;

        let points: Vec<_> = cfg.evm.constellations.iter().map(|c| c.scenario()).collect();
        let insets = r.par_map(&points, |sc| match scenarios.iter().position(|s| s == sc) {
            Some(k) => Ok(reports[k].clone()),
            None => evm_point(&setup, sc),
        });
        for (sc, rep) in points.iter().zip(insets) {
            let rep = rep?;
            let target = match sc.arch {
                Some(a) => format!("{}_i{}", a.name(), sc.index),
                None => "input".into(),
            };
            let name = format!("constellation_{}_{}_{}_{}MBd.csv", model.name(), sc.format.name(), target, sc.baud_hz / 1e6);
            let (path, w) = r.csv_writer(&name)?;
            write_constellation_csv(&rep, w)?;
            r.emit(&path, &mut written)?;
        }
    }
    Ok(written)
}

fn write_calibration(r: &Runner, cal: &CalibrationResult) -> Result<PathBuf, CliError> {
    let path = r.out.join("calibration.csv");
    let mut w = csv::Writer::from_path(&path).map_err(core_csv)?;
    w.write_record(["arch", "i", "anchor_CG_dB", "model_CG_dB", "residual_dB", "tau_d_s", "G1", "G2"]).map_err(core_csv)?;
    for (a, model, res) in &cal.residuals {
        let op = cal.op(a.arch);
        w.write_record([
            a.arch.name().to_string(),
            a.index.to_string(),
            format!("{}", a.cg_db),
            format!("{model:.6}"),
            format!("{res:+.6}"),
            format!("{:e}", cal.tau_d),
            op.map(|o| format!("{:.6}", o.g1)).unwrap_or_default(),
            op.map(|o| format!("{:.6}", o.g2)).unwrap_or_default(),
        ])
        .map_err(core_csv)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn pulse_spectrum(r: &Runner, mode: RunMode) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &r.cfg;
    let ps = &cfg.pulse_spectrum;
    let spec = PulseTrainSpec { avg_power_w: ps.avg_power_w, ..cfg.clock_spec(Architecture::Switching) };
    spec.validate()?;
    let mut written = Vec::new();
    if mode.analytic() {
        let (path, w) = r.csv_writer("pulse_spectrum_analytic.csv")?;
        spec.analytic_spectrum(ps.max_index).write_csv(w)?;
        r.emit(&path, &mut written)?;
    }
    if mode.oracle() {
        let wave = synthesize_pulse_train(&spec, GridSpec::periods(spec.rep_rate_hz, ps.samples_per_period, 4))?;
        let (path, w) = r.csv_writer("pulse_spectrum_sampled.csv")?;
        harmonics(&wave, spec.rep_rate_hz, ps.max_index)?.write_csv(w)?;
        r.emit(&path, &mut written)?;
    }
    Ok(written)
}

/// One line of the validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), pass: value.is_finite() && value <= limit, value, limit }
    }
}

/// |K_a − K·C_OP/32| over a grid of gains and Henry factors, relative to
/// the largest term of C_OP.
fn ka_identity(cfg: &Config) -> Result<f64, CliError> {
    let n = (cfg.validate.identity_points as f64).cbrt().ceil().max(2.0) as usize;
    let span = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * k as f64 / (n - 1) as f64;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        let soa = SoaParams { henry_factor: span(a, 1.0, 10.0), ..cfg.soa1 };
        for b in 0..n {
            for c in 0..n {
                let g1 = 10f64.powf(span(b, 0.3, 3.3));
                let g2 = 10f64.powf(span(c, 0.3, 3.0) + 0.013);
                let op = OperatingPoint::new(
                    Architecture::Switching,
                    soa,
                    cfg.operating.input_wavelength_m,
                    g1,
                    g2,
                    30e-12,
                    Couplings::default(),
                )?;
                let x = op.dphi;
                let scale = op.k() * op.dg_dn() / 32.0
                    * (1.0 + (g2 / g1).sqrt() * (x.cos().abs() + soa.henry_factor * x.sin().abs()));
                worst = worst.max((op.k_a() - op.k_a_closed_form()).abs() / scale);
            }
        }
    }
    Ok(worst)
}

fn derivative_identity(soa: &SoaParams) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let n = soa.transparency_density_m3 * (1.02 + 0.02 * k as f64);
        let h = 1e-6 * n;
        let g = soa.gain(n)?;
        let fd = (soa.gain(n + h)? - soa.gain(n - h)?) / (2.0 * h);
        worst = worst.max((soa.gain_derivative(g) / fd - 1.0).abs());
        let ph = |n: f64| -> Result<f64, CliError> { Ok(soa.phase(soa.gain(n)?)?) };
        let fd = (ph(n + h)? - ph(n - h)?) / (2.0 * h);
        worst = worst.max((soa.phase_derivative() / fd - 1.0).abs());
    }
    Ok(worst)
}

pub fn validate(r: &Runner, mode: RunMode) -> Result<(PathBuf, Vec<Check>), CliError> {
    let cfg = &r.cfg;
    let v = &cfg.validate;
    let mut checks = vec![
        Check::at_most("ka_identity_rel", ka_identity(cfg)?, v.identity_rel_tol),
        Check::at_most("gain_phase_derivative_rel", derivative_identity(&cfg.soa1)?, 1e-6),
    ];
    for &arch in &cfg.operating.archs {
        for &i in &v.harmonics {
            let a: Vec<f64> = v
                .modulation_indices
                .iter()
                .map(|&m| analytic_product(cfg, arch, m, i, 1.0).map(|p| db20(p.norm())))
                .collect::<Result<_, _>>()?;
            checks.push(Check::at_most(format!("analytic_m_invariance_{arch}_i{i}_dB"), spread(&a), 1e-9));
        }
    }
    if mode.oracle() {
        let combos: Vec<(Architecture, f64)> = cfg
            .operating
            .archs
            .iter()
            .flat_map(|&a| {
                std::iter::once(v.modulation_index).chain(v.modulation_indices.iter().copied()).map(move |m| (a, m))
            })
            .collect();
        let runs = r.par_map(&combos, |&(arch, m)| oracle_products(cfg, arch, m, &v.harmonics, &cfg.oracle));
        let runs: Vec<Vec<Complex64>> = runs.into_iter().collect::<Result<_, _>>()?;
        let per_arch = 1 + v.modulation_indices.len();
        for (k, &arch) in cfg.operating.archs.iter().enumerate() {
            let block = &runs[k * per_arch..(k + 1) * per_arch];
            for (j, &i) in v.harmonics.iter().enumerate() {
                let a = analytic_product(cfg, arch, v.modulation_index, i, v.tau_d_scale)?;
                let o = block[0][j];
                checks.push(Check::at_most(
                    format!("oracle_vs_analytic_mag_{arch}_i{i}_dB"),
                    db20(o.norm() / a.norm()).abs(),
                    v.max_magnitude_db,
                ));
                checks.push(Check::at_most(
                    format!("oracle_vs_analytic_phase_{arch}_i{i}_deg"),
                    (o / a).arg().to_degrees().abs(),
                    v.max_phase_deg,
                ));
                let cg: Vec<f64> = block[1..].iter().map(|p| db20(p[j].norm())).collect();
                checks.push(Check::at_most(format!("oracle_m_invariance_{arch}_i{i}_dB"), spread(&cg), v.max_index_spread_db));
            }
        }
        for &arch in &cfg.operating.archs {
            checks.extend(oracle_self_checks(cfg, arch)?);
        }
    }
    let path = r.out.join("validate.csv");
    let mut w = csv::Writer::from_path(&path).map_err(core_csv)?;
    w.write_record(["name", "pass", "value", "limit"]).map_err(core_csv)?;
    for c in &checks {
        w.write_record([c.name.clone(), c.pass.to_string(), format!("{:e}", c.value), format!("{:e}", c.limit)])
            .map_err(core_csv)?;
    }
    w.flush()?;
    Ok((path, checks))
}

/// Step doubling, port conservation and rerun determinism of the oracle.
fn oracle_self_checks(cfg: &Config, arch: Architecture) -> Result<Vec<Check>, CliError> {
    let v = &cfg.validate;
    let s = cfg.mixer_setup(arch, v.modulation_index);
    let coarse = simulate(&s, &cfg.oracle)?;
    let fine = simulate(&s, &cfg.oracle.with_samples_per_period(2 * cfg.oracle.samples_per_period))?;
    let f_ck = s.clock.rep_rate_hz;
    let f_dat = cfg.operating.data_freq_hz;
    let mut freqs = vec![f_dat, f_ck];
    freqs.extend(v.harmonics.iter().map(|&i| i as f64 * f_ck - f_dat));
    let mut step: f64 = 0.0;
    for f in freqs {
        for (a, b) in [(&coarse.port_j, &fine.port_j), (&coarse.port_i, &fine.port_i)] {
            step = step.max(db20(extract_tone(a, f)?.norm() / extract_tone(b, f)?.norm()).abs());
        }
    }
    let mut conservation: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..coarse.port_j.samples.len() {
        let total = 0.25 * coarse.input_c.samples[k] * (coarse.gain1[k] + coarse.gain2[k]);
        conservation = conservation.max((coarse.port_i.samples[k] + coarse.port_j.samples[k] - total).abs());
        scale = scale.max(total);
    }
    let rerun = simulate(&s, &cfg.oracle)?;
    Ok(vec![
        Check::at_most(format!("oracle_step_doubling_{arch}_dB"), step, v.max_step_change_db),
        Check::at_most(format!("port_conservation_{arch}_rel"), conservation / scale, v.max_conservation_rel),
        Check::at_most(format!("oracle_rerun_identical_{arch}"), if rerun == coarse { 0.0 } else { 1.0 }, 0.0),
    ])
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}
