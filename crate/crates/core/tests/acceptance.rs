//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criterion 6 is a known failure of the model and is reported as such
//! without failing the run; any other failure exits nonzero.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use soamix_core::dsp::{
    add_awgn, calibrate_noise_psd, demodulate_and_evm, evm_sweep, fec_threshold, modulate, prbs_bits,
    write_evm_csv, EvmReport, EvmScenario, ModFormat,
};
use soamix_core::presets;
use soamix_core::signals::PulseTrainSpec;
use soamix_core::smallsignal::{
    conversion_gain_db, upconverted_power, Architecture, CalibrationResult, Couplings, DataTone, Mode,
    OperatingPoint,
};
use soamix_core::soa::SoaParams;
use soamix_core::timedomain::{extract_tone, quasi_static_sweep, simulate, Port, SimConfig};

const KNOWN_FAILURES: [usize; 1] = [6];
const MEASURED_SWITCHING_GAP_DB: f64 = 12.0;
const TAU_D_CUTOFF_6GHZ_S: f64 = 26.525_823_848_649_22e-12;
const ORACLE: SimConfig = SimConfig { samples_per_period: 1024, analysis_periods: 20, transient_periods: None };

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_ka: f64 = 0.0;
    for _ in 0..1000 {
        let soa = SoaParams {
            henry_factor: rng.random_range(1.0..10.0),
            carrier_lifetime_s: rng.random_range(50e-12..1e-9),
            confinement: rng.random_range(0.1..0.6),
            ..SoaParams::default()
        };
        let g1 = 10f64.powf(rng.random_range(0.3..3.3));
        let g2 = 10f64.powf(rng.random_range(0.3..3.3));
        let op = OperatingPoint::new(Architecture::Switching, soa, 1557.4e-9, g1, g2, 30e-12, Couplings::default())
            .expect("valid operating point");
        // Magnitude of the largest term in C_OP sets the scale.
        let x = op.dphi;
        let scale = op.k() * op.dg_dn() / 32.0 * (1.0 + (g2 / g1).sqrt() * (x.cos().abs() + soa.henry_factor * x.sin().abs()));
        worst_ka = worst_ka.max((op.k_a() - op.k_a_closed_form()).abs() / scale);
    }
    let soa = SoaParams::default();
    let mut worst_fd: f64 = 0.0;
    for k in 0..200 {
        let n = soa.transparency_density_m3 * (1.02 + 0.005 * k as f64);
        let h = 1e-6 * n;
        let g = soa.gain(n).unwrap();
        let fd = (soa.gain(n + h).unwrap() - soa.gain(n - h).unwrap()) / (2.0 * h);
        worst_fd = worst_fd.max((soa.gain_derivative(g) / fd - 1.0).abs());
        let ph = |n: f64| soa.phase(soa.gain(n).unwrap()).unwrap();
        let fd = (ph(n + h) - ph(n - h)) / (2.0 * h);
        worst_fd = worst_fd.max((soa.phase_derivative() / fd - 1.0).abs());
    }
    outcome(
        worst_ka < 1e-10 && worst_fd < 1e-6,
        format!("K_a identity max rel err {worst_ka:.2e} (1000 points); derivative vs central difference {worst_fd:.2e}"),
    )
}

fn pole_formula(tau_d: f64) -> f64 {
    let clock = PulseTrainSpec::default().analytic_spectrum(4);
    let w = |i: usize| 2.0 * PI * 10e9 * i as f64 * tau_d;
    db(Complex64::new(1.0, w(4)).norm() / Complex64::new(1.0, w(1)).norm())
        + db(clock.coeff(1).unwrap().norm() / clock.coeff(4).unwrap().norm())
}

fn switching_drop(op: &OperatingPoint) -> f64 {
    let clock = presets::clock(Architecture::Switching).analytic_spectrum(4);
    let cg = |i| conversion_gain_db(op, &clock, presets::DATA_FREQ_HZ, i).unwrap();
    cg(1) - cg(4)
}

fn criterion_2(cal: &CalibrationResult) -> Outcome {
    let op = cal.switching.expect("switching calibrated");
    let drop_cal = switching_drop(&op);
    let formula_cal = pole_formula(op.tau_d);
    let drop_6g = switching_drop(&op.with_tau_d(TAU_D_CUTOFF_6GHZ_S));
    let formula_6g = pole_formula(TAU_D_CUTOFF_6GHZ_S);
    let pass = (drop_cal - formula_cal).abs() < 1e-9
        && (drop_6g - formula_6g).abs() < 1e-9
        && (10.8..=11.0).contains(&drop_6g)
        && (drop_6g - MEASURED_SWITCHING_GAP_DB).abs() <= 2.0;
    outcome(
        pass,
        format!(
            "drop {drop_6g:.3} dB at tau_d 26.53 ps (formula {formula_6g:.3}); calibrated tau_d {:.2} ps gives {drop_cal:.3} dB (formula {formula_cal:.3}); measured gap 12 dB",
            op.tau_d * 1e12
        ),
    )
}

fn criterion_3(cal: &CalibrationResult) -> Outcome {
    let op = cal.modulation.expect("modulation calibrated");
    let clock = presets::clock(Architecture::Modulation).analytic_spectrum(4);
    let cg: Vec<f64> = (1..=4).map(|i| conversion_gain_db(&op, &clock, presets::DATA_FREQ_HZ, i).unwrap()).collect();
    let spread = cg.iter().copied().fold(f64::NEG_INFINITY, f64::max) - cg.iter().copied().fold(f64::INFINITY, f64::min);
    let residual_39 = cg[3] - 9.0;
    outcome(
        spread <= 1.0,
        format!("CG over i = 1..4 spans {spread:.3} dB; residual at 39 GHz vs the measured 9 dB is {residual_39:+.2} dB"),
    )
}

/// Oracle tone at `i·f_ck − f_dat` over the input tone at f_dat, as dB.
fn oracle_cg(arch: Architecture, m: f64, i: usize, cfg: &SimConfig) -> (f64, Complex64) {
    let s = presets::mixer_setup(arch, m);
    let out = simulate(&s, cfg).expect("oracle run");
    let p_dat = s.data.tone_coefficient();
    let o = extract_tone(&out.port_j, i as f64 * s.clock.rep_rate_hz - presets::DATA_FREQ_HZ).unwrap();
    (db(o.norm() / p_dat.norm()), o)
}

fn analytic(arch: Architecture, m: f64, i: usize, mode: Mode) -> Complex64 {
    let s = presets::mixer_setup(arch, m);
    let op = s.operating_point().unwrap();
    let tone = DataTone::new(presets::DATA_FREQ_HZ, s.data.avg_power_w, m);
    upconverted_power(&op, &s.clock.analytic_spectrum(6), &tone, i, mode).unwrap().p_j
}

fn criterion_4() -> Outcome {
    let ms = [0.02, 0.05, 0.1];
    let mut worst_analytic: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for arch in Architecture::ALL {
        for i in [1, 4] {
            let a: Vec<f64> = ms.iter().map(|&m| db(analytic(arch, m, i, Mode::Full).norm() / m)).collect();
            let o: Vec<f64> = ms.iter().map(|&m| oracle_cg(arch, m, i, &ORACLE).0).collect();
            for k in 1..ms.len() {
                worst_analytic = worst_analytic.max((a[k] - a[0]).abs());
                worst_oracle = worst_oracle.max((o[k] - o[0]).abs());
            }
        }
    }
    outcome(
        worst_analytic < 1e-9 && worst_oracle < 0.1,
        format!("m_dat in {{0.02, 0.05, 0.1}}: analytic spread {worst_analytic:.1e} dB, oracle spread {worst_oracle:.4} dB"),
    )
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for arch in Architecture::ALL {
        for i in [1, 4] {
            let a = analytic(arch, 0.02, i, Mode::Full);
            let (_, o) = oracle_cg(arch, 0.02, i, &ORACLE);
            let dmag = db(o.norm() / a.norm());
            let dph = (o / a).arg().to_degrees();
            pass &= dmag.abs() <= 0.5 && dph.abs() <= 5.0;
            parts.push(format!("{arch} i={i}: {dmag:+.3} dB {dph:+.2} deg"));
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_6(cal: &CalibrationResult) -> Outcome {
    let parts: Vec<String> = cal
        .residuals
        .iter()
        .map(|(a, model, r)| format!("{} i={}: model {model:.2} dB ({r:+.2})", a.arch, a.index))
        .collect();
    outcome(
        cal.max_abs_residual() < 1.5,
        format!("tau_d {:.2} ps; {}; max |residual| {:.2} dB", cal.tau_d * 1e12, parts.join(", "), cal.max_abs_residual()),
    )
}

fn criterion_7() -> Outcome {
    let grid = presets::linearity_grid();
    let point = |arch| {
        let table = quasi_static_sweep(&presets::mixer_setup(arch, 0.0), &grid, &ORACLE.with_samples_per_period(1024))
            .expect("sweep");
        assert!(table.is_complete(), "{:?}", table.failure);
        table.linearity_point(Port::J).map(|lp| lp.p_ctrl_w)
    };
    match (point(Architecture::Switching), point(Architecture::Modulation)) {
        (Ok(sw), Ok(md)) => {
            let within = |x: f64, target: f64| x / target <= 2.0 && target / x <= 2.0;
            outcome(
                md < sw && within(sw, presets::SWITCHING_CONTROL_W) && within(md, presets::MODULATION_CONTROL_W),
                format!(
                    "switching {:.4} mW (target 0.114), modulation {:.4} mW (target 0.04)",
                    sw * 1e3,
                    md * 1e3
                ),
            )
        }
        (sw, md) => outcome(false, format!("linearity search failed: {:?} / {:?}", sw.err(), md.err())),
    }
}

fn loopback_checks() -> (f64, f64) {
    let sps = 8;
    let bits = prbs_bits(7, 4096 * 2);
    let bb = modulate(&bits, ModFormat::Qpsk, 1.0, 0.35, sps).unwrap();
    let clean = demodulate_and_evm(&bb.samples, sps, 0.35, &bits, ModFormat::Qpsk).unwrap().evm_rms_pct;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for snr in [10.0, 15.0, 20.0, 25.0, 30.0] {
        let mut x = bb.samples.clone();
        add_awgn(&mut x, snr, sps, &mut rng);
        let evm = demodulate_and_evm(&x, sps, 0.35, &bits, ModFormat::Qpsk).unwrap().evm_rms_pct;
        let expected = 100.0 * 10f64.powf(-snr / 20.0);
        worst = worst.max((evm / expected - 1.0).abs());
    }
    (clean, worst)
}

fn evm_table(cal: &CalibrationResult, seed: u64) -> Vec<EvmReport> {
    let mut setup = presets::evm_setup(cal, Mode::Full);
    setup.seed = seed;
    setup.noise_psd = calibrate_noise_psd(&setup, &presets::noise_anchor()).expect("noise calibration");
    let mut scenarios = Vec::new();
    for format in ModFormat::ALL {
        for baud in [32e6, 64e6, 128e6, 256e6, 512e6] {
            for arch in Architecture::ALL {
                for index in [1, 4] {
                    scenarios.push(EvmScenario { format, baud_hz: baud, arch: Some(arch), index });
                }
            }
        }
    }
    evm_sweep(&setup, &scenarios).expect("evm sweep")
}

fn criterion_8(cal: &CalibrationResult) -> Outcome {
    let (clean, awgn) = loopback_checks();
    let reports = evm_table(cal, 1);
    let find = |f: ModFormat, baud: f64, arch: Architecture, i: usize| {
        reports
            .iter()
            .find(|r| r.format == f && r.baud_hz == baud && r.arch == arch.name() && r.f_target_hz == i as f64 * 10e9 - 0.75e9)
            .expect("scenario present")
    };
    let mut pairs_ok = true;
    let mut worst_ok = true;
    let mut max_pair: f64 = 0.0;
    for f in ModFormat::ALL {
        for baud in [32e6, 64e6, 128e6, 256e6, 512e6] {
            let m1 = find(f, baud, Architecture::Modulation, 1).evm_rms_pct;
            let m4 = find(f, baud, Architecture::Modulation, 4).evm_rms_pct;
            let s1 = find(f, baud, Architecture::Switching, 1).evm_rms_pct;
            let s4 = find(f, baud, Architecture::Switching, 4).evm_rms_pct;
            max_pair = max_pair.max((m1 - m4).abs());
            pairs_ok &= (m1 - m4).abs() <= 3.0;
            worst_ok &= s4 > m1.max(m4).max(s1);
        }
    }
    let qpsk = find(ModFormat::Qpsk, 512e6, Architecture::Modulation, 1);
    let qpsk4 = find(ModFormat::Qpsk, 512e6, Architecture::Modulation, 4);
    let qam = find(ModFormat::Qam16, 128e6, Architecture::Modulation, 1);
    let qam4 = find(ModFormat::Qam16, 128e6, Architecture::Modulation, 4);
    let fec_ok = qpsk.fec_pass && qpsk4.fec_pass && qam.fec_pass && qam4.fec_pass;
    let pass = clean < 0.1 && awgn < 0.05 && pairs_ok && worst_ok && fec_ok;
    outcome(
        pass,
        format!(
            "loopback {clean:.4}%; AWGN max rel dev {:.2}%; modulation 9.25/39.25 max gap {max_pair:.2} pts; switching 39.25 worst: {worst_ok}; \
             modulation QPSK 512 MBd {:.2}%/{:.2}% (limit {:.2}%), 16-QAM 128 MBd {:.2}%/{:.2}% (limit {:.2}%)",
            awgn * 100.0,
            qpsk.evm_rms_pct,
            qpsk4.evm_rms_pct,
            fec_threshold(ModFormat::Qpsk),
            qam.evm_rms_pct,
            qam4.evm_rms_pct,
            fec_threshold(ModFormat::Qam16),
        ),
    )
}

fn criterion_9(cal: &CalibrationResult) -> Outcome {
    let mut worst: f64 = 0.0;
    for arch in Architecture::ALL {
        let s = presets::mixer_setup(arch, 0.02);
        let coarse = simulate(&s, &ORACLE).unwrap();
        let fine = simulate(&s, &ORACLE.with_samples_per_period(2 * ORACLE.samples_per_period)).unwrap();
        let mut freqs = vec![presets::DATA_FREQ_HZ, s.clock.rep_rate_hz];
        freqs.extend([1usize, 4].map(|i| i as f64 * s.clock.rep_rate_hz - presets::DATA_FREQ_HZ));
        for f in freqs {
            for (a, b) in [(&coarse.port_j, &fine.port_j), (&coarse.port_i, &fine.port_i)] {
                let (ta, tb) = (extract_tone(a, f).unwrap(), extract_tone(b, f).unwrap());
                worst = worst.max(db(ta.norm() / tb.norm()).abs());
            }
        }
        let again = simulate(&s, &ORACLE).unwrap();
        if again != coarse {
            return outcome(false, format!("{arch} oracle rerun differs"));
        }
    }
    let csv = |seed| {
        let mut buf = Vec::new();
        write_evm_csv(&evm_table(cal, seed), &mut buf).unwrap();
        buf
    };
    let identical = csv(5) == csv(5);
    outcome(
        worst < 0.01 && identical,
        format!("step doubling max tone change {worst:.2e} dB; fixed-seed EVM CSV byte-identical: {identical}"),
    )
}

fn main() {
    let cal = presets::calibrated().expect("calibration");
    type Check<'a> = (usize, Duration, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        (1, Duration::from_secs(1), Box::new(criterion_1)),
        (2, Duration::from_secs(1), Box::new(|| criterion_2(&cal))),
        (3, Duration::from_secs(1), Box::new(|| criterion_3(&cal))),
        (4, Duration::from_secs(300), Box::new(criterion_4)),
        (5, Duration::from_secs(600), Box::new(criterion_5)),
        (6, Duration::from_secs(60), Box::new(|| criterion_6(&cal))),
        (7, Duration::from_secs(600), Box::new(criterion_7)),
        (8, Duration::from_secs(900), Box::new(|| criterion_8(&cal))),
        (9, Duration::from_secs(600), Box::new(|| criterion_9(&cal))),
    ];
    let mut unexpected = Vec::new();
    for (n, budget, check) in checks {
        let t0 = Instant::now();
        let mut o = check();
        let elapsed = t0.elapsed();
        if elapsed > budget {
            o.pass = false;
            o.detail += &format!("; runtime {elapsed:.1?} over the {budget:?} budget");
        }
        let known = KNOWN_FAILURES.contains(&n);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {n}: {tag} [{elapsed:.2?}] {}", o.detail);
        if o.pass == known {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
