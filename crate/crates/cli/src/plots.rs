//! Figures rebuilt from emitted CSVs. Commands plot by re-reading what
//! they wrote, so re-plotting a CSV later gives the same SVG.

use std::path::{Path, PathBuf};

use soamix_core::smallsignal::Architecture;
use soamix_core::timedomain::{Port, SweepRow, SweepTable};
use soamix_core::Error as CoreError;

use crate::error::CliError;
use crate::svg::{Dash, Figure, Panel, Series, Style};

const CG_HEADER: [&str; 6] = ["arch", "i", "f_target_Hz", "CG_dB", "mode", "m_dat"];
const LINEARITY_HEADER: [&str; 4] = ["arch", "P_ctrl_W", "port_I_W", "port_J_W"];
const EVM_HEADER: [&str; 10] = [
    "format",
    "baud_Hz",
    "arch",
    "f_target_Hz",
    "evm_rms_pct",
    "ber",
    "n_symbols",
    "rolloff",
    "fec_threshold_pct",
    "fec_pass",
];
const CONSTELLATION_HEADER: [&str; 4] = ["I", "Q", "ref_I", "ref_Q"];
const SPECTRUM_HEADER: [&str; 5] = ["index", "freq_Hz", "re_W", "im_W", "abs_W"];

struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let bad = |detail: String| CliError::Csv { path: path.to_owned(), detail };
        let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
        let header = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect());
        }
        Ok(Self { path: path.to_owned(), header, rows })
    }

    fn is(&self, h: &[&str]) -> bool {
        self.header.iter().map(String::as_str).eq(h.iter().copied())
    }

    fn num(&self, row: usize, col: usize) -> Result<f64, CliError> {
        self.rows[row][col].parse().map_err(|_| CliError::Csv {
            path: self.path.clone(),
            detail: format!("row {}: column {} is not a number: {:?}", row + 1, self.header[col], self.rows[row][col]),
        })
    }

    fn text(&self, row: usize, col: usize) -> &str {
        &self.rows[row][col]
    }
}

/// Renders the figure for a CSV written by this tool into `out_dir`,
/// returning the SVG path, or `None` for tables without a figure.
pub fn plot_csv(csv_path: &Path, out_dir: &Path) -> Result<Option<PathBuf>, CliError> {
    let t = Table::read(csv_path)?;
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    let fig = if t.is(&CG_HEADER) {
        cg_figure(&t, &stem)?
    } else if t.is(&LINEARITY_HEADER) {
        linearity_figure(&t, &stem)?
    } else if t.is(&EVM_HEADER) {
        evm_figure(&t, &stem)?
    } else if t.is(&CONSTELLATION_HEADER) {
        constellation_figure(&t, &stem)?
    } else if t.is(&SPECTRUM_HEADER) {
        spectrum_figure(&t, &stem)?
    } else {
        return Ok(None);
    };
    let out = out_dir.join(format!("{stem}.svg"));
    std::fs::write(&out, fig.render())?;
    Ok(Some(out))
}

/// Group `key` of `groups`, created on first sight so groups keep the order
/// of the CSV rows.
fn entry<K: PartialEq, V: Default>(groups: &mut Vec<(K, V)>, key: K) -> &mut V {
    let k = match groups.iter().position(|(g, _)| *g == key) {
        Some(k) => k,
        None => {
            groups.push((key, V::default()));
            groups.len() - 1
        }
    };
    &mut groups[k].1
}

fn ghz(hz: f64) -> String {
    format!("{} GHz", hz / 1e9)
}

fn cg_figure(t: &Table, stem: &str) -> Result<Figure, CliError> {
    // arch -> (f_target, mode) -> points
    let mut groups: Vec<(String, Vec<((u64, String), Vec<(f64, f64)>)>)> = Vec::new();
    for r in 0..t.rows.len() {
        let key = (t.num(r, 2)?.to_bits(), t.text(r, 4).to_string());
        let arch = entry(&mut groups, t.text(r, 0).to_string());
        entry(arch, key).push((t.num(r, 5)?, t.num(r, 3)?));
    }
    let panels = groups
        .into_iter()
        .map(|(arch, curves)| {
            let mut p = Panel::new(arch, "data modulation index m_dat", "CG (dB)");
            let targets: Vec<u64> = {
                let mut v: Vec<u64> = Vec::new();
                for ((f, _), _) in &curves {
                    if !v.contains(f) {
                        v.push(*f);
                    }
                }
                v
            };
            for ((f, mode), pts) in curves {
                let color = targets.iter().position(|x| *x == f).unwrap_or(0);
                let style = if mode == "oracle" { Style::LineMarkers(Dash::Solid) } else { Style::Line(Dash::DashDot) };
                p.series.push(Series::new(format!("{} {mode}", ghz(f64::from_bits(f))), pts, style, color));
            }
            p
        })
        .collect();
    Ok(Figure::new(stem, panels, 2))
}

fn linearity_figure(t: &Table, stem: &str) -> Result<Figure, CliError> {
    let mut tables: Vec<(String, Vec<SweepRow>)> = Vec::new();
    for r in 0..t.rows.len() {
        entry(&mut tables, t.text(r, 0).to_string()).push(SweepRow {
            p_ctrl_w: t.num(r, 1)?,
            port_i_w: t.num(r, 2)?,
            port_j_w: t.num(r, 3)?,
        });
    }
    let mut panels = Vec::new();
    for (name, rows) in tables {
        let arch = match name.as_str() {
            "switching" => Architecture::Switching,
            "modulation" => Architecture::Modulation,
            other => {
                return Err(CliError::Csv { path: t.path.clone(), detail: format!("unknown architecture {other:?}") });
            }
        };
        let table = SweepTable { arch, rows, failure: None };
        let x_mw: Vec<f64> = table.p_ctrl().iter().map(|p| p * 1e3).collect();
        let y_label = match arch {
            Architecture::Switching => "clock-tone RF power (norm.)",
            Architecture::Modulation => "output mean power (norm.)",
        };
        let mut resp = Panel::new(format!("{name}: response"), "P_ctrl at port A (mW)", y_label);
        let mut sd = Panel::new(format!("{name}: second derivative"), "P_ctrl at port A (mW)", "SD (norm.)");
        for (k, port) in [(0, Port::I), (1, Port::J)] {
            let label = if k == 0 { "port I" } else { "port J" };
            let y = table.response(port);
            let peak = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let norm = if peak > 0.0 { peak } else { 1.0 };
            resp.series.push(Series::new(
                format!("{label} OMP"),
                x_mw.iter().zip(&y).map(|(x, v)| (*x, v / norm)).collect(),
                Style::LineMarkers(Dash::Solid),
                k,
            ));
            let curve: Vec<(f64, f64)> = match table.linearity_point(port) {
                Ok(lp) => {
                    resp.series.push(Series::new(
                        format!("{label} fit"),
                        table.p_ctrl().iter().map(|&x| (x * 1e3, lp.fit_at(x) / norm)).collect(),
                        Style::Line(Dash::Dashed),
                        k,
                    ));
                    sd.vlines.push((lp.p_ctrl_w * 1e3, format!("{label} {:.4} mW", lp.p_ctrl_w * 1e3)));
                    dense(&table.p_ctrl()).into_iter().map(|x| (x * 1e3, lp.sd_at(x))).collect()
                }
                Err(CoreError::LinearityNotFound { sd_curve, .. }) => sd_curve.iter().map(|(x, v)| (x * 1e3, *v)).collect(),
                Err(e) => return Err(e.into()),
            };
            let peak = curve.iter().fold(0.0f64, |a, v| a.max(v.1.abs()));
            let norm = if peak > 0.0 { peak } else { 1.0 };
            sd.series.push(Series::new(
                format!("{label} SD"),
                curve.iter().map(|(x, v)| (*x, v / norm)).collect(),
                Style::Line(Dash::Solid),
                k,
            ));
        }
        panels.push(resp);
        panels.push(sd);
    }
    Ok(Figure::new(stem, panels, 2))
}

fn dense(x: &[f64]) -> Vec<f64> {
    let (lo, hi) = (x.first().copied().unwrap_or(0.0), x.last().copied().unwrap_or(0.0));
    (0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0).collect()
}

fn evm_figure(t: &Table, stem: &str) -> Result<Figure, CliError> {
    // format -> (arch, f_target) -> points; format -> FEC threshold.
    let mut curves: Vec<(String, Vec<((String, u64), Vec<(f64, f64)>)>)> = Vec::new();
    let mut fec: Vec<(String, f64)> = Vec::new();
    let mut bauds: Vec<f64> = Vec::new();
    for r in 0..t.rows.len() {
        let format = t.text(r, 0).to_string();
        let baud = t.num(r, 1)? / 1e6;
        if !bauds.contains(&baud) {
            bauds.push(baud);
        }
        *entry(&mut fec, format.clone()) = t.num(r, 8)?;
        let groups = entry(&mut curves, format);
        entry(groups, (t.text(r, 2).to_string(), t.num(r, 3)?.to_bits())).push((baud, t.num(r, 4)?));
    }
    bauds.sort_by(f64::total_cmp);
    let (lo, hi) = (bauds.first().copied().unwrap_or(1.0), bauds.last().copied().unwrap_or(1.0));
    let panels = curves
        .into_iter()
        .map(|(format, groups)| {
            let mut p = Panel::new(format.to_uppercase(), "baud rate (MBaud)", "EVM rms (%)");
            p.log_x = true;
            p.x_ticks = Some(bauds.clone());
            for (k, ((arch, f), mut pts)) in groups.into_iter().enumerate() {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                p.series.push(Series::new(format!("{arch} {}", ghz(f64::from_bits(f))), pts, Style::LineMarkers(Dash::Solid), k));
            }
            let thr = fec.iter().find(|(f, _)| *f == format).map_or(f64::NAN, |v| v.1);
            p.series.push(Series::new(format!("FEC limit {thr:.2}%"), vec![(lo, thr), (hi, thr)], Style::Line(Dash::Dashed), 7));
            p
        })
        .collect();
    Ok(Figure::new(stem, panels, 2))
}

fn constellation_figure(t: &Table, stem: &str) -> Result<Figure, CliError> {
    let mut rx = Vec::with_capacity(t.rows.len());
    let mut ideal: Vec<(f64, f64)> = Vec::new();
    for r in 0..t.rows.len() {
        rx.push((t.num(r, 0)?, t.num(r, 1)?));
        let s = (t.num(r, 2)?, t.num(r, 3)?);
        if !ideal.contains(&s) {
            ideal.push(s);
        }
    }
    ideal.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut p = Panel::new(stem, "I", "Q");
    p.square = true;
    p.series.push(Series::new("received", rx, Style::Markers, 0));
    p.series.push(Series::new("ideal", ideal, Style::Symbols, 1));
    Ok(Figure::new(stem, vec![p], 1))
}

fn spectrum_figure(t: &Table, stem: &str) -> Result<Figure, CliError> {
    let mut pts = Vec::new();
    let mut first = None;
    for r in 0..t.rows.len() {
        if t.num(r, 0)? == 0.0 {
            continue;
        }
        let a = t.num(r, 4)?;
        let a1 = *first.get_or_insert(a);
        pts.push((t.num(r, 1)? / 1e9, 20.0 * (a / a1).log10()));
    }
    let mut p = Panel::new(stem, "frequency (GHz)", "|p_i| / |p_1| (dB)");
    p.series.push(Series::new("harmonics", pts, Style::LineMarkers(Dash::Solid), 0));
    Ok(Figure::new(stem, vec![p], 1))
}
