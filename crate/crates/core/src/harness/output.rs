use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use super::monte_carlo::{MonteCarlo, ScanAggregate};
use super::trial::TrialRecord;
use crate::error::{Error, Result};

/// Shortest decimal form of `x` rounded to 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    rounded.to_string()
}

/// `x` rounded to 9 significant digits, as it reads back from CSV.
pub fn round_sig9(x: f64) -> f64 {
    fmt_sig9(x).parse().unwrap_or(f64::NAN)
}

fn sig9<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_sig9(*x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub k: u32,
    #[serde(serialize_with = "sig9")]
    pub sensor_x: f64,
    #[serde(serialize_with = "sig9")]
    pub sensor_y: f64,
    pub n_true: usize,
    pub n_est: usize,
    #[serde(serialize_with = "sig9")]
    pub ospa_total: f64,
    #[serde(serialize_with = "sig9")]
    pub ospa_loc: f64,
    #[serde(serialize_with = "sig9")]
    pub ospa_card: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub k: u32,
    pub command_index: usize,
    #[serde(serialize_with = "sig9")]
    pub dx: f64,
    #[serde(serialize_with = "sig9")]
    pub dy: f64,
    #[serde(serialize_with = "sig9")]
    pub cost: f64,
    #[serde(serialize_with = "sig9")]
    pub cardinality_error: f64,
    #[serde(serialize_with = "sig9")]
    pub state_error: f64,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub k: u32,
    /// Target index for truth rows, label for track rows (empty if unlabeled).
    pub id: String,
    #[serde(serialize_with = "sig9")]
    pub x: f64,
    #[serde(serialize_with = "sig9")]
    pub y: f64,
    #[serde(serialize_with = "sig9")]
    pub vx: f64,
    #[serde(serialize_with = "sig9")]
    pub vy: f64,
    #[serde(serialize_with = "sig9")]
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub k: u32,
    pub n_trials: usize,
    #[serde(serialize_with = "sig9")]
    pub ospa_total_mean: f64,
    #[serde(serialize_with = "sig9")]
    pub ospa_total_std: f64,
    #[serde(serialize_with = "sig9")]
    pub ospa_loc_mean: f64,
    #[serde(serialize_with = "sig9")]
    pub ospa_loc_std: f64,
    #[serde(serialize_with = "sig9")]
    pub ospa_card_mean: f64,
    #[serde(serialize_with = "sig9")]
    pub ospa_card_std: f64,
    #[serde(serialize_with = "sig9")]
    pub card_error_mean: f64,
    #[serde(serialize_with = "sig9")]
    pub card_error_std: f64,
    #[serde(serialize_with = "sig9")]
    pub centroid_distance_mean: f64,
    #[serde(serialize_with = "sig9")]
    pub centroid_distance_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub k: u32,
    #[serde(serialize_with = "sig9")]
    pub lmb_ospa_total: f64,
    #[serde(serialize_with = "sig9")]
    pub cbmember_ospa_total: f64,
    #[serde(serialize_with = "sig9")]
    pub lmb_centroid_distance: f64,
    #[serde(serialize_with = "sig9")]
    pub cbmember_centroid_distance: f64,
}

pub fn trial_rows(rec: &TrialRecord) -> Vec<TrialRow> {
    rec.scans
        .iter()
        .map(|s| TrialRow {
            k: s.k,
            sensor_x: s.sensor.x,
            sensor_y: s.sensor.y,
            n_true: s.n_true(),
            n_est: s.n_est(),
            ospa_total: s.ospa.total,
            ospa_loc: s.ospa.localization,
            ospa_card: s.ospa.cardinality,
        })
        .collect()
}

fn cost_rows(rec: &TrialRecord) -> Vec<CostRow> {
    rec.scans
        .iter()
        .flat_map(|s| {
            s.costs.iter().enumerate().map(move |(i, c)| CostRow {
                k: s.k,
                command_index: i,
                dx: c.command.dx,
                dy: c.command.dy,
                cost: c.breakdown.cost,
                cardinality_error: c.breakdown.cardinality,
                state_error: c.breakdown.state,
                chosen: i == s.command_index,
            })
        })
        .collect()
}

fn state_row(k: u32, id: String, s: &crate::types::SingleTargetState) -> StateRow {
    StateRow {
        k,
        id,
        x: s.x,
        y: s.y,
        vx: s.vx,
        vy: s.vy,
        omega: s.omega,
    }
}

fn track_rows(rec: &TrialRecord) -> Vec<StateRow> {
    rec.scans
        .iter()
        .flat_map(|s| {
            s.tracks.iter().map(move |t| {
                let id = t
                    .label
                    .map(|l| format!("{}:{}", l.birth_time, l.birth_index))
                    .unwrap_or_default();
                state_row(s.k, id, &t.state)
            })
        })
        .collect()
}

fn truth_rows(rec: &TrialRecord) -> Vec<StateRow> {
    rec.scans
        .iter()
        .flat_map(|s| {
            s.truth
                .iter()
                .map(move |(id, x)| state_row(s.k, id.to_string(), x))
        })
        .collect()
}

pub fn aggregate_rows(agg: &[ScanAggregate]) -> Vec<AggregateRow> {
    agg.iter()
        .map(|a| AggregateRow {
            k: a.k,
            n_trials: a.n_trials,
            ospa_total_mean: a.ospa_total.mean,
            ospa_total_std: a.ospa_total.std,
            ospa_loc_mean: a.ospa_loc.mean,
            ospa_loc_std: a.ospa_loc.std,
            ospa_card_mean: a.ospa_card.mean,
            ospa_card_std: a.ospa_card.std,
            card_error_mean: a.cardinality_error.mean,
            card_error_std: a.cardinality_error.std,
            centroid_distance_mean: a.centroid_distance.mean,
            centroid_distance_std: a.centroid_distance.std,
        })
        .collect()
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes per-trial, cost, track, truth and aggregate CSVs into `dir`, plus
/// SVG plots when `plot` is set. Returns the paths written.
pub fn emit_outputs(mc: &MonteCarlo, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    for rec in &mc.records {
        let stem = format!("trial_{:03}", rec.trial);
        let files = [
            (format!("{stem}.csv"), 0),
            (format!("{stem}_costs.csv"), 1),
            (format!("{stem}_tracks.csv"), 2),
            (format!("{stem}_truth.csv"), 3),
        ];
        for (name, kind) in files {
            let path = dir.join(name);
            match kind {
                0 => write_csv(&path, &trial_rows(rec))?,
                1 => write_csv(&path, &cost_rows(rec))?,
                2 => write_csv(&path, &track_rows(rec))?,
                _ => write_csv(&path, &truth_rows(rec))?,
            }
            written.push(path);
        }
    }
    let path = dir.join("aggregate.csv");
    write_csv(&path, &aggregate_rows(&mc.aggregate))?;
    written.push(path);
    if plot {
        if let Some(rec) = mc.records.first() {
            let path = dir.join("trajectory.svg");
            plot_trajectory(rec, &path)?;
            written.push(path);
        }
        let path = dir.join("errors.svg");
        plot_errors(&mc.aggregate, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Outputs of a paired run: one subdirectory per mode plus a side-by-side CSV.
pub fn emit_comparison(runs: &[MonteCarlo; 2], dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    for mc in runs {
        written.extend(emit_outputs(mc, &dir.join(mc.mode.as_str()), plot)?);
    }
    let [lmb, cb] = runs;
    let rows: Vec<ComparisonRow> = lmb
        .aggregate
        .iter()
        .zip(&cb.aggregate)
        .map(|(a, b)| ComparisonRow {
            k: a.k,
            lmb_ospa_total: a.ospa_total.mean,
            cbmember_ospa_total: b.ospa_total.mean,
            lmb_centroid_distance: a.centroid_distance.mean,
            cbmember_centroid_distance: b.centroid_distance.mean,
        })
        .collect();
    let path = dir.join("comparison.csv");
    write_csv(&path, &rows)?;
    written.push(path);
    if plot {
        let path = dir.join("comparison.svg");
        let series = [
            (
                lmb.mode.as_str(),
                rows.iter().map(|r| (r.k, r.lmb_ospa_total)).collect(),
            ),
            (
                cb.mode.as_str(),
                rows.iter().map(|r| (r.k, r.cbmember_ospa_total)).collect(),
            ),
        ];
        plot_series(&path, "Mean OSPA (c = 100, p = 2)", "OSPA (m)", &series)?;
        written.push(path);
    }
    Ok(written)
}

fn plot_err<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Plot {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let pad = ((hi - lo) * 0.05).max(1.0);
    (lo - pad)..(hi + pad)
}

fn plot_trajectory(rec: &TrialRecord, path: &Path) -> Result<()> {
    let err = plot_err(path);
    let mut xs = vec![];
    let mut ys = vec![];
    for s in &rec.scans {
        xs.push(s.sensor.x);
        ys.push(s.sensor.y);
        for (_, t) in &s.truth {
            xs.push(t.x);
            ys.push(t.y);
        }
    }
    let bound = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    let x_range = padded(bound(&xs, f64::min, 0.0), bound(&xs, f64::max, 0.0));
    let y_range = padded(bound(&ys, f64::min, 0.0), bound(&ys, f64::max, 0.0));

    let root = SVGBackend::new(path, (800, 800)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(
            format!("Sensor and targets, {} trial {}", rec.mode, rec.trial),
            ("sans-serif", 18),
        )
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(50)
        .build_cartesian_2d(x_range, y_range)
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("x (m)")
        .y_desc("y (m)")
        .draw()
        .map_err(&err)?;

    let n_targets = rec
        .scans
        .iter()
        .flat_map(|s| s.truth.iter().map(|(id, _)| *id + 1))
        .max()
        .unwrap_or(0);
    for id in 0..n_targets {
        let path_pts: Vec<(f64, f64)> = rec
            .scans
            .iter()
            .flat_map(|s| {
                s.truth
                    .iter()
                    .filter(|(i, _)| *i == id)
                    .map(|(_, t)| (t.x, t.y))
            })
            .collect();
        chart
            .draw_series(LineSeries::new(path_pts, BLACK.stroke_width(2)))
            .map_err(&err)?;
    }
    let est: Vec<(f64, f64)> = rec
        .scans
        .iter()
        .flat_map(|s| s.tracks.iter().map(|t| (t.state.x, t.state.y)))
        .collect();
    chart
        .draw_series(est.into_iter().map(|p| Circle::new(p, 2, RED.filled())))
        .map_err(&err)?
        .label("estimates")
        .legend(|(x, y)| Circle::new((x + 10, y), 3, RED.filled()));
    let sensor: Vec<(f64, f64)> = std::iter::once((
        rec.scans[0].sensor.x - rec.scans[0].command.dx,
        rec.scans[0].sensor.y - rec.scans[0].command.dy,
    ))
    .chain(rec.scans.iter().map(|s| (s.sensor.x, s.sensor.y)))
    .collect();
    chart
        .draw_series(LineSeries::new(sensor, BLUE.stroke_width(2)))
        .map_err(&err)?
        .label("sensor")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}

fn plot_errors(agg: &[ScanAggregate], path: &Path) -> Result<()> {
    let pick = |f: fn(&ScanAggregate) -> f64| agg.iter().map(|a| (a.k, f(a))).collect::<Vec<_>>();
    let series = [
        ("total", pick(|a| a.ospa_total.mean)),
        ("localization", pick(|a| a.ospa_loc.mean)),
        ("cardinality", pick(|a| a.ospa_card.mean)),
    ];
    plot_series(path, "Mean OSPA components", "OSPA (m)", &series)
}

fn plot_series(
    path: &Path,
    title: &str,
    y_desc: &str,
    series: &[(&str, Vec<(u32, f64)>)],
) -> Result<()> {
    let err = plot_err(path);
    let k_max = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(2);
    let y_max = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max);
    let root = SVGBackend::new(path, (900, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(50)
        .build_cartesian_2d(1f64..f64::from(k_max), 0f64..y_max * 1.05)
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("scan k")
        .y_desc(y_desc)
        .draw()
        .map_err(&err)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(
                pts.iter()
                    .filter(|p| p.1.is_finite())
                    .map(|&(k, v)| (f64::from(k), v)),
                color.stroke_width(2),
            ))
            .map_err(&err)?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(1500.0), "1500");
        assert_eq!(fmt_sig9(0.1234567891234), "0.123456789");
        assert_eq!(fmt_sig9(123456.789012), "123456.789");
        assert_eq!(fmt_sig9(-2.5e-7), "-0.00000025");
        assert_eq!(fmt_sig9(f64::NAN), "NaN");
        assert_eq!(round_sig9(2.0 / 3.0), 0.666666667);
    }

    #[test]
    fn rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![TrialRow {
            k: 1,
            sensor_x: 1.0 / 3.0,
            sensor_y: 1500.0,
            n_true: 5,
            n_est: 4,
            ospa_total: 45.123456789,
            ospa_loc: 2.0,
            ospa_card: 44.0,
        }];
        write_csv(&path, &rows).unwrap();
        let back: Vec<TrialRow> = read_csv(&path).unwrap();
        assert_eq!(back[0].sensor_x, round_sig9(1.0 / 3.0));
        assert_eq!(back[0].ospa_total, 45.1234568);
        assert_eq!(back[0].n_est, 4);
    }

    #[test]
    fn missing_directory_reports_path() {
        let err = write_csv::<TrialRow>(Path::new("/nonexistent/dir/x.csv"), &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.csv"));
    }
}
