//! CSV and SVG emission. All numeric output goes through one fixed
//! 12-significant-digit formatter so repeated runs are byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::incentive::{LimitTable, ScheduleGrid};
use crate::simulator::{EnsembleStats, LimitVolume};
use crate::value::ValueField;

/// 12 significant digits, scientific; `-0` normalized to `0`.
pub fn fmt_sig(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(path, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// `t,x,p` rows for every node of the field.
pub fn write_value_field(path: &Path, field: &ValueField) -> Result<()> {
    let mut out = String::with_capacity(field.n_t() * field.n_x() * 32);
    out.push_str("t,x,p\n");
    for i in 0..field.n_t() {
        for j in 0..field.n_x() {
            out.push_str(&fmt_sig(field.ts[i]));
            out.push(',');
            out.push_str(&fmt_sig(field.xs[j]));
            out.push(',');
            out.push_str(&fmt_sig(field.at(i, j)));
            out.push('\n');
        }
    }
    write_file(path, &out)
}

/// `limit,distance,incentive` rows.
pub fn write_limit_table(path: &Path, table: &LimitTable) -> Result<()> {
    let mut out = String::from("limit,distance,incentive\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.limit,
            fmt_sig(row.distance),
            fmt_sig(row.incentive)
        ));
    }
    write_file(path, &out)
}

/// `t,x,z` rows for a grid-backed schedule.
pub fn write_schedule(path: &Path, grid: &ScheduleGrid) -> Result<()> {
    let mut out = String::with_capacity(grid.ts.len() * grid.xs.len() * 32);
    out.push_str("t,x,z\n");
    for (i, &t) in grid.ts.iter().enumerate() {
        for (j, &x) in grid.xs.iter().enumerate() {
            out.push_str(&fmt_sig(t));
            out.push(',');
            out.push_str(&fmt_sig(x));
            out.push(',');
            out.push_str(&fmt_sig(grid.z[i * grid.xs.len() + j]));
            out.push('\n');
        }
    }
    write_file(path, &out)
}

/// `x,mean_u,std_u` over the whole book, bid side first (negative x).
pub fn write_shape(path: &Path, stats: &EnsembleStats) -> Result<()> {
    let mut out = String::from("x,mean_u,std_u\n");
    let n = stats.xs.len();
    let mut row = |x: f64, mean: f64, std: f64| {
        out.push_str(&fmt_sig(x));
        out.push(',');
        out.push_str(&fmt_sig(mean));
        out.push(',');
        out.push_str(&fmt_sig(std));
        out.push('\n');
    };
    for j in (1..n).rev() {
        row(-stats.xs[j], stats.mean_bid[j], stats.std_bid[j]);
    }
    for ((&x, &mean), &std) in stats
        .xs
        .iter()
        .zip(stats.mean_ask.iter())
        .zip(stats.std_ask.iter())
    {
        row(x, mean, std);
    }
    write_file(path, &out)
}

/// `limit,side,volume` rows.
pub fn write_volumes(path: &Path, volumes: &[LimitVolume]) -> Result<()> {
    let mut out = String::from("limit,side,volume\n");
    for v in volumes {
        out.push_str(&format!("{},{},{}\n", v.limit, v.side, fmt_sig(v.volume)));
    }
    write_file(path, &out)
}

/// `t,x,u` rows for a recorded path (bid side as negative x).
pub fn write_book_path(path: &Path, snaps: &[crate::simulator::BookState], xs: &[f64]) -> Result<()> {
    let mut out = String::from("t,x,u\n");
    for s in snaps {
        let n = xs.len();
        for j in (1..n).rev() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_sig(s.time),
                fmt_sig(-xs[j]),
                fmt_sig(s.bid[j])
            ));
        }
        for (&x, &u) in xs.iter().zip(s.ask.iter()) {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_sig(s.time),
                fmt_sig(x),
                fmt_sig(u)
            ));
        }
    }
    write_file(path, &out)
}

/// One named line of a chart.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Self-contained SVG line chart with axes, tick labels and a legend.
/// `log_y` plots log10 of the (positive) values, for series spanning many
/// decades.
pub fn write_line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    log_y: bool,
) -> Result<()> {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const ML: f64 = 80.0;
    const MR: f64 = 30.0;
    const MT: f64 = 50.0;
    const MB: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let transform = |y: f64| -> Option<f64> {
        if log_y {
            if y > 0.0 {
                Some(y.log10())
            } else {
                None
            }
        } else {
            Some(y)
        }
    };

    let mut xs_min = f64::INFINITY;
    let mut xs_max = f64::NEG_INFINITY;
    let mut ys_min = f64::INFINITY;
    let mut ys_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if let Some(ty) = transform(y) {
                xs_min = xs_min.min(x);
                xs_max = xs_max.max(x);
                ys_min = ys_min.min(ty);
                ys_max = ys_max.max(ty);
            }
        }
    }
    if !xs_min.is_finite() {
        // nothing plottable; emit an empty frame
        xs_min = 0.0;
        xs_max = 1.0;
        ys_min = 0.0;
        ys_max = 1.0;
    }
    if (xs_max - xs_min).abs() < 1e-300 {
        xs_max = xs_min + 1.0;
    }
    if (ys_max - ys_min).abs() < 1e-300 {
        ys_max = ys_min + 1.0;
    }
    let pad = 0.04 * (ys_max - ys_min);
    let (ys_min, ys_max) = (ys_min - pad, ys_max + pad);

    let px = |x: f64| ML + (x - xs_min) / (xs_max - xs_min) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - ys_min) / (ys_max - ys_min) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    // ticks
    for i in 0..=5 {
        let fx = xs_min + (xs_max - xs_min) * i as f64 / 5.0;
        let x = px(fx);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            H - MB,
            H - MB + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{fx:.3}</text>\n",
            H - MB + 18.0
        ));
        let fy = ys_min + (ys_max - ys_min) * i as f64 / 5.0;
        let y = py(fy);
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{ML}\" y2=\"{y:.1}\" stroke=\"black\"/>\n",
            ML - 5.0
        ));
        let label = if log_y {
            format!("1e{fy:.1}")
        } else {
            format!("{fy:.3}")
        };
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            ML - 8.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{x_label}</text>\n",
        (ML + W - MR) / 2.0,
        H - 15.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        if log_y { format!("log10 {y_label}") } else { y_label.to_string() }
    ));
    // series + legend
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter_map(|&(x, y)| transform(y).map(|ty| format!("{:.2},{:.2}", px(x), py(ty))))
            .collect();
        if !pts.is_empty() {
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                pts.join(" ")
            ));
        }
        let ly = MT + 16.0 * k as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            W - MR - 150.0,
            W - MR - 125.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            W - MR - 118.0,
            ly + 4.0,
            s.name
        ));
    }
    svg.push_str("</svg>\n");
    write_file(path, &svg)
}

/// Writes `contents` (already rendered) to `dir/name`, creating `dir`.
pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    write_file(&path, contents)?;
    Ok(path)
}
