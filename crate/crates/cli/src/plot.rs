//! Static SVG figures drawn from the numerical results.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{CliError, CliResult};

const PALETTE: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

fn plot_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("plot: {e}"))
}

fn bounds(series: &[(String, Vec<(f64, f64)>)]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    ((x0, x1), (y0, y1))
}

/// Line chart with one curve per labeled series; `log_y` and `log_x` expect
/// positive data.
pub fn lines(path: &Path, title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)], log_x: bool, log_y: bool) -> CliResult<()> {
    let tf = |v: f64, log: bool| if log { v.log10() } else { v };
    let mapped: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(n, p)| {
            let pts = p
                .iter()
                .filter(|(x, y)| (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
                .map(|&(x, y)| (tf(x, log_x), tf(y, log_y)))
                .collect();
            (n.clone(), pts)
        })
        .collect();
    let ((x0, x1), (y0, y1)) = bounds(&mapped);
    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let xl = if log_x { format!("log10 {xlabel}") } else { xlabel.to_string() };
    let yl = if log_y { format!("log10 {ylabel}") } else { ylabel.to_string() };
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(xl).y_desc(yl).draw().map_err(plot_err)?;
    for (i, (name, pts)) in mapped.into_iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts, c.stroke_width(2)))
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], c.stroke_width(2)));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// One trajectory track: `(t/L, x1/L, optional x2/L)` samples in time order.
pub struct Track {
    pub points: Vec<(f64, f64, Option<f64>)>,
}

/// Position against time in units of `L`, breaking lines at the periodic
/// boundary; second particles are drawn as markers.
pub fn trajectories(path: &Path, title: &str, tracks: &[Track], t_end: f64) -> CliResult<()> {
    let root = SVGBackend::new(path, (900, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..t_end.max(1e-9), -0.5..0.5)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t/L").y_desc("x/L").draw().map_err(plot_err)?;
    for (i, tr) in tracks.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        // hold each position until the next record, then split at wraps
        let mut seg: Vec<(f64, f64)> = Vec::new();
        let mut segs = Vec::new();
        for (k, &(t, x, _)) in tr.points.iter().enumerate() {
            let t_next = tr.points.get(k + 1).map_or(t_end, |p| p.0);
            if let Some(&(_, last)) = seg.last() {
                if (x - last).abs() > 0.5 {
                    segs.push(std::mem::take(&mut seg));
                } else {
                    seg.push((t, x));
                }
            }
            seg.push((t, x));
            seg.push((t_next, x));
        }
        segs.push(seg);
        for s in segs {
            chart.draw_series(LineSeries::new(s, c.stroke_width(1))).map_err(plot_err)?;
        }
        let second: Vec<(f64, f64)> = tr.points.iter().filter_map(|&(t, _, x2)| x2.map(|x| (t, x))).collect();
        chart
            .draw_series(second.into_iter().map(|p| TriangleMarker::new(p, 3, c.filled())))
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}
