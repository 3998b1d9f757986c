use std::fmt::Write as _;
use std::path::Path;

use super::grid::{CellValue, Grid2D};
use super::prediction::{CurveRole, PlotSelection, PredictionPlotData};
use super::scatter::{ScatterMode, ScatterSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Svg,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Svg => "svg",
            Self::Csv => "csv",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svg" => Ok(Self::Svg),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::InvalidOptions(format!(
                "unknown chart format `{s}` (svg, csv)"
            ))),
        }
    }
}

/// Renderable chart data.
#[derive(Debug, Clone, PartialEq)]
pub enum Chart {
    /// Heatmap, optionally overlaid with the solutions as points.
    Heatmap {
        grid: Grid2D,
        overlay: Option<ScatterSeries>,
    },
    Scatter(ScatterSeries),
    Prediction(PredictionPlotData),
}

impl Chart {
    /// Chart name used in file names.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Heatmap { overlay: None, .. } => "density_hm",
            Self::Heatmap {
                overlay: Some(_), ..
            } => "density_hm_scatter",
            Self::Scatter(s) => match s.mode {
                ScatterMode::Plain => "scatter",
                ScatterMode::Weighted => "weighted_scatter",
                ScatterMode::Density => "density_scatter",
            },
            Self::Prediction(_) => "plot_results",
        }
    }
}

/// Keeps ASCII alphanumerics, `_`, `.` and any of `extra`; the rest become `_`.
fn sanitize(s: &str, extra: &[char]) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '.') || extra.contains(&c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// `<run-id>_<chart>_<A>-<B>.<ext>` for parameter-pair charts and
/// `<run-id>_plot_results_<selection>.<ext>` for prediction plots.
pub fn file_name(run_id: &str, chart: &Chart, format: Format) -> String {
    let suffix = match chart {
        Chart::Heatmap { grid, .. } => {
            format!(
                "{}-{}",
                sanitize(&grid.params.0, &[]),
                sanitize(&grid.params.1, &[])
            )
        }
        Chart::Scatter(s) => format!(
            "{}-{}",
            sanitize(&s.params.0, &[]),
            sanitize(&s.params.1, &[])
        ),
        Chart::Prediction(p) => selection_name(p.selection).to_string(),
    };
    format!(
        "{}_{}_{}.{}",
        sanitize(run_id, &['-']),
        chart.kind(),
        suffix,
        format.extension()
    )
}

fn selection_name(s: PlotSelection) -> &'static str {
    match s {
        PlotSelection::Basic => "basic",
        PlotSelection::Best => "best",
        PlotSelection::Set => "set",
        PlotSelection::Complete => "complete",
    }
}

pub fn render(chart: &Chart, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        Format::Svg => render_svg(chart),
        Format::Csv => render_csv(chart)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

// ---- CSV ----

pub fn render_csv(chart: &Chart) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match chart {
        Chart::Heatmap { grid, .. } => {
            w.write_record([
                "x_lower", "x_upper", "y_lower", "y_upper", "count", "min_loss",
            ])?;
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    w.write_record([
                        grid.x_edges[ix].to_string(),
                        grid.x_edges[ix + 1].to_string(),
                        grid.y_edges[iy].to_string(),
                        grid.y_edges[iy + 1].to_string(),
                        grid.count(ix, iy).to_string(),
                        grid.cell_min_loss(ix, iy)
                            .map_or_else(String::new, |v| v.to_string()),
                    ])?;
                }
            }
        }
        Chart::Scatter(s) => {
            let mut header = vec!["index".to_string(), s.params.0.clone(), s.params.1.clone()];
            match s.mode {
                ScatterMode::Plain => {}
                ScatterMode::Weighted => header.push("loss".into()),
                ScatterMode::Density => header.push("density".into()),
            }
            w.write_record(&header)?;
            for (i, p) in s.points.iter().enumerate() {
                let mut row = vec![i.to_string(), p.0.to_string(), p.1.to_string()];
                if let Some(v) = &s.values {
                    row.push(v[i].to_string());
                }
                w.write_record(&row)?;
            }
        }
        Chart::Prediction(p) => {
            w.write_record(["dataset", "kind", "role", "solution", "x", "value"])?;
            let role = |r: CurveRole| match r {
                CurveRole::Initial => "initial",
                CurveRole::Best => "best",
                CurveRole::Member => "member",
            };
            let sol = |s: Option<usize>| s.map_or_else(String::new, |i| i.to_string());
            for s in &p.series {
                for (x, d) in s.x.iter().zip(&s.observed) {
                    w.write_record([
                        s.dataset.as_str(),
                        "observed",
                        "",
                        "",
                        &x.to_string(),
                        &d.to_string(),
                    ])?;
                }
                for c in &s.curves {
                    for (x, v) in s.x.iter().zip(&c.values) {
                        w.write_record([
                            &s.dataset,
                            "predicted",
                            role(c.role),
                            &sol(c.solution),
                            &x.to_string(),
                            &v.to_string(),
                        ])?;
                    }
                }
            }
            for z in &p.zero_variate {
                w.write_record([
                    z.dataset.as_str(),
                    "observed",
                    "",
                    "",
                    "",
                    &z.observed.to_string(),
                ])?;
                for c in &z.predicted {
                    w.write_record([
                        &z.dataset,
                        "predicted",
                        role(c.role),
                        &sol(c.solution),
                        "",
                        &c.values[0].to_string(),
                    ])?;
                }
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("buffering csv", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

// ---- SVG ----

const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let s = t * (VIRIDIS.len() - 1) as f64;
    let k = (s.floor() as usize).min(VIRIDIS.len() - 2);
    let f = s - k as f64;
    let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Compact tick / legend label.
fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        return s.to_string();
    }
    format!("{v:.2e}")
}

/// Widens an empty or inverted range so it can be drawn.
fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - d, hi + d)
    }
}

/// Maps values to colors, on a log scale when every value is positive.
struct ColorScale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl ColorScale {
    fn over(values: impl Iterator<Item = f64> + Clone, allow_log: bool) -> Option<Self> {
        let finite = values.filter(|v| v.is_finite());
        let log = allow_log && finite.clone().all(|v| v > 0.0);
        let t = |v: f64| if log { v.log10() } else { v };
        let lo = finite.clone().map(t).fold(f64::INFINITY, f64::min);
        let hi = finite.map(t).fold(f64::NEG_INFINITY, f64::max);
        lo.is_finite().then_some(Self { lo, hi, log })
    }

    fn at(&self, v: f64) -> String {
        let t = if self.log { v.log10() } else { v };
        color(if self.hi > self.lo {
            (t - self.lo) / (self.hi - self.lo)
        } else {
            0.5
        })
    }
}

/// Rectangular plot area with linear axes.
struct Frame {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        self.x + (v - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, v: f64) -> f64 {
        self.y + self.h - (v - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
            self.x, self.y, self.w, self.h
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.xr.0 + (self.xr.1 - self.xr.0) * f;
            let yv = self.yr.0 + (self.yr.1 - self.yr.0) * f;
            let (tx, ty) = (self.px(xv), self.py(yv));
            let bottom = self.y + self.h;
            let _ = writeln!(
                out,
                r##"<line x1="{tx:.2}" y1="{bottom:.2}" x2="{tx:.2}" y2="{:.2}" stroke="#333333"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                bottom + 5.0,
                bottom + 18.0,
                label(xv)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#333333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                self.x - 5.0,
                self.x,
                self.x - 8.0,
                ty + 4.0,
                label(yv)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            self.x + self.w / 2.0,
            self.y + self.h + 38.0,
            esc(xlabel)
        );
        let (lx, ly) = (self.x - 58.0, self.y + self.h / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
            esc(ylabel)
        );
    }
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r##"<rect width="100%" height="100%" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        esc(title)
    );
}

fn colorbar(out: &mut String, frame: &Frame, scale: &ColorScale, title: &str) {
    let (x, steps) = (frame.x + frame.w + 20.0, 50);
    let step_h = frame.h / steps as f64;
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            frame.y + k as f64 * step_h,
            step_h + 0.5,
            color(t)
        );
    }
    let raw = |v: f64| if scale.log { 10f64.powf(v) } else { v };
    for (v, y) in [(scale.hi, frame.y), (scale.lo, frame.y + frame.h)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 18.0,
            y + 4.0,
            label(raw(v))
        );
    }
    let name = if scale.log {
        format!("{title} (log scale)")
    } else {
        title.to_string()
    };
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{:.2}">{}</text>"#,
        frame.y - 8.0,
        esc(&name)
    );
}

fn pair_frame(xr: (f64, f64), yr: (f64, f64)) -> Frame {
    Frame {
        x: 80.0,
        y: 50.0,
        w: 440.0,
        h: 440.0,
        xr: span(xr.0, xr.1),
        yr: span(yr.0, yr.1),
    }
}

fn points_svg(
    out: &mut String,
    frame: &Frame,
    s: &ScatterSeries,
    fill: impl Fn(usize) -> String,
    r: f64,
) {
    for (i, p) in s.points.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{}" fill-opacity="0.85"/>"#,
            frame.px(p.0),
            frame.py(p.1),
            fill(i)
        );
    }
}

pub fn render_svg(chart: &Chart) -> String {
    let mut out = String::new();
    match chart {
        Chart::Heatmap { grid, overlay } => {
            let title = match grid.value {
                CellValue::Count => "solution density",
                CellValue::MinLoss => "minimum loss per cell",
            };
            header(&mut out, 640.0, 560.0, title);
            let frame = pair_frame(
                (grid.x_edges[0], grid.x_edges[grid.nx]),
                (grid.y_edges[0], grid.y_edges[grid.ny]),
            );
            let cell = |ix: usize, iy: usize| -> Option<f64> {
                match grid.value {
                    CellValue::Count => Some(grid.count(ix, iy) as f64).filter(|c| *c > 0.0),
                    CellValue::MinLoss => grid.cell_min_loss(ix, iy),
                }
            };
            let cells: Vec<f64> = (0..grid.ny)
                .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
                .filter_map(|(ix, iy)| cell(ix, iy))
                .collect();
            let scale = ColorScale::over(cells.iter().copied(), grid.value == CellValue::MinLoss);
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    let fill = match (cell(ix, iy), &scale) {
                        (Some(v), Some(s)) => s.at(v),
                        _ => "#f4f4f4".to_string(),
                    };
                    let (x0, x1) = (frame.px(grid.x_edges[ix]), frame.px(grid.x_edges[ix + 1]));
                    let (y0, y1) = (frame.py(grid.y_edges[iy + 1]), frame.py(grid.y_edges[iy]));
                    let _ = writeln!(
                        out,
                        r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                        x1 - x0,
                        y1 - y0
                    );
                }
            }
            if let Some(s) = overlay {
                points_svg(&mut out, &frame, s, |_| "#000000".into(), 1.5);
            }
            frame.axes(&mut out, &grid.params.0, &grid.params.1);
            if let Some(s) = &scale {
                let name = if grid.value == CellValue::Count {
                    "count"
                } else {
                    "min loss"
                };
                colorbar(&mut out, &frame, s, name);
            }
        }
        Chart::Scatter(s) => {
            let title = match s.mode {
                ScatterMode::Plain => "solutions",
                ScatterMode::Weighted => "solutions by loss",
                ScatterMode::Density => "solution density",
            };
            header(&mut out, 640.0, 560.0, title);
            let frame = pair_frame(s.bounds.0, s.bounds.1);
            let scale = s
                .values
                .as_ref()
                .and_then(|v| ColorScale::over(v.iter().copied(), s.mode == ScatterMode::Weighted));
            match (&s.values, &scale) {
                (Some(v), Some(sc)) => points_svg(&mut out, &frame, s, |i| sc.at(v[i]), 3.0),
                _ => points_svg(&mut out, &frame, s, |_| "#1f77b4".into(), 3.0),
            }
            frame.axes(&mut out, &s.params.0, &s.params.1);
            if let Some(sc) = &scale {
                colorbar(
                    &mut out,
                    &frame,
                    sc,
                    if s.mode == ScatterMode::Weighted {
                        "loss"
                    } else {
                        "density"
                    },
                );
            }
        }
        Chart::Prediction(p) => prediction_svg(&mut out, p),
    }
    out.push_str("</svg>\n");
    out
}

fn role_style(role: CurveRole) -> (&'static str, &'static str) {
    match role {
        CurveRole::Member => ("#b0b0b0", r#"stroke-width="1" stroke-opacity="0.6""#),
        CurveRole::Initial => ("#d62728", r#"stroke-width="1.5" stroke-dasharray="6 4""#),
        CurveRole::Best => ("#000000", r#"stroke-width="2""#),
    }
}

fn draw_order(role: CurveRole) -> u8 {
    match role {
        CurveRole::Member => 0,
        CurveRole::Initial => 1,
        CurveRole::Best => 2,
    }
}

fn legend(out: &mut String, frame: &Frame, roles: &[CurveRole]) {
    let mut y = frame.y + 12.0;
    let x = frame.x + frame.w - 110.0;
    let _ = writeln!(
        out,
        r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="none" stroke="#1f77b4" stroke-width="1.5"/><text x="{:.2}" y="{:.2}">observed</text>"##,
        x + 10.0,
        y - 4.0,
        x + 26.0,
        y
    );
    for role in [CurveRole::Best, CurveRole::Member, CurveRole::Initial] {
        if roles.contains(&role) {
            y += 16.0;
            let (stroke, extra) = role_style(role);
            let name = match role {
                CurveRole::Best => "best",
                CurveRole::Member => "solutions",
                CurveRole::Initial => "initial",
            };
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" {extra}/><text x="{:.2}" y="{y:.2}">{name}</text>"#,
                y - 4.0,
                x + 20.0,
                y - 4.0,
                x + 26.0
            );
        }
    }
}

fn prediction_svg(out: &mut String, p: &PredictionPlotData) {
    const PANEL: f64 = 380.0;
    let panels = p.series.len() + usize::from(!p.zero_variate.is_empty());
    let height = 50.0 + PANEL * panels.max(1) as f64;
    let mut title = format!("predictions ({})", selection_name(p.selection));
    if let Some(m) = &p.set_metrics {
        let f = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), label);
        let _ = write!(
            title,
            ", set mean MRE {}, set mean SMSE {}",
            f(m.mean_mre),
            f(m.mean_smse)
        );
    }
    header(out, 640.0, height, &title);
    let mut top = 50.0;
    for s in &p.series {
        let all = s
            .observed
            .iter()
            .chain(s.curves.iter().flat_map(|c| c.values.iter()));
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
        let pad = (hi - lo) * 0.05;
        let xr =
            s.x.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(*v), b.max(*v))
                });
        let frame = Frame {
            x: 80.0,
            y: top + 20.0,
            w: 500.0,
            h: PANEL - 90.0,
            xr: span(xr.0, xr.1),
            yr: span(lo - pad, hi + pad),
        };
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            frame.x,
            top + 12.0,
            esc(&s.dataset)
        );
        let mut curves: Vec<_> = s.curves.iter().collect();
        curves.sort_by_key(|c| draw_order(c.role));
        for c in &curves {
            let (stroke, extra) = role_style(c.role);
            let pts: Vec<String> =
                s.x.iter()
                    .zip(&c.values)
                    .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
                    .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{stroke}" {extra}/>"#,
                pts.join(" ")
            );
        }
        for (x, d) in s.x.iter().zip(&s.observed) {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
                frame.px(*x),
                frame.py(*d)
            );
        }
        frame.axes(out, "x", "value");
        let roles: Vec<CurveRole> = s.curves.iter().map(|c| c.role).collect();
        legend(out, &frame, &roles);
        top += PANEL;
    }
    if !p.zero_variate.is_empty() {
        // parity plot: observed (x) against predicted (y)
        let vals = p.zero_variate.iter().flat_map(|z| {
            std::iter::once(z.observed).chain(z.predicted.iter().map(|c| c.values[0]))
        });
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        let pad = (hi - lo) * 0.05;
        let r = span(lo - pad, hi + pad);
        let frame = Frame {
            x: 80.0,
            y: top + 20.0,
            w: 500.0,
            h: PANEL - 90.0,
            xr: r,
            yr: r,
        };
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">zero-variate data</text>"#,
            frame.x,
            top + 12.0
        );
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#1f77b4" stroke-dasharray="3 3"/>"##,
            frame.px(r.0),
            frame.py(r.0),
            frame.px(r.1),
            frame.py(r.1)
        );
        let mut roles = Vec::new();
        for z in &p.zero_variate {
            let mut preds: Vec<_> = z.predicted.iter().collect();
            preds.sort_by_key(|c| draw_order(c.role));
            for c in preds {
                roles.push(c.role);
                let (fill, _) = role_style(c.role);
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{fill}"><title>{}</title></circle>"#,
                    frame.px(z.observed),
                    frame.py(c.values[0]),
                    esc(&z.dataset)
                );
            }
        }
        frame.axes(out, "observed", "predicted");
        legend(out, &frame, &roles);
    }
}
