//! Deterministic SVG rendering of the four plot types from a plot document.
//!
//! Element order, attribute order, and number formatting are fixed, so an
//! identical document always renders to byte-identical SVG. Every plot
//! carries a title, axis labels, and (by default) grid lines.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::ResultArray;
use crate::plotdoc::{colormap, PlotDocError, PlotDocument, PlotType};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("shape error for {arg}: expected {expected}, got {got:?}")]
    Shape {
        arg: &'static str,
        expected: String,
        got: [usize; 4],
    },
    #[error("missing argument {0:?}")]
    MissingArg(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    PlotDoc(#[from] PlotDocError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Fixed drawing surface; plot area is what remains inside the margins.
#[derive(Debug, Clone)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
    pub margin_left: f64,
    pub margin_right: f64,
    pub margin_top: f64,
    pub margin_bottom: f64,
}

impl Canvas {
    pub fn for_type(plot_type: PlotType) -> Canvas {
        let (width, height, margin_right) = match plot_type {
            PlotType::Layer => (800.0, 800.0, 120.0),
            _ => (800.0, 600.0, 30.0),
        };
        Canvas {
            width,
            height,
            margin_left: 70.0,
            margin_right,
            margin_top: 50.0,
            margin_bottom: 55.0,
        }
    }

    fn plot_x0(&self) -> f64 {
        self.margin_left
    }

    fn plot_x1(&self) -> f64 {
        self.width - self.margin_right
    }

    fn plot_y0(&self) -> f64 {
        self.margin_top
    }

    fn plot_y1(&self) -> f64 {
        self.height - self.margin_bottom
    }
}

const FONT: &str = "sans-serif";

/// Shortest decimal that round-trips the value after rounding to at most
/// six significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let canonical: f64 = fmt_sig(x, 6).parse().unwrap();
    for digits in 1..=6usize {
        let s = fmt_sig(x, digits);
        if s.parse::<f64>().unwrap() == canonical {
            return s;
        }
    }
    fmt_sig(x, 6)
}

/// Plain-decimal (or e-notation for extreme exponents) rendering with the
/// given number of significant digits, trailing zeros stripped.
fn fmt_sig(x: f64, digits: usize) -> String {
    let e = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = e.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let neg = mantissa.starts_with('-');
    let digits_str: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits_str = digits_str.trim_end_matches('0');
    let digits_str = if digits_str.is_empty() { "0" } else { digits_str };
    if digits_str == "0" {
        return "0".to_string();
    }
    let sign = if neg { "-" } else { "" };
    if exp >= -4 && exp <= 8 {
        let mut out = String::new();
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits_str.len() <= int_len {
                out.push_str(digits_str);
                out.push_str(&"0".repeat(int_len - digits_str.len()));
            } else {
                out.push_str(&digits_str[..int_len]);
                out.push('.');
                out.push_str(&digits_str[int_len..]);
            }
        } else {
            out.push_str("0.");
            out.push_str(&"0".repeat((-exp - 1) as usize));
            out.push_str(digits_str);
        }
        format!("{sign}{out}")
    } else {
        let mut m = digits_str[..1].to_string();
        if digits_str.len() > 1 {
            m.push('.');
            m.push_str(&digits_str[1..]);
        }
        format!("{sign}{m}e{exp}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Ticks at multiples of a step from {1, 2, 5} * 10^k covering [lo, hi],
/// with a count near `target_count`.
pub fn nice_ticks(lo: f64, hi: f64, target_count: usize) -> Result<Vec<f64>, RenderError> {
    if !(lo < hi) {
        return Err(RenderError::Domain(format!(
            "tick range needs lo < hi, got ({lo}, {hi})"
        )));
    }
    if target_count < 2 {
        return Err(RenderError::Domain("target_count must be >= 2".into()));
    }
    let span = hi - lo;
    let k0 = (span / target_count as f64).log10().floor() as i32;
    let mut best: Option<(usize, f64, i64, i64)> = None;
    for k in (k0 - 2)..=(k0 + 3) {
        for m in [1.0f64, 2.0, 5.0] {
            let step = m * 10f64.powi(k);
            let first = (lo / step).floor() as i64;
            let last = (hi / step).ceil() as i64;
            let count = (last - first + 1) as usize;
            if count + 2 < target_count || count > target_count + 2 {
                continue;
            }
            let score = count.abs_diff(target_count);
            let better = match &best {
                None => true,
                Some((s, bs, _, _)) => score < *s || (score == *s && step > *bs),
            };
            if better {
                best = Some((score, step, first, last));
            }
        }
    }
    let (_, step, first, last) =
        best.ok_or_else(|| RenderError::Domain("no tick step found".into()))?;
    Ok((first..=last).map(|i| i as f64 * step).collect())
}

/// Linear-interpolation quantiles (fractional order statistic q*(n-1)).
pub fn quantiles(values: &[f64], qs: &[f64]) -> Result<Vec<f64>, RenderError> {
    if values.is_empty() {
        return Err(RenderError::Domain("quantiles of empty data".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    Ok(qs
        .iter()
        .map(|&q| {
            let pos = q * (n - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 < n {
                sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
            } else {
                sorted[n - 1]
            }
        })
        .collect())
}

/// Linear data-to-pixel map.
#[derive(Debug, Clone, Copy)]
struct LinMap {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl LinMap {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> LinMap {
        LinMap {
            lo,
            hi,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

/// Expands a degenerate (max = min) range to a unit span centered on the
/// value.
fn safe_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo < hi {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn data_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    safe_range(lo, hi)
}

struct Svg {
    out: String,
}

impl Svg {
    fn new(canvas: &Canvas) -> Svg {
        let mut out = String::new();
        let _ = write!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            w = fmt_num(canvas.width),
            h = fmt_num(canvas.height)
        );
        let _ = write!(
            out,
            "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
            fmt_num(canvas.width),
            fmt_num(canvas.height)
        );
        Svg { out }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = write!(
            self.out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
            fmt_num(x1),
            fmt_num(y1),
            fmt_num(x2),
            fmt_num(y2),
            stroke,
            fmt_num(width)
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = write!(
            self.out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            fmt_num(x),
            fmt_num(y),
            fmt_num(w),
            fmt_num(h),
            fill
        );
    }

    fn rect_outline(&mut self, x: f64, y: f64, w: f64, h: f64) {
        let _ = write!(
            self.out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n",
            fmt_num(x),
            fmt_num(y),
            fmt_num(w),
            fmt_num(h)
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = write!(
            self.out,
            "<text x=\"{}\" y=\"{}\" font-family=\"{}\" font-size=\"{}\" text-anchor=\"{}\" fill=\"#000000\">{}</text>\n",
            fmt_num(x),
            fmt_num(y),
            FONT,
            fmt_num(size),
            anchor,
            xml_escape(s)
        );
    }

    fn text_rotated(&mut self, x: f64, y: f64, size: f64, s: &str) {
        let _ = write!(
            self.out,
            "<text x=\"{}\" y=\"{}\" font-family=\"{}\" font-size=\"{}\" text-anchor=\"middle\" fill=\"#000000\" transform=\"rotate(-90 {} {})\">{}</text>\n",
            fmt_num(x),
            fmt_num(y),
            FONT,
            fmt_num(size),
            fmt_num(x),
            fmt_num(y),
            xml_escape(s)
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt_num(x), fmt_num(y)))
            .collect();
        let _ = write!(
            self.out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
            pts.join(" "),
            stroke,
            fmt_num(width)
        );
    }

    fn polygon(&mut self, points: &[(f64, f64)], fill: &str, opacity: f64) {
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt_num(x), fmt_num(y)))
            .collect();
        let _ = write!(
            self.out,
            "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"/>\n",
            pts.join(" "),
            fill,
            fmt_num(opacity)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

struct Frame2D {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    xmap: LinMap,
    ymap: LinMap,
}

/// Draws the axis frame, grid lines, ticks and labels for one panel and
/// returns the data-to-pixel maps.
#[allow(clippy::too_many_arguments)]
fn draw_frame(
    svg: &mut Svg,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    xrange: (f64, f64),
    yrange: (f64, f64),
    grid: bool,
    xlabel: &str,
    ylabel: &str,
) -> Frame2D {
    let xmap = LinMap::new(xrange.0, xrange.1, x0, x1);
    let ymap = LinMap::new(yrange.0, yrange.1, y1, y0); // y grows upward
    let xticks: Vec<f64> = nice_ticks(xrange.0, xrange.1, 6)
        .unwrap_or_default()
        .into_iter()
        .filter(|&t| t >= xrange.0 - 1e-12 && t <= xrange.1 + 1e-12)
        .collect();
    let yticks: Vec<f64> = nice_ticks(yrange.0, yrange.1, 6)
        .unwrap_or_default()
        .into_iter()
        .filter(|&t| t >= yrange.0 - 1e-12 && t <= yrange.1 + 1e-12)
        .collect();
    if grid {
        for &t in &xticks {
            svg.line(xmap.map(t), y0, xmap.map(t), y1, "#d0d0d0", 0.5);
        }
        for &t in &yticks {
            svg.line(x0, ymap.map(t), x1, ymap.map(t), "#d0d0d0", 0.5);
        }
    }
    svg.rect_outline(x0, y0, x1 - x0, y1 - y0);
    for &t in &xticks {
        let px = xmap.map(t);
        svg.line(px, y1, px, y1 + 5.0, "#000000", 1.0);
        svg.text(px, y1 + 18.0, 11.0, "middle", &fmt_num(t));
    }
    for &t in &yticks {
        let py = ymap.map(t);
        svg.line(x0 - 5.0, py, x0, py, "#000000", 1.0);
        svg.text(x0 - 8.0, py + 4.0, 11.0, "end", &fmt_num(t));
    }
    svg.text((x0 + x1) / 2.0, y1 + 38.0, 13.0, "middle", xlabel);
    svg.text_rotated(x0 - 45.0, (y0 + y1) / 2.0, 13.0, ylabel);
    Frame2D {
        x0,
        x1,
        y0,
        y1,
        xmap,
        ymap,
    }
}

fn require_array<'a>(
    doc: &'a PlotDocument,
    name: &'static str,
) -> Result<&'a ResultArray, RenderError> {
    doc.arg(name)
        .and_then(|v| v.as_array())
        .ok_or(RenderError::MissingArg(name))
}

fn title_of(doc: &PlotDocument) -> String {
    if doc.presentation.title.is_empty() {
        format!("{} plot", doc.plot_type)
    } else {
        doc.presentation.title.clone()
    }
}

/// Renders a document to SVG bytes.
pub fn render(doc: &PlotDocument) -> Result<String, RenderError> {
    let canvas = Canvas::for_type(doc.plot_type);
    match doc.plot_type {
        PlotType::Layer => render_layer(doc, &canvas),
        PlotType::Channel => render_channel(doc, &canvas),
        PlotType::Time => render_time(doc, &canvas),
        PlotType::Waterfall => render_waterfall(doc, &canvas),
    }
}

/// Renders a document and writes the SVG to `out_path`.
pub fn render_to_file(doc: &PlotDocument, out_path: &Path) -> Result<(), RenderError> {
    let svg = render(doc)?;
    std::fs::write(out_path, svg.as_bytes()).map_err(|e| RenderError::Io {
        path: out_path.display().to_string(),
        source: e,
    })
}

fn render_layer(doc: &PlotDocument, canvas: &Canvas) -> Result<String, RenderError> {
    let values = require_array(doc, "values")?;
    let [nx, ny, sz, st] = values.shape();
    if sz != 1 || st != 1 {
        return Err(RenderError::Shape {
            arg: "values",
            expected: "(nx, ny, 1, 1)".into(),
            got: values.shape(),
        });
    }
    let p = &doc.presentation;
    let (vmin, vmax) = data_range(values.values());
    let mut svg = Svg::new(canvas);
    svg.text(canvas.width / 2.0, 28.0, 16.0, "middle", &title_of(doc));
    let xrange = p.axis_limits.x.unwrap_or((-0.5, nx as f64 - 0.5));
    let yrange = p.axis_limits.y.unwrap_or((-0.5, ny as f64 - 0.5));
    let frame = draw_frame(
        &mut svg,
        canvas.plot_x0(),
        canvas.plot_x1(),
        canvas.plot_y0(),
        canvas.plot_y1(),
        xrange,
        yrange,
        p.grid_lines,
        "x",
        "y",
    );
    // Discrete square markers, one per (x, y) cell, colored by value.
    let cell_w = (frame.x1 - frame.x0) / (xrange.1 - xrange.0);
    let cell_h = (frame.y1 - frame.y0) / (yrange.1 - yrange.0);
    let side = cell_w.min(cell_h) * 0.8 * p.marker_size;
    for j in 0..ny {
        for i in 0..nx {
            let v = values.get([i, j, 0, 0]);
            let t = (v - vmin) / (vmax - vmin);
            let fill = colormap::colormap_hex(&p.colormap_id, t.clamp(0.0, 1.0))?;
            let cx = frame.xmap.map(i as f64);
            let cy = frame.ymap.map(j as f64);
            svg.rect(cx - side / 2.0, cy - side / 2.0, side, side, &fill);
        }
    }
    // Vertical colorbar with 5 labeled ticks clipped to the data range.
    let bar_x = frame.x1 + 25.0;
    let bar_w = 18.0;
    let bar_map = LinMap::new(vmin, vmax, frame.y1, frame.y0);
    let steps = 64usize;
    for s in 0..steps {
        let t0 = s as f64 / steps as f64;
        let t1 = (s + 1) as f64 / steps as f64;
        let fill = colormap::colormap_hex(&p.colormap_id, (t0 + t1) / 2.0)?;
        let ya = bar_map.map(vmin + t1 * (vmax - vmin));
        let yb = bar_map.map(vmin + t0 * (vmax - vmin));
        svg.rect(bar_x, ya, bar_w, yb - ya, &fill);
    }
    svg.rect_outline(bar_x, frame.y0, bar_w, frame.y1 - frame.y0);
    let ticks: Vec<f64> = nice_ticks(vmin, vmax, 5)?
        .into_iter()
        .filter(|&t| t >= vmin - 1e-12 && t <= vmax + 1e-12)
        .collect();
    for &t in &ticks {
        let py = bar_map.map(t);
        svg.line(bar_x + bar_w, py, bar_x + bar_w + 4.0, py, "#000000", 1.0);
        svg.text(bar_x + bar_w + 7.0, py + 4.0, 11.0, "start", &fmt_num(t));
    }
    if !values.units().is_empty() {
        svg.text(bar_x + bar_w / 2.0, frame.y0 - 10.0, 11.0, "middle", values.units());
    }
    Ok(svg.finish())
}

fn render_channel(doc: &PlotDocument, canvas: &Canvas) -> Result<String, RenderError> {
    let dx = require_array(doc, "dx")?;
    let dy = require_array(doc, "dy")?;
    for (name, a) in [("dx", dx), ("dy", dy)] {
        let [sx, sy, _, _] = a.shape();
        if sx != 1 || sy != 1 {
            return Err(RenderError::Shape {
                arg: if name == "dx" { "dx" } else { "dy" },
                expected: "(1, 1, nz, T)".into(),
                got: a.shape(),
            });
        }
    }
    if dx.shape() != dy.shape() {
        return Err(RenderError::Shape {
            arg: "dy",
            expected: format!("{:?} (same as dx)", dx.shape()),
            got: dy.shape(),
        });
    }
    let [_, _, nz, nt] = dx.shape();
    // Default frame: the one with maximum total column excursion.
    let sel = doc.real_arg("frame").unwrap_or(-1.0) as i64;
    let frame_idx = if sel >= 0 {
        let f = sel as usize;
        if f >= nt {
            return Err(RenderError::Domain(format!(
                "frame {f} out of range for {nt} time steps"
            )));
        }
        f
    } else {
        let mut best = (0usize, f64::NEG_INFINITY);
        for t in 0..nt {
            let mut sum = 0.0;
            for z in 0..nz {
                sum += dx.get([0, 0, z, t]).abs() + dy.get([0, 0, z, t]).abs();
            }
            if sum > best.1 {
                best = (t, sum);
            }
        }
        best.0
    };
    let p = &doc.presentation;
    let mut svg = Svg::new(canvas);
    let title = format!("{} (frame {frame_idx})", title_of(doc));
    svg.text(canvas.width / 2.0, 28.0, 16.0, "middle", &title);
    let xs: Vec<f64> = (0..nz).map(|z| dx.get([0, 0, z, frame_idx])).collect();
    let ys: Vec<f64> = (0..nz).map(|z| dy.get([0, 0, z, frame_idx])).collect();
    let yrange = p.axis_limits.y.unwrap_or((-0.5, nz as f64 - 0.5));
    let gap = 40.0;
    let panel_w = (canvas.plot_x1() - canvas.plot_x0() - gap) / 2.0;
    for (i, (series, label)) in [(&xs, "dx"), (&ys, "dy")].iter().enumerate() {
        let x0 = canvas.plot_x0() + i as f64 * (panel_w + gap);
        let xrange = p.axis_limits.x.unwrap_or_else(|| data_range(series));
        let frame = draw_frame(
            &mut svg,
            x0,
            x0 + panel_w,
            canvas.plot_y0(),
            canvas.plot_y1(),
            xrange,
            yrange,
            p.grid_lines,
            &format!("{label} ({})", if dx.units().is_empty() { "-" } else { dx.units() }),
            "z",
        );
        let pts: Vec<(f64, f64)> = series
            .iter()
            .enumerate()
            .map(|(z, &v)| (frame.xmap.map(v), frame.ymap.map(z as f64)))
            .collect();
        svg.polyline(&pts, "#3b4cc0", p.line_width);
        for &(px, py) in &pts {
            let r = 2.5 * p.marker_size;
            svg.rect(px - r, py - r, 2.0 * r, 2.0 * r, "#b40426");
        }
    }
    Ok(svg.finish())
}

fn render_time(doc: &PlotDocument, canvas: &Canvas) -> Result<String, RenderError> {
    let values = require_array(doc, "values")?;
    let [sx, sy, sz, nt] = values.shape();
    if sx != 1 || sy != 1 || sz != 1 {
        return Err(RenderError::Shape {
            arg: "values",
            expected: "(1, 1, 1, T)".into(),
            got: values.shape(),
        });
    }
    let dt = doc.real_arg("dt").unwrap_or(1.0);
    let p = &doc.presentation;
    let mut svg = Svg::new(canvas);
    svg.text(canvas.width / 2.0, 28.0, 16.0, "middle", &title_of(doc));
    let t_end = (nt.saturating_sub(1)) as f64 * dt;
    let xrange = p.axis_limits.x.unwrap_or_else(|| safe_range(0.0, t_end));
    let yrange = p.axis_limits.y.unwrap_or_else(|| data_range(values.values()));
    let ylabel = if values.units().is_empty() {
        values.name().to_string()
    } else {
        format!("{} ({})", values.name(), values.units())
    };
    let frame = draw_frame(
        &mut svg,
        canvas.plot_x0(),
        canvas.plot_x1(),
        canvas.plot_y0(),
        canvas.plot_y1(),
        xrange,
        yrange,
        p.grid_lines,
        "time (s)",
        &ylabel,
    );
    let pts: Vec<(f64, f64)> = (0..nt)
        .map(|t| {
            (
                frame.xmap.map(t as f64 * dt),
                frame.ymap.map(values.get([0, 0, 0, t])),
            )
        })
        .collect();
    svg.polyline(&pts, "#3b4cc0", p.line_width);
    Ok(svg.finish())
}

const WATERFALL_QS: [f64; 7] = [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0];

fn render_waterfall(doc: &PlotDocument, canvas: &Canvas) -> Result<String, RenderError> {
    let values = require_array(doc, "values")?;
    let [sx, sy, sz, nt] = values.shape();
    let dt = doc.real_arg("dt").unwrap_or(1.0);
    // Per time step, pool all spatial cells and summarize the distribution
    // as quantile bands.
    let mut qrows: Vec<Vec<f64>> = Vec::with_capacity(nt);
    let mut pool = Vec::with_capacity(sx * sy * sz);
    for t in 0..nt {
        pool.clear();
        for k in 0..sz {
            for j in 0..sy {
                for i in 0..sx {
                    pool.push(values.get([i, j, k, t]));
                }
            }
        }
        qrows.push(quantiles(&pool, &WATERFALL_QS)?);
    }
    let p = &doc.presentation;
    let mut svg = Svg::new(canvas);
    svg.text(canvas.width / 2.0, 28.0, 16.0, "middle", &title_of(doc));
    let t_end = (nt.saturating_sub(1)) as f64 * dt;
    let xrange = p.axis_limits.x.unwrap_or_else(|| safe_range(0.0, t_end));
    let all: Vec<f64> = qrows.iter().flatten().copied().collect();
    let yrange = p.axis_limits.y.unwrap_or_else(|| data_range(&all));
    let ylabel = if values.units().is_empty() {
        values.name().to_string()
    } else {
        format!("{} ({})", values.name(), values.units())
    };
    let frame = draw_frame(
        &mut svg,
        canvas.plot_x0(),
        canvas.plot_x1(),
        canvas.plot_y0(),
        canvas.plot_y1(),
        xrange,
        yrange,
        p.grid_lines,
        "time (s)",
        &ylabel,
    );
    // Nested filled bands: (min, max), (5%, 95%), (25%, 75%), then median.
    let bands = [(0usize, 6usize, 0.2), (1, 5, 0.35), (2, 4, 0.5)];
    for &(lo_i, hi_i, opacity) in &bands {
        let mut poly: Vec<(f64, f64)> = Vec::with_capacity(2 * nt);
        for t in 0..nt {
            poly.push((
                frame.xmap.map(t as f64 * dt),
                frame.ymap.map(qrows[t][hi_i]),
            ));
        }
        for t in (0..nt).rev() {
            poly.push((
                frame.xmap.map(t as f64 * dt),
                frame.ymap.map(qrows[t][lo_i]),
            ));
        }
        svg.polygon(&poly, "#3b4cc0", opacity);
    }
    let median: Vec<(f64, f64)> = (0..nt)
        .map(|t| {
            (
                frame.xmap.map(t as f64 * dt),
                frame.ymap.map(qrows[t][3]),
            )
        })
        .collect();
    svg.polyline(&median, "#b40426", p.line_width);
    Ok(svg.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_ticks_matches_brute_force() {
        // Oracle: brute force over {1,2,5}*10^k grids picking the count
        // closest to target (ties to the larger step).
        fn oracle(lo: f64, hi: f64, target: usize) -> Vec<f64> {
            let mut best: Option<(usize, f64, i64, i64)> = None;
            for k in -12..=12 {
                for m in [1.0f64, 2.0, 5.0] {
                    let step = m * 10f64.powi(k);
                    let first = (lo / step).floor() as i64;
                    let last = (hi / step).ceil() as i64;
                    let count = (last - first + 1) as usize;
                    if count + 2 < target || count > target + 2 {
                        continue;
                    }
                    let score = count.abs_diff(target);
                    let better = match &best {
                        None => true,
                        Some((s, bs, _, _)) => score < *s || (score == *s && step > *bs),
                    };
                    if better {
                        best = Some((score, step, first, last));
                    }
                }
            }
            let (_, step, first, last) = best.unwrap();
            (first..=last).map(|i| i as f64 * step).collect()
        }
        for (lo, hi, n) in [
            (0.0, 10.0, 6usize),
            (-1.0, 1.0, 5),
            (0.3, 7.7, 4),
            (-12.5, 99.0, 7),
            (1e-6, 5e-6, 5),
        ] {
            assert_eq!(nice_ticks(lo, hi, n).unwrap(), oracle(lo, hi, n), "({lo},{hi},{n})");
        }
        assert_eq!(nice_ticks(0.0, 10.0, 6).unwrap(), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(nice_ticks(-1.0, 1.0, 5).unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn nice_ticks_cover_range() {
        let ticks = nice_ticks(0.3, 7.7, 5).unwrap();
        assert!(*ticks.first().unwrap() <= 0.3);
        assert!(*ticks.last().unwrap() >= 7.7);
    }

    #[test]
    fn nice_ticks_domain_error() {
        assert!(nice_ticks(3.0, 3.0, 5).is_err());
    }

    #[test]
    fn quantiles_textbook_midpoint() {
        let q = quantiles(&[1.0, 2.0, 3.0, 4.0], &[0.5]).unwrap();
        assert_eq!(q, vec![2.5]);
    }

    #[test]
    fn quantiles_extremes_are_min_max() {
        let v = [3.0, -1.0, 7.5, 0.0];
        let q = quantiles(&v, &[0.0, 1.0]).unwrap();
        assert_eq!(q, vec![-1.0, 7.5]);
    }

    #[test]
    fn quantiles_match_sort_and_index_oracle() {
        let mut rng = crate::synth::SplitMix64::new(99);
        for _ in 0..50 {
            let n = 1 + (rng.next_u64() % 40) as usize;
            let values: Vec<f64> = (0..n)
                .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 100.0 - 50.0)
                .collect();
            let qs = [0.0, 0.1, 0.33, 0.5, 0.9, 1.0];
            let got = quantiles(&values, &qs).unwrap();
            // Naive oracle.
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (qi, &q) in qs.iter().enumerate() {
                let pos = q * (n - 1) as f64;
                let i = pos.floor() as usize;
                let f = pos - i as f64;
                let want = if i + 1 < n {
                    sorted[i] * (1.0 - f) + sorted[i + 1] * f
                } else {
                    sorted[n - 1]
                };
                assert!((got[qi] - want).abs() < 1e-12);
            }
            // Monotone non-decreasing output.
            for w in got.windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn fmt_num_shortest_round_trip() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(10.0), "10");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-2.25), "-2.25");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(123456789.0), "123457000");
        assert_eq!(fmt_num(1.23456789e12), "1.23457e12");
    }
}
