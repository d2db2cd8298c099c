//! Trace CSV files and SVG convergence plots.
//!
//! Both formats are written byte-reproducibly: floats in CSV use the shortest
//! decimal that round-trips, and plot coordinates are printed with two decimals.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use cubicqn::solvers::{IterationRecord, SolverTrace};

/// Floor applied to gaps before taking logarithms.
pub const GAP_FLOOR: f64 = 1e-16;

pub const TRACE_HEADER: [&str; 9] =
    ["t", "f", "gnorm", "delta", "inner_repeats", "step_norm", "grad_evals", "hvp_equiv", "wall_ns"];

/// Shortest decimal string that parses back to `v`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_trace_csv<W: Write>(records: &[IterationRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            fmt_float(r.f),
            fmt_float(r.gnorm),
            fmt_float(r.delta),
            r.inner_repeats.to_string(),
            fmt_float(r.step_norm),
            r.grad_evals.to_string(),
            r.hvp_equiv.to_string(),
            r.wall_ns.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace_csv(trace: &SolverTrace, path: &Path) -> csv::Result<()> {
    write_trace_csv(&trace.records, std::fs::File::create(path)?)
}

/// Reads a file written by [`write_trace_csv`].
pub fn read_trace_csv<R: io::Read>(input: R) -> csv::Result<Vec<IterationRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| -> csv::Result<f64> {
            field(i).parse().map_err(|e| csv::Error::from(io::Error::new(io::ErrorKind::InvalidData, e)))
        };
        let int = |i: usize| -> csv::Result<u64> {
            field(i).parse().map_err(|e| csv::Error::from(io::Error::new(io::ErrorKind::InvalidData, e)))
        };
        out.push(IterationRecord {
            t: int(0)? as usize,
            f: num(1)?,
            gnorm: num(2)?,
            delta: num(3)?,
            inner_repeats: int(4)? as usize,
            step_norm: num(5)?,
            grad_evals: int(6)?,
            hvp_equiv: int(7)?,
            wall_ns: int(8)?,
        });
    }
    Ok(out)
}

/// Horizontal axis of a convergence plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Iteration,
    HvpEquivalent,
}

impl XAxis {
    fn label(self) -> &'static str {
        match self {
            XAxis::Iteration => "iteration",
            XAxis::HvpEquivalent => "gradient / HVP-equivalent evaluations",
        }
    }

    fn value(self, r: &IterationRecord) -> f64 {
        match self {
            XAxis::Iteration => r.t as f64,
            XAxis::HvpEquivalent => (r.hvp_equiv + r.grad_evals) as f64,
        }
    }
}

/// A named trace to plot against the optimal-value proxy `f_star`.
pub struct PlotSeries<'a> {
    pub name: &'a str,
    pub records: &'a [IterationRecord],
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Log-scale plot of `max(f − f_star, GAP_FLOOR)`: one polyline per series
/// and a legend, as a standalone SVG 1.1 document.
pub fn render_plot_svg(series: &[PlotSeries<'_>], f_star: f64, axis: XAxis) -> String {
    let log_gap = |r: &IterationRecord| (r.f - f_star).max(GAP_FLOOR).log10();
    let points = || series.iter().flat_map(|s| s.records.iter());
    let x_max = points().map(|r| axis.value(r)).fold(0.0, f64::max).max(1.0);
    let y_lo = points().map(log_gap).fold(f64::INFINITY, f64::min);
    let y_hi = points().map(log_gap).fold(f64::NEG_INFINITY, f64::max);
    let (y_lo, y_hi) = if y_lo.is_finite() { (y_lo.floor(), y_hi.ceil().max(y_lo.floor() + 1.0)) } else { (-1.0, 0.0) };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_max * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#);

    let decades = (y_hi - y_lo) as i64;
    let step = (decades / 8).max(1);
    let mut k = y_lo as i64;
    while k <= y_hi as i64 {
        let y = sy(k as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">1e{k}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
        k += step;
    }
    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let x = sx(xv);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            xv.round()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        axis.label()
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {:.2})">gap proxy</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            ser.records.iter().map(|r| format!("{:.2},{:.2}", sx(axis.value(r)), sy(log_gap(r)))).collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot_svg(series: &[PlotSeries<'_>], f_star: f64, axis: XAxis, path: &Path) -> io::Result<()> {
    std::fs::write(path, render_plot_svg(series, f_star, axis))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, f: f64) -> IterationRecord {
        IterationRecord {
            t,
            f,
            gnorm: 0.5,
            delta: 1e-8,
            inner_repeats: 1,
            step_norm: 0.1,
            grad_evals: t as u64 + 1,
            hvp_equiv: 3 * t as u64,
            wall_ns: 0,
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        write_trace_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,f,gnorm,delta,inner_repeats,step_norm,grad_evals,hvp_equiv,wall_ns\n"
        );
    }

    #[test]
    fn record_round_trips() {
        let r = IterationRecord { f: 0.1 + 0.2, gnorm: 1e-300, delta: 2.5e17, ..rec(4, 0.0) };
        let mut buf = Vec::new();
        write_trace_csv(&[r], &mut buf).unwrap();
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), vec![r]);
    }

    #[test]
    fn single_series_plot() {
        let records = [rec(0, 1.0), rec(1, 0.1), rec(2, 0.0)];
        let svg = render_plot_svg(&[PlotSeries { name: "a<b", records: &records }], 0.0, XAxis::Iteration);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("1e-16"));
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // The zero gap sits on the floor, i.e. the bottom edge of the plot.
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert!(poly.contains(&format!(",{:.2}\"", HEIGHT - BOTTOM)));
    }
}
