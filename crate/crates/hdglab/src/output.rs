//! CSV tables and SVG convergence plots.

use std::fmt::Write as _;
use std::path::Path;

use hdglab_core::ErrorReport;

/// `1.9487E-01`: five significant digits, signed two-digit exponent.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4E}");
    let (mantissa, exp) = s.split_once('E').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}E{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

pub fn header(report: &ErrorReport) -> Vec<String> {
    let mut h = vec!["n".to_string(), "h_over_sqrt2".to_string()];
    for q in &report.quantities {
        h.push(format!("{}_error", q.name()));
        h.push(format!("{}_rate", q.name()));
    }
    h
}

/// Table rows exactly as written to the CSV.
pub fn rows(report: &ErrorReport) -> Vec<Vec<String>> {
    let rates: Vec<Vec<Option<f64>>> = report.quantities.iter().map(|&q| report.rates(q)).collect();
    report
        .levels
        .iter()
        .enumerate()
        .map(|(i, level)| {
            let mut row = vec![level.n.to_string(), sci(level.h_over_sqrt2)];
            for (c, r) in rates.iter().enumerate() {
                match &level.failure {
                    Some(code) => row.push(format!("FAILED:{code}")),
                    None => row.push(sci(level.errors[c])),
                }
                row.push(r[i].map_or_else(|| "-".to_string(), |v| format!("{v:.2}")));
            }
            row
        })
        .collect()
}

pub fn to_csv_string(report: &ErrorReport) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(report))?;
    for row in rows(report) {
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn write_csv(path: &Path, report: &ErrorReport) -> anyhow::Result<()> {
    std::fs::write(path, to_csv_string(report)?)?;
    Ok(())
}

/// Parsed CSV: header and string cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let c = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[c].as_str()).collect())
    }

    pub fn to_csv_string(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Log-log error-vs-h plot with guide lines of slope `k+1` and `k+2`.
pub fn svg_plot(report: &ErrorReport, k: usize, title: &str) -> String {
    let (w, h, pad) = (640.0, 480.0, 60.0);
    let mut pts: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for (qi, &q) in report.quantities.iter().enumerate() {
        let series: Vec<(f64, f64)> = (0..report.levels.len())
            .filter_map(|i| {
                let e = report.error(q, i)?;
                (e > 0.0).then(|| (report.levels[i].h_over_sqrt2.log10(), e.log10()))
            })
            .collect();
        pts.push((qi, series));
    }
    let all: Vec<(f64, f64)> = pts.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    if all.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let fold = |f: fn(f64, f64) -> f64, init, sel: fn(&(f64, f64)) -> f64| all.iter().map(sel).fold(init, f);
    let (x0, x1) = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, f64::NEG_INFINITY, |p| p.0));
    let (y0, y1) = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, f64::NEG_INFINITY, |p| p.1));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 0.5, x1 + 0.5) };
    let (y0, y1) = (y0.floor(), if y1.ceil() > y0.floor() { y1.ceil() } else { y0.floor() + 1.0 });
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let _ = writeln!(
        svg,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for d in (y0 as i32)..=(y1 as i32) {
        let y = sy(d as f64);
        let _ = writeln!(svg, r##"<line x1="{pad}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##, w - pad);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{d}</text>"#, pad - 4.0, y + 4.0);
    }
    for level in &report.levels {
        let x = sx(level.h_over_sqrt2.log10());
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1/{}</text>"#, h - pad + 16.0, level.n);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">h/√2</text>"#, w / 2.0, h - 12.0);

    // guides start at the coarsest point of the first series
    if let Some((_, first)) = pts.iter().find(|(_, s)| !s.is_empty()) {
        let (gx, gy) = first[0];
        for (slope, dash) in [(k + 1, "6,4"), (k + 2, "2,3")] {
            let ey = gy + slope as f64 * (x0 - gx);
            let _ = writeln!(
                svg,
                r##"<polyline points="{:.1},{:.1} {:.1},{:.1}" fill="none" stroke="#555" stroke-dasharray="{dash}"/>"##,
                sx(gx),
                sy(gy),
                sx(x0),
                sy(ey.max(y0))
            );
            let _ = writeln!(svg, r##"<text x="{:.1}" y="{:.1}" fill="#555">slope {slope}</text>"##, sx(x0) + 4.0, sy(ey.max(y0)) - 4.0);
        }
    }
    for (qi, series) in &pts {
        let color = COLORS[qi % COLORS.len()];
        let line: Vec<String> = series.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        for &(x, y) in series {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            pad + 8.0,
            pad + 16.0 + 14.0 * *qi as f64,
            report.quantities[*qi].name()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use hdglab_core::Quantity;

    fn report() -> ErrorReport {
        let mut r = ErrorReport::new(vec![Quantity::QLinf, Quantity::ULinf]);
        r.push_level(16, vec![2.1856e-2, 8.356e-3]).unwrap();
        r.push_level(32, vec![6.3683e-3, 2.09e-3]).unwrap();
        r.push_failure(64, "iterative-failure");
        r
    }

    #[test]
    fn scientific_format() {
        assert_eq!(sci(0.19487), "1.9487E-01");
        assert_eq!(sci(2.8425e-5), "2.8425E-05");
        assert_eq!(sci(123.0), "1.2300E+02");
        assert_eq!(sci(0.0), "0.0000E+00");
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let text = to_csv_string(&report()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "n,h_over_sqrt2,q_Linf_error,q_Linf_rate,u_Linf_error,u_Linf_rate");
        assert_eq!(lines.next().unwrap(), "16,6.2500E-02,2.1856E-02,-,8.3560E-03,-");
        assert_eq!(lines.next().unwrap(), "32,3.1250E-02,6.3683E-03,1.78,2.0900E-03,2.00");
        assert_eq!(lines.next().unwrap(), "64,1.5625E-02,FAILED:iterative-failure,-,FAILED:iterative-failure,-");
        let table = Table::parse(&text).unwrap();
        assert_eq!(table.to_csv_string().unwrap(), text);
        assert_eq!(table.column("q_Linf_rate").unwrap(), vec!["-", "1.78", "-"]);
    }

    #[test]
    fn svg_has_series_and_guides() {
        let svg = svg_plot(&report(), 1, "demo <k=1>");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("slope 2") && svg.contains("slope 3"));
        assert!(svg.contains("&lt;k=1&gt;"));
    }
}
