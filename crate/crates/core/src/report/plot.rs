//! SVG rendering of report CSVs. Output depends only on the CSV contents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::format::fmt_g6;
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
const HIST_BINS: usize = 20;

#[derive(Debug, Default)]
pub struct PlotOutcome {
    pub written: Vec<PathBuf>,
    pub notices: Vec<String>,
}

type Series = (String, Vec<(f64, f64)>);

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    })?;
    Ok(r.records().collect::<std::result::Result<Vec<_>, _>>()?)
}

fn num(s: &str) -> Option<f64> {
    s.parse().ok().filter(|x: &f64| x.is_finite())
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
        for (x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y1) = (0.0, 1.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        Frame { x: (x0, x1), y: (y0, y1) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_open(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(s, r#"<path d="M{l} {t}V{b}H{r}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{l}" y="{}" text-anchor="middle">{}</text>"#, b + 15.0, fmt_g6(f.x.0));
    let _ = writeln!(s, r#"<text x="{r}" y="{}" text-anchor="middle">{}</text>"#, b + 15.0, fmt_g6(f.x.1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, l - 4.0, b, fmt_g6(f.y.0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, l - 4.0, t + 4.0, fmt_g6(f.y.1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    s
}

fn polyline_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], step: bool) -> String {
    let f = Frame::fit(series.iter().flat_map(|(_, pts)| pts.iter().copied()));
    let mut s = svg_open(title, xlabel, ylabel, &f);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut prev_y = None;
        for &(x, y) in pts {
            if let (true, Some(py)) = (step, prev_y) {
                let _ = write!(d, "{:.2},{:.2} ", f.px(x), f.py(py));
            }
            let _ = write!(d, "{:.2},{:.2} ", f.px(x), f.py(y));
            prev_y = Some(y);
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            d.trim_end(),
            escape(name)
        );
        if series.len() <= PALETTE.len() {
            let y = MARGIN + 14.0 * i as f64;
            let _ = writeln!(s, r#"<text x="{}" y="{y}" fill="{color}">{}</text>"#, W - MARGIN - 150.0, escape(name));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn histogram_chart(title: &str, xlabel: &str, values: &[f64]) -> String {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / HIST_BINS as f64 } else { 1.0 };
    let mut counts = [0u64; HIST_BINS];
    for v in values {
        counts[(((v - lo) / width) as usize).min(HIST_BINS - 1)] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&1) as f64;
    let f = Frame { x: (lo, lo + width * HIST_BINS as f64), y: (0.0, top.max(1.0)) };
    let mut s = svg_open(title, xlabel, "subnets", &f);
    for (i, c) in counts.iter().enumerate() {
        let x0 = f.px(lo + width * i as f64);
        let x1 = f.px(lo + width * (i + 1) as f64);
        let y = f.py(*c as f64);
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="white"/>"#,
            x1 - x0,
            f.py(0.0) - y,
            PALETTE[0]
        );
    }
    s.push_str("</svg>\n");
    s
}

fn ecdf_series(dir: &Path) -> Result<Vec<Series>> {
    let ecdf_dir = dir.join("ecdf");
    if !ecdf_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&ecdf_dir)
        .map_err(|e| Error::io(&ecdf_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |x| x == "csv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let pts: Vec<(f64, f64)> = read_rows(&f)?
            .iter()
            .filter_map(|r| Some((num(r.get(0)?)?, num(r.get(1)?)?)))
            .collect();
        if !pts.is_empty() {
            let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.push((name, pts));
        }
    }
    Ok(out)
}

fn churn_series(path: &Path) -> Result<Vec<Series>> {
    let mut by_isp: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in read_rows(path)? {
        if let (Some(isp), Some(d), Some(share)) = (r.get(0), r.get(1).and_then(num), r.get(2).and_then(num)) {
            by_isp.entry(isp.to_string()).or_default().push((d, share));
        }
    }
    Ok(by_isp.into_iter().collect())
}

/// Renders `plots/ecdf.svg`, `plots/churn.svg` and `plots/movement.svg` for
/// whichever inputs exist and hold data. Missing or empty inputs produce a
/// notice instead of a file.
pub fn plot(report_dir: &Path) -> Result<PlotOutcome> {
    if !report_dir.is_dir() {
        return Err(Error::MissingFile(report_dir.to_path_buf()));
    }
    let mut charts: Vec<(&str, Option<String>)> = Vec::new();

    let ecdf = ecdf_series(report_dir)?;
    charts.push((
        "ecdf",
        (!ecdf.is_empty()).then(|| polyline_chart("Geolocation error ECDF", "error (m)", "share", &ecdf, true)),
    ));

    let churn_path = report_dir.join("churn.csv");
    let churn = if churn_path.is_file() { churn_series(&churn_path)? } else { Vec::new() };
    charts.push((
        "churn",
        (!churn.is_empty()).then(|| polyline_chart("Address churn", "nights apart", "same-address share", &churn, false)),
    ));

    let move_path = report_dir.join("movement.csv");
    let moves: Vec<f64> = if move_path.is_file() {
        read_rows(&move_path)?.iter().filter_map(|r| r.get(1).and_then(num)).collect()
    } else {
        Vec::new()
    };
    charts.push((
        "movement",
        (!moves.is_empty()).then(|| histogram_chart("Subnet medioid displacement", "distance (m)", &moves)),
    ));

    let mut outcome = PlotOutcome::default();
    let plots = report_dir.join("plots");
    for (name, svg) in charts {
        match svg {
            Some(svg) => {
                std::fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
                let path = plots.join(format!("{name}.svg"));
                std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
                outcome.written.push(path);
            }
            None => outcome.notices.push(format!("skipped {name}: no data")),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let o = plot(dir.path()).unwrap();
        assert!(o.written.is_empty());
        assert_eq!(o.notices.len(), 3);
        assert!(!dir.path().join("plots").exists());
    }

    #[test]
    fn single_ecdf_gives_one_monotone_polyline() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("ecdf")).unwrap();
        std::fs::write(dir.path().join("ecdf/all.csv"), "error_m,share\n0,0.25\n10,0.5\n30,1\n").unwrap();
        let o = plot(dir.path()).unwrap();
        assert_eq!(o.written.len(), 1);
        let svg = std::fs::read_to_string(&o.written[0]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let coords: Vec<(f64, f64)> = pts
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        // screen y grows downward, so a non-decreasing share means non-increasing y
        assert!(coords.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 <= w[0].1));
    }

    #[test]
    fn rerender_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("churn.csv"), "isp,d,share,n_pairs\nA,0,1,5\nA,1,0.8,5\nB,0,1,3\n").unwrap();
        std::fs::write(dir.path().join("movement.csv"), "subnet,distance_m\n1.2.3.0/24,12.5\n1.2.4.0/24,80\n").unwrap();
        let a = plot(dir.path()).unwrap();
        let first: Vec<Vec<u8>> = a.written.iter().map(|p| std::fs::read(p).unwrap()).collect();
        let b = plot(dir.path()).unwrap();
        let second: Vec<Vec<u8>> = b.written.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(a.written.len(), 2);
        assert_eq!(first, second);
    }
}
