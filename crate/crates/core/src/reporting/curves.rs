//! Dice-versus-annotated-slices curves as CSV and SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::summary::{csv_field, load_groups};
use super::{file_stem, io_err, ReportError};
use crate::metrics::{aggregate_curve, Convention, CurvePoint};

const CONVENTIONS: [Convention; 2] = [Convention::WithRemoval, Convention::WithoutRemoval];

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub dataset: String,
    pub backend: String,
    pub organ: String,
    pub with_removal: Vec<CurvePoint>,
    pub without_removal: Vec<CurvePoint>,
}

impl CurveSet {
    pub fn points(&self, convention: Convention) -> &[CurvePoint] {
        match convention {
            Convention::WithRemoval => &self.with_removal,
            Convention::WithoutRemoval => &self.without_removal,
        }
    }

    /// Columns: backend, organ, convention, k, mean, ci_low, ci_high, n.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("backend,organ,convention,k,mean,ci_low,ci_high,n\n");
        for conv in CONVENTIONS {
            for p in self.points(conv) {
                writeln!(
                    out,
                    "{},{},{},{},{:.6},{:.6},{:.6},{}",
                    csv_field(&self.backend),
                    csv_field(&self.organ),
                    conv.as_str(),
                    p.annotated_slices,
                    p.mean,
                    p.ci_low,
                    p.ci_high,
                    p.n
                )
                .unwrap();
            }
        }
        out
    }
}

pub fn compute_curves(dirs: &[PathBuf]) -> Result<Vec<CurveSet>, ReportError> {
    let mut sets = Vec::new();
    for ((dataset, backend, organ), group) in load_groups(dirs)? {
        if group.results.is_empty() {
            continue;
        }
        let series: Vec<_> = group.results.iter().map(|r| r.dice_series()).collect();
        let curve = |c| aggregate_curve(&series, c, group.passes).expect("non-empty series");
        sets.push(CurveSet {
            with_removal: curve(Convention::WithRemoval),
            without_removal: curve(Convention::WithoutRemoval),
            dataset,
            backend,
            organ,
        });
    }
    if sets.is_empty() {
        return Err(ReportError::NoRecords);
    }
    Ok(sets)
}

/// Write `<dataset>__<backend>__<organ>.csv` and `.svg` for every group;
/// returns the written paths.
pub fn cmd_curves(dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let sets = compute_curves(dirs)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for set in &sets {
        let stem = format!(
            "{}__{}__{}",
            file_stem(&set.dataset),
            file_stem(&set.backend),
            file_stem(&set.organ)
        );
        let csv = out_dir.join(format!("{}.csv", stem));
        fs::write(&csv, set.to_csv()).map_err(io_err(&csv))?;
        let svg = out_dir.join(format!("{}.svg", stem));
        fs::write(&svg, render_svg(set)).map_err(io_err(&svg))?;
        written.push(csv);
        written.push(svg);
    }
    Ok(written)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Mean line with a shaded 95% band for each convention. Uses only lines,
/// polygons and text.
pub fn render_svg(set: &CurveSet) -> String {
    let passes = set.with_removal.len().max(1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |k: usize| {
        if passes == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + (k - 1) as f64 / (passes - 1) as f64 * plot_w
        }
    };
    let y = |v: f64| TOP + (1.0 - v.clamp(0.0, 1.0)) * plot_h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{} / {} ({})</text>"#,
        LEFT + plot_w / 2.0,
        escape(&set.dataset),
        escape(&set.organ),
        escape(&set.backend)
    )
    .unwrap();

    for i in 0..=5 {
        let v = i as f64 / 5.0;
        writeln!(
            s,
            r##"<line x1="{l:.1}" y1="{y:.1}" x2="{r:.1}" y2="{y:.1}" stroke="#dddddd"/>"##,
            l = LEFT,
            r = LEFT + plot_w,
            y = y(v)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.1}</text>"#,
            LEFT - 8.0,
            y(v) + 4.0,
            v
        )
        .unwrap();
    }
    for k in 1..=passes {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x(k),
            TOP + plot_h + 18.0,
            k
        )
        .unwrap();
    }
    writeln!(
        s,
        r##"<line x1="{l:.1}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}" stroke="#000000"/>"##,
        l = LEFT,
        r = LEFT + plot_w,
        b = TOP + plot_h
    )
    .unwrap();
    writeln!(
        s,
        r##"<line x1="{l:.1}" y1="{t:.1}" x2="{l:.1}" y2="{b:.1}" stroke="#000000"/>"##,
        l = LEFT,
        t = TOP,
        b = TOP + plot_h
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">annotated slices</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">dice</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, (conv, color, label)) in [
        (Convention::WithRemoval, "#1f77b4", "with background removal"),
        (Convention::WithoutRemoval, "#d62728", "without background removal"),
    ]
    .into_iter()
    .enumerate()
    {
        let pts = set.points(conv);
        let mut band: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.1},{:.1}", x(p.annotated_slices), y(p.ci_high)))
            .collect();
        band.extend(
            pts.iter()
                .rev()
                .map(|p| format!("{:.1},{:.1}", x(p.annotated_slices), y(p.ci_low))),
        );
        writeln!(
            s,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" "),
            color
        )
        .unwrap();
        for w in pts.windows(2) {
            writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"/>"#,
                x(w[0].annotated_slices),
                y(w[0].mean),
                x(w[1].annotated_slices),
                y(w[1].mean),
                color
            )
            .unwrap();
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/>"#,
            lx,
            lx + 18.0,
            color,
            ly = ly
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 24.0, ly + 4.0, label).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
