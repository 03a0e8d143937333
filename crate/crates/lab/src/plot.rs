//! Static SVG line plots for the CSV artifacts. The schema is recognised from
//! the header; nothing is written unless the plot could be built.

use std::fmt::Write as _;
use std::path::Path;

use crate::artifacts::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    EnergyDrift,
    Trajectory,
    Convergence,
}

impl Schema {
    const KNOWN: [(Schema, &'static str, &'static [&'static str]); 3] = [
        (Schema::Convergence, "hbar convergence", &["hbar", "scenario", "err_q", "err_p", "err_alpha"]),
        (Schema::Trajectory, "trajectory", &["t", "q_1", "p_1", "E", "E_hat"]),
        (Schema::EnergyDrift, "energy drift", &["t", "drift"]),
    ];

    pub fn detect(header: &[String]) -> Option<Schema> {
        Self::KNOWN
            .iter()
            .find(|(_, _, cols)| cols.iter().all(|c| header.iter().any(|h| h == c)))
            .map(|(s, _, _)| *s)
    }

    fn expected() -> String {
        Self::KNOWN
            .iter()
            .map(|(_, name, cols)| format!("{name} [{}]", cols.join(", ")))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("{0}: no data rows")]
    Empty(String),
    #[error("{name}: unrecognised columns [{found}]; expected one of: {expected}")]
    UnknownSchema {
        name: String,
        found: String,
        expected: String,
    },
    #[error("{name}: bad value '{value}' in column {column}")]
    BadValue {
        name: String,
        column: String,
        value: String,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    xlabel: String,
    log: bool,
    series: Vec<Series>,
}

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 720.0;
const PANEL_H: f64 = 300.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;

/// Read `csv`, render it and write `svg`. The output file is only created on
/// success.
pub fn plot_file(csv: &Path, svg: &Path) -> Result<Schema, PlotError> {
    let src = std::fs::read_to_string(csv)?;
    let name = csv.display().to_string();
    let (schema, text) = render(&src, &name)?;
    std::fs::write(svg, text)?;
    Ok(schema)
}

pub fn render(src: &str, name: &str) -> Result<(Schema, String), PlotError> {
    let table = Table::parse(src).ok_or_else(|| PlotError::Empty(name.to_string()))?;
    let schema = Schema::detect(&table.header).ok_or_else(|| PlotError::UnknownSchema {
        name: name.to_string(),
        found: table.header.join(", "),
        expected: Schema::expected(),
    })?;
    if table.rows.is_empty() {
        return Err(PlotError::Empty(name.to_string()));
    }
    let value = |row: &[String], col: usize| -> Result<f64, PlotError> {
        row[col].parse::<f64>().map_err(|_| PlotError::BadValue {
            name: name.to_string(),
            column: table.header[col].clone(),
            value: row[col].clone(),
        })
    };
    let column = |col: usize, xcol: usize| -> Result<Vec<(f64, f64)>, PlotError> {
        table.rows.iter().map(|r| Ok((value(r, xcol)?, value(r, col)?))).collect()
    };

    let panels = match schema {
        Schema::EnergyDrift => {
            let (t, d) = (table.column("t").unwrap(), table.column("drift").unwrap());
            vec![Panel {
                title: "relative energy drift".into(),
                xlabel: "t".into(),
                log: false,
                series: vec![Series {
                    label: "drift".into(),
                    points: column(d, t)?,
                }],
            }]
        }
        Schema::Trajectory => {
            let t = table.column("t").unwrap();
            let mut phase = Vec::new();
            for (i, h) in table.header.iter().enumerate() {
                if h.starts_with("q_") || h.starts_with("p_") {
                    phase.push(Series {
                        label: h.clone(),
                        points: column(i, t)?,
                    });
                }
            }
            let mut energy = Vec::new();
            for h in ["E", "E_hat", "alpha_norm"] {
                if let Some(i) = table.column(h) {
                    energy.push(Series {
                        label: h.into(),
                        points: column(i, t)?,
                    });
                }
            }
            vec![
                Panel {
                    title: "particle".into(),
                    xlabel: "t".into(),
                    log: false,
                    series: phase,
                },
                Panel {
                    title: "energies and field norm".into(),
                    xlabel: "t".into(),
                    log: false,
                    series: energy,
                },
            ]
        }
        Schema::Convergence => {
            let h = table.column("hbar").unwrap();
            let sc = table.column("scenario").unwrap();
            let mut scenarios: Vec<&str> = Vec::new();
            for r in &table.rows {
                if !scenarios.contains(&r[sc].as_str()) {
                    scenarios.push(&r[sc]);
                }
            }
            let mut series = Vec::new();
            for s in &scenarios {
                for m in ["err_q", "err_p", "err_alpha"] {
                    let c = table.column(m).unwrap();
                    let mut points = Vec::new();
                    for r in table.rows.iter().filter(|r| r[sc] == *s) {
                        let (x, y) = (value(r, h)?, value(r, c)?);
                        // zero errors have no place on a log axis
                        if x > 0.0 && y > 0.0 {
                            points.push((x, y));
                        }
                    }
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    series.push(Series {
                        label: format!("{s} {m}"),
                        points,
                    });
                }
            }
            vec![Panel {
                title: "error against the classical flow".into(),
                xlabel: "hbar".into(),
                log: true,
                series,
            }]
        }
    };
    Ok((schema, svg(&panels)))
}

fn bounds(p: &Panel) -> (f64, f64, f64, f64) {
    let tr = |v: f64| if p.log { v.log10() } else { v };
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in p.series.iter().flat_map(|s| s.points.iter()) {
        let (x, y) = (tr(*x), tr(*y));
        if x.is_finite() && y.is_finite() {
            b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
        }
    }
    if !b.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        if hi - lo > 0.0 {
            (lo, hi)
        } else {
            let d = lo.abs().max(1.0) * 0.5;
            (lo - d, hi + d)
        }
    };
    let (x0, x1) = pad(b.0, b.1);
    let (y0, y1) = pad(b.2, b.3);
    (x0, x1, y0, y1)
}

fn label(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else {
        format!("{v:.3e}")
    }
}

fn svg(panels: &[Panel]) -> String {
    let height = PANEL_H * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (n, p) in panels.iter().enumerate() {
        let top = n as f64 * PANEL_H + TOP;
        let (w, h) = (WIDTH - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
        let (x0, x1, y0, y1) = bounds(p);
        let tr = |v: f64| if p.log { v.log10() } else { v };
        let px = |x: f64| LEFT + (tr(x) - x0) / (x1 - x0) * w;
        let py = |y: f64| top + h - (tr(y) - y0) / (y1 - y0) * h;
        let _ = writeln!(s, r#"<text x="{LEFT}" y="{}" font-size="14">{}</text>"#, top - 12.0, p.title);
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
        );
        for (v, anchor, x) in [(x0, "start", LEFT), (x1, "end", LEFT + w)] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" text-anchor="{anchor}">{}</text>"#,
                top + h + 16.0,
                label(v, p.log)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + w / 2.0,
            top + h + 32.0,
            p.xlabel
        );
        for (v, y) in [(y0, top + h), (y1, top + 10.0)] {
            let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, LEFT - 6.0, label(v, p.log));
        }
        for (i, series) in p.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| tr(*x).is_finite() && tr(*y).is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            if !pts.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                );
            }
            let ly = top + 14.0 + 16.0 * i as f64;
            let lx = LEFT + w + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/><text x="{}" y="{ly}">{}</text>"#,
                ly - 4.0,
                lx + 18.0,
                ly - 4.0,
                lx + 22.0,
                series.label
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
