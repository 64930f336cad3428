//! Text formats: field CSV, plain CSV tables and minimal SVG scatter plots.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Grid, Mask, ScalarField};

/// `# dim=<n> res=<r> mask=<ball|square>[ scale=<s>]`
pub fn field_header(grid: &Grid) -> String {
    let mut s = format!("# dim={} res={} mask={}", grid.dim(), grid.res(), grid.mask().name());
    if grid.scale() != 1.0 {
        let _ = write!(s, " scale={}", grid.scale());
    }
    s
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        v.to_string()
    }
}

/// Header line, then one row per grid line along the first axis.
pub fn write_field<W: Write>(field: &ScalarField, mut out: W) -> Result<()> {
    let grid = field.grid();
    writeln!(out, "{}", field_header(grid))?;
    for row in field.values().chunks(grid.res()) {
        let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn field_to_string(field: &ScalarField) -> String {
    let mut buf = Vec::new();
    write_field(field, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn parse_header(line: &str) -> Result<Grid> {
    let body = line.strip_prefix('#').ok_or_else(|| Error::Format("first line must start with `#`".into()))?;
    let (mut dim, mut res, mut mask, mut scale) = (None, None, None, 1.0);
    for token in body.split_whitespace() {
        let (key, value) =
            token.split_once('=').ok_or_else(|| Error::Format(format!("header token `{token}` is not key=value")))?;
        let bad = |_| Error::Format(format!("bad header value `{token}`"));
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(bad)?),
            "res" => res = Some(value.parse::<usize>().map_err(bad)?),
            "mask" => mask = Some(value.parse::<Mask>().map_err(|_| Error::Format(format!("bad mask `{value}`")))?),
            "scale" => scale = value.parse::<f64>().map_err(|_| Error::Format(format!("bad scale `{value}`")))?,
            _ => return Err(Error::Format(format!("unknown header key `{key}`"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header lacks `{k}`"));
    let grid = Grid::with_scale(
        dim.ok_or_else(|| missing("dim"))?,
        res.ok_or_else(|| missing("res"))?,
        mask.ok_or_else(|| missing("mask"))?,
        scale,
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    Ok(grid)
}

pub fn read_field<R: BufRead>(input: R) -> Result<ScalarField> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))??;
    let grid = parse_header(header.trim())?;
    let mut values = Vec::with_capacity(grid.len());
    for (row, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        for cell in line.split(',') {
            let cell = cell.trim();
            let v = if cell.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| Error::Format(format!("row {}: `{cell}` is not a number", row + 2)))?
            };
            values.push(v);
        }
    }
    if values.len() != grid.len() {
        return Err(Error::Format(format!("expected {} values, found {}", grid.len(), values.len())));
    }
    for (i, v) in values.iter().enumerate() {
        if grid.is_active(i) && v.is_infinite() {
            return Err(Error::Format(format!("infinite value at node {i}")));
        }
    }
    ScalarField::from_values(Arc::new(grid), values)
}

pub fn save_field(field: &ScalarField, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_field(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

/// A CSV table with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| format_value(v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Overlays drawn on top of a scatter plot, in data coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Overlay {
    /// The line `{p : p·normal = offset}`.
    Line {
        normal: [f64; 2],
        offset: f64,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScatterPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<[f64; 2]>,
    /// Points drawn in a second color.
    pub highlighted: Vec<[f64; 2]>,
    pub overlays: Vec<Overlay>,
}

const SIZE: f64 = 480.0;
const PAD: f64 = 48.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let k = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    k * mag
}

impl ScatterPlot {
    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut take = |p: [f64; 2]| {
            for a in 0..2 {
                if p[a].is_finite() {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
        };
        self.points.iter().chain(&self.highlighted).for_each(|&p| take(p));
        for o in &self.overlays {
            if let Overlay::Circle { center, radius } = o {
                take([center[0] - radius, center[1] - radius]);
                take([center[0] + radius, center[1] + radius]);
            }
        }
        for a in 0..2 {
            if !lo[a].is_finite() {
                lo[a] = -1.0;
                hi[a] = 1.0;
            }
        }
        // Square window so circles stay round.
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.1;
        let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        ([c[0] - span / 2.0, c[1] - span / 2.0], [c[0] + span / 2.0, c[1] + span / 2.0])
    }

    /// SVG 1.1 document.
    pub fn to_svg(&self) -> String {
        let (lo, hi) = self.bounds();
        let scale = (SIZE - 2.0 * PAD) / (hi[0] - lo[0]);
        let sx = |x: f64| PAD + (x - lo[0]) * scale;
        let sy = |y: f64| SIZE - PAD - (y - lo[1]) * scale;
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ =
            writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, SIZE / 2.0, escape(&self.title));
        // Frame and ticks.
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
            w = SIZE - 2.0 * PAD
        );
        let step = nice_step(hi[0] - lo[0]);
        for axis in 0..2 {
            let mut t = (lo[axis] / step).ceil() * step;
            while t <= hi[axis] + 1e-12 {
                let label = format!("{}", (t / step).round() * step);
                let label = label.trim_end_matches(".0").to_string();
                if axis == 0 {
                    let x = sx(t);
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="black"/>"#,
                        y0 = SIZE - PAD,
                        y1 = SIZE - PAD + 5.0
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{label}</text>"#,
                        SIZE - PAD + 17.0
                    );
                } else {
                    let y = sy(t);
                    let _ =
                        writeln!(s, r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{PAD}" y2="{y:.2}" stroke="black"/>"#, x0 = PAD - 5.0);
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{label}</text>"#,
                        PAD - 7.0,
                        y + 3.0
                    );
                }
                t += step;
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            SIZE / 2.0,
            SIZE - 8.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{c}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {c})">{}</text>"#,
            escape(&self.y_label),
            c = SIZE / 2.0
        );
        let _ = writeln!(s, r#"<g>"#);
        for &p in &self.points {
            if p[0].is_finite() && p[1].is_finite() {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="steelblue"/>"#, sx(p[0]), sy(p[1]));
            }
        }
        for &p in &self.highlighted {
            if p[0].is_finite() && p[1].is_finite() {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="crimson"/>"#, sx(p[0]), sy(p[1]));
            }
        }
        for o in &self.overlays {
            match *o {
                Overlay::Circle { center, radius } => {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="darkorange" stroke-width="1.5"/>"#,
                        sx(center[0]),
                        sy(center[1]),
                        radius * scale
                    );
                }
                Overlay::Line { normal, offset } => {
                    if let Some((a, b)) = clip_line(normal, offset, lo, hi) {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="darkorange" stroke-width="1.5"/>"#,
                            sx(a[0]),
                            sy(a[1]),
                            sx(b[0]),
                            sy(b[1])
                        );
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Segment of `{p·n = c}` inside the box, if any.
fn clip_line(n: [f64; 2], c: f64, lo: [f64; 2], hi: [f64; 2]) -> Option<([f64; 2], [f64; 2])> {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    if n[1].abs() > 1e-12 {
        for x in [lo[0], hi[0]] {
            let y = (c - n[0] * x) / n[1];
            if y >= lo[1] && y <= hi[1] {
                pts.push([x, y]);
            }
        }
    }
    if n[0].abs() > 1e-12 {
        for y in [lo[1], hi[1]] {
            let x = (c - n[1] * y) / n[0];
            if x >= lo[0] && x <= hi[0] {
                pts.push([x, y]);
            }
        }
    }
    if pts.len() < 2 {
        return None;
    }
    Some((pts[0], pts[pts.len() - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let grid = Arc::new(Grid::new(2, 9, Mask::Ball).unwrap());
        let f = ScalarField::from_fn(grid.clone(), |p| p[0] * 0.1 - p[1] / 3.0);
        let text = field_to_string(&f);
        assert!(text.starts_with("# dim=2 res=9 mask=ball\n"));
        assert_eq!(text.lines().count(), 10);
        assert!(text.lines().nth(1).unwrap().starts_with("nan,"));
        let back = read_field(text.as_bytes()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
        let g2 = Arc::new(Grid::with_scale(2, 9, Mask::Square, 2.0).unwrap());
        let text = field_to_string(&ScalarField::zeros(g2));
        assert!(text.starts_with("# dim=2 res=9 mask=square scale=2\n"));
        assert_eq!(read_field(text.as_bytes()).unwrap().grid().scale(), 2.0);
    }

    #[test]
    fn malformed_fields() {
        assert!(matches!(read_field("".as_bytes()), Err(Error::Format(_))));
        assert!(read_field("dim=2 res=9 mask=ball\n".as_bytes()).is_err());
        assert!(read_field("# dim=2 res=9 mask=ball\n1,2\n".as_bytes()).is_err());
        assert!(read_field("# dim=2 res=8 mask=ball\n".as_bytes()).is_err());
        let mut text = String::from("# dim=2 res=9 mask=square\n");
        for _ in 0..9 {
            text.push_str("1,2,3,4,5,6,7,8,x\n");
        }
        assert!(read_field(text.as_bytes()).is_err());
    }

    #[test]
    fn svg_is_deterministic_and_well_formed() {
        let plot = ScatterPlot {
            title: "cloud".into(),
            x_label: "p1".into(),
            y_label: "p2".into(),
            points: vec![[0.0, 0.0], [1.0, 0.5], [-0.5, 0.25]],
            highlighted: vec![],
            overlays: vec![
                Overlay::Line { normal: [1.0, 0.0], offset: 0.2 },
                Overlay::Circle { center: [0.0, 0.0], radius: 0.75 },
            ],
        };
        let a = plot.to_svg();
        assert_eq!(a, plot.to_svg());
        assert!(a.contains("<svg") && a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("fill=\"steelblue\"").count(), 3);
        assert!(a.contains("stroke=\"darkorange\""));
    }

    #[test]
    fn table_csv() {
        let mut t = Table::new(&["r", "osc"]);
        t.push_numbers(&[0.5, 1.0]);
        t.push_numbers(&[0.25, f64::NAN]);
        assert_eq!(t.to_csv(), "r,osc\n0.5,1\n0.25,nan\n");
    }
}
