//! Task payloads and their CSV, JSON and SVG renderings.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }
}

/// 17 significant digits; enough to round-trip any double.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// A numeric check with its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `<`, `<=`, `>`, `>=` or `in`.
    pub relation: String,
    pub threshold: Vec<f64>,
    pub pass: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, relation: "<".into(), threshold: vec![threshold], pass: value < threshold }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, relation: ">".into(), threshold: vec![threshold], pass: value > threshold }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check { name: name.into(), value, relation: "in".into(), threshold: vec![lo, hi], pass: lo <= value && value <= hi }
    }
}

/// A grid point that failed; the rest of the task continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub index: usize,
    pub energy: Option<f64>,
    pub error: String,
}

/// Rows, fitted quantities and checks produced by one task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskOutput {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub quantities: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub errors: Vec<PointError>,
    /// Columns of the primary curve.
    pub plot: Option<(String, String)>,
    /// Rows are pre-rendered CSV lines held in a single text cell.
    pub raw_rows: bool,
}

impl TaskOutput {
    pub fn new(columns: &[&str]) -> Self {
        TaskOutput { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn set<T: Serialize>(&mut self, key: &str, value: T) {
        self.quantities.insert(key.into(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn plot(mut self, x: &str, y: &str) -> Self {
        self.plot = Some((x.into(), y.into()));
        self
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            if self.raw_rows {
                if let Some(Cell::Text(line)) = row.first() {
                    out.push_str(line);
                    out.push('\n');
                }
                continue;
            }
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Num(x) => format_f64(*x),
                    Cell::Bool(b) => b.to_string(),
                    Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Simple polyline of the primary curve, or None without a plot or
    /// without two finite points.
    pub fn to_svg(&self) -> Option<String> {
        if self.raw_rows {
            return None;
        }
        let (xc, yc) = self.plot.as_ref()?;
        let (xi, yi) = (self.column(xc)?, self.column(yc)?);
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| Some((r[xi].as_f64()?, r[yi].as_f64()?)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let (w, h, pad) = (640.0, 400.0, 40.0);
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let sx = if x1 > x0 { (w - 2.0 * pad) / (x1 - x0) } else { 0.0 };
        let sy = if y1 > y0 { (h - 2.0 * pad) / (y1 - y0) } else { 0.0 };
        let poly: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", pad + (x - x0) * sx, h - pad - (y - y0) * sy))
            .collect();
        Some(format!(
            concat!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
                "<rect x=\"{pad}\" y=\"{pad}\" width=\"{iw}\" height=\"{ih}\" fill=\"none\" stroke=\"#999\"/>\n",
                "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"{points}\"/>\n",
                "<text x=\"{pad}\" y=\"{by}\" font-size=\"12\">{xc}: [{x0}, {x1}]</text>\n",
                "<text x=\"{pad}\" y=\"{ty}\" font-size=\"12\">{yc}: [{y0}, {y1}]</text>\n",
                "</svg>\n"
            ),
            w = w,
            h = h,
            pad = pad,
            iw = w - 2.0 * pad,
            ih = h - 2.0 * pad,
            points = poly.join(" "),
            by = h - 10.0,
            ty = 20.0,
            xc = xc,
            yc = yc,
            x0 = format_f64(x0),
            x1 = format_f64(x1),
            y0 = format_f64(y0),
            y1 = format_f64(y1),
        ))
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
struct DigitsFormatter(PrettyFormatter<'static>);

impl Formatter for DigitsFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, DigitsFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializable");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_uses_seventeen_digits() {
        let s = to_json(&serde_json::json!({"x": 0.1}));
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_quotes_text() {
        let mut t = TaskOutput::new(&["a", "b"]);
        t.row(vec![1usize.into(), "x,y".into()]);
        assert_eq!(t.to_csv(), "a,b\n1,\"x,y\"\n");
    }
}
