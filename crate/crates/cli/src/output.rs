//! CSV tables, plot data and run manifests.

use sha2::{Digest, Sha256};
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // Debug is the shortest string that parses back to the same bits
            Cell::Float(v) => write!(f, "{v:?}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A header plus rows, written as RFC 4180 CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    /// Values of a numeric column; text cells yield NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[k] {
                    Cell::Int(v) => *v as f64,
                    Cell::Float(v) => *v,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }
}

pub fn write_csv_to<W: Write>(table: &Table, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::to_string))?;
    }
    w.flush()
}

pub fn write_csv(table: &Table, path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(table, io::BufWriter::new(file))
}

/// One x/y curve of plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(Cell, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, x_label: &str, y_label: &str) -> Self {
        Series {
            name: name.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            points: Vec::new(),
        }
    }
}

/// Plot data: `#` headers, then whitespace-separated `x y` lines per series,
/// blocks separated by two blank lines (gnuplot `index` friendly).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotData {
    pub title: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

pub fn write_plot_to<W: Write>(plot: &PlotData, mut out: W) -> io::Result<()> {
    writeln!(out, "# {}", plot.title)?;
    if plot.log_y {
        writeln!(out, "# hint: log-scale y")?;
    }
    for (k, s) in plot.series.iter().enumerate() {
        if k > 0 {
            writeln!(out)?;
            writeln!(out)?;
        }
        writeln!(out, "# series: {}", s.name)?;
        writeln!(out, "# {} {}", s.x_label, s.y_label)?;
        for (x, y) in &s.points {
            writeln!(out, "{x} {}", Cell::Float(*y))?;
        }
    }
    out.flush()
}

pub fn write_plot(plot: &PlotData, path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_plot_to(plot, io::BufWriter::new(file))
}

/// Parse plot data back into `(name, points)` blocks.
pub fn read_plot(text: &str) -> Vec<(String, Vec<(String, f64)>)> {
    let mut out: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    for line in text.lines() {
        if let Some(name) = line.strip_prefix("# series: ") {
            out.push((name.to_string(), Vec::new()));
        } else if !line.starts_with('#') && !line.trim().is_empty() {
            let mut it = line.split_whitespace();
            if let (Some(x), Some(y), Some(cur)) = (it.next(), it.next(), out.last_mut()) {
                cur.1.push((x.to_string(), y.parse().unwrap_or(f64::NAN)));
            }
        }
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

/// `<unix nanos>-<seed hash>-<pid>-<counter>`.
pub fn new_run_id(seed: u64) -> String {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let hash = sha256_hex(&seed.to_le_bytes());
    format!(
        "{nanos}-{}-{}-{}",
        &hash[..12],
        std::process::id(),
        RUN_COUNTER.fetch_add(1, Ordering::Relaxed)
    )
}

/// Everything needed to re-create a run's artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub config: Vec<(&'static str, String)>,
    /// `(file name, path, sha256)`.
    pub artifacts: Vec<(String, PathBuf, String)>,
}

impl RunManifest {
    pub fn new(run_id: String, command: &str, config: Vec<(&'static str, String)>) -> Self {
        RunManifest {
            run_id,
            command: command.to_string(),
            config,
            artifacts: Vec::new(),
        }
    }

    /// Record `path`, hashing its current contents.
    pub fn add_artifact(&mut self, path: &Path) -> io::Result<()> {
        let bytes = std::fs::read(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.artifacts
            .push((name, path.to_path_buf(), sha256_hex(&bytes)));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("run_id = {}\n", self.run_id));
        s.push_str(&format!("command = {}\n", self.command));
        for (k, v) in &self.config {
            s.push_str(&format!("config.{k} = {v}\n"));
        }
        for (name, path, hash) in &self.artifacts {
            s.push_str(&format!("artifact.{name}.path = {}\n", path.display()));
            s.push_str(&format!("artifact.{name}.sha256 = {hash}\n"));
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// `key = value` lines of a rendered manifest.
pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_cells() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 5e-324, 123456789.125, -0.0, 1e21] {
            let s = Cell::Float(v).to_string();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn csv_quotes_text() {
        let mut t = Table::new(["name", "v"]);
        t.push(vec![Cell::from("a,b"), Cell::from(1.5)]);
        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "name,v\n\"a,b\",1.5\n");
    }

    #[test]
    fn plot_blocks_parse_back() {
        let mut a = Series::new("a", "iter", "y");
        a.points = vec![(Cell::Int(0), 0.5), (Cell::Int(1), 0.25)];
        let mut b = Series::new("b", "iter", "y");
        b.points = vec![(Cell::Int(0), 1e-20)];
        let plot = PlotData {
            title: "t".into(),
            log_y: true,
            series: vec![a, b],
        };
        let mut buf = Vec::new();
        write_plot_to(&plot, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("log-scale"));
        let back = read_plot(&text);
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].1[1], ("1".to_string(), 0.25));
        assert_eq!(back[1].1[0].1, 1e-20);
    }

    #[test]
    fn run_ids_differ() {
        assert_ne!(new_run_id(1), new_run_id(1));
    }

    #[test]
    fn hashes() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
