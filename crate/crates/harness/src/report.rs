use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::svg::Plot;

/// A CSV cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:e}"),
            Cell::Text(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equals,
}

impl Relation {
    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::Below => value < bound,
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Equals => value == bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Equals => "==",
        }
    }
}

/// A pass/fail judgement tied to an acceptance criterion (C1..C12) or an
/// auxiliary invariant (X-prefixed).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub criterion: String,
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {}: {:e} {} {:e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.value,
            self.relation.symbol(),
            self.bound
        )
    }
}

/// A fitted or measured constant with its uncertainty band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constant {
    pub name: String,
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<Cell>>,
    pub constants: Vec<Constant>,
    pub checks: Vec<Check>,
    /// Free-form notes echoed into the summary (calibration choices, timings).
    pub notes: Vec<String>,
    #[serde(skip)]
    pub plots: Vec<Plot>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64, config_hash: String, columns: &[&str]) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            seed,
            config_hash,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            constants: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len(), "row width");
        self.rows.push(cells);
    }

    pub fn check(
        &mut self,
        criterion: &str,
        name: &str,
        value: f64,
        relation: Relation,
        bound: f64,
    ) -> bool {
        let pass = relation.holds(value, bound);
        self.checks.push(Check {
            criterion: criterion.to_string(),
            name: name.to_string(),
            value,
            relation,
            bound,
            pass,
        });
        pass
    }

    pub fn constant(&mut self, name: &str, value: f64, uncertainty: f64) {
        self.constants.push(Constant {
            name: name.to_string(),
            value,
            uncertainty,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Checks citing the given criterion.
    pub fn checks_for<'a>(&'a self, criterion: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.criterion == criterion)
    }

    /// Per-trial table: column names, then `# config-hash <hex> seed <seed>`, then rows.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = w;
        let mut header = csv::Writer::from_writer(Vec::new());
        header.write_record(&self.columns)?;
        let header = header.into_inner().map_err(|e| e.into_error())?;
        w.write_all(&header)?;
        writeln!(w, "# config-hash {} seed {}", self.config_hash, self.seed)?;
        let mut body = csv::Writer::from_writer(w);
        for row in &self.rows {
            body.write_record(row.iter().map(|c| c.to_string()))?;
        }
        body.flush()?;
        Ok(())
    }

    /// Writes `<name>.csv`, `<name>-summary.json` and, when asked, one SVG per plot.
    pub fn write_outputs(&self, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        written.push(csv_path);
        let summary = dir.join(format!("{}-summary.json", self.experiment));
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(&summary, text + "\n")?;
        written.push(summary);
        if plots {
            for (i, plot) in self.plots.iter().enumerate() {
                let path = dir.join(format!("{}-{}.svg", self.experiment, i + 1));
                std::fs::write(&path, plot.render())?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
