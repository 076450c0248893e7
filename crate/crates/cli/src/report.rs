use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "cavmem";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How close a computed value has to be to its published counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
    /// Within this factor either way.
    Factor(f64),
}

impl Tolerance {
    pub fn accepts(self, computed: f64, reference: f64) -> bool {
        match self {
            Tolerance::Absolute(t) => (computed - reference).abs() <= t,
            Tolerance::Relative(t) => (computed - reference).abs() <= t * reference.abs(),
            Tolerance::Factor(k) => {
                computed > 0.0 && reference > 0.0 && computed <= k * reference && reference <= k * computed
            }
        }
    }

    fn describe(self) -> String {
        match self {
            Tolerance::Absolute(t) => format!("±{t}"),
            Tolerance::Relative(t) => format!("±{}%", t * 100.0),
            Tolerance::Factor(k) => format!("×{k}"),
        }
    }
}

/// One line of the computed-versus-published table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproRow {
    pub quantity: String,
    pub computed: f64,
    pub paper: Option<f64>,
    pub tolerance: Option<Tolerance>,
    /// `None` for rows that are reported without a pass criterion.
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl ReproRow {
    pub fn compare(quantity: impl Into<String>, computed: f64, paper: f64, tolerance: Tolerance) -> Self {
        Self {
            quantity: quantity.into(),
            computed,
            paper: Some(paper),
            tolerance: Some(tolerance),
            pass: Some(tolerance.accepts(computed, paper)),
            note: String::new(),
        }
    }

    pub fn info(quantity: impl Into<String>, computed: f64, paper: Option<f64>) -> Self {
        Self {
            quantity: quantity.into(),
            computed,
            paper,
            tolerance: None,
            pass: None,
            note: String::new(),
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Data files written next to the report, relative to the output directory.
    pub files: Vec<String>,
    pub outputs: serde_json::Value,
    pub reproduction: Vec<ReproRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Plain-text summary for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {}  {}  config {}  seed {}",
            self.tool,
            self.version,
            self.command,
            &self.config_hash[..12],
            self.seed
        );
        if !self.reproduction.is_empty() {
            let _ = writeln!(s, "{:<44} {:>14} {:>10} {:>10}  result", "quantity", "computed", "paper", "tolerance");
            for r in &self.reproduction {
                let paper = r.paper.map_or_else(|| "-".to_string(), short);
                let tol = r.tolerance.map_or_else(|| "-".to_string(), Tolerance::describe);
                let pass = match r.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "info",
                };
                let _ = writeln!(s, "{:<44} {:>14.6} {:>10} {:>10}  {pass}", r.quantity, r.computed, paper, tol);
                if !r.note.is_empty() {
                    let _ = writeln!(s, "    {}", r.note);
                }
            }
        }
        for f in &self.files {
            let _ = writeln!(s, "wrote {f}");
        }
        if let Some(why) = &self.failure {
            let _ = writeln!(s, "failed: {why}");
        }
        s
    }
}

/// At most six decimals, trailing zeros dropped.
fn short(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    use std::io::Write;
    let io = |e: std::io::Error| CliError::Compute(format!("writing {name}: {e}"));
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
    Ok(())
}
