//! Machine-readable reports.

use algebroid_core::classes::FormDump;
use algebroid_core::CheckReport;
use serde::Serialize;

pub const TOOL: &str = "algebroid-cc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct NamedDump {
    pub name: String,
    pub class: String,
    #[serde(flatten)]
    pub dump: FormDump,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub fixture: String,
    pub command: String,
    pub seed: u64,
    pub points: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dumps: Vec<NamedDump>,
}

impl Report {
    pub fn new(fixture: &str, command: impl Into<String>, options: &Options) -> Self {
        Report {
            tool: TOOL,
            version: VERSION,
            fixture: fixture.to_string(),
            command: command.into(),
            seed: options.seed,
            points: options.points,
            tolerance: options.tol,
            pass: true,
            checks: Vec::new(),
            dumps: Vec::new(),
        }
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = CheckReport>) {
        self.checks.extend(checks);
    }

    /// Sorts checks and dumps by name and sets the overall verdict.
    pub fn finish(mut self) -> Self {
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
        self.dumps.sort_by(|a, b| a.name.cmp(&b.name));
        self.pass = self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Probe settings shared by every command.
#[derive(Clone, Debug)]
pub struct Options {
    pub points: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            points: 100,
            seed: 42,
            tol: 1e-9,
        }
    }
}
