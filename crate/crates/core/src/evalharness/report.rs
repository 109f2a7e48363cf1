use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corruption::sweep_levels;
use crate::error::{Error, Result};

/// Success rates of one (task, method) pair across the sweep levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepReport {
    pub task: String,
    pub method: String,
    pub levels: Vec<u32>,
    /// Percent, one per entry of `levels`.
    pub rates: Vec<f64>,
    /// Arithmetic mean of `rates`.
    pub average: f64,
}

impl SweepReport {
    pub fn new(task: impl Into<String>, method: impl Into<String>, rates: Vec<f64>) -> Result<Self> {
        let r = Self {
            task: task.into(),
            method: method.into(),
            levels: sweep_levels().iter().map(|l| l.value()).collect(),
            average: mean(&rates),
            rates,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let expected: Vec<u32> = sweep_levels().iter().map(|l| l.value()).collect();
        if self.levels != expected {
            return Err(Error::Validation(format!(
                "{}/{}: levels {:?} differ from the sweep levels {expected:?}",
                self.task, self.method, self.levels
            )));
        }
        if self.rates.len() != self.levels.len() {
            return Err(Error::Validation(format!(
                "{}/{}: {} rates for {} levels",
                self.task,
                self.method,
                self.rates.len(),
                self.levels.len()
            )));
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..=100.0).contains(*r)) {
            return Err(Error::Validation(format!("{}/{}: rate {r} outside [0, 100]", self.task, self.method)));
        }
        if self.average != mean(&self.rates) {
            return Err(Error::Validation(format!(
                "{}/{}: stored average {} is not the mean of the rates ({})",
                self.task,
                self.method,
                self.average,
                mean(&self.rates)
            )));
        }
        Ok(())
    }

    pub fn rate_at(&self, level: u32) -> Option<f64> {
        self.levels.iter().position(|&l| l == level).map(|i| self.rates[i])
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Nearest integer, halves rounded up.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::InvalidParameter(format!("unknown report format {s:?} (markdown|csv)"))),
        }
    }
}

fn fmt_rate(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{r:.0}")
    } else {
        format!("{r:.2}")
    }
}

/// One row per report, in input order: task, method, the ten rates and the
/// average shown as a round-half-up integer.
///
/// CSV columns: `task,method,e10,e20,e40,e60,e80,e100,e120,e140,e160,e170,avg`.
pub fn aggregate_and_render(reports: &[SweepReport], format: ReportFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Precondition("no sweep reports to render".into()));
    }
    for r in reports {
        r.validate()?;
    }
    let level_cols: Vec<String> = reports[0].levels.iter().map(|l| format!("e{l}")).collect();
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["task".to_string(), "method".to_string()];
            header.extend(level_cols);
            header.push("avg".into());
            let csv_err = |e: csv::Error| Error::Format(format!("report csv: {e}"));
            w.write_record(&header).map_err(csv_err)?;
            for r in reports {
                let mut row = vec![r.task.clone(), r.method.clone()];
                row.extend(r.rates.iter().map(|&x| fmt_rate(x)));
                row.push(round_half_up(r.average).to_string());
                w.write_record(&row).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format(format!("report csv: {e}")))?;
            out = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
        }
        ReportFormat::Markdown => {
            let levels: Vec<String> = reports[0].levels.iter().map(|l| l.to_string()).collect();
            let _ = writeln!(out, "| Task | Method | {} | AVG |", levels.join(" | "));
            let _ = writeln!(out, "|---|---|{}---|", "---:|".repeat(levels.len()));
            for r in reports {
                let rates: Vec<String> = r.rates.iter().map(|&x| fmt_rate(x)).collect();
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    r.task,
                    r.method,
                    rates.join(" | "),
                    round_half_up(r.average)
                );
            }
        }
    }
    Ok(out)
}

/// A published row of the reference success-rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub task: &'static str,
    pub method: &'static str,
    pub rates: [f64; 10],
    pub published_avg: i64,
}

impl PublishedRow {
    pub fn report(&self) -> SweepReport {
        SweepReport::new(self.task, self.method, self.rates.to_vec()).expect("fixture rows are valid")
    }
}

/// The fifteen (task × method) rows of the reference table, with their
/// printed AVG column.
pub fn published_table_fixture() -> Vec<PublishedRow> {
    let row = |task, method, rates, published_avg| PublishedRow {
        task,
        method,
        rates,
        published_avg,
    };
    vec![
        row("CupStack", "DP (baseline)", [0., 0., 0., 0., 0., 97., 75., 40., 17., 0.], 23),
        row("CupStack", "DP+Depth", [0., 0., 0., 0., 0., 90., 91., 78., 0., 0.], 26),
        row("CupStack", "DP+AugBlender", [0., 0., 0., 66., 72., 100., 66., 92., 0., 0.], 40),
        row("CupStack", "DP+Varied Data", [0., 0., 0., 0., 0., 50., 40., 50., 10., 0.], 15),
        row("CupStack", "Ours", [62., 88., 93., 91., 91., 93., 91., 88., 91., 90.], 88),
        row("PickSmall", "DP (baseline)", [0., 0., 0., 0., 0., 66., 78., 100., 100., 90.], 43),
        row("PickSmall", "DP+Depth", [0., 71., 82., 85., 91., 93., 79., 86., 65., 71.], 72),
        row("PickSmall", "DP+AugBlender", [0., 66., 50., 73., 92., 100., 72., 80., 75., 68.], 68),
        row("PickSmall", "DP+Varied Data", [0., 0., 0., 41., 42., 55., 65., 67., 71., 65.], 41),
        row("PickSmall", "Ours", [0., 84., 82., 92., 92., 100., 92., 100., 87., 92.], 82),
        row("PickBig", "DP (baseline)", [10., 22., 31., 61., 67., 100., 59., 45., 38., 32.], 47),
        row("PickBig", "DP+Depth", [53., 82., 78., 75., 83., 82., 90., 75., 70., 68.], 78),
        row("PickBig", "DP+AugBlender", [51., 65., 72., 75., 80., 89., 51., 61., 60., 58.], 66),
        row("PickBig", "DP+Varied Data", [0., 0., 21., 55., 51., 82., 65., 62., 55., 45.], 44),
        row("PickBig", "Ours", [61., 83., 85., 83., 100., 84., 82., 83., 81., 83.], 83),
    ]
}
