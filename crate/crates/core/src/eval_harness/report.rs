//! ASR aggregation and the JSON / Markdown report.

use serde::{Deserialize, Serialize};

use super::categories::CATEGORIES;
use super::TrialResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub instruction: String,
    pub successes: usize,
    pub trials: usize,
    pub asr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrReport {
    pub seen: Vec<CategoryRow>,
    pub unseen: Vec<CategoryRow>,
    pub total_successes: usize,
    pub total_trials: usize,
}

impl AsrReport {
    /// Tallies results into cells. Category and instruction order follow the
    /// category table, whatever order the results arrive in.
    pub fn aggregate(results: &[TrialResult]) -> Self {
        let mut seen = Vec::new();
        let mut unseen = Vec::new();
        for spec in &CATEGORIES {
            let mine: Vec<&TrialResult> = results.iter().filter(|r| r.category == spec.name).collect();
            if mine.is_empty() {
                continue;
            }
            let cells = spec
                .instruction_labels()
                .into_iter()
                .map(|label| {
                    let cell: Vec<_> = mine.iter().filter(|r| r.instruction == label).collect();
                    let successes = cell.iter().filter(|r| r.outcome.status.is_success()).count();
                    let trials = cell.len();
                    let asr = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
                    Cell { instruction: label.to_string(), successes, trials, asr }
                })
                .collect();
            let row = CategoryRow { category: spec.name.to_string(), cells };
            if spec.seen {
                seen.push(row);
            } else {
                unseen.push(row);
            }
        }
        let total_trials = results.len();
        let total_successes = results.iter().filter(|r| r.outcome.status.is_success()).count();
        Self { seen, unseen, total_successes, total_trials }
    }

    pub fn cells(&self) -> impl Iterator<Item = (&str, &Cell)> {
        self.seen
            .iter()
            .chain(&self.unseen)
            .flat_map(|row| row.cells.iter().map(move |c| (row.category.as_str(), c)))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Percentage truncated to one decimal, "66.6%", "100%".
pub fn format_asr(successes: usize, trials: usize) -> String {
    if trials == 0 {
        return "n/a".into();
    }
    let tenths = successes * 1000 / trials;
    if tenths.is_multiple_of(10) {
        format!("{}%", tenths / 10)
    } else {
        format!("{}.{}%", tenths / 10, tenths % 10)
    }
}

fn table(out: &mut String, title: &str, rows: &[CategoryRow], planner: &str) {
    if rows.is_empty() {
        return;
    }
    out.push_str(&format!("## {title}\n\n"));
    let names: Vec<&str> = rows.iter().map(|r| r.category.as_str()).collect();
    out.push_str(&format!("| Planner | {} |\n", names.join(" | ")));
    out.push_str(&format!("|---|{}\n", "---|".repeat(rows.len())));
    let cells: Vec<String> = rows
        .iter()
        .map(|r| {
            r.cells
                .iter()
                .map(|c| format_asr(c.successes, c.trials))
                .collect::<Vec<_>>()
                .join("/ ")
        })
        .collect();
    out.push_str(&format!("| {planner} | {} |\n\n", cells.join(" | ")));
    let legend: Vec<String> = rows
        .iter()
        .map(|r| {
            let labels: Vec<&str> = r.cells.iter().map(|c| c.instruction.as_str()).collect();
            format!("{}: {}", r.category, labels.join(" / "))
        })
        .collect();
    out.push_str(&format!("Instructions per cell: {}.\n\n", legend.join("; ")));
}

pub fn render_markdown(report: &AsrReport, planner: &str) -> String {
    let mut out = String::from("# Average success rate\n\n");
    table(&mut out, "Seen categories", &report.seen, planner);
    table(&mut out, "Unseen categories", &report.unseen, planner);
    out.push_str(&format!(
        "Total: {} / {} trials succeeded ({}).\n",
        report.total_successes,
        report.total_trials,
        format_asr(report.total_successes, report.total_trials)
    ));
    out
}
