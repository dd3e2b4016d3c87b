//! Report and plot-data emission: line-oriented `key=value` reports with a
//! trailing summary block, and per-cell CSV bundles of cumulative
//! trajectories. All floats are written with 17 significant digits, so
//! identical runs produce byte-identical files.

use fifo_sim_core::dynamics::StateVector;
use fifo_sim_core::order::ConeOrder;
use fifo_sim_core::sim::{format_float, Trajectory};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Accumulates `key=value` lines plus a summary block and writes them as
/// one report file.
pub struct Report {
    lines: Vec<String>,
    summary: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        let mut report = Report {
            lines: Vec::new(),
            summary: Vec::new(),
        };
        report.push_str("experiment", experiment);
        report
    }

    pub fn push_str(&mut self, key: &str, value: &str) {
        self.lines.push(format!("{key}={value}"));
    }

    pub fn push_float(&mut self, key: &str, value: f64) {
        self.lines.push(format!("{key}={}", format_float(value)));
    }

    pub fn push_int(&mut self, key: &str, value: usize) {
        self.lines.push(format!("{key}={value}"));
    }

    pub fn push_bool(&mut self, key: &str, value: bool) {
        self.lines
            .push(format!("{key}={}", if value { "pass" } else { "fail" }));
    }

    pub fn summary_line(&mut self, key: &str, value: impl AsRef<str>) {
        self.summary.push(format!("{key}={}", value.as_ref()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "# summary");
        for line in &self.summary {
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

/// Writes one CSV per selected cell with the cumulative trajectories of
/// all runs side by side: `t,z_k1,...,z_k<runs>`. Fails when the runs do
/// not share a sampling grid.
pub fn emit_plotdata(
    out_dir: &Path,
    order: &ConeOrder,
    trajectories: &[Trajectory<StateVector>],
    cells: &[usize],
) -> Result<Vec<PathBuf>, String> {
    if cells.is_empty() || trajectories.is_empty() {
        return Ok(Vec::new());
    }
    for traj in &trajectories[1..] {
        if !trajectories[0].same_grid(traj) {
            return Err("trajectories do not share a sampling grid".to_string());
        }
    }
    let z_runs: Vec<Vec<fifo_sim_core::ZVector>> =
        trajectories.iter().map(|t| t.z_states(order)).collect();
    let times = trajectories[0].times();

    let mut written = Vec::new();
    for &cell in cells {
        let e = cell - 1;
        let mut out = String::new();
        let _ = write!(out, "t");
        for k in 1..=trajectories.len() {
            let _ = write!(out, ",z_k{k}");
        }
        let _ = writeln!(out);
        for (idx, t) in times.iter().enumerate() {
            let _ = write!(out, "{}", format_float(*t));
            for run in &z_runs {
                let _ = write!(out, ",{}", format_float(run[idx].component(e)));
            }
            let _ = writeln!(out);
        }
        let path = out_dir.join(format!("z_cell{cell}.csv"));
        fs::write(&path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_layout() {
        let mut report = Report::new("demo");
        report.push_int("pairs", 3);
        report.push_bool("pair_1_2", true);
        report.summary_line("result", "pass");
        let text = report.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "experiment=demo");
        assert_eq!(lines[1], "pairs=3");
        assert_eq!(lines[2], "pair_1_2=pass");
        assert_eq!(lines[3], "# summary");
        assert_eq!(lines[4], "result=pass");
    }
}
