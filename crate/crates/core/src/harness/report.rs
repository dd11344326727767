//! Tidy CSV reports.
//!
//! The main report is byte-identical across runs. Wall times go to a sidecar
//! CSV with the same row keys.

use std::collections::BTreeMap;
use std::time::Duration;

use crate::error::Result;

pub const REPORT_SCHEMA: &str = "fjguard-report v1";
pub const TIMING_SCHEMA: &str = "fjguard-timing v1";

pub const REPORT_COLUMNS: [&str; 10] = [
    "experiment", "seed", "p", "m", "k", "mu", "method", "f", "f_exact", "f_approx",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    /// `None` marks a mean over seeds.
    pub seed: Option<u64>,
    pub p: f64,
    pub m: usize,
    pub k: usize,
    pub mu: f64,
    pub method: String,
    /// Total opinion without perturbation.
    pub f: f64,
    /// Total opinion on the perturbed network, by a fresh solve.
    pub f_exact: f64,
    /// First-order approximation of the perturbed total.
    pub f_approx: f64,
    pub wall_time: Duration,
}

impl ReportRow {
    pub fn exact_increase(&self) -> f64 {
        self.f_exact - self.f
    }

    pub fn approx_increase(&self) -> f64 {
        self.f_approx - self.f
    }

    pub fn is_mean(&self) -> bool {
        self.seed.is_none()
    }

    fn key(&self) -> (u64, usize, usize, u64, &str) {
        (self.p.to_bits(), self.m, self.k, self.mu.to_bits(), self.method.as_str())
    }

    fn seed_field(&self) -> String {
        self.seed.map_or_else(|| "mean".to_string(), |s| s.to_string())
    }
}

/// Rows plus the comment lines written above the header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub notes: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// Append one mean row per `(p, m, k, mu, method)`, in first-seen order.
    pub fn push_means(&mut self) {
        let mut order = Vec::new();
        let mut groups: BTreeMap<(u64, usize, usize, u64, &str), Vec<&ReportRow>> = BTreeMap::new();
        for row in self.rows.iter().filter(|r| !r.is_mean()) {
            let entry = groups.entry(row.key()).or_default();
            if entry.is_empty() {
                order.push(row.key());
            }
            entry.push(row);
        }
        let means: Vec<ReportRow> = order
            .iter()
            .map(|key| {
                let group = &groups[key];
                let count = group.len() as f64;
                let mean = |f: fn(&ReportRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / count;
                let first = group[0];
                ReportRow {
                    experiment: first.experiment.clone(),
                    seed: None,
                    p: first.p,
                    m: first.m,
                    k: first.k,
                    mu: first.mu,
                    method: first.method.clone(),
                    f: mean(|r| r.f),
                    f_exact: mean(|r| r.f_exact),
                    f_approx: mean(|r| r.f_approx),
                    wall_time: group.iter().map(|r| r.wall_time).sum::<Duration>() / group.len() as u32,
                }
            })
            .collect();
        self.rows.extend(means);
    }

    pub fn per_seed(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.is_mean())
    }

    pub fn means(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.is_mean())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# {REPORT_SCHEMA}\n");
        for note in &self.notes {
            out.push_str(&format!("# {note}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.seed_field(),
                r.p.to_string(),
                r.m.to_string(),
                r.k.to_string(),
                r.mu.to_string(),
                r.method.clone(),
                r.f.to_string(),
                r.f_exact.to_string(),
                r.f_approx.to_string(),
            ])?;
        }
        out.push_str(&finish(w)?);
        Ok(out)
    }

    pub fn timing_csv(&self) -> Result<String> {
        let mut out = format!("# {TIMING_SCHEMA}\n");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["experiment", "seed", "p", "m", "k", "mu", "method", "wall_time_s"])?;
        for r in self.per_seed() {
            w.write_record([
                r.experiment.clone(),
                r.seed_field(),
                r.p.to_string(),
                r.m.to_string(),
                r.k.to_string(),
                r.mu.to_string(),
                r.method.clone(),
                r.wall_time.as_secs_f64().to_string(),
            ])?;
        }
        out.push_str(&finish(w)?);
        Ok(out)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, method: &str, f: f64) -> ReportRow {
        ReportRow {
            experiment: "e".into(),
            seed: Some(seed),
            p: 0.1,
            m: 2,
            k: 3,
            mu: 0.0,
            method: method.into(),
            f,
            f_exact: f + 1.0,
            f_approx: f + 2.0,
            wall_time: Duration::from_millis(seed),
        }
    }

    #[test]
    fn means_follow_first_seen_order() {
        let mut report = Report {
            notes: vec!["note".into()],
            rows: vec![row(1, "b", 1.0), row(1, "a", 2.0), row(2, "b", 3.0), row(2, "a", 4.0)],
        };
        report.push_means();
        let means: Vec<_> = report.means().collect();
        assert_eq!(means.len(), 2);
        assert_eq!(means[0].method, "b");
        assert_eq!(means[0].f, 2.0);
        assert_eq!(means[1].f_exact, 4.0);
        let csv = report.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# fjguard-report v1"));
        assert_eq!(lines.next(), Some("# note"));
        assert_eq!(lines.next(), Some("experiment,seed,p,m,k,mu,method,f,f_exact,f_approx"));
        assert_eq!(lines.next(), Some("e,1,0.1,2,3,0,b,1,2,3"));
        assert!(csv.contains("e,mean,0.1,2,3,0,b,2,3,4\n"));
        assert_eq!(report.timing_csv().unwrap().lines().count(), 2 + 4);
    }
}
