//! Metric derivation: average life-cycle cumulative reward per agent with
//! across-seed dispersion, plus per-life-cycle learning-curve series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::UserId;
use crate::error::{Error, Result};

/// One completed life-cycle: the atomic metric row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleRow {
    pub agent: String,
    pub seed: u64,
    pub user: UserId,
    pub life_cycle: usize,
    pub reward: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub life_cycle: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Summary for one agent over its seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsTable {
    pub agent: String,
    pub seeds: usize,
    /// Mean over seeds of the per-seed average life-cycle cumulative reward.
    pub mean: f64,
    /// Standard error of that mean across seeds (0 for a single seed).
    pub std_error: f64,
    /// Sample standard deviation across seeds.
    pub std_dev: f64,
    /// Mean over seeds of the per-user whole-run return.
    pub mean_user_return: f64,
    /// Learning curve: per life-cycle index, across-seed mean and error.
    pub curve: Vec<CurvePoint>,
}

fn mean_sd_se(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    (mean, sd, sd / n.sqrt())
}

/// Derives the summary for one agent's rows. Rows must all carry that agent.
pub fn metrics_from_records(agent: &str, rows: &[LifecycleRow]) -> Result<MetricsTable> {
    if rows.is_empty() {
        return Err(Error::validation(format!("no life-cycle rows for agent '{agent}'")));
    }
    if rows.iter().any(|r| r.agent != agent) {
        return Err(Error::validation("rows from multiple agents in one summary"));
    }
    // Per-seed averages.
    let mut by_seed: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut by_seed_user: BTreeMap<(u64, UserId), f64> = BTreeMap::new();
    let mut by_lc: BTreeMap<usize, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        by_seed.entry(r.seed).or_default().push(r.reward);
        *by_seed_user.entry((r.seed, r.user)).or_default() += r.reward;
        by_lc.entry(r.life_cycle).or_default().entry(r.seed).or_default().push(r.reward);
    }
    let per_seed: Vec<f64> = by_seed
        .values()
        .map(|rewards| rewards.iter().sum::<f64>() / rewards.len() as f64)
        .collect();
    let (mean, std_dev, std_error) = mean_sd_se(&per_seed);

    let mut per_seed_user_return: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for ((seed, _), total) in &by_seed_user {
        per_seed_user_return.entry(*seed).or_default().push(*total);
    }
    let user_returns: Vec<f64> = per_seed_user_return
        .values()
        .map(|totals| totals.iter().sum::<f64>() / totals.len() as f64)
        .collect();
    let (mean_user_return, _, _) = mean_sd_se(&user_returns);

    let curve = by_lc
        .into_iter()
        .map(|(lc, seeds)| {
            let vals: Vec<f64> = seeds
                .values()
                .map(|rewards| rewards.iter().sum::<f64>() / rewards.len() as f64)
                .collect();
            let (m, _, se) = mean_sd_se(&vals);
            CurvePoint { life_cycle: lc, mean: m, std_error: se }
        })
        .collect();

    Ok(MetricsTable {
        agent: agent.to_string(),
        seeds: by_seed.len(),
        mean,
        std_error,
        std_dev,
        mean_user_return,
        curve,
    })
}

/// Multi-agent aggregate over pooled rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub entries: Vec<MetricsTable>,
    pub warnings: Vec<String>,
}

pub fn aggregate_rows(rows: &[LifecycleRow]) -> Result<AggregateReport> {
    if rows.is_empty() {
        return Err(Error::validation("no rows to aggregate"));
    }
    let mut by_agent: BTreeMap<String, Vec<LifecycleRow>> = BTreeMap::new();
    for r in rows {
        by_agent.entry(r.agent.clone()).or_default().push(r.clone());
    }
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for (agent, rows) in by_agent {
        let table = metrics_from_records(&agent, &rows)?;
        if table.seeds < 2 {
            warnings.push(format!(
                "agent '{agent}': single seed, standard error reported as 0"
            ));
        }
        entries.push(table);
    }
    Ok(AggregateReport { entries, warnings })
}

/// Aligned text rendering of an aggregate, one row per agent.
pub fn render_text_table(report: &AggregateReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>6} {:>12} {:>12} {:>12} {:>14}\n",
        "agent", "seeds", "mean", "std_error", "std_dev", "user_return"
    ));
    for e in &report.entries {
        out.push_str(&format!(
            "{:<16} {:>6} {:>12.4} {:>12.4} {:>12.4} {:>14.4}\n",
            e.agent, e.seeds, e.mean, e.std_error, e.std_dev, e.mean_user_return
        ));
    }
    out
}
