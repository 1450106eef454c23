//! Versioned CSV artifacts. Every file starts with a `# schema_version=1`
//! line followed by the column header; readers refuse anything else. Fields
//! never contain commas, so no quoting is involved, and floats are written
//! in shortest round-trip form to keep artifacts byte-stable.

use std::fmt::Write as _;

use crate::env::UserId;
use crate::error::{Error, Result};

use super::metrics::LifecycleRow;

pub const SCHEMA_LINE: &str = "# schema_version=1";

/// One environment transition as logged by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub run_id: String,
    pub t: u64,
    pub user: UserId,
    pub action: String,
    pub reward: f64,
    pub satisfaction: f64,
    pub lifecycle_len: usize,
    pub leave: bool,
}

/// One agent decision as logged by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRow {
    pub run_id: String,
    pub t: u64,
    pub user: UserId,
    /// Digest of the epistemic index in force, `-` for index-free agents.
    pub index_digest: String,
    pub action: String,
    /// `label:value` pairs joined by `;`, empty for unscored decisions.
    pub scores: String,
}

const LIFECYCLE_HEADER: &str = "agent,seed,user,life_cycle,reward,steps";
const TRANSITION_HEADER: &str = "run_id,t,user,action,reward,satisfaction,lifecycle_len,leave";
const DECISION_HEADER: &str = "run_id,t,user,index_digest,action,scores";

pub fn lifecycle_csv(rows: &[LifecycleRow]) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{LIFECYCLE_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.agent, r.seed, r.user, r.life_cycle, r.reward, r.steps
        )
        .expect("string write");
    }
    out
}

pub fn transition_csv(rows: &[TransitionRow]) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{TRANSITION_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.run_id,
            r.t,
            r.user,
            r.action,
            r.reward,
            r.satisfaction,
            r.lifecycle_len,
            u8::from(r.leave)
        )
        .expect("string write");
    }
    out
}

pub fn decision_csv(rows: &[DecisionRow]) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{DECISION_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.run_id, r.t, r.user, r.index_digest, r.action, r.scores
        )
        .expect("string write");
    }
    out
}

fn body_lines<'a>(text: &'a str, expected_header: &str, what: &str) -> Result<Vec<&'a str>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l == SCHEMA_LINE => {}
        other => {
            return Err(Error::validation(format!(
                "{what}: expected '{SCHEMA_LINE}' first, got {other:?}"
            )))
        }
    }
    match lines.next() {
        Some(h) if h == expected_header => {}
        other => {
            return Err(Error::validation(format!(
                "{what}: header mismatch, expected '{expected_header}', got {other:?}"
            )))
        }
    }
    Ok(lines.filter(|l| !l.is_empty()).collect())
}

pub fn parse_lifecycle_csv(text: &str) -> Result<Vec<LifecycleRow>> {
    body_lines(text, LIFECYCLE_HEADER, "life-cycle csv")?
        .into_iter()
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::validation(format!("life-cycle csv: bad row '{line}'")));
            }
            Ok(LifecycleRow {
                agent: f[0].to_string(),
                seed: parse(f[1], line)?,
                user: parse(f[2], line)?,
                life_cycle: parse(f[3], line)?,
                reward: parse(f[4], line)?,
                steps: parse(f[5], line)?,
            })
        })
        .collect()
}

pub fn parse_decision_csv(text: &str) -> Result<Vec<DecisionRow>> {
    body_lines(text, DECISION_HEADER, "decision csv")?
        .into_iter()
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::validation(format!("decision csv: bad row '{line}'")));
            }
            Ok(DecisionRow {
                run_id: f[0].to_string(),
                t: parse(f[1], line)?,
                user: parse(f[2], line)?,
                index_digest: f[3].to_string(),
                action: f[4].to_string(),
                scores: f[5].to_string(),
            })
        })
        .collect()
}

pub fn parse_transition_csv(text: &str) -> Result<Vec<TransitionRow>> {
    body_lines(text, TRANSITION_HEADER, "transition csv")?
        .into_iter()
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::validation(format!("transition csv: bad row '{line}'")));
            }
            Ok(TransitionRow {
                run_id: f[0].to_string(),
                t: parse(f[1], line)?,
                user: parse(f[2], line)?,
                action: f[3].to_string(),
                reward: parse(f[4], line)?,
                satisfaction: parse(f[5], line)?,
                lifecycle_len: parse(f[6], line)?,
                leave: f[7] == "1",
            })
        })
        .collect()
}

fn parse<T: std::str::FromStr>(field: &str, line: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::validation(format!("unparseable field '{field}' in row '{line}'")))
}
