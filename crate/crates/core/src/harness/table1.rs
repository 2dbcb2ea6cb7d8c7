use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::artifacts::{write_file, RunSummary, SCHEMA_TABLE1};
use crate::error::{Error, Result};
use crate::multiagent::{ConflictMode, SelectionPolicy};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub policy: SelectionPolicy,
    pub n_agents: usize,
    /// Area under the loss curve with conflicts divided by the conflict-free
    /// area.
    pub ratio: f64,
}

/// `S_under(conflict) / S_under(conflict-free)` for two runs that differ only
/// in their conflict mode.
pub fn table1_ratio(conflict: &RunSummary, free: &RunSummary) -> Result<f64> {
    if conflict.config.mode.conflict != ConflictMode::Allowed || free.config.mode.conflict != ConflictMode::Free {
        return Err(Error::contract(
            "table1_ratio expects (conflict, conflict-free) runs in that order",
        ));
    }
    let mut a = conflict.config.clone();
    let mut b = free.config.clone();
    a.mode.conflict = ConflictMode::Free;
    a.output_dir = Default::default();
    b.output_dir = Default::default();
    if a != b {
        return Err(Error::contract(format!(
            "runs differ in more than the conflict mode ({} N={} vs {} N={})",
            conflict.config.mode.slug(),
            conflict.config.n_agents,
            free.config.mode.slug(),
            free.config.n_agents
        )));
    }
    if free.s_under <= 0.0 {
        return Err(Error::contract("conflict-free area is not positive"));
    }
    Ok(conflict.s_under / free.s_under)
}

/// Every `summary.json` found one level below `dir`, sorted by directory name.
pub fn load_summaries(dir: &Path) -> Result<Vec<RunSummary>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("summary.json"))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::contract(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Pair up conflict / conflict-free runs and compute their ratios, ordered by
/// policy then agent count. Writes `table1.csv` when `out` is given.
pub fn emit_table1(summaries: &[RunSummary], out: Option<&Path>) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for policy in [SelectionPolicy::UniformRandom, SelectionPolicy::Bandit] {
        let mut frees: Vec<&RunSummary> = summaries
            .iter()
            .filter(|s| s.config.mode.policy == policy && s.config.mode.conflict == ConflictMode::Free)
            .collect();
        frees.sort_by_key(|s| s.config.n_agents);
        for free in frees {
            let partner = summaries.iter().find(|s| {
                s.config.mode.policy == policy
                    && s.config.mode.conflict == ConflictMode::Allowed
                    && s.config.n_agents == free.config.n_agents
            });
            if let Some(conflict) = partner {
                rows.push(Table1Row {
                    policy,
                    n_agents: free.config.n_agents,
                    ratio: table1_ratio(conflict, free)?,
                });
            }
        }
    }
    if let Some(path) = out {
        let mut body = format!("# {SCHEMA_TABLE1}\npolicy,n_agents,ratio\n");
        for r in &rows {
            let _ = writeln!(body, "{},{},{}", r.policy.name(), r.n_agents, r.ratio);
        }
        write_file(path, body.as_bytes())?;
    }
    Ok(rows)
}
