use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::config::CaseConfig;
use super::report::SolveReport;
use super::run_case;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    /// Patches grow with the worker count.
    Weak,
    /// Fixed problem, growing worker count.
    Strong,
    /// Fixed problem and worker count, growing number of coarse holders.
    Holders,
}

impl std::str::FromStr for StudyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(Self::Weak),
            "strong" => Ok(Self::Strong),
            "holders" => Ok(Self::Holders),
            other => Err(Error::Config(format!("unknown study '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub rows: Vec<SolveReport>,
    pub warnings: Vec<String>,
}

/// Patch grid for `factor` times the patches of `base`: the count is doubled
/// direction by direction, first direction first. `factor` must be a power
/// of two.
pub fn weak_grid(base: &[usize], factor: usize) -> Result<Vec<usize>> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::Config(format!("weak scaling needs power-of-two worker ratios, got {factor}")));
    }
    let mut g = base.to_vec();
    let n = g.len();
    for i in 0..factor.trailing_zeros() as usize {
        g[i % n] *= 2;
    }
    Ok(g)
}

/// Runs the cases of a scaling study.
///
/// `schedule` lists worker counts (weak, strong) or holder counts (holders,
/// at `base.workers` workers). Strong rows carry the speedup
/// `Q_0 t_0 / t` on total time relative to the first row. Weak scaling keeps
/// patches per worker fixed at the ratio of the first entry. Worker counts
/// beyond the machine's cores produce a warning.
pub fn scaling_study(kind: StudyKind, base: &CaseConfig, schedule: &[usize]) -> Result<StudyReport> {
    if schedule.is_empty() {
        return Err(Error::Config("empty schedule".into()));
    }
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut warnings = Vec::new();
    let mut rows: Vec<SolveReport> = Vec::with_capacity(schedule.len());
    for &s in schedule {
        let mut cfg = base.clone();
        match kind {
            StudyKind::Strong => {
                cfg.workers = s;
                cfg.holders = base.holders.min(s);
            }
            StudyKind::Weak => {
                if s % schedule[0] != 0 {
                    return Err(Error::Config(format!("weak schedule entry {s} is not a multiple of {}", schedule[0])));
                }
                cfg.workers = s;
                cfg.holders = base.holders.min(s);
                cfg.patches = weak_grid(&base.patch_grid(), s / schedule[0])?;
            }
            StudyKind::Holders => cfg.holders = s,
        }
        if cfg.workers > cores && !warnings.iter().any(|w: &String| w.contains(&format!("{} workers", cfg.workers))) {
            warnings.push(format!("{} workers exceed the {cores} available cores; timings are not representative", cfg.workers));
        }
        let mut r = run_case(&cfg)?;
        if kind == StudyKind::Strong {
            let (q0, t0) = rows.first().map(|f| (f.workers as f64, f.total_time)).unwrap_or((r.workers as f64, r.total_time));
            r.speedup = Some(q0 * t0 / r.total_time);
        }
        rows.push(r);
    }
    Ok(StudyReport { kind, rows, warnings })
}
