//! Append-only run records with CSV emission.

use std::io::Write;

use serde::Serialize;

use crate::index::Step;
use crate::Result;

/// One iteration of a learner run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    /// Chosen or sampled model index, when the algorithm tracks one.
    pub model_idx: Option<usize>,
    /// Compact descriptor of the executed policy.
    pub policy: String,
    /// Trajectories executed this iteration, as space-separated `o a` pairs.
    pub trajectories: Vec<String>,
    /// Confidence-set size (OMLE) or posterior support size.
    pub set_size: usize,
    /// Posterior entropy in nats (0 for OMLE).
    pub posterior_entropy: f64,
    /// Instantaneous suboptimality of the iteration's decision.
    pub inst_subopt: f64,
    /// Suboptimality of the output policy if stopped after this iteration.
    pub cum_subopt: f64,
}

/// Full, replayable record of one algorithm run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLog {
    pub algorithm: String,
    pub seed: u64,
    pub config: String,
    pub records: Vec<IterRecord>,
}

/// Renders a trajectory as space-separated `o a` pairs.
pub fn trajectory_text(tau: &[Step]) -> String {
    tau.iter()
        .map(|&(o, a)| format!("{o} {a}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl RunLog {
    pub fn new(algorithm: &str, seed: u64, config: String) -> Self {
        RunLog {
            algorithm: algorithm.to_string(),
            seed,
            config,
            records: Vec::new(),
        }
    }

    /// Writes one CSV row per iteration with a fixed header and format, so
    /// identical runs produce byte-identical output.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "iteration,model_idx,policy,set_size,posterior_entropy,inst_subopt,cum_subopt,trajectories"
        )?;
        for r in &self.records {
            let model = r.model_idx.map(|i| i.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{:.17e},{:.17e},{:.17e},{}",
                r.iter,
                model,
                r.policy,
                r.set_size,
                r.posterior_entropy,
                r.inst_subopt,
                r.cum_subopt,
                r.trajectories.join(";")
            )?;
        }
        Ok(())
    }

    /// Final output-policy suboptimality (0 for empty logs).
    pub fn final_subopt(&self) -> f64 {
        self.records.last().map(|r| r.cum_subopt).unwrap_or(0.0)
    }

    /// Output-policy suboptimality after `k` iterations.
    pub fn subopt_at(&self, k: usize) -> Option<f64> {
        self.records.get(k.checked_sub(1)?).map(|r| r.cum_subopt)
    }
}
