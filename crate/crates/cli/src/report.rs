use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{Command, OutputFormat, RunConfig, Shape4};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// What `metric` measures, e.g. `max_abs_diff` or `max_rel_err`.
    pub metric_name: String,
    /// Worst case over all trials.
    pub metric: f64,
    pub tolerance: f64,
    pub seconds: f64,
    /// Per-trial worst case, in trial order.
    pub samples: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    /// Passes when every sample is at most `tolerance`. Non-finite samples
    /// are stored as `f64::MAX` so the report stays valid JSON.
    pub fn from_samples(
        name: &str,
        metric_name: &str,
        samples: Vec<f64>,
        tolerance: f64,
        seconds: f64,
    ) -> Self {
        let samples: Vec<f64> = samples
            .into_iter()
            .map(|s| if s.is_finite() { s } else { f64::MAX })
            .collect();
        let metric = samples.iter().copied().fold(0.0, f64::max);
        let passed = samples.iter().all(|&s| s <= tolerance);
        Self {
            name: name.into(),
            passed,
            metric_name: metric_name.into(),
            metric,
            tolerance,
            seconds,
            samples,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Wall-clock samples for one forward pass. Never gates the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub variant: String,
    pub shape: Shape4,
    pub samples_seconds: Vec<f64>,
    pub median_seconds: Option<f64>,
    /// Multiply-accumulates per forward, where the kernel counts them.
    pub macs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub command: Command,
    pub shape: Shape4,
    pub seed: u64,
    pub trials: u64,
    pub checks: Vec<CheckResult>,
    #[serde(default)]
    pub timings: Vec<TimingEntry>,
    pub verdict: Verdict,
}

impl SuiteReport {
    pub fn new(cfg: &RunConfig, checks: Vec<CheckResult>, timings: Vec<TimingEntry>) -> Self {
        let verdict = if checks.iter().all(|c| c.passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            command: cfg.command,
            shape: cfg.shape,
            seed: cfg.seed,
            trials: cfg.trials,
            checks,
            timings,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn merge(cfg: &RunConfig, parts: Vec<SuiteReport>) -> Self {
        let mut checks = vec![];
        let mut timings = vec![];
        for p in parts {
            checks.extend(p.checks);
            timings.extend(p.timings);
        }
        Self::new(cfg, checks, timings)
    }

    pub fn write(&self, format: OutputFormat, out: impl Write) -> Result<(), HarnessError> {
        match format {
            OutputFormat::Json => serde_json::to_writer_pretty(out, self).map_err(HarnessError::io),
            OutputFormat::Csv => self.write_csv(out),
        }
    }

    /// Check rows, then a blank line and timing rows when there are any.
    fn write_csv(&self, mut out: impl Write) -> Result<(), HarnessError> {
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(CHECK_HEADER).map_err(HarnessError::io)?;
            for c in &self.checks {
                w.write_record([
                    self.command.as_str().to_string(),
                    c.name.clone(),
                    c.passed.to_string(),
                    c.metric_name.clone(),
                    format!("{:e}", c.metric),
                    format!("{:e}", c.tolerance),
                    format!("{:.6}", c.seconds),
                    c.detail.clone().unwrap_or_default(),
                ])
                .map_err(HarnessError::io)?;
            }
            w.flush().map_err(HarnessError::io)?;
        }
        if self.timings.is_empty() {
            return Ok(());
        }
        writeln!(out).map_err(HarnessError::io)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TIMING_HEADER).map_err(HarnessError::io)?;
        for t in &self.timings {
            w.write_record([
                t.variant.clone(),
                t.shape.to_string(),
                t.samples_seconds.len().to_string(),
                t.median_seconds
                    .map(|m| format!("{m:e}"))
                    .unwrap_or_default(),
                t.macs.map(|m| m.to_string()).unwrap_or_default(),
                t.skipped.clone().unwrap_or_default(),
            ])
            .map_err(HarnessError::io)?;
        }
        w.flush().map_err(HarnessError::io)
    }

    /// One line per check for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{} {}: {} {:.3e} (tol {:e}){}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.metric_name,
                c.metric,
                c.tolerance,
                c.detail
                    .as_ref()
                    .map(|d| format!(" [{d}]"))
                    .unwrap_or_default()
            ));
        }
        for t in &self.timings {
            match (&t.median_seconds, &t.skipped) {
                (Some(m), _) => s.push_str(&format!(
                    "time {} {}: median {:.3e}s over {} runs\n",
                    t.variant,
                    t.shape,
                    m,
                    t.samples_seconds.len()
                )),
                (None, Some(why)) => {
                    s.push_str(&format!("time {} {}: skipped, {why}\n", t.variant, t.shape))
                }
                (None, None) => {}
            }
        }
        s.push_str(&format!("verdict: {:?}\n", self.verdict).to_lowercase());
        s
    }
}

pub const CHECK_HEADER: [&str; 8] = [
    "command",
    "name",
    "passed",
    "metric_name",
    "metric",
    "tolerance",
    "seconds",
    "detail",
];

pub const TIMING_HEADER: [&str; 6] = [
    "variant",
    "shape",
    "samples",
    "median_seconds",
    "macs",
    "skipped",
];

/// Median of a nonempty sample.
pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}
