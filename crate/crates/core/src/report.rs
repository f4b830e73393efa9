use std::fmt;

use serde::{Deserialize, Serialize};

/// Per-stage accounting: how many pairs came in, how many left, and why the
/// rest were removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub input: usize,
    pub output: usize,
    /// Removal counts in rule application order.
    pub removed: Vec<RuleCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCount {
    pub rule: String,
    pub removed: usize,
}

impl StageReport {
    pub fn new(stage: impl Into<String>, input: usize) -> Self {
        Self {
            stage: stage.into(),
            input,
            output: input,
            removed: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, rule: &str, before: usize, after: usize) {
        self.removed.push(RuleCount {
            rule: rule.to_string(),
            removed: before - after,
        });
        self.output = after;
    }

    /// Removal count for `rule`, 0 when the rule did not run.
    pub fn removed_by(&self, rule: &str) -> usize {
        self.removed
            .iter()
            .find(|r| r.rule == rule)
            .map_or(0, |r| r.removed)
    }

    pub fn total_removed(&self) -> usize {
        self.removed.iter().map(|r| r.removed).sum()
    }
}

impl fmt::Display for StageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.stage)?;
        writeln!(f, "input\t{}", self.input)?;
        for r in &self.removed {
            writeln!(f, "removed.{}\t{}", r.rule, r.removed)?;
        }
        writeln!(f, "output\t{}", self.output)
    }
}
