use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

const KEPT_MESSAGES: usize = 20;

/// Counted, non-fatal problems encountered while processing records.
///
/// Keeps a count per kind plus the first few messages of each kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub counts: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub messages: BTreeMap<String, Vec<String>>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, kind: &str, message: impl Into<String>) {
        *self.counts.entry(kind.to_owned()).or_default() += 1;
        let kept = self.messages.entry(kind.to_owned()).or_default();
        if kept.len() < KEPT_MESSAGES {
            kept.push(message.into());
        }
    }

    pub fn count(&self, kind: &str) -> u64 {
        self.counts.get(kind).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn merge(&mut self, other: Diagnostics) {
        for (kind, n) in other.counts {
            *self.counts.entry(kind).or_default() += n;
        }
        for (kind, msgs) in other.messages {
            let kept = self.messages.entry(kind).or_default();
            let room = KEPT_MESSAGES.saturating_sub(kept.len());
            kept.extend(msgs.into_iter().take(room));
        }
    }

    pub fn merged(mut self, other: Diagnostics) -> Self {
        self.merge(other);
        self
    }
}
