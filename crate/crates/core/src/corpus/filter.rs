use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ReviewRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub max_words: usize,
    pub min_total_votes: u32,
    /// Minimum occurrences for every retained user and item.
    pub min_occurrences: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_words: 70,
            min_total_votes: 1,
            min_occurrences: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub dropped_length: usize,
    pub dropped_votes: usize,
    pub dropped_occurrence: usize,
    /// Passes of the occurrence filter until nothing changed.
    pub iterations: usize,
    pub output: usize,
}

impl FilterReport {
    /// Filtering everything away is reported, not treated as failure.
    pub fn is_empty_warning(&self) -> bool {
        self.output == 0
    }
}

/// Drop long reviews and reviews without votes, then repeatedly drop users
/// and items with too few occurrences until both constraints hold at once.
pub fn filter(records: Vec<ReviewRecord>, cfg: &FilterConfig) -> (Vec<ReviewRecord>, FilterReport) {
    let mut report = FilterReport {
        input: records.len(),
        ..Default::default()
    };
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        if r.word_count > cfg.max_words {
            report.dropped_length += 1;
        } else if r.total_votes < cfg.min_total_votes {
            report.dropped_votes += 1;
        } else {
            kept.push(r);
        }
    }

    loop {
        report.iterations += 1;
        let mut users: HashMap<&str, usize> = HashMap::new();
        let mut items: HashMap<&str, usize> = HashMap::new();
        for r in &kept {
            *users.entry(&r.user_id).or_default() += 1;
            *items.entry(&r.item_id).or_default() += 1;
        }
        let keep: Vec<bool> = kept
            .iter()
            .map(|r| users[r.user_id.as_str()] >= cfg.min_occurrences && items[r.item_id.as_str()] >= cfg.min_occurrences)
            .collect();
        let before = kept.len();
        let mut flags = keep.into_iter();
        kept.retain(|_| flags.next().unwrap_or(false));
        report.dropped_occurrence += before - kept.len();
        if kept.len() == before {
            break;
        }
    }
    report.output = kept.len();
    if report.is_empty_warning() {
        log::warn!("filter removed every record ({} in)", report.input);
    }
    (kept, report)
}
