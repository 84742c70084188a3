//! Classifier output shared by both backends.

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub label: String,
    /// Share of the total score, in `[0, 100]`.
    pub percentage: f64,
    pub distance: f64,
}

/// All labels with percentage scores, best first. Percentages sum to 100.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedMatches {
    entries: Vec<Match>,
}

impl RankedMatches {
    /// Entries must already be in rank order.
    pub(crate) fn new(entries: Vec<Match>) -> Self {
        debug_assert!(!entries.is_empty());
        Self { entries }
    }

    pub fn entries(&self) -> &[Match] {
        &self.entries
    }

    pub fn top(&self) -> &Match {
        &self.entries[0]
    }

    pub fn total_percentage(&self) -> f64 {
        self.entries.iter().map(|m| m.percentage).sum()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|m| m.label.as_str())
    }
}
