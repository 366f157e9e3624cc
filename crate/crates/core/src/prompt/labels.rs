use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelMapError {
    #[error("label numbers must start at 1 and strictly increase (saw {number} after {previous})")]
    BadNumbering { previous: u32, number: u32 },
    #[error("label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("label {0:?} is empty or contains whitespace or brackets")]
    InvalidLabel(String),
}

/// Numbered slot-type names, rendered as `[1=label , [2=other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, String)>", into = "Vec<(u32, String)>")]
pub struct LabelMap {
    entries: Vec<(u32, String)>,
}

pub(crate) fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || c == '[' || c == ']')
}

impl LabelMap {
    pub fn new(entries: Vec<(u32, String)>) -> Result<Self, LabelMapError> {
        let mut previous = 0;
        let mut seen = HashSet::new();
        for (i, (number, label)) in entries.iter().enumerate() {
            let ok = if i == 0 { *number == 1 } else { *number > previous };
            if !ok {
                return Err(LabelMapError::BadNumbering {
                    previous,
                    number: *number,
                });
            }
            if !valid_label(label) {
                return Err(LabelMapError::InvalidLabel(label.clone()));
            }
            if !seen.insert(label.as_str()) {
                return Err(LabelMapError::DuplicateLabel(label.clone()));
            }
            previous = *number;
        }
        Ok(Self { entries })
    }

    /// Numbers labels `1..=n` in the given order.
    pub fn from_labels<I, S>(labels: I) -> Result<Self, LabelMapError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries = labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| (i as u32 + 1, l.into()))
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, String)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.entries.iter().map(|(n, l)| (*n, l.as_str()))
    }

    pub fn label(&self, number: u32) -> Option<&str> {
        self.entries
            .binary_search_by_key(&number, |(n, _)| *n)
            .ok()
            .map(|i| self.entries[i].1.as_str())
    }

    pub fn number(&self, label: &str) -> Option<u32> {
        self.entries
            .iter()
            .find(|(_, l)| l == label)
            .map(|(n, _)| *n)
    }

    pub fn contains_number(&self, number: u32) -> bool {
        self.label(number).is_some()
    }

    /// Replaces the label names while keeping the numbering.
    pub(crate) fn relabel(&self, f: impl Fn(u32, &str) -> String) -> Result<Self, LabelMapError> {
        Self::new(
            self.entries
                .iter()
                .map(|(n, l)| (*n, f(*n, l)))
                .collect(),
        )
    }
}

impl TryFrom<Vec<(u32, String)>> for LabelMap {
    type Error = LabelMapError;

    fn try_from(v: Vec<(u32, String)>) -> Result<Self, Self::Error> {
        LabelMap::new(v)
    }
}

impl From<LabelMap> for Vec<(u32, String)> {
    fn from(m: LabelMap) -> Self {
        m.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbering_rules() {
        assert!(LabelMap::new(vec![(2, "a".into())]).is_err());
        assert!(LabelMap::new(vec![(1, "a".into()), (1, "b".into())]).is_err());
        assert!(LabelMap::new(vec![(1, "a".into()), (3, "b".into())]).is_ok());
        assert_eq!(
            LabelMap::new(vec![(1, "a".into()), (2, "a".into())]),
            Err(LabelMapError::DuplicateLabel("a".into()))
        );
        assert!(LabelMap::from_labels(["has space"]).is_err());
    }

    #[test]
    fn lookups() {
        let m = LabelMap::from_labels(["city", "timeRange"]).unwrap();
        assert_eq!(m.label(2), Some("timeRange"));
        assert_eq!(m.number("city"), Some(1));
        assert_eq!(m.label(3), None);
    }
}
