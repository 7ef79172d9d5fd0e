use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability of each photon-number outcome `(m_1, .., m_M)`.
///
/// Mass that is not listed, whether it lies beyond the cutoff or was pooled
/// from outcomes that were never resolved, is carried in `tail_mass` so that
/// the listed entries plus the tail always sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FCTable {
    num_modes: usize,
    cutoff: usize,
    entries: BTreeMap<Vec<usize>, f64>,
    tail_mass: f64,
}

impl FCTable {
    /// Builds a table whose tail is whatever the entries leave of unit mass.
    ///
    /// Tiny negative probabilities from round-off are clipped to zero.
    pub fn from_entries(
        num_modes: usize,
        cutoff: usize,
        entries: impl IntoIterator<Item = (Vec<usize>, f64)>,
    ) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::NoModes);
        }
        let mut map = BTreeMap::new();
        for (outcome, p) in entries {
            if outcome.len() != num_modes {
                return Err(Error::DimensionMismatch {
                    expected: num_modes,
                    found: outcome.len(),
                });
            }
            if !p.is_finite() || p < -1e-9 {
                return Err(Error::InvalidParameter {
                    name: "probability",
                    value: p,
                    reason: "must be finite and non-negative",
                });
            }
            *map.entry(outcome).or_insert(0.0) += p.max(0.0);
        }
        let total: f64 = map.values().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter {
                name: "total probability",
                value: total,
                reason: "must not exceed 1",
            });
        }
        Ok(Self {
            num_modes,
            cutoff,
            entries: map,
            tail_mass: (1.0 - total).max(0.0),
        })
    }

    /// A table with all mass on one outcome.
    pub fn point(outcome: Vec<usize>) -> Result<Self> {
        let cutoff = outcome.iter().max().map_or(1, |m| m + 1);
        Self::from_entries(outcome.len(), cutoff, [(outcome, 1.0)])
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn get(&self, outcome: &[usize]) -> f64 {
        self.entries.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, outcome: &[usize]) -> bool {
        self.entries.contains_key(outcome)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of the listed probabilities.
    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Keeps only the given outcomes and moves everything else to the tail.
    pub fn restricted_to(&self, outcomes: &[Vec<usize>]) -> Self {
        let entries = outcomes
            .iter()
            .map(|o| (o.clone(), self.get(o)))
            .collect::<BTreeMap<_, _>>();
        let total: f64 = entries.values().sum();
        Self {
            num_modes: self.num_modes,
            cutoff: self.cutoff,
            entries,
            tail_mass: (1.0 - total).max(0.0),
        }
    }

    /// Outcomes with probability above `threshold`, most likely first.
    pub fn most_likely(&self, threshold: f64) -> Vec<(Vec<usize>, f64)> {
        let mut top: Vec<_> = self
            .entries
            .iter()
            .filter(|(_, &p)| p > threshold)
            .map(|(k, &p)| (k.clone(), p))
            .collect();
        top.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        top
    }

    /// Probability that the total photon number is odd.
    pub fn odd_mass(&self) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.iter().sum::<usize>() % 2 == 1)
            .map(|(_, &p)| p)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_completes_unit_mass() {
        let t = FCTable::from_entries(2, 3, [(vec![0, 0], 0.7), (vec![1, 1], 0.2)]).unwrap();
        assert!((t.total() + t.tail_mass() - 1.0).abs() < 1e-15);
        assert!((t.tail_mass() - 0.1).abs() < 1e-15);
        assert_eq!(t.get(&[2, 2]), 0.0);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(FCTable::from_entries(2, 3, [(vec![0], 0.5)]).is_err());
        assert!(FCTable::from_entries(1, 3, [(vec![0], -0.5)]).is_err());
        assert!(FCTable::from_entries(1, 3, [(vec![0], 0.8), (vec![1], 0.8)]).is_err());
        assert!(FCTable::from_entries(0, 3, []).is_err());
    }

    #[test]
    fn restriction_pools_into_tail() {
        let t = FCTable::from_entries(1, 4, [(vec![0], 0.5), (vec![1], 0.3), (vec![2], 0.2)])
            .unwrap();
        let r = t.restricted_to(&[vec![0], vec![3]]);
        assert_eq!(r.len(), 2);
        assert!((r.tail_mass() - 0.5).abs() < 1e-15);
        assert_eq!(r.get(&[3]), 0.0);
    }

    #[test]
    fn ordering_and_parity() {
        let t = FCTable::from_entries(2, 3, [(vec![1, 0], 0.1), (vec![2, 0], 0.6), (vec![0, 0], 0.3)])
            .unwrap();
        let top = t.most_likely(0.2);
        assert_eq!(top[0].0, vec![2, 0]);
        assert_eq!(top.len(), 2);
        assert!((t.odd_mass() - 0.1).abs() < 1e-15);
    }
}
