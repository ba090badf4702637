//! Explicitly enumerated term domains.
//!
//! [`ExplicitOracle`] stores every admissible labeling of a term together
//! with its cost and answers oracle calls by a linear scan.  It is the
//! simplest possible [`MinOracle`] and is handy for small custom terms and
//! for wiring toy decompositions in examples and tests; the structured
//! oracles in [`crate::mrf`], [`crate::tomography`] and [`crate::matching`]
//! should be preferred whenever they apply.

use crate::model::{CompactLabeling, MinOracle, OracleError};

/// A term given by an explicit list of `(labeling, cost)` pairs.
///
/// The compact encoding is a single integer: the index of the labeling in
/// the stored list.  Ties in `solve` are broken by the smallest index, so
/// the listing order fixes the tie-break.
pub struct ExplicitOracle {
    arity: usize,
    labelings: Vec<Vec<bool>>,
    costs: Vec<f64>,
}

impl ExplicitOracle {
    /// Build from `(indicator labeling, cost)` pairs.
    ///
    /// # Panics
    /// Panics if the list is empty (a term domain must be nonempty), if some
    /// labeling has the wrong length, or if a labeling repeats.
    pub fn from_labelings(arity: usize, entries: Vec<(Vec<bool>, f64)>) -> Self {
        assert!(!entries.is_empty(), "term domain must be nonempty");
        let mut labelings = Vec::with_capacity(entries.len());
        let mut costs = Vec::with_capacity(entries.len());
        for (x, c) in entries {
            assert_eq!(x.len(), arity, "labeling length must equal arity");
            assert!(
                !labelings.contains(&x),
                "duplicate labeling in explicit domain"
            );
            assert!(c.is_finite(), "explicit costs must be finite");
            labelings.push(x);
            costs.push(c);
        }
        ExplicitOracle {
            arity,
            labelings,
            costs,
        }
    }

    /// Number of admissible labelings.
    pub fn domain_size(&self) -> usize {
        self.labelings.len()
    }

    fn score(&self, lambda: &[f64], idx: usize) -> f64 {
        let mut v = self.costs[idx];
        for (j, &bit) in self.labelings[idx].iter().enumerate() {
            if bit {
                v += lambda[j];
            }
        }
        v
    }
}

impl MinOracle for ExplicitOracle {
    fn arity(&self) -> usize {
        self.arity
    }

    fn compact_len(&self) -> usize {
        1
    }

    fn solve(&self, lambda: &[f64]) -> Result<(CompactLabeling, f64), OracleError> {
        debug_assert_eq!(lambda.len(), self.arity);
        let mut best = 0;
        let mut best_v = self.score(lambda, 0);
        for idx in 1..self.labelings.len() {
            let v = self.score(lambda, idx);
            if v < best_v {
                best = idx;
                best_v = v;
            }
        }
        Ok((vec![best as u32], self.costs[best]))
    }

    fn solve_max(&self, lambda: &[f64]) -> Result<(CompactLabeling, f64), OracleError> {
        debug_assert_eq!(lambda.len(), self.arity);
        let mut best = 0;
        let mut best_v = self.score(lambda, 0);
        for idx in 1..self.labelings.len() {
            let v = self.score(lambda, idx);
            if v > best_v {
                best = idx;
                best_v = v;
            }
        }
        Ok((vec![best as u32], self.costs[best]))
    }

    fn decode(&self, s: &[u32], out: &mut [f64]) {
        let idx = s[0] as usize;
        for (o, &bit) in out.iter_mut().zip(&self.labelings[idx]) {
            *o = if bit { 1.0 } else { 0.0 };
        }
    }

    fn inner_product(&self, lambda: &[f64], s: &[u32]) -> f64 {
        let idx = s[0] as usize;
        self.labelings[idx]
            .iter()
            .enumerate()
            .filter(|(_, &bit)| bit)
            .map(|(j, _)| lambda[j])
            .sum()
    }

    fn energy(&self, x: &[bool]) -> Option<f64> {
        self.labelings
            .iter()
            .position(|l| l == x)
            .map(|idx| self.costs[idx])
    }

    fn work(&self) -> u64 {
        (self.labelings.len() * (self.arity + 1)) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_scans_the_domain_and_reports_raw_cost() {
        let oracle = ExplicitOracle::from_labelings(
            2,
            vec![
                (vec![false, false], 1.0),
                (vec![true, false], 0.5),
                (vec![false, true], 2.0),
            ],
        );
        // λ = (1, -3): scores are 1.0, 1.5, -1.0 → third labeling wins.
        let (s, cost) = oracle.solve(&[1.0, -3.0]).unwrap();
        assert_eq!(s, vec![2]);
        assert_eq!(cost, 2.0);
        let mut out = vec![0.0; 2];
        oracle.decode(&s, &mut out);
        assert_eq!(out, vec![0.0, 1.0]);
        assert_eq!(oracle.inner_product(&[1.0, -3.0], &s), -3.0);
    }

    #[test]
    fn ties_go_to_the_earliest_listing() {
        let oracle = ExplicitOracle::from_labelings(
            1,
            vec![(vec![true], 1.0), (vec![false], 1.0)],
        );
        let (s, _) = oracle.solve(&[0.0]).unwrap();
        assert_eq!(s, vec![0], "tie must resolve to the first listed labeling");
    }

    #[test]
    fn energy_rejects_off_domain_labelings() {
        let oracle =
            ExplicitOracle::from_labelings(1, vec![(vec![false], 0.0), (vec![true], -3.0)]);
        assert_eq!(oracle.energy(&[true]), Some(-3.0));
        let oracle2 = ExplicitOracle::from_labelings(1, vec![(vec![false], 0.0)]);
        assert_eq!(oracle2.energy(&[true]), None);
    }

    #[test]
    fn solve_max_picks_the_worst_vertex() {
        let oracle =
            ExplicitOracle::from_labelings(1, vec![(vec![false], 0.0), (vec![true], -3.0)]);
        let (s, cost) = oracle.solve_max(&[0.0]).unwrap();
        assert_eq!((s[0], cost), (0, 0.0));
    }
}
