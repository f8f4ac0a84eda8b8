//! Utility-based heuristic selection: each low-level heuristic carries a
//! score that moves up by one when it improves the incumbent and down by one
//! otherwise, clipped to fixed bounds; the highest score is chosen next.

use rand::Rng;
use serde::Serialize;

use crate::neighborhood::{HeuristicId, HEURISTIC_COUNT};

pub const DEFAULT_LOWER_BOUND: f64 = 0.0;
pub const DEFAULT_UPPER_BOUND: f64 = 40.0;
/// Initial utility as a fraction of the upper bound.
pub const DEFAULT_INITIAL_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityBounds {
    pub lower: f64,
    pub upper: f64,
    pub initial_fraction: f64,
}

impl Default for UtilityBounds {
    fn default() -> Self {
        Self {
            lower: DEFAULT_LOWER_BOUND,
            upper: DEFAULT_UPPER_BOUND,
            initial_fraction: DEFAULT_INITIAL_FRACTION,
        }
    }
}

impl UtilityBounds {
    pub fn initial(&self) -> f64 {
        (self.initial_fraction * self.upper).clamp(self.lower, self.upper)
    }

    pub fn is_valid(&self) -> bool {
        self.lower.is_finite()
            && self.upper.is_finite()
            && self.lower <= self.upper
            && self.initial_fraction.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityTable {
    utilities: [f64; HEURISTIC_COUNT],
    lower: f64,
    upper: f64,
}

impl Default for UtilityTable {
    fn default() -> Self {
        Self::new(UtilityBounds::default())
    }
}

impl UtilityTable {
    pub fn new(bounds: UtilityBounds) -> Self {
        Self {
            utilities: [bounds.initial(); HEURISTIC_COUNT],
            lower: bounds.lower,
            upper: bounds.upper,
        }
    }

    /// Table with explicit scores, clipped into `[lower, upper]`.
    pub fn with_utilities(utilities: [f64; HEURISTIC_COUNT], lower: f64, upper: f64) -> Self {
        Self {
            utilities: utilities.map(|u| u.clamp(lower, upper)),
            lower,
            upper,
        }
    }

    pub fn utilities(&self) -> &[f64; HEURISTIC_COUNT] {
        &self.utilities
    }

    pub fn get(&self, h: HeuristicId) -> f64 {
        self.utilities[h.0]
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Heuristics sharing the maximum utility, in index order.
    pub fn maximizers(&self) -> Vec<HeuristicId> {
        let best = self.utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..HEURISTIC_COUNT)
            .filter(|&i| self.utilities[i] == best)
            .map(HeuristicId)
            .collect()
    }

    /// Max-utility choice, ties broken uniformly at random. The RNG is only
    /// consumed when there is a tie.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> HeuristicId {
        let best = self.maximizers();
        match best.len() {
            1 => best[0],
            n => best[rng.random_range(0..n)],
        }
    }

    /// `+1` on improvement, `-1` otherwise, then clip.
    #[must_use]
    pub fn update(mut self, h: HeuristicId, improved: bool) -> Self {
        let step = if improved { 1.0 } else { -1.0 };
        let u = &mut self.utilities[h.0];
        *u = (*u + step).clamp(self.lower, self.upper);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn initial_utilities_are_three_quarters_of_upper() {
        let t = UtilityTable::default();
        assert_eq!(t.utilities(), &[30.0; 4]);
        assert_eq!(t.bounds(), (0.0, 40.0));
    }

    #[test]
    fn symmetric_tie_is_uniform() {
        let t = UtilityTable::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        let draws = 10_000;
        for _ in 0..draws {
            counts[t.select(&mut rng).0] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() <= 0.03, "frequency {freq}");
        }
    }

    #[test]
    fn strict_argmax_wins() {
        let t = UtilityTable::with_utilities([31.0, 30.0, 30.0, 30.0], 0.0, 40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| t.select(&mut rng) == HeuristicId(0)));
    }

    #[test]
    fn one_improvement_locks_in_choice() {
        let t = UtilityTable::default().update(HeuristicId(2), true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(t.select(&mut rng), HeuristicId(2));
    }

    #[test]
    fn updates_clip_at_bounds() {
        let t = UtilityTable::default();
        assert_eq!(t.update(HeuristicId(0), true).get(HeuristicId(0)), 31.0);
        let top = UtilityTable::with_utilities([40.0; 4], 0.0, 40.0);
        assert_eq!(top.update(HeuristicId(1), true).get(HeuristicId(1)), 40.0);
        let bottom = UtilityTable::with_utilities([0.0; 4], 0.0, 40.0);
        assert_eq!(bottom.update(HeuristicId(3), false).get(HeuristicId(3)), 0.0);
    }

    #[test]
    fn greedy_lock_in() {
        // a heuristic that always improves is chosen forever
        let mut t = UtilityTable::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let first = t.select(&mut rng);
        t = t.update(first, true);
        for _ in 0..200 {
            let h = t.select(&mut rng);
            assert_eq!(h, first);
            t = t.update(h, true);
        }
        assert_eq!(t.get(first), 40.0);
    }
}
