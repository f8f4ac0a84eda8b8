//! Low-level improvement heuristics. All four operate on whole timeslots or
//! Kempe chains and therefore never introduce a clash between co-enrolled
//! exams into a clash-free timetable.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::instance::ProblemInstance;
use crate::solution::Timetable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MoveKind {
    KempeSwap,
    ReassignSeq,
    InvertSeq,
    ShiftSeq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    /// slot `s` moves to `s + 1`, the last slot of the range wraps to the first
    Right,
    Left,
}

/// What produced a move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveOrigin {
    Chain {
        seed: usize,
        from: usize,
        to: usize,
    },
    Permutation {
        start: usize,
        labels: Vec<usize>,
    },
    Inversion {
        start: usize,
        end: usize,
    },
    Shift {
        start: usize,
        end: usize,
        direction: ShiftDirection,
    },
    /// No applicable proposal was found.
    Exhausted,
}

/// A proposed simultaneous set of `(exam, new_slot)` changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub kind: MoveKind,
    pub changes: Vec<(usize, usize)>,
    pub origin: MoveOrigin,
}

impl Move {
    pub fn is_noop(&self) -> bool {
        self.changes.is_empty()
    }
}

/// Index of a registered low-level heuristic, `0..HEURISTIC_COUNT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct HeuristicId(pub usize);

pub const HEURISTIC_COUNT: usize = 4;

impl fmt::Display for HeuristicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LowLevelHeuristic {
    /// Swap a Kempe chain between two timeslots.
    KempeChainSwap,
    /// Randomly permute the labels of a run of consecutive timeslots.
    ReassignTimeslots,
    /// Reverse a run of consecutive timeslots.
    InvertTimeslots,
    /// Rotate a run of consecutive timeslots by one position.
    ShiftTimeslots,
}

impl LowLevelHeuristic {
    pub const ALL: [LowLevelHeuristic; HEURISTIC_COUNT] = [
        LowLevelHeuristic::KempeChainSwap,
        LowLevelHeuristic::ReassignTimeslots,
        LowLevelHeuristic::InvertTimeslots,
        LowLevelHeuristic::ShiftTimeslots,
    ];

    pub fn from_id(id: HeuristicId) -> Self {
        Self::ALL[id.0]
    }

    pub fn id(self) -> HeuristicId {
        HeuristicId(self as usize)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            LowLevelHeuristic::KempeChainSwap => "ST-KC",
            LowLevelHeuristic::ReassignTimeslots => "RT",
            LowLevelHeuristic::InvertTimeslots => "IT",
            LowLevelHeuristic::ShiftTimeslots => "ST",
        }
    }

    pub fn propose<R: Rng + ?Sized>(self, tt: &Timetable, inst: &ProblemInstance, rng: &mut R) -> Move {
        match self {
            LowLevelHeuristic::KempeChainSwap => kempe_chain_swap(tt, inst, rng),
            LowLevelHeuristic::ReassignTimeslots => reassign_sequence(tt, rng),
            LowLevelHeuristic::InvertTimeslots => invert_sequence(tt, rng),
            LowLevelHeuristic::ShiftTimeslots => shift_sequence(tt, rng),
        }
    }
}

/// Connected component of `seed` in the conflict graph restricted to the
/// exams of slots `from` and `to`. Returned in discovery order.
pub fn kempe_chain(tt: &Timetable, inst: &ProblemInstance, seed: usize, from: usize, to: usize) -> Vec<usize> {
    let c = inst.conflicts();
    let mut chain = vec![seed];
    let mut seen = std::collections::HashSet::from([seed]);
    let mut queue = VecDeque::from([seed]);
    while let Some(exam) = queue.pop_front() {
        for &(other, _) in c.neighbors(exam) {
            let slot = tt.slot_of(other);
            if (slot == from || slot == to) && seen.insert(other) {
                chain.push(other);
                queue.push_back(other);
            }
        }
    }
    chain
}

/// Builds the swap of the Kempe chain grown from `seed` (which sits in
/// `from`) between `from` and `to`.
pub fn kempe_move(tt: &Timetable, inst: &ProblemInstance, seed: usize, to: usize) -> Move {
    let from = tt.slot_of(seed);
    let changes = kempe_chain(tt, inst, seed, from, to)
        .into_iter()
        .map(|exam| (exam, if tt.slot_of(exam) == from { to } else { from }))
        .collect();
    Move {
        kind: MoveKind::KempeSwap,
        changes,
        origin: MoveOrigin::Chain { seed, from, to },
    }
}

fn within_capacity(tt: &Timetable, inst: &ProblemInstance, mv: &Move) -> bool {
    let Some(capacity) = inst.slot_capacity() else {
        return true;
    };
    let MoveOrigin::Chain { from, to, .. } = mv.origin else {
        return true;
    };
    let load = |slot: usize| -> i64 { tt.slot(slot).iter().map(|&e| i64::from(inst.enrollment(e))).sum() };
    let (mut load_from, mut load_to) = (load(from), load(to));
    for &(exam, dest) in &mv.changes {
        let seats = i64::from(inst.enrollment(exam));
        if dest == to {
            load_from -= seats;
            load_to += seats;
        } else {
            load_to -= seats;
            load_from += seats;
        }
    }
    load_from <= capacity as i64 && load_to <= capacity as i64
}

/// Picks two distinct random slots and a uniform seed exam in the first, then
/// swaps the seed's Kempe chain between them. Empty first slots (and swaps
/// that would overflow a seat capacity) are retried up to `k^2` times before
/// a no-op is returned.
pub fn kempe_chain_swap<R: Rng + ?Sized>(tt: &Timetable, inst: &ProblemInstance, rng: &mut R) -> Move {
    let k = tt.num_timeslots();
    if k >= 2 {
        for _ in 0..k * k {
            let from = rng.random_range(0..k);
            let mut to = rng.random_range(0..k - 1);
            if to >= from {
                to += 1;
            }
            let members = tt.slot(from);
            if members.is_empty() {
                continue;
            }
            let seed = members[rng.random_range(0..members.len())];
            let mv = kempe_move(tt, inst, seed, to);
            if within_capacity(tt, inst, &mv) {
                return mv;
            }
        }
    }
    Move {
        kind: MoveKind::KempeSwap,
        changes: Vec::new(),
        origin: MoveOrigin::Exhausted,
    }
}

/// Uniform contiguous range `[start, end]` of at least two slots.
fn random_range<R: Rng + ?Sized>(k: usize, rng: &mut R) -> (usize, usize) {
    let len = rng.random_range(2..=k);
    let start = rng.random_range(0..=k - len);
    (start, start + len - 1)
}

/// Moves every exam of slot `start + i` to `labels[i]`. `labels` must be a
/// permutation of `start..start + labels.len()`.
pub fn relabel_slots(tt: &Timetable, kind: MoveKind, start: usize, labels: &[usize], origin: MoveOrigin) -> Move {
    let changes = labels
        .iter()
        .enumerate()
        .filter(|&(i, &label)| start + i != label)
        .flat_map(|(i, &label)| tt.slot(start + i).iter().map(move |&exam| (exam, label)))
        .collect();
    Move { kind, changes, origin }
}

fn exhausted(kind: MoveKind) -> Move {
    Move {
        kind,
        changes: Vec::new(),
        origin: MoveOrigin::Exhausted,
    }
}

/// Applies a uniform random permutation to the labels of a random run of
/// consecutive slots. Drawing the identity yields a no-op.
pub fn reassign_sequence<R: Rng + ?Sized>(tt: &Timetable, rng: &mut R) -> Move {
    let k = tt.num_timeslots();
    if k < 2 {
        return exhausted(MoveKind::ReassignSeq);
    }
    let (start, end) = random_range(k, rng);
    let mut labels: Vec<usize> = (start..=end).collect();
    labels.shuffle(rng);
    let origin = MoveOrigin::Permutation {
        start,
        labels: labels.clone(),
    };
    relabel_slots(tt, MoveKind::ReassignSeq, start, &labels, origin)
}

pub fn invert_range(tt: &Timetable, start: usize, end: usize) -> Move {
    let labels: Vec<usize> = (start..=end).rev().collect();
    relabel_slots(
        tt,
        MoveKind::InvertSeq,
        start,
        &labels,
        MoveOrigin::Inversion { start, end },
    )
}

/// Reverses a random run of at least two consecutive slots.
pub fn invert_sequence<R: Rng + ?Sized>(tt: &Timetable, rng: &mut R) -> Move {
    let k = tt.num_timeslots();
    if k < 2 {
        return exhausted(MoveKind::InvertSeq);
    }
    let (start, end) = random_range(k, rng);
    invert_range(tt, start, end)
}

pub fn shift_range(tt: &Timetable, start: usize, end: usize, direction: ShiftDirection) -> Move {
    let len = end - start + 1;
    let labels: Vec<usize> = (0..len)
        .map(|i| match direction {
            ShiftDirection::Right => start + (i + 1) % len,
            ShiftDirection::Left => start + (i + len - 1) % len,
        })
        .collect();
    relabel_slots(
        tt,
        MoveKind::ShiftSeq,
        start,
        &labels,
        MoveOrigin::Shift { start, end, direction },
    )
}

/// Rotates a random run of at least two consecutive slots by one position
/// in a random direction.
pub fn shift_sequence<R: Rng + ?Sized>(tt: &Timetable, rng: &mut R) -> Move {
    let k = tt.num_timeslots();
    if k < 2 {
        return exhausted(MoveKind::ShiftSeq);
    }
    let (start, end) = random_range(k, rng);
    let direction = if rng.random_bool(0.5) {
        ShiftDirection::Right
    } else {
        ShiftDirection::Left
    };
    shift_range(tt, start, end, direction)
}
