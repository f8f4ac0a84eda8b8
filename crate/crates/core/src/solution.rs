//! Timetables, hard-constraint checking and the proximity cost.
//!
//! The cost of a timetable is kept as an exact integer penalty
//! `sum w(|t_i - t_j|) * c_ij` over conflicting exam pairs; dividing by the
//! number of students gives the usual average-per-student figure. Pairs that
//! share a slot are hard-constraint violations and carry no proximity weight.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::instance::ProblemInstance;

/// Proximity weights for slot distances 1..=5: 16, 8, 4, 2, 1.
pub const PROXIMITY_WEIGHTS: [u64; 5] = [16, 8, 4, 2, 1];

/// Weight of two conflicting exams `distance` timeslots apart. Distance 0
/// (same slot) is a hard violation and weighs nothing here.
#[inline]
pub fn proximity_weight(distance: usize) -> u64 {
    match distance {
        1..=5 => PROXIMITY_WEIGHTS[distance - 1],
        _ => 0,
    }
}

const NOT_MOVED: usize = usize::MAX;

#[inline]
fn pair_weight(a: usize, b: usize) -> u64 {
    proximity_weight(a.abs_diff(b))
}

/// Exact proximity cost: integer penalty over the student count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cost {
    pub penalty: u64,
    pub students: usize,
}

impl Cost {
    pub fn new(penalty: u64, students: usize) -> Self {
        Self { penalty, students }
    }

    /// Average penalty per student.
    pub fn value(&self) -> f64 {
        self.penalty as f64 / self.students as f64
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        (self.students == other.students).then(|| self.penalty.cmp(&other.penalty))
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.value())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimetableError {
    #[error("assignment covers {got} exams, instance has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("exam {exam} is out of range")]
    ExamOutOfRange { exam: usize },
    #[error("exam {exam} assigned to slot {slot}, but only {num_timeslots} slots exist")]
    SlotOutOfRange {
        exam: usize,
        slot: usize,
        num_timeslots: usize,
    },
    #[error("exam {exam} is not assigned to any timeslot")]
    Unassigned { exam: usize },
    #[error("exam {exam} appears twice in one move")]
    RepeatedExam { exam: usize },
}

/// Hard-constraint report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeasibilityReport {
    /// Conflicting exam pairs sharing a timeslot.
    pub hc1_violations: usize,
    /// Timeslots whose summed enrollment exceeds the slot capacity.
    pub hc2_violations: usize,
    /// No exam is assigned more than once.
    pub hc3_ok: bool,
    /// Exams without a timeslot.
    pub hc4_unassigned: usize,
    pub feasible: bool,
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "feasible={} hc1_violations={} hc2_violations={} hc3_ok={} hc4_unassigned={}",
            self.feasible, self.hc1_violations, self.hc2_violations, self.hc3_ok, self.hc4_unassigned
        )
    }
}

/// Checks HC1-HC4 on an arbitrary, possibly partial, assignment where
/// `slots_per_exam[e]` lists every slot exam `e` was placed in.
pub fn check_assignment(inst: &ProblemInstance, slots_per_exam: &[Vec<usize>]) -> FeasibilityReport {
    let c = inst.conflicts();
    let mut hc1 = 0;
    for (i, slots_i) in slots_per_exam.iter().enumerate() {
        for &(j, _) in c.neighbors(i) {
            if j <= i {
                continue;
            }
            hc1 += slots_i.iter().filter(|s| slots_per_exam[j].contains(s)).count();
        }
    }

    let mut hc2 = 0;
    if let Some(capacity) = inst.slot_capacity() {
        let mut load = vec![0u64; inst.num_timeslots()];
        for (exam, slots) in slots_per_exam.iter().enumerate() {
            for &s in slots {
                if let Some(l) = load.get_mut(s) {
                    *l += u64::from(inst.enrollment(exam));
                }
            }
        }
        hc2 = load.iter().filter(|&&l| l > capacity).count();
    }

    let hc3_ok = slots_per_exam.iter().all(|s| s.len() <= 1);
    let hc4 =
        slots_per_exam.iter().filter(|s| s.is_empty()).count() + inst.num_exams().saturating_sub(slots_per_exam.len());
    FeasibilityReport {
        hc1_violations: hc1,
        hc2_violations: hc2,
        hc3_ok,
        hc4_unassigned: hc4,
        feasible: hc1 == 0 && hc2 == 0 && hc3_ok && hc4 == 0,
    }
}

/// Exact proximity penalty of a complete assignment, computed from scratch.
pub fn proximity_penalty(inst: &ProblemInstance, assignment: &[usize]) -> u64 {
    let c = inst.conflicts();
    let mut total = 0;
    for (i, &si) in assignment.iter().enumerate() {
        for &(j, cij) in c.neighbors(i) {
            if j > i {
                total += pair_weight(si, assignment[j]) * u64::from(cij);
            }
        }
    }
    total
}

/// Proximity cost of a per-exam assignment (`None` marks an unassigned exam).
pub fn evaluate_cost(inst: &ProblemInstance, assignment: &[Option<usize>]) -> Result<Cost, TimetableError> {
    if assignment.len() != inst.num_exams() {
        return Err(TimetableError::LengthMismatch {
            expected: inst.num_exams(),
            got: assignment.len(),
        });
    }
    let dense = assignment
        .iter()
        .enumerate()
        .map(|(exam, s)| s.ok_or(TimetableError::Unassigned { exam }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Cost::new(proximity_penalty(inst, &dense), inst.num_students()))
}

/// A complete exam-to-timeslot assignment with per-slot membership lists and
/// a cached exact penalty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timetable {
    assignment: Vec<usize>,
    slots: Vec<Vec<usize>>,
    // index of each exam inside its slot list
    position: Vec<usize>,
    penalty: u64,
    students: usize,
}

impl Timetable {
    pub fn from_assignment(inst: &ProblemInstance, assignment: Vec<usize>) -> Result<Self, TimetableError> {
        let k = inst.num_timeslots();
        if assignment.len() != inst.num_exams() {
            return Err(TimetableError::LengthMismatch {
                expected: inst.num_exams(),
                got: assignment.len(),
            });
        }
        let mut slots = vec![Vec::new(); k];
        let mut position = vec![0; assignment.len()];
        for (exam, &slot) in assignment.iter().enumerate() {
            if slot >= k {
                return Err(TimetableError::SlotOutOfRange {
                    exam,
                    slot,
                    num_timeslots: k,
                });
            }
            position[exam] = slots[slot].len();
            slots[slot].push(exam);
        }
        let penalty = proximity_penalty(inst, &assignment);
        Ok(Self {
            assignment,
            slots,
            position,
            penalty,
            students: inst.num_students(),
        })
    }

    #[inline]
    pub fn slot_of(&self, exam: usize) -> usize {
        self.assignment[exam]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn slot(&self, slot: usize) -> &[usize] {
        &self.slots[slot]
    }

    pub fn num_timeslots(&self) -> usize {
        self.slots.len()
    }

    pub fn num_exams(&self) -> usize {
        self.assignment.len()
    }

    /// Cached exact penalty.
    pub fn penalty(&self) -> u64 {
        self.penalty
    }

    pub fn cost(&self) -> Cost {
        Cost::new(self.penalty, self.students)
    }

    pub fn check_feasibility(&self, inst: &ProblemInstance) -> FeasibilityReport {
        let per_exam: Vec<Vec<usize>> = self.assignment.iter().map(|&s| vec![s]).collect();
        check_assignment(inst, &per_exam)
    }

    /// Change in penalty if every `(exam, new_slot)` pair in `changes` were
    /// applied simultaneously. Only rows of moved exams are visited.
    pub fn delta_penalty(&self, inst: &ProblemInstance, changes: &[(usize, usize)]) -> Result<i64, TimetableError> {
        let k = self.num_timeslots();
        // moved[e] is the new slot of e, or NOT_MOVED
        let mut moved = vec![NOT_MOVED; self.num_exams()];
        for &(exam, slot) in changes {
            if exam >= self.num_exams() {
                return Err(TimetableError::ExamOutOfRange { exam });
            }
            if slot >= k {
                return Err(TimetableError::SlotOutOfRange {
                    exam,
                    slot,
                    num_timeslots: k,
                });
            }
            if moved[exam] != NOT_MOVED {
                return Err(TimetableError::RepeatedExam { exam });
            }
            moved[exam] = slot;
        }

        let c = inst.conflicts();
        let mut delta: i64 = 0;
        for &(exam, new_slot) in changes {
            let old_slot = self.assignment[exam];
            for &(other, cij) in c.neighbors(exam) {
                let other_old = self.assignment[other];
                let other_new = moved[other];
                let after = if other_new == NOT_MOVED {
                    pair_weight(new_slot, other_old)
                } else if other < exam {
                    // moved pairs are counted once, from the lower index
                    continue;
                } else {
                    pair_weight(new_slot, other_new)
                };
                let before = pair_weight(old_slot, other_old);
                delta += (after as i64 - before as i64) * i64::from(cij);
            }
        }
        Ok(delta)
    }

    /// Applies a set of slot changes and refreshes the cached penalty through
    /// the incremental delta. Returns the delta.
    pub fn apply(&mut self, inst: &ProblemInstance, changes: &[(usize, usize)]) -> Result<i64, TimetableError> {
        let delta = self.delta_penalty(inst, changes)?;
        self.commit(changes, delta);
        Ok(delta)
    }

    /// Applies changes whose delta was already obtained from
    /// [`Timetable::delta_penalty`] on this exact state.
    pub(crate) fn commit(&mut self, changes: &[(usize, usize)], delta: i64) {
        for &(exam, slot) in changes {
            self.relocate(exam, slot);
        }
        self.penalty = self
            .penalty
            .checked_add_signed(delta)
            .expect("penalty stays non-negative");
    }

    fn relocate(&mut self, exam: usize, slot: usize) {
        let from = self.assignment[exam];
        if from == slot {
            return;
        }
        let pos = self.position[exam];
        self.slots[from].swap_remove(pos);
        if let Some(&shifted) = self.slots[from].get(pos) {
            self.position[shifted] = pos;
        }
        self.position[exam] = self.slots[slot].len();
        self.slots[slot].push(exam);
        self.assignment[exam] = slot;
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("largest-enrollment construction ran out of timeslots: {unplaced} exams left unplaced after {num_timeslots} slots")]
    SlotsExhausted { unplaced: usize, num_timeslots: usize },
}

/// Per-slot limit on the number of exams used during construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BalanceCap {
    /// `ceil(n / k) + 1`
    #[default]
    Auto,
    Fixed(usize),
    Disabled,
}

impl BalanceCap {
    pub fn resolve(self, num_exams: usize, num_timeslots: usize) -> Option<usize> {
        match self {
            BalanceCap::Auto => Some(num_exams.div_ceil(num_timeslots) + 1),
            BalanceCap::Fixed(cap) => Some(cap),
            BalanceCap::Disabled => None,
        }
    }
}

/// Largest-enrollment construction.
///
/// Each timeslot in turn receives a conflict-free vector of exams: the
/// unscheduled exam with the largest enrollment seeds it, then the remaining
/// unscheduled exams are scanned in descending enrollment (ties by lower
/// index) and added when they conflict with nothing already in the vector
/// and fit the seat capacity and balance cap. Exams the capped pass could not
/// place are then put in the earliest conflict-free slot with room, ignoring
/// the cap.
pub fn construct_initial_le(inst: &ProblemInstance, balance_cap: BalanceCap) -> Result<Timetable, ConstructionError> {
    let n = inst.num_exams();
    let k = inst.num_timeslots();
    let cap = balance_cap.resolve(n, k).map(|c| c.max(1));
    let capacity = inst.slot_capacity();
    let c = inst.conflicts();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| inst.enrollment(b).cmp(&inst.enrollment(a)).then(a.cmp(&b)));

    let mut assignment = vec![usize::MAX; n];
    let mut remaining = order;
    // blocked[e] == slot + 1 when e conflicts with an exam already in `slot`
    let mut blocked = vec![0usize; n];
    for slot in 0..k {
        if remaining.is_empty() {
            break;
        }
        let mut size = 0;
        let mut load = 0u64;
        let mut leftover = Vec::with_capacity(remaining.len());
        for &exam in &remaining {
            let seats = u64::from(inst.enrollment(exam));
            let fits_cap = cap.is_none_or(|cap| size < cap);
            let fits_seats = capacity.is_none_or(|cap| load + seats <= cap);
            if blocked[exam] != slot + 1 && fits_cap && fits_seats {
                assignment[exam] = slot;
                size += 1;
                load += seats;
                for &(other, _) in c.neighbors(exam) {
                    blocked[other] = slot + 1;
                }
            } else {
                leftover.push(exam);
            }
        }
        remaining = leftover;
    }
    // the balance cap is soft: leftovers go to the first slot that takes them
    if cap.is_some() && !remaining.is_empty() {
        let mut load = vec![0u64; k];
        for (exam, &slot) in assignment.iter().enumerate() {
            if slot != usize::MAX {
                load[slot] += u64::from(inst.enrollment(exam));
            }
        }
        remaining.retain(|&exam| {
            let seats = u64::from(inst.enrollment(exam));
            let slot = (0..k).find(|&s| {
                capacity.is_none_or(|cap| load[s] + seats <= cap)
                    && c.neighbors(exam).iter().all(|&(other, _)| assignment[other] != s)
            });
            match slot {
                Some(s) => {
                    assignment[exam] = s;
                    load[s] += seats;
                    false
                }
                None => true,
            }
        });
    }
    if !remaining.is_empty() {
        return Err(ConstructionError::SlotsExhausted {
            unplaced: remaining.len(),
            num_timeslots: k,
        });
    }
    Ok(Timetable::from_assignment(inst, assignment).expect("every exam placed in a valid slot"))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolutionFileError {
    #[error("line {line}: malformed entry {content:?}")]
    Malformed { line: usize, content: String },
    #[error("line {line}: unknown exam id {id}")]
    UnknownExam { line: usize, id: u64 },
    #[error("line {line}: timeslot {slot} outside 1..={num_timeslots}")]
    SlotOutOfRange {
        line: usize,
        slot: u64,
        num_timeslots: usize,
    },
}

/// Renders a timetable as `exam_id slot` lines (both 1-based, exam ids
/// zero-padded as in the Toronto files) followed by a cost comment.
pub fn write_solution(tt: &Timetable) -> String {
    let mut out = String::new();
    for (exam, &slot) in tt.assignment().iter().enumerate() {
        let _ = writeln!(out, "{:04} {}", exam + 1, slot + 1);
    }
    let cost = tt.cost();
    let _ = writeln!(
        out,
        "# cost {} penalty {} students {}",
        cost.value(),
        cost.penalty,
        cost.students
    );
    out
}

/// Reads a solution file into per-exam slot lists (0-based). Missing and
/// repeated exams are kept so the feasibility check can report them.
pub fn parse_solution(inst: &ProblemInstance, text: &str) -> Result<Vec<Vec<usize>>, SolutionFileError> {
    let n = inst.num_exams();
    let k = inst.num_timeslots();
    let mut slots = vec![Vec::new(); n];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let malformed = || SolutionFileError::Malformed {
            line,
            content: content.to_string(),
        };
        let mut tokens = content.split_whitespace();
        let (Some(id), Some(slot), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(malformed());
        };
        let id: u64 = id.parse().map_err(|_| malformed())?;
        let slot: u64 = slot.parse().map_err(|_| malformed())?;
        if id == 0 || id as usize > n {
            return Err(SolutionFileError::UnknownExam { line, id });
        }
        if slot == 0 || slot as usize > k {
            return Err(SolutionFileError::SlotOutOfRange {
                line,
                slot,
                num_timeslots: k,
            });
        }
        slots[id as usize - 1].push(slot as usize - 1);
    }
    Ok(slots)
}
