//! The hyper-heuristic loop: build a timetable by largest enrollment, then
//! repeatedly select a low-level heuristic by utility, evaluate its proposal
//! incrementally, let the acceptance criterion decide, and adapt the
//! utilities.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::acceptance::{Acceptance, AcceptanceError, AcceptanceParams, Decision, Variant};
use crate::instance::ProblemInstance;
use crate::neighborhood::{HeuristicId, LowLevelHeuristic, HEURISTIC_COUNT};
use crate::selection::{UtilityBounds, UtilityTable};
use crate::solution::{construct_initial_le, BalanceCap, ConstructionError, Cost, Timetable};

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub variant: Variant,
    pub max_iterations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub utility: UtilityBounds,
    pub acceptance: AcceptanceParams,
    #[serde(skip)]
    pub balance_cap: BalanceCap,
    /// Non-linear deluge only: compare each candidate against the previous
    /// candidate's cost instead of the incumbent's, even after a rejection.
    pub literal_nlgd_reference: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Egd,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            utility: UtilityBounds::default(),
            acceptance: AcceptanceParams::default(),
            balance_cap: BalanceCap::Auto,
            literal_nlgd_reference: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.max_iterations == 0 {
            return Err(RunError::Acceptance(AcceptanceError::NoIterations));
        }
        if !self.utility.is_valid() {
            return Err(RunError::InvalidConfig(format!(
                "utility bounds [{}, {}] are not a valid range",
                self.utility.lower, self.utility.upper
            )));
        }
        if self.balance_cap == BalanceCap::Fixed(0) {
            return Err(RunError::InvalidConfig("balance cap must be at least 1".into()));
        }
        self.acceptance.validate()?;
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Acceptance(#[from] AcceptanceError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

/// One loop pass. Costs are averages per student; `utilities` are the
/// values the selection was made from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub current_cost: f64,
    pub best_cost: f64,
    pub candidate_cost: f64,
    pub boundary: f64,
    pub heuristic: HeuristicId,
    pub accepted: bool,
    pub reheated: bool,
    pub utilities: [f64; HEURISTIC_COUNT],
    pub draw: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    pub best: Timetable,
    pub best_cost: Cost,
    pub initial_cost: Cost,
    pub final_cost: Cost,
    /// 0 when the initial timetable was never improved.
    pub iteration_of_best: usize,
    pub initial_boundary: f64,
    pub trace: Vec<IterationRecord>,
    pub wall_time: Duration,
}

/// Splitmix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r` in a batch started from `base_seed`.
pub fn replicate_seed(base_seed: u64, replicate: usize) -> u64 {
    splitmix64(base_seed ^ splitmix64(replicate as u64))
}

/// Runs the hyper-heuristic for `cfg.max_iterations` proposals and returns the
/// best timetable seen.
pub fn run_hh(inst: &ProblemInstance, cfg: &RunConfig) -> Result<RunResult, RunError> {
    cfg.validate()?;
    let started = Instant::now();

    let mut search_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut accept_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    accept_rng.set_stream(1);

    let mut current = construct_initial_le(inst, cfg.balance_cap)?;
    let initial_cost = current.cost();
    let students = inst.num_students() as f64;
    let avg = |penalty: u64| penalty as f64 / students;

    let mut acceptance = Acceptance::new(cfg.variant, initial_cost.value(), cfg.max_iterations, &cfg.acceptance)?;
    let initial_boundary = acceptance.boundary();
    let literal = cfg.literal_nlgd_reference && cfg.variant == Variant::Nlgd;
    let mut utilities = UtilityTable::new(cfg.utility);
    let mut best = current.clone();
    let mut iteration_of_best = 0;
    let mut reference = current.penalty();
    let mut trace = Vec::with_capacity(cfg.max_iterations);

    for iteration in 1..=cfg.max_iterations {
        let selected_from = utilities;
        let heuristic = utilities.select(&mut search_rng);
        let proposal = LowLevelHeuristic::from_id(heuristic).propose(&current, inst, &mut search_rng);
        let delta = current
            .delta_penalty(inst, &proposal.changes)
            .expect("heuristics only propose in-range, duplicate-free moves");
        let before = current.penalty();
        let candidate = before.checked_add_signed(delta).expect("penalty stays non-negative");

        let verdict = acceptance.decide(
            Decision {
                current: avg(reference),
                candidate: avg(candidate),
                best: avg(best.penalty()),
            },
            &mut accept_rng,
        );
        if verdict.accepted {
            current.commit(&proposal.changes, delta);
        }
        reference = if literal { candidate } else { current.penalty() };
        utilities = utilities.update(heuristic, candidate < before);
        if current.penalty() < best.penalty() {
            best = current.clone();
            iteration_of_best = iteration;
        }

        trace.push(IterationRecord {
            iteration,
            current_cost: avg(current.penalty()),
            best_cost: avg(best.penalty()),
            candidate_cost: avg(candidate),
            boundary: verdict.boundary_after,
            heuristic,
            accepted: verdict.accepted,
            reheated: verdict.reheated,
            utilities: *selected_from.utilities(),
            draw: verdict.draw,
        });
    }

    Ok(RunResult {
        variant: cfg.variant,
        seed: cfg.seed,
        best_cost: best.cost(),
        best,
        initial_cost,
        final_cost: current.cost(),
        iteration_of_best,
        initial_boundary,
        trace,
        wall_time: started.elapsed(),
    })
}

pub const RUN_LOG_HEADER: [&str; 13] = [
    "iteration",
    "current_cost",
    "best_cost",
    "boundary",
    "heuristic",
    "accepted",
    "reheated",
    "u0",
    "u1",
    "u2",
    "u3",
    "candidate_cost",
    "draw",
];

/// Writes the per-iteration run log as CSV. Floats use the shortest
/// representation that round-trips, so the log is byte-stable.
pub fn write_run_log<W: Write>(trace: &[IterationRecord], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_LOG_HEADER)?;
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in trace {
        let mut record = vec![
            r.iteration.to_string(),
            r.current_cost.to_string(),
            r.best_cost.to_string(),
            r.boundary.to_string(),
            r.heuristic.to_string(),
            flag(r.accepted),
            flag(r.reheated),
        ];
        record.extend(r.utilities.iter().map(f64::to_string));
        record.push(r.candidate_cost.to_string());
        record.push(r.draw.map(|d| d.to_string()).unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush()
}
