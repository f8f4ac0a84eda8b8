//! Great-deluge move acceptance and its variants.
//!
//! All criteria work on the average-per-student cost and keep a water level
//! `B`. Improving or equal moves are always accepted; the variants differ in
//! how worse moves are admitted and how `B` evolves:
//!
//! * [`GreatDeluge`]: accept if the candidate is not above `B`; `B` falls
//!   linearly, reaching half its initial value at the end of the run.
//! * [`ExtendedGreatDeluge`]: as above, plus a reheat that lifts `B` after a
//!   fixed number of iterations without a new best solution.
//! * [`FlexDeluge`]: the threshold is `P + k_f (B - P)` for current cost
//!   `P < B` and `P` otherwise; `B` falls as in the plain deluge.
//! * [`NonLinearGreatDeluge`]: after every accepted move
//!   `B <- B * exp(-delta * u) + beta`, with `u` uniform in `[b_min, b_max]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_FLEX_COEFFICIENT: f64 = 0.5;
/// Reheat wait as a fraction of the iteration budget.
pub const DEFAULT_WAIT_FRACTION: f64 = 0.25;
pub const DEFAULT_REHEAT_LIFT: f64 = 0.1;
pub const DEFAULT_BETA: f64 = 0.0;
pub const DEFAULT_B_MIN: f64 = 100_000.0;
pub const DEFAULT_B_MAX: f64 = 300_000.0;
pub const DEFAULT_DELTA: f64 = 5e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Gd,
    Egd,
    Fd,
    Nlgd,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Gd, Variant::Egd, Variant::Fd, Variant::Nlgd];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Gd => "gd",
            Variant::Egd => "egd",
            Variant::Fd => "fd",
            Variant::Nlgd => "nlgd",
        }
    }

    /// Name of the full hyper-heuristic, e.g. `RL-EGD`.
    pub fn method_name(self) -> String {
        format!("RL-{}", self.as_str().to_uppercase())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = AcceptanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().trim_start_matches("rl-") {
            "gd" => Ok(Variant::Gd),
            "egd" => Ok(Variant::Egd),
            "fd" => Ok(Variant::Fd),
            "nlgd" => Ok(Variant::Nlgd),
            _ => Err(AcceptanceError::UnknownVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcceptanceError {
    #[error("unknown acceptance variant {0:?} (expected gd, egd, fd or nlgd)")]
    UnknownVariant(String),
    #[error("iteration budget must be positive")]
    NoIterations,
    #[error("initial cost must be finite and non-negative, got {0}")]
    InvalidInitialCost(f64),
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Tunables of all four criteria; each variant reads the fields it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceParams {
    /// Flexibility coefficient `k_f` of the flex deluge, in `[0, 1]`.
    pub kf: f64,
    /// Reheat wait of the extended deluge as a fraction of the budget.
    pub wait_fraction: f64,
    /// Reheat sets `B` to `(1 + reheat_lift)` times the higher of the
    /// incumbent cost and the current level.
    pub reheat_lift: f64,
    pub beta: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub delta: f64,
}

impl Default for AcceptanceParams {
    fn default() -> Self {
        Self {
            kf: DEFAULT_FLEX_COEFFICIENT,
            wait_fraction: DEFAULT_WAIT_FRACTION,
            reheat_lift: DEFAULT_REHEAT_LIFT,
            beta: DEFAULT_BETA,
            b_min: DEFAULT_B_MIN,
            b_max: DEFAULT_B_MAX,
            delta: DEFAULT_DELTA,
        }
    }
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), AcceptanceError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(AcceptanceError::InvalidParameter { name, value, reason })
    }
}

impl AcceptanceParams {
    pub fn validate(&self) -> Result<(), AcceptanceError> {
        check("kf", self.kf, (0.0..=1.0).contains(&self.kf), "must lie in [0, 1]")?;
        check(
            "wait_fraction",
            self.wait_fraction,
            self.wait_fraction > 0.0 && self.wait_fraction <= 1.0,
            "must lie in (0, 1]",
        )?;
        check(
            "reheat_lift",
            self.reheat_lift,
            self.reheat_lift >= 0.0,
            "must be non-negative",
        )?;
        check("beta", self.beta, self.beta >= 0.0, "must be non-negative")?;
        check("b_min", self.b_min, self.b_min >= 0.0, "must be non-negative")?;
        check("b_max", self.b_max, self.b_max >= self.b_min, "must be at least b_min")?;
        check("delta", self.delta, self.delta >= 0.0, "must be non-negative")?;
        Ok(())
    }

    /// Reheat wait in iterations: `ceil(wait_fraction * iterations)`, at least 1.
    pub fn wait_iterations(&self, iterations: usize) -> usize {
        ((self.wait_fraction * iterations as f64).ceil() as usize).max(1)
    }
}

/// Outcome of one acceptance decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub accepted: bool,
    /// Set only by the extended deluge.
    pub reheated: bool,
    pub boundary_after: f64,
    /// Uniform draw used for the non-linear level update, if one happened.
    pub draw: Option<f64>,
}

/// Costs seen by a criterion at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub current: f64,
    pub candidate: f64,
    pub best: f64,
}

fn initial_level(initial_cost: f64, iterations: usize) -> Result<(f64, f64), AcceptanceError> {
    if iterations == 0 {
        return Err(AcceptanceError::NoIterations);
    }
    if !(initial_cost.is_finite() && initial_cost >= 0.0) {
        return Err(AcceptanceError::InvalidInitialCost(initial_cost));
    }
    Ok((initial_cost, initial_cost * 0.5 / iterations as f64))
}

/// Plain great deluge with a linearly falling level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreatDeluge {
    boundary: f64,
    decay_rate: f64,
}

impl GreatDeluge {
    pub fn new(initial_cost: f64, iterations: usize) -> Result<Self, AcceptanceError> {
        let (boundary, decay_rate) = initial_level(initial_cost, iterations)?;
        Ok(Self { boundary, decay_rate })
    }

    pub fn boundary(&self) -> f64 {
        self.boundary
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    fn decay(&mut self) {
        self.boundary = (self.boundary - self.decay_rate).max(0.0);
    }

    pub fn accept(&mut self, current: f64, candidate: f64) -> Verdict {
        let accepted = candidate <= current || candidate <= self.boundary;
        self.decay();
        Verdict {
            accepted,
            reheated: false,
            boundary_after: self.boundary,
            draw: None,
        }
    }
}

/// Great deluge with reheating after `wait` iterations without a new best.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedGreatDeluge {
    boundary: f64,
    decay_rate: f64,
    wait: usize,
    stagnation: usize,
    reheat_lift: f64,
    total_iterations: usize,
    elapsed: usize,
}

impl ExtendedGreatDeluge {
    pub fn new(initial_cost: f64, iterations: usize, wait: usize, reheat_lift: f64) -> Result<Self, AcceptanceError> {
        let (boundary, decay_rate) = initial_level(initial_cost, iterations)?;
        check("wait", wait as f64, wait > 0, "must be positive")?;
        check("reheat_lift", reheat_lift, reheat_lift >= 0.0, "must be non-negative")?;
        Ok(Self {
            boundary,
            decay_rate,
            wait,
            stagnation: 0,
            reheat_lift,
            total_iterations: iterations,
            elapsed: 0,
        })
    }

    pub fn boundary(&self) -> f64 {
        self.boundary
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn wait(&self) -> usize {
        self.wait
    }

    /// Iterations since the last new best (or reheat).
    pub fn stagnation(&self) -> usize {
        self.stagnation
    }

    pub fn accept(&mut self, current: f64, candidate: f64, best: f64) -> Verdict {
        self.elapsed += 1;
        let accepted = candidate <= current || candidate <= self.boundary;
        let incumbent = if accepted { candidate } else { current };
        if candidate < best {
            self.stagnation = 0;
        } else {
            self.stagnation += 1;
        }

        let reheated = self.stagnation >= self.wait;
        if reheated {
            self.boundary = incumbent.max(self.boundary) * (1.0 + self.reheat_lift);
            let remaining = self.total_iterations.saturating_sub(self.elapsed).max(1);
            self.decay_rate = self.boundary * 0.5 / remaining as f64;
            self.stagnation = 0;
        } else {
            self.boundary = (self.boundary - self.decay_rate).max(0.0);
        }
        Verdict {
            accepted,
            reheated,
            boundary_after: self.boundary,
            draw: None,
        }
    }
}

/// Flex deluge: the acceptance threshold interpolates between the current
/// cost and the level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlexDeluge {
    level: GreatDeluge,
    kf: f64,
}

impl FlexDeluge {
    pub fn new(initial_cost: f64, iterations: usize, kf: f64) -> Result<Self, AcceptanceError> {
        check("kf", kf, (0.0..=1.0).contains(&kf), "must lie in [0, 1]")?;
        Ok(Self {
            level: GreatDeluge::new(initial_cost, iterations)?,
            kf,
        })
    }

    pub fn boundary(&self) -> f64 {
        self.level.boundary
    }

    pub fn kf(&self) -> f64 {
        self.kf
    }

    /// `P + k_f (B - P)` when `P < B`, else `P`. Written as the convex
    /// combination so that `k_f = 1` yields exactly `B` and `k_f = 0`
    /// exactly `P`.
    pub fn threshold(&self, current: f64) -> f64 {
        let b = self.level.boundary;
        if current < b {
            (1.0 - self.kf) * current + self.kf * b
        } else {
            current
        }
    }

    pub fn accept(&mut self, current: f64, candidate: f64) -> Verdict {
        let accepted = candidate <= self.threshold(current);
        self.level.decay();
        Verdict {
            accepted,
            reheated: false,
            boundary_after: self.level.boundary,
            draw: None,
        }
    }
}

/// Non-linear great deluge: the level shrinks multiplicatively on every
/// accepted move.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonLinearGreatDeluge {
    boundary: f64,
    beta: f64,
    b_min: f64,
    b_max: f64,
    delta: f64,
}

impl NonLinearGreatDeluge {
    pub fn new(initial_cost: f64, iterations: usize, params: &AcceptanceParams) -> Result<Self, AcceptanceError> {
        let (boundary, _) = initial_level(initial_cost, iterations)?;
        params.validate()?;
        Ok(Self {
            boundary,
            beta: params.beta,
            b_min: params.b_min,
            b_max: params.b_max,
            delta: params.delta,
        })
    }

    pub fn boundary(&self) -> f64 {
        self.boundary
    }

    /// `(beta, b_min, b_max, delta)`
    pub fn parameters(&self) -> (f64, f64, f64, f64) {
        (self.beta, self.b_min, self.b_max, self.delta)
    }

    /// Level after one update with draw `u`.
    pub fn next_level(&self, u: f64) -> f64 {
        self.boundary * (-self.delta * u).exp() + self.beta
    }

    pub fn accept<R: Rng + ?Sized>(&mut self, current: f64, candidate: f64, rng: &mut R) -> Verdict {
        let accepted = candidate <= current || candidate <= self.boundary;
        let mut draw = None;
        if accepted {
            let u = rng.random_range(self.b_min..=self.b_max);
            self.boundary = self.next_level(u);
            draw = Some(u);
        }
        Verdict {
            accepted,
            reheated: false,
            boundary_after: self.boundary,
            draw,
        }
    }
}

/// One of the four criteria behind a common interface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Acceptance {
    Gd(GreatDeluge),
    Egd(ExtendedGreatDeluge),
    Fd(FlexDeluge),
    Nlgd(NonLinearGreatDeluge),
}

impl Acceptance {
    /// Starts the level at the initial cost.
    pub fn new(
        variant: Variant,
        initial_cost: f64,
        iterations: usize,
        params: &AcceptanceParams,
    ) -> Result<Self, AcceptanceError> {
        params.validate()?;
        Ok(match variant {
            Variant::Gd => Acceptance::Gd(GreatDeluge::new(initial_cost, iterations)?),
            Variant::Egd => Acceptance::Egd(ExtendedGreatDeluge::new(
                initial_cost,
                iterations,
                params.wait_iterations(iterations),
                params.reheat_lift,
            )?),
            Variant::Fd => Acceptance::Fd(FlexDeluge::new(initial_cost, iterations, params.kf)?),
            Variant::Nlgd => Acceptance::Nlgd(NonLinearGreatDeluge::new(initial_cost, iterations, params)?),
        })
    }

    pub fn variant(&self) -> Variant {
        match self {
            Acceptance::Gd(_) => Variant::Gd,
            Acceptance::Egd(_) => Variant::Egd,
            Acceptance::Fd(_) => Variant::Fd,
            Acceptance::Nlgd(_) => Variant::Nlgd,
        }
    }

    pub fn boundary(&self) -> f64 {
        match self {
            Acceptance::Gd(a) => a.boundary(),
            Acceptance::Egd(a) => a.boundary(),
            Acceptance::Fd(a) => a.boundary(),
            Acceptance::Nlgd(a) => a.boundary(),
        }
    }

    pub fn decide<R: Rng + ?Sized>(&mut self, d: Decision, rng: &mut R) -> Verdict {
        match self {
            Acceptance::Gd(a) => a.accept(d.current, d.candidate),
            Acceptance::Egd(a) => a.accept(d.current, d.candidate, d.best),
            Acceptance::Fd(a) => a.accept(d.current, d.candidate),
            Acceptance::Nlgd(a) => a.accept(d.current, d.candidate, rng),
        }
    }
}
