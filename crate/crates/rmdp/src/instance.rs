//! Domain types for finite-horizon robust MDPs.
//!
//! Stages are indexed `0..T` internally. State and action identifiers are
//! dense per-stage integer indices, so state/action spaces may differ from
//! stage to stage. Stages without a real decision (the gadgets use these)
//! carry a single dummy action, which keeps cost tables and policies total.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RmdpError};

/// Row-stochasticity tolerance. Rows farther than this from summing to one
/// are rejected by validation rather than renormalized, so generator bugs
/// surface instead of being masked.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// State/action counts of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageShape {
    pub num_states: usize,
    pub num_actions: usize,
}

/// A finite-horizon MDP skeleton: per-stage spaces and cost tables.
///
/// `cost[t][s][a]` is the stage-`t` cost of taking action `a` in state `s`.
/// Transition kernels live outside this type (see [`Kernel`]) because the
/// robust setting attaches several of them to one skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHorizonMdp {
    pub stages: Vec<StageShape>,
    pub cost: Vec<Vec<Vec<f64>>>,
}

impl FiniteHorizonMdp {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn num_states(&self, t: usize) -> usize {
        self.stages[t].num_states
    }

    pub fn num_actions(&self, t: usize) -> usize {
        self.stages[t].num_actions
    }

    /// Largest absolute cost in the table; 0 for an all-empty table.
    pub fn max_abs_cost(&self) -> f64 {
        self.cost
            .iter()
            .flatten()
            .flatten()
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// True when every cost is an integer value, part of the exact
    /// integer-arithmetic fast path used by the exhaustive solver.
    pub fn costs_are_integer(&self) -> bool {
        self.cost
            .iter()
            .flatten()
            .flatten()
            .all(|c| c.fract() == 0.0 && c.is_finite())
    }
}

/// A transition kernel: `trans[t][s][a]` is the probability vector over
/// stage-`t+1` states, for `t` in `0..T-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub trans: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Kernel {
    /// True when every row is a point mass (all entries 0 or 1).
    pub fn is_deterministic(&self) -> bool {
        self.trans
            .iter()
            .flatten()
            .flatten()
            .all(|row| row.iter().all(|&p| p == 0.0 || p == 1.0))
    }

    /// Successor of `(t, s, a)` under a deterministic kernel.
    pub fn successor(&self, t: usize, s: usize, a: usize) -> Option<usize> {
        self.trans[t][s][a].iter().position(|&p| p == 1.0)
    }
}

/// An ordered, finite ambiguity set of transition kernels.
///
/// `K = 1` is the degenerate non-robust case; kernels need not be distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    pub kernels: Vec<Kernel>,
}

impl AmbiguitySet {
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

/// A deterministic Markov policy: `act[t][s]` is the chosen action index.
/// Rows exist for every stage, including dummy-action stages (where the
/// only choice is action 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyMd {
    pub act: Vec<Vec<usize>>,
}

/// A randomized Markov policy: `dist[t][s]` is a probability vector over
/// the stage-`t` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMr {
    pub dist: Vec<Vec<Vec<f64>>>,
}

impl PolicyMr {
    /// Uniform policy for the given stage shapes.
    pub fn uniform(mdp: &FiniteHorizonMdp) -> Self {
        let dist = mdp
            .stages
            .iter()
            .map(|sh| vec![vec![1.0 / sh.num_actions as f64; sh.num_actions]; sh.num_states])
            .collect();
        PolicyMr { dist }
    }

    /// Total number of scalar coordinates across all rows.
    pub fn coord_count(&self) -> usize {
        self.dist.iter().flatten().map(Vec::len).sum()
    }

    /// Flatten all rows into one coordinate vector, stage-major, state-minor,
    /// action index fastest.
    pub fn flatten(&self) -> Vec<f64> {
        self.dist.iter().flatten().flatten().copied().collect()
    }

    /// Euclidean distance between two policies over all coordinates.
    pub fn distance(&self, other: &PolicyMr) -> f64 {
        let a = self.flatten();
        let b = other.flatten();
        assert_eq!(a.len(), b.len(), "policies have different coordinate counts");
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Point-mass embedding of a deterministic policy into the randomized class.
pub fn embed_md(mdp: &FiniteHorizonMdp, policy: &PolicyMd) -> PolicyMr {
    let dist = mdp
        .stages
        .iter()
        .enumerate()
        .map(|(t, sh)| {
            (0..sh.num_states)
                .map(|s| {
                    let mut row = vec![0.0; sh.num_actions];
                    row[policy.act[t][s]] = 1.0;
                    row
                })
                .collect()
        })
        .collect();
    PolicyMr { dist }
}

/// Recover the deterministic policy from a point-mass randomized one by
/// taking the per-row argmax (lowest index on ties).
pub fn argmax_policy(policy: &PolicyMr) -> PolicyMd {
    let act = policy
        .dist
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|row| {
                    let mut best = 0;
                    for (a, &p) in row.iter().enumerate() {
                        if p > row[best] {
                            best = a;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    PolicyMd { act }
}

/// An MDP skeleton, its kernel ambiguity set, and the initial state: the
/// unit every solver and generator works on.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustInstance {
    pub mdp: FiniteHorizonMdp,
    pub ambiguity: AmbiguitySet,
    pub initial_state: usize,
}

impl RobustInstance {
    pub fn horizon(&self) -> usize {
        self.mdp.horizon()
    }

    /// True when all kernels are deterministic, enabling the exact
    /// trajectory-following evaluation path.
    pub fn is_deterministic(&self) -> bool {
        self.ambiguity.kernels.iter().all(Kernel::is_deterministic)
    }
}

/// One structural rule violation, naming where it happened.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Stage index the violation is located at, when applicable.
    pub stage: Option<usize>,
    /// Human-readable location within the stage (state/action/kernel).
    pub location: String,
    /// The rule that was broken.
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stage {
            Some(t) => write!(f, "stage {}: {}: {}", t, self.location, self.rule),
            None => write!(f, "{}: {}", self.location, self.rule),
        }
    }
}

fn violation(stage: impl Into<Option<usize>>, location: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation {
        stage: stage.into(),
        location: location.into(),
        rule: rule.into(),
    }
}

/// Check every structural invariant of an instance. Returns an empty list
/// iff the instance is well-formed; nothing is thrown, the violations are
/// the report.
pub fn validate(instance: &RobustInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mdp = &instance.mdp;
    let horizon = mdp.horizon();

    if horizon == 0 {
        out.push(violation(None, "mdp", "horizon must be a positive stage count"));
        return out;
    }

    for (t, sh) in mdp.stages.iter().enumerate() {
        if sh.num_states == 0 {
            out.push(violation(t, "states", "state set must be nonempty"));
        }
        if sh.num_actions == 0 {
            out.push(violation(
                t,
                "actions",
                "action set must be nonempty (use a single dummy action for decision-free stages)",
            ));
        }
    }

    // Cost table totality and finiteness.
    if mdp.cost.len() != horizon {
        out.push(violation(
            None,
            "costs",
            format!("cost table covers {} stages, expected {}", mdp.cost.len(), horizon),
        ));
    }
    for (t, sh) in mdp.stages.iter().enumerate() {
        let Some(stage_cost) = mdp.cost.get(t) else { continue };
        if stage_cost.len() != sh.num_states {
            out.push(violation(
                t,
                "costs",
                format!("cost rows for {} states, expected {}", stage_cost.len(), sh.num_states),
            ));
            continue;
        }
        for (s, row) in stage_cost.iter().enumerate() {
            if row.len() != sh.num_actions {
                out.push(violation(
                    t,
                    format!("cost row (state {s})"),
                    format!("has {} entries, expected one per action ({})", row.len(), sh.num_actions),
                ));
            }
            for (a, &c) in row.iter().enumerate() {
                if !c.is_finite() {
                    out.push(violation(
                        t,
                        format!("cost (state {s}, action {a})"),
                        format!("must be a finite real, got {c}"),
                    ));
                }
            }
        }
    }

    if instance.ambiguity.is_empty() {
        out.push(violation(None, "ambiguity set", "must contain at least one kernel"));
    }

    for (k, kernel) in instance.ambiguity.kernels.iter().enumerate() {
        validate_kernel(mdp, kernel, k, &mut out);
    }

    let s0_count = mdp.stages.first().map_or(0, |sh| sh.num_states);
    if instance.initial_state >= s0_count {
        out.push(violation(
            0,
            "initial state",
            format!("index {} outside the {} stage-0 states", instance.initial_state, s0_count),
        ));
    }

    out
}

fn validate_kernel(mdp: &FiniteHorizonMdp, kernel: &Kernel, k: usize, out: &mut Vec<Violation>) {
    let horizon = mdp.horizon();
    let expected = horizon.saturating_sub(1);
    if kernel.trans.len() != expected {
        out.push(violation(
            None,
            format!("kernel {k}"),
            format!("covers {} transition stages, expected {}", kernel.trans.len(), expected),
        ));
        return;
    }
    for t in 0..expected {
        let sh = mdp.stages[t];
        let next = mdp.stages[t + 1].num_states;
        let stage = &kernel.trans[t];
        if stage.len() != sh.num_states {
            out.push(violation(
                t,
                format!("kernel {k}"),
                format!("rows for {} states, expected {}", stage.len(), sh.num_states),
            ));
            continue;
        }
        for (s, per_action) in stage.iter().enumerate() {
            if per_action.len() != sh.num_actions {
                out.push(violation(
                    t,
                    format!("kernel {k} (state {s})"),
                    format!("rows for {} actions, expected {}", per_action.len(), sh.num_actions),
                ));
                continue;
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != next {
                    out.push(violation(
                        t,
                        format!("kernel {k} row (state {s}, action {a})"),
                        format!("has {} entries, expected one per successor state ({})", row.len(), next),
                    ));
                    continue;
                }
                if let Some(&p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                    out.push(violation(
                        t,
                        format!("kernel {k} row (state {s}, action {a})"),
                        format!("probabilities must be nonnegative finite reals, got {p}"),
                    ));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(violation(
                        t,
                        format!("kernel {k} row (state {s}, action {a})"),
                        format!("sums to {sum}, must be 1 within {ROW_SUM_TOL:e}"),
                    ));
                }
            }
        }
    }
}

/// Shape-check a randomized policy against an MDP, including that every row
/// is a probability vector.
pub fn check_policy_mr(mdp: &FiniteHorizonMdp, policy: &PolicyMr) -> Result<()> {
    if policy.dist.len() != mdp.horizon() {
        return Err(RmdpError::DimensionMismatch(format!(
            "policy covers {} stages, MDP has {}",
            policy.dist.len(),
            mdp.horizon()
        )));
    }
    for (t, sh) in mdp.stages.iter().enumerate() {
        if policy.dist[t].len() != sh.num_states {
            return Err(RmdpError::DimensionMismatch(format!(
                "policy stage {} has {} state rows, expected {}",
                t,
                policy.dist[t].len(),
                sh.num_states
            )));
        }
        for (s, row) in policy.dist[t].iter().enumerate() {
            if row.len() != sh.num_actions {
                return Err(RmdpError::DimensionMismatch(format!(
                    "policy row (stage {}, state {}) has {} entries, expected {}",
                    t,
                    s,
                    row.len(),
                    sh.num_actions
                )));
            }
        }
    }
    Ok(())
}

/// Shape-check a deterministic policy against an MDP.
pub fn check_policy_md(mdp: &FiniteHorizonMdp, policy: &PolicyMd) -> Result<()> {
    if policy.act.len() != mdp.horizon() {
        return Err(RmdpError::DimensionMismatch(format!(
            "policy covers {} stages, MDP has {}",
            policy.act.len(),
            mdp.horizon()
        )));
    }
    for (t, sh) in mdp.stages.iter().enumerate() {
        if policy.act[t].len() != sh.num_states {
            return Err(RmdpError::DimensionMismatch(format!(
                "policy stage {} has {} state rows, expected {}",
                t,
                policy.act[t].len(),
                sh.num_states
            )));
        }
        if let Some((s, &a)) = policy.act[t].iter().enumerate().find(|(_, &a)| a >= sh.num_actions) {
            return Err(RmdpError::DimensionMismatch(format!(
                "policy action {} at (stage {}, state {}) outside the {} actions",
                a, t, s, sh.num_actions
            )));
        }
    }
    Ok(())
}

/// Check that a kernel has the exact shape the MDP requires.
pub fn check_kernel(mdp: &FiniteHorizonMdp, kernel: &Kernel) -> Result<()> {
    let mut violations = Vec::new();
    validate_kernel(mdp, kernel, 0, &mut violations);
    // Shape problems are mismatches; stochasticity problems are the
    // caller's to care about via `validate`.
    match violations
        .iter()
        .find(|v| v.rule.contains("expected") || v.rule.contains("covers"))
    {
        Some(v) => Err(RmdpError::DimensionMismatch(v.to_string())),
        None => Ok(()),
    }
}
