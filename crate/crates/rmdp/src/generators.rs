//! Structured hard-instance generators.
//!
//! Two constructions drive most of the toolkit:
//!
//! - the *partition gadget*: a `2n`-stage instance whose exhaustive
//!   deterministic optimum hits half the total weight exactly when the
//!   weight multiset splits into two equal halves, wired to an independent
//!   subset-sum decision procedure;
//! - the *local-minimizer gadget*: a three-stage, two-kernel instance whose
//!   robust value surface has a strict local minimizer at value 0 while the
//!   global minimum is -1.
//!
//! Both extend to a discounted stationary form by chaining the stage state
//! sets in front of an absorbing zero-cost sink.

use crate::error::{Result, RmdpError};
use crate::instance::{AmbiguitySet, FiniteHorizonMdp, Kernel, PolicyMr, RobustInstance, StageShape};

/// Positive weights `w_1..w_n` defining a partition problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub weights: Vec<f64>,
}

impl PartitionSpec {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(RmdpError::InvalidArgument("weight list must be nonempty".into()));
        }
        if let Some(&w) = weights.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(RmdpError::InvalidArgument(format!(
                "weights must be positive finite reals, got {w}"
            )));
        }
        Ok(PartitionSpec { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Action count and payoff matrix for the general local-minimizer family.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGadgetSpec {
    pub n: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl MatrixGadgetSpec {
    pub fn new(n: usize, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(RmdpError::InvalidArgument("action count must be positive".into()));
        }
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(RmdpError::InvalidArgument(format!("matrix must be {n}x{n}")));
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RmdpError::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(MatrixGadgetSpec { n, matrix })
    }
}

fn point_mass(len: usize, at: usize) -> Vec<f64> {
    let mut row = vec![0.0; len];
    row[at] = 1.0;
    row
}

/// Build the two-kernel partition instance for the given weights.
///
/// Horizon `2n`. Odd stages (0-based even index) hold the single state of
/// round `t` with actions `{0,1}` and zero cost; even stages hold states
/// `{0,1}` with a dummy action and costs `(w_t, 0)`. The first kernel sends
/// action `a` to state `a`, the second to state `1-a`; both advance
/// deterministically from even stages to the next round. A policy therefore
/// pays `w_t` under the first kernel exactly on the rounds where it picks
/// action 0, and under the second kernel on the complementary rounds.
pub fn partition_instance(spec: &PartitionSpec) -> Result<RobustInstance> {
    if spec.weights.is_empty() {
        return Err(RmdpError::InvalidArgument("weight list must be nonempty".into()));
    }
    let n = spec.len();
    let horizon = 2 * n;
    let mut stages = Vec::with_capacity(horizon);
    let mut cost = Vec::with_capacity(horizon);
    for &w in &spec.weights {
        stages.push(StageShape { num_states: 1, num_actions: 2 });
        cost.push(vec![vec![0.0, 0.0]]);
        stages.push(StageShape { num_states: 2, num_actions: 1 });
        cost.push(vec![vec![w], vec![0.0]]);
    }

    let mut straight = Vec::with_capacity(horizon - 1);
    let mut crossed = Vec::with_capacity(horizon - 1);
    for t in 0..horizon - 1 {
        if t % 2 == 0 {
            // Decision stage: action a lands on state a (straight) or 1-a (crossed).
            straight.push(vec![vec![point_mass(2, 0), point_mass(2, 1)]]);
            crossed.push(vec![vec![point_mass(2, 1), point_mass(2, 0)]]);
        } else {
            // Bookkeeping stage: both states funnel into the next round's single state.
            straight.push(vec![vec![point_mass(1, 0)], vec![point_mass(1, 0)]]);
            crossed.push(vec![vec![point_mass(1, 0)], vec![point_mass(1, 0)]]);
        }
    }

    Ok(RobustInstance {
        mdp: FiniteHorizonMdp { stages, cost },
        ambiguity: AmbiguitySet {
            kernels: vec![Kernel { trans: straight }, Kernel { trans: crossed }],
        },
        initial_state: 0,
    })
}

/// Maximum weight total accepted by the subset-sum decision procedure.
pub const SUBSET_SUM_GUARD: u64 = 10_000_000;

/// Decide whether the weights split into two equal-sum parts.
///
/// Pseudo-polynomial dynamic program over achievable subset sums, entirely
/// independent of the MDP machinery. Weights must be integral (scale
/// rationals before calling); an odd total is an immediate no.
pub fn subset_sum_oracle(spec: &PartitionSpec) -> Result<bool> {
    let mut weights = Vec::with_capacity(spec.len());
    for &w in &spec.weights {
        if w.fract() != 0.0 || !w.is_finite() || w <= 0.0 {
            return Err(RmdpError::Precondition(format!(
                "subset-sum oracle requires positive integer weights, got {w}"
            )));
        }
        weights.push(w as u64);
    }
    let total: u64 = weights.iter().sum();
    if total > SUBSET_SUM_GUARD {
        return Err(RmdpError::SizeGuard {
            what: "subset-sum weight total",
            actual: total as u128,
            limit: SUBSET_SUM_GUARD as u128,
        });
    }
    if total % 2 == 1 {
        return Ok(false);
    }
    let target = (total / 2) as usize;
    let mut reachable = vec![false; target + 1];
    reachable[0] = true;
    for &w in &weights {
        let w = w as usize;
        if w > target {
            continue;
        }
        for sum in (w..=target).rev() {
            if reachable[sum - w] {
                reachable[sum] = true;
            }
        }
    }
    Ok(reachable[target])
}

/// General three-stage gadget for an `n x n` payoff matrix.
///
/// Stage 0 is a single state with `n` actions; stage 1 has `n` states and
/// `n` actions; stage 2 has `n*n` terminal states `(i,j)` (flattened as
/// `i*n + j`) with a dummy action and cost `matrix[i][j]`. The first kernel
/// routes action `i` to state `i` and then `(i, j)` to `(i, j)`; the second
/// reverses the first move, routing action `i` to state `n-1-i` and
/// `(i, j)` to `(n-1-i, j)`.
pub fn matrix_gadget_instance(spec: &MatrixGadgetSpec) -> RobustInstance {
    let n = spec.n;
    let stages = vec![
        StageShape { num_states: 1, num_actions: n },
        StageShape { num_states: n, num_actions: n },
        StageShape { num_states: n * n, num_actions: 1 },
    ];
    let cost = vec![
        vec![vec![0.0; n]],
        vec![vec![0.0; n]; n],
        (0..n * n).map(|idx| vec![spec.matrix[idx / n][idx % n]]).collect(),
    ];

    let straight = Kernel {
        trans: vec![
            vec![(0..n).map(|i| point_mass(n, i)).collect()],
            (0..n)
                .map(|i| (0..n).map(|j| point_mass(n * n, i * n + j)).collect())
                .collect(),
        ],
    };
    let reversed = Kernel {
        trans: vec![
            vec![(0..n).map(|i| point_mass(n, n - 1 - i)).collect()],
            (0..n)
                .map(|i| (0..n).map(|j| point_mass(n * n, (n - 1 - i) * n + j)).collect())
                .collect(),
        ],
    };

    RobustInstance {
        mdp: FiniteHorizonMdp { stages, cost },
        ambiguity: AmbiguitySet { kernels: vec![straight, reversed] },
        initial_state: 0,
    }
}

/// The fixed two-action local-minimizer gadget: payoff `[[1, 0], [-1, 1]]`.
///
/// Its robust value surface has a strict local minimizer at value 0 (first
/// action taken surely, both second-stage rows on action 1) while the global
/// minimum over randomized policies is -1.
pub fn local_minimizer_instance() -> RobustInstance {
    matrix_gadget_instance(
        &MatrixGadgetSpec::new(2, vec![vec![1.0, 0.0], vec![-1.0, 1.0]]).unwrap(),
    )
}

/// The strict-local-minimizer policy of [`local_minimizer_instance`]:
/// first stage (1,0), both second-stage rows (0,1).
pub fn local_minimizer_trap_policy() -> PolicyMr {
    PolicyMr {
        dist: vec![
            vec![vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![vec![1.0]; 4],
        ],
    }
}

/// A global minimizer of [`local_minimizer_instance`], attaining -1.
pub fn local_minimizer_global_policy() -> PolicyMr {
    PolicyMr {
        dist: vec![
            vec![vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![1.0]; 4],
        ],
    }
}

/// A stationary (infinite-horizon, discounted) robust instance.
///
/// Produced by [`extend_infinite_horizon`]: the state set is the disjoint
/// union of the per-stage state sets plus one absorbing sink with zero cost,
/// and each kernel acts stage-block by stage-block exactly as in the finite
/// instance, with the last stage feeding the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteHorizonInstance {
    /// Admissible action count per global state.
    pub num_actions: Vec<usize>,
    /// `cost[s][a]` over global states.
    pub cost: Vec<Vec<f64>>,
    /// `kernels[k][s][a]` is a probability vector over global states.
    pub kernels: Vec<Vec<Vec<Vec<f64>>>>,
    /// Discount factor, strictly inside (0, 1).
    pub gamma: f64,
    /// First global index of each stage block (same order as the finite
    /// instance's stages).
    pub stage_offsets: Vec<usize>,
    /// Global index of the absorbing sink.
    pub sink: usize,
    /// Global index of the embedded initial state.
    pub initial_state: usize,
}

impl InfiniteHorizonInstance {
    pub fn num_states(&self) -> usize {
        self.num_actions.len()
    }

    /// Global index of finite-instance state `s` at stage `t`.
    pub fn global_index(&self, t: usize, s: usize) -> usize {
        self.stage_offsets[t] + s
    }

    /// Uniform stationary policy.
    pub fn uniform_policy(&self) -> StationaryPolicy {
        StationaryPolicy {
            dist: self
                .num_actions
                .iter()
                .map(|&na| vec![1.0 / na as f64; na])
                .collect(),
        }
    }
}

/// A stationary randomized policy over the global state set.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicy {
    pub dist: Vec<Vec<f64>>,
}

/// Embed a finite-horizon instance into the discounted stationary setting.
///
/// Global states are the stage states laid out block by block, followed by
/// the sink. Each kernel keeps its finite-horizon rows (re-targeted at the
/// next block), the last stage transitions to the sink with probability 1,
/// and the sink absorbs at zero cost under every kernel.
pub fn extend_infinite_horizon(instance: &RobustInstance, gamma: f64) -> Result<InfiniteHorizonInstance> {
    if !(gamma > 0.0 && gamma < 1.0) || !gamma.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "discount factor must lie strictly inside (0, 1), got {gamma}"
        )));
    }
    let mdp = &instance.mdp;
    let horizon = mdp.horizon();
    let mut stage_offsets = Vec::with_capacity(horizon);
    let mut num_states = 0;
    for sh in &mdp.stages {
        stage_offsets.push(num_states);
        num_states += sh.num_states;
    }
    let sink = num_states;
    num_states += 1;

    let mut num_actions = Vec::with_capacity(num_states);
    let mut cost = Vec::with_capacity(num_states);
    for (t, sh) in mdp.stages.iter().enumerate() {
        for s in 0..sh.num_states {
            num_actions.push(sh.num_actions);
            cost.push(mdp.cost[t][s].clone());
        }
    }
    num_actions.push(1);
    cost.push(vec![0.0]);

    let kernels = instance
        .ambiguity
        .kernels
        .iter()
        .map(|kernel| {
            let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(num_states);
            for (t, sh) in mdp.stages.iter().enumerate() {
                for s in 0..sh.num_states {
                    let mut per_action = Vec::with_capacity(sh.num_actions);
                    for a in 0..sh.num_actions {
                        let mut row = vec![0.0; num_states];
                        if t + 1 < horizon {
                            let base = stage_offsets[t + 1];
                            for (s2, &p) in kernel.trans[t][s][a].iter().enumerate() {
                                row[base + s2] = p;
                            }
                        } else {
                            row[sink] = 1.0;
                        }
                        per_action.push(row);
                    }
                    rows.push(per_action);
                }
            }
            let mut sink_row = vec![0.0; num_states];
            sink_row[sink] = 1.0;
            rows.push(vec![sink_row]);
            rows
        })
        .collect();

    Ok(InfiniteHorizonInstance {
        num_actions,
        cost,
        kernels,
        gamma,
        stage_offsets,
        sink,
        initial_state: instance.initial_state,
    })
}

/// Residual demanded of the discounted evaluation fixed point.
pub const DISCOUNTED_RESIDUAL_TOL: f64 = 1e-12;

/// Discounted value of a stationary policy under one kernel, from `s0`.
///
/// Solves `V = c_pi + gamma * P_pi V` by dense Gaussian elimination and
/// checks the residual against [`DISCOUNTED_RESIDUAL_TOL`].
pub fn evaluate_discounted(
    inst: &InfiniteHorizonInstance,
    kernel_index: usize,
    policy: &StationaryPolicy,
    s0: usize,
) -> Result<f64> {
    let n = inst.num_states();
    if kernel_index >= inst.kernels.len() {
        return Err(RmdpError::DimensionMismatch(format!(
            "kernel index {} outside the {} kernels",
            kernel_index,
            inst.kernels.len()
        )));
    }
    if s0 >= n {
        return Err(RmdpError::DimensionMismatch(format!(
            "state {s0} outside the {n} global states"
        )));
    }
    if policy.dist.len() != n {
        return Err(RmdpError::DimensionMismatch(format!(
            "stationary policy covers {} states, expected {}",
            policy.dist.len(),
            n
        )));
    }
    for (s, row) in policy.dist.iter().enumerate() {
        if row.len() != inst.num_actions[s] {
            return Err(RmdpError::DimensionMismatch(format!(
                "stationary policy row {} has {} entries, expected {}",
                s,
                row.len(),
                inst.num_actions[s]
            )));
        }
    }

    let kernel = &inst.kernels[kernel_index];
    // Policy-averaged cost vector and transition matrix.
    let mut c_pi = vec![0.0; n];
    let mut p_pi = vec![vec![0.0; n]; n];
    for s in 0..n {
        for a in 0..inst.num_actions[s] {
            let w = policy.dist[s][a];
            if w == 0.0 {
                continue;
            }
            c_pi[s] += w * inst.cost[s][a];
            for (s2, &p) in kernel[s][a].iter().enumerate() {
                p_pi[s][s2] += w * p;
            }
        }
    }

    // Solve (I - gamma P_pi) V = c_pi.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (if i == j { 1.0 } else { 0.0 }) - inst.gamma * p_pi[i][j])
                .collect()
        })
        .collect();
    let mut b = c_pi.clone();
    let v = solve_dense(&mut a, &mut b)?;

    let mut residual = 0.0_f64;
    for s in 0..n {
        let mut rhs = c_pi[s];
        for s2 in 0..n {
            rhs += inst.gamma * p_pi[s][s2] * v[s2];
        }
        residual = residual.max((v[s] - rhs).abs());
    }
    if residual > DISCOUNTED_RESIDUAL_TOL {
        return Err(RmdpError::Numeric(format!(
            "discounted evaluation residual {residual:e} exceeds {DISCOUNTED_RESIDUAL_TOL:e}"
        )));
    }
    Ok(v[s0])
}

/// Gaussian elimination with partial pivoting on a dense system.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(RmdpError::Numeric("singular discounted evaluation system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}
