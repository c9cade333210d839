//! Dynamic (per-stage adversary) formulation.
//!
//! Here the adversary re-selects a kernel at every stage and state instead
//! of committing up front, which restores a dynamic-programming
//! decomposition: each state solves a small matrix game between the action
//! mixture and the kernel choice. Explicit rectangularized ambiguity sets
//! are materialized (at test scale only) to check the DP against the static
//! formulation.

use crate::error::{Result, RmdpError};
use crate::instance::{check_policy_mr, AmbiguitySet, Kernel, PolicyMd, PolicyMr, RobustInstance};

/// Default accuracy of the per-state inner solve.
pub const DEFAULT_GAME_EPS: f64 = 1e-9;

/// Cap on the number of composite kernels an explicit rectangularization
/// may materialize.
pub const RECTANGULARIZATION_GUARD: u128 = 1 << 20;

/// The stage-(t, s) inner problem: rows are actions, columns are kernels,
/// entry (a, k) is the immediate cost plus the kernel-k expected
/// continuation value.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    pub payoff: Vec<Vec<f64>>,
}

impl MatrixGame {
    pub fn num_actions(&self) -> usize {
        self.payoff.len()
    }

    pub fn num_columns(&self) -> usize {
        self.payoff.first().map_or(0, Vec::len)
    }
}

/// A mixed strategy and the game value it certifies.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub strategy: Vec<f64>,
    pub value: f64,
}

/// Solve `min_{x in simplex} max_k (x' M)_k` to within `eps`.
///
/// The optimum sits at a vertex of `{(x, v) : sum x = 1, x >= 0, M'x <= v}`,
/// so for the small games this toolkit builds we enumerate basic solutions
/// directly: every way of making the system square with tight columns and
/// zeroed coordinates. Deterministic; the returned value is the max column
/// actually achieved by the returned strategy.
pub fn matrix_game_solve(game: &MatrixGame, eps: f64) -> Result<GameSolution> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "inner-solve tolerance must be positive, got {eps}"
        )));
    }
    let actions = game.num_actions();
    let columns = game.num_columns();
    if actions == 0 || columns == 0 {
        return Err(RmdpError::InvalidArgument("payoff matrix must be nonempty".into()));
    }
    if game.payoff.iter().any(|row| row.len() != columns) {
        return Err(RmdpError::InvalidArgument("payoff matrix must be rectangular".into()));
    }
    if game.payoff.iter().flatten().any(|v| !v.is_finite()) {
        return Err(RmdpError::InvalidArgument("payoff entries must be finite".into()));
    }

    // Degenerate adversary: pure minimization, ties to the lowest action.
    if columns == 1 {
        let mut best = 0;
        for (a, row) in game.payoff.iter().enumerate() {
            if row[0] < game.payoff[best][0] {
                best = a;
            }
        }
        let mut strategy = vec![0.0; actions];
        strategy[best] = 1.0;
        return Ok(GameSolution { strategy, value: game.payoff[best][0] });
    }

    // Constraint pool: x_a = 0 for each action, then column k tight.
    let total = actions + columns;
    let mut chosen = Vec::with_capacity(actions);
    let mut best: Option<(Vec<f64>, f64)> = None;
    enumerate_subsets(total, actions, &mut chosen, &mut |subset| {
        if let Some((x, v)) = solve_vertex(game, subset) {
            if feasible(game, &x, v) && best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((x, v));
            }
        }
    });
    let (raw, _) = best.ok_or_else(|| RmdpError::Numeric("matrix game has no basic feasible solution".into()))?;

    // Clean up rounding dust and report the value the strategy achieves.
    let mut strategy: Vec<f64> = raw.iter().map(|&x| x.max(0.0)).collect();
    let total_mass: f64 = strategy.iter().sum();
    strategy.iter_mut().for_each(|x| *x /= total_mass);
    let value = achieved_value(game, &strategy);
    Ok(GameSolution { strategy, value })
}

/// Worst (largest) column payoff of a mixed strategy.
pub fn achieved_value(game: &MatrixGame, strategy: &[f64]) -> f64 {
    (0..game.num_columns())
        .map(|k| {
            strategy
                .iter()
                .enumerate()
                .map(|(a, &x)| x * game.payoff[a][k])
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn enumerate_subsets<F: FnMut(&[usize])>(total: usize, size: usize, chosen: &mut Vec<usize>, f: &mut F) {
    let start = chosen.last().map_or(0, |&c| c + 1);
    if chosen.len() == size {
        f(chosen);
        return;
    }
    for c in start..total {
        chosen.push(c);
        enumerate_subsets(total, size, chosen, f);
        chosen.pop();
    }
}

/// Solve the square system defined by the simplex equality plus the chosen
/// active constraints. Returns `(x, v)` or None when singular.
fn solve_vertex(game: &MatrixGame, subset: &[usize]) -> Option<(Vec<f64>, f64)> {
    let actions = game.num_actions();
    let dim = actions + 1; // x coordinates plus the value variable
    let mut a = vec![vec![0.0; dim]; dim];
    let mut b = vec![0.0; dim];
    // sum_a x_a = 1
    for col in 0..actions {
        a[0][col] = 1.0;
    }
    b[0] = 1.0;
    for (row, &c) in subset.iter().enumerate() {
        let row = row + 1;
        if c < actions {
            a[row][c] = 1.0; // x_c = 0
        } else {
            let k = c - actions;
            for act in 0..actions {
                a[row][act] = game.payoff[act][k];
            }
            a[row][actions] = -1.0; // column k tight: M_k' x - v = 0
        }
    }
    let x = solve_square(&mut a, &mut b)?;
    let (coords, value) = x.split_at(actions);
    Some((coords.to_vec(), value[0]))
}

fn feasible(game: &MatrixGame, x: &[f64], v: f64) -> bool {
    let slack = 1e-9;
    if x.iter().any(|&xi| xi < -slack || !xi.is_finite()) || !v.is_finite() {
        return false;
    }
    if (x.iter().sum::<f64>() - 1.0).abs() > slack {
        return false;
    }
    (0..game.num_columns()).all(|k| {
        let payoff: f64 = x.iter().enumerate().map(|(a, &xi)| xi * game.payoff[a][k]).sum();
        payoff <= v + slack
    })
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_square(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
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
    Some(x)
}

/// Which policy class the backward induction optimizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyClass {
    Md,
    Mr,
}

/// The policy extracted by the dynamic program.
#[derive(Debug, Clone, PartialEq)]
pub enum DynamicPolicy {
    Md(PolicyMd),
    Mr(PolicyMr),
}

/// Backward-induction solution of the dynamic formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicSolution {
    /// `values[t][s]`; the terminal continuation is identically zero.
    pub values: Vec<Vec<f64>>,
    pub policy: DynamicPolicy,
    /// Max over states of the gap between a returned strategy's achieved
    /// worst column and its reported game value.
    pub game_values_residual: f64,
}

impl DynamicSolution {
    /// Value at the instance's initial state.
    pub fn root_value(&self, instance: &RobustInstance) -> f64 {
        self.values[0][instance.initial_state]
    }
}

/// Build the stage-(t, s) payoff matrix given next-stage values.
fn stage_game(instance: &RobustInstance, t: usize, s: usize, next: &[f64]) -> MatrixGame {
    let mdp = &instance.mdp;
    let payoff = (0..mdp.num_actions(t))
        .map(|a| {
            instance
                .ambiguity
                .kernels
                .iter()
                .map(|kernel| {
                    let mut q = mdp.cost[t][s][a];
                    if t + 1 < mdp.horizon() {
                        for (s2, &p) in kernel.trans[t][s][a].iter().enumerate() {
                            q += p * next[s2];
                        }
                    }
                    q
                })
                .collect()
        })
        .collect();
    MatrixGame { payoff }
}

/// Solve the dynamic equations by backward induction, one matrix game (MR)
/// or min-max scan (MD) per state. The terminal stage plays against bare
/// costs.
pub fn dynamic_dp_solve(instance: &RobustInstance, class: PolicyClass, eps: f64) -> Result<DynamicSolution> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "inner-solve tolerance must be positive, got {eps}"
        )));
    }
    if instance.ambiguity.is_empty() {
        return Err(RmdpError::InvalidArgument("ambiguity set is empty".into()));
    }
    let mdp = &instance.mdp;
    let horizon = mdp.horizon();
    let mut values = vec![Vec::new(); horizon];
    let mut act: Vec<Vec<usize>> = vec![Vec::new(); horizon];
    let mut dist: Vec<Vec<Vec<f64>>> = vec![Vec::new(); horizon];
    let mut residual = 0.0_f64;
    let mut next: Vec<f64> = Vec::new();
    for t in (0..horizon).rev() {
        let sh = mdp.stages[t];
        let mut stage_values = vec![0.0; sh.num_states];
        let mut stage_act = vec![0usize; sh.num_states];
        let mut stage_dist = vec![Vec::new(); sh.num_states];
        for s in 0..sh.num_states {
            let game = stage_game(instance, t, s, &next);
            match class {
                PolicyClass::Md => {
                    let mut best_a = 0;
                    let mut best_v = f64::INFINITY;
                    for (a, row) in game.payoff.iter().enumerate() {
                        let worst = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        if worst < best_v {
                            best_v = worst;
                            best_a = a;
                        }
                    }
                    stage_values[s] = best_v;
                    stage_act[s] = best_a;
                }
                PolicyClass::Mr => {
                    let solution = matrix_game_solve(&game, eps)?;
                    residual = residual.max((achieved_value(&game, &solution.strategy) - solution.value).abs());
                    stage_values[s] = solution.value;
                    stage_dist[s] = solution.strategy;
                }
            }
        }
        values[t] = stage_values.clone();
        act[t] = stage_act;
        dist[t] = stage_dist;
        next = stage_values;
    }
    let policy = match class {
        PolicyClass::Md => DynamicPolicy::Md(PolicyMd { act }),
        PolicyClass::Mr => DynamicPolicy::Mr(PolicyMr { dist }),
    };
    Ok(DynamicSolution {
        values,
        policy,
        game_values_residual: residual,
    })
}

/// Value of a fixed policy against the per-stage adversary:
/// `V_t(s) = max_k sum_a pi(a|s) [c + sum P_k V_{t+1}]`.
///
/// This is the dynamic equation with the minimization stripped, and equals
/// the static robust value over the per-state rectangularization.
pub fn per_stage_adversary_value(instance: &RobustInstance, policy: &PolicyMr) -> Result<f64> {
    check_policy_mr(&instance.mdp, policy)?;
    if instance.ambiguity.is_empty() {
        return Err(RmdpError::InvalidArgument("ambiguity set is empty".into()));
    }
    let mdp = &instance.mdp;
    let horizon = mdp.horizon();
    let mut next: Vec<f64> = Vec::new();
    for t in (0..horizon).rev() {
        let sh = mdp.stages[t];
        let mut cur = vec![0.0; sh.num_states];
        for (s, v) in cur.iter_mut().enumerate() {
            let game = stage_game(instance, t, s, &next);
            *v = achieved_value(&game, &policy.dist[t][s]);
        }
        next = cur;
    }
    Ok(next[instance.initial_state])
}

/// Granularity of an explicit rectangularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rectangularization {
    /// Choose a source kernel independently for every `(t, s, a)` row.
    PerStateAction,
    /// Choose a source kernel independently for every `(t, s)` block, so
    /// all action rows at a state come from the same kernel. This is the
    /// product set whose static optimum the dynamic program computes.
    PerState,
}

/// Number of composite kernels the rectangularization would materialize.
pub fn rectangularization_count(instance: &RobustInstance, granularity: Rectangularization) -> u128 {
    let k = instance.ambiguity.len() as u128;
    let mut count: u128 = 1;
    for t in 0..instance.horizon().saturating_sub(1) {
        let sh = instance.mdp.stages[t];
        let slots = match granularity {
            Rectangularization::PerStateAction => sh.num_states * sh.num_actions,
            Rectangularization::PerState => sh.num_states,
        };
        for _ in 0..slots {
            count = count.saturating_mul(k);
        }
    }
    count
}

/// Materialize the Cartesian-product ambiguity set at the chosen
/// granularity. Intended for tiny instances; guarded by
/// [`RECTANGULARIZATION_GUARD`].
pub fn rectangularize_enumerate(
    instance: &RobustInstance,
    granularity: Rectangularization,
) -> Result<AmbiguitySet> {
    let count = rectangularization_count(instance, granularity);
    if count > RECTANGULARIZATION_GUARD {
        return Err(RmdpError::SizeGuard {
            what: "rectangularization enumeration",
            actual: count,
            limit: RECTANGULARIZATION_GUARD,
        });
    }
    let k = instance.ambiguity.len();
    // One choice slot per row or per block, stage-major.
    let mut slots = Vec::new();
    for t in 0..instance.horizon().saturating_sub(1) {
        let sh = instance.mdp.stages[t];
        let per_stage = match granularity {
            Rectangularization::PerStateAction => sh.num_states * sh.num_actions,
            Rectangularization::PerState => sh.num_states,
        };
        for i in 0..per_stage {
            slots.push((t, i));
        }
    }
    let mut assignment = vec![0usize; slots.len()];
    let mut kernels = Vec::with_capacity(count as usize);
    loop {
        let mut trans = Vec::with_capacity(instance.horizon().saturating_sub(1));
        for t in 0..instance.horizon().saturating_sub(1) {
            let sh = instance.mdp.stages[t];
            let mut stage = Vec::with_capacity(sh.num_states);
            for s in 0..sh.num_states {
                let mut per_action = Vec::with_capacity(sh.num_actions);
                for a in 0..sh.num_actions {
                    let slot = slots
                        .iter()
                        .position(|&(st, si)| {
                            st == t
                                && si
                                    == match granularity {
                                        Rectangularization::PerStateAction => s * sh.num_actions + a,
                                        Rectangularization::PerState => s,
                                    }
                        })
                        .expect("slot exists");
                    let source = assignment[slot];
                    per_action.push(instance.ambiguity.kernels[source].trans[t][s][a].clone());
                }
                stage.push(per_action);
            }
            trans.push(stage);
        }
        kernels.push(Kernel { trans });
        // Odometer over kernel choices, last slot fastest.
        let mut advanced = false;
        for slot in (0..assignment.len()).rev() {
            assignment[slot] += 1;
            if assignment[slot] < k {
                advanced = true;
                break;
            }
            assignment[slot] = 0;
        }
        if !advanced {
            break;
        }
    }
    Ok(AmbiguitySet { kernels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{local_minimizer_instance, partition_instance, PartitionSpec};
    use crate::robust::robust_value;

    #[test]
    fn symmetric_two_by_two_game_mixes_evenly() {
        let game = MatrixGame { payoff: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
        let sol = matrix_game_solve(&game, 1e-9).unwrap();
        assert_eq!(sol.value, 0.5);
        assert_eq!(sol.strategy, vec![0.5, 0.5]);
    }

    #[test]
    fn single_column_game_is_pure_minimization() {
        let game = MatrixGame { payoff: vec![vec![4.0], vec![2.0], vec![2.0], vec![9.0]] };
        let sol = matrix_game_solve(&game, 1e-9).unwrap();
        assert_eq!(sol.value, 2.0);
        assert_eq!(sol.strategy, vec![0.0, 1.0, 0.0, 0.0], "ties go to the lowest action");
    }

    #[test]
    fn three_action_game_matches_grid_search() {
        let game = MatrixGame { payoff: vec![vec![3.0, 0.0], vec![1.0, 1.0], vec![0.0, 3.0]] };
        let sol = matrix_game_solve(&game, 1e-9).unwrap();
        // Independent oracle: 1e-4 grid over the 2-simplex.
        let denom = 10_000usize;
        let mut best = f64::INFINITY;
        let mut best_x = vec![0.0; 3];
        for i in 0..=denom {
            for j in 0..=denom - i {
                let x = [
                    i as f64 / denom as f64,
                    j as f64 / denom as f64,
                    (denom - i - j) as f64 / denom as f64,
                ];
                let v = achieved_value(&game, &x);
                if v < best {
                    best = v;
                    best_x = x.to_vec();
                }
            }
        }
        assert!((sol.value - best).abs() <= 1e-4, "value {} vs grid {best}", sol.value);
        for (a, b) in sol.strategy.iter().zip(&best_x) {
            assert!((a - b).abs() <= 1e-4);
        }
    }

    #[test]
    fn weak_duality_brackets_the_game_value() {
        let payoffs = [
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![3.0, 0.0], vec![1.0, 1.0], vec![0.0, 3.0]],
            vec![vec![2.0, -1.0, 0.5], vec![-3.0, 4.0, 0.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        ];
        for payoff in payoffs {
            let game = MatrixGame { payoff };
            let eps = 1e-9;
            let sol = matrix_game_solve(&game, eps).unwrap();
            let maximin = (0..game.num_columns())
                .map(|k| {
                    (0..game.num_actions())
                        .map(|a| game.payoff[a][k])
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let minimax = (0..game.num_actions())
                .map(|a| game.payoff[a].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            assert!(sol.value >= maximin - eps);
            assert!(sol.value <= minimax + eps);
            // The strategy certifies its own value.
            assert!(achieved_value(&game, &sol.strategy) <= sol.value + eps);
        }
    }

    #[test]
    fn single_kernel_dp_reduces_to_classical_backward_induction() {
        let mut inst = partition_instance(&PartitionSpec::new(vec![2.0, 7.0]).unwrap()).unwrap();
        inst.ambiguity.kernels.truncate(1);
        let md = dynamic_dp_solve(&inst, PolicyClass::Md, 1e-9).unwrap();
        let mr = dynamic_dp_solve(&inst, PolicyClass::Mr, 1e-9).unwrap();
        // Classical optimum avoids every weight under the single kernel.
        assert_eq!(md.root_value(&inst), 0.0);
        assert_eq!(mr.root_value(&inst), 0.0);
        for (a, b) in md.values.iter().zip(&mr.values) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn partition_stage_games_value_the_dp_at_half_total_for_mr() {
        // Each round is a [[w+C, C], [C, w+C]] game: deterministic play
        // concedes w, an even mixture concedes w/2.
        let inst = partition_instance(&PartitionSpec::new(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let md = dynamic_dp_solve(&inst, PolicyClass::Md, 1e-9).unwrap();
        let mr = dynamic_dp_solve(&inst, PolicyClass::Mr, 1e-9).unwrap();
        assert_eq!(md.root_value(&inst), 6.0);
        assert!((mr.root_value(&inst) - 3.0).abs() <= 1e-9);
        assert!(mr.game_values_residual <= 1e-9);
    }

    #[test]
    fn local_minimizer_gadget_dynamic_value_is_one_third() {
        // Hand stage games: both second-stage states value 1/3, and the
        // first-stage game is constant 1/3.
        let inst = local_minimizer_instance();
        let mr = dynamic_dp_solve(&inst, PolicyClass::Mr, 1e-9).unwrap();
        assert!((mr.root_value(&inst) - 1.0 / 3.0).abs() <= 1e-9);
    }

    #[test]
    fn dynamic_mr_never_exceeds_dynamic_md() {
        for weights in [vec![1.0, 2.0, 3.0], vec![5.0], vec![2.0, 2.0]] {
            let inst = partition_instance(&PartitionSpec::new(weights).unwrap()).unwrap();
            let md = dynamic_dp_solve(&inst, PolicyClass::Md, 1e-9).unwrap();
            let mr = dynamic_dp_solve(&inst, PolicyClass::Mr, 1e-9).unwrap();
            for (vm, vr) in md.values.iter().zip(&mr.values) {
                for (x, y) in vm.iter().zip(vr) {
                    assert!(*y <= *x + 1e-10);
                }
            }
        }
    }

    #[test]
    fn per_stage_adversary_dominates_static_robust_value() {
        let inst = local_minimizer_instance();
        let policies = [
            PolicyMr::uniform(&inst.mdp),
            crate::generators::local_minimizer_trap_policy(),
            crate::generators::local_minimizer_global_policy(),
        ];
        for policy in policies {
            let dynamic = per_stage_adversary_value(&inst, &policy).unwrap();
            let fixed = robust_value(&inst, &policy).unwrap().value;
            assert!(dynamic >= fixed - 1e-10, "dynamic {dynamic} vs static {fixed}");
        }
    }

    #[test]
    fn per_stage_adversary_equals_static_over_per_state_rectangularization() {
        let inst = local_minimizer_instance();
        let rect = rectangularize_enumerate(&inst, Rectangularization::PerState).unwrap();
        let mut widened = inst.clone();
        widened.ambiguity = rect;
        let policy = PolicyMr::uniform(&inst.mdp);
        let via_dp = per_stage_adversary_value(&inst, &policy).unwrap();
        let via_enumeration = robust_value(&widened, &policy).unwrap().value;
        assert!((via_dp - via_enumeration).abs() <= 1e-12);
    }

    #[test]
    fn rectangularization_counts() {
        // Singleton ambiguity: products of singletons stay singleton.
        let mut single = local_minimizer_instance();
        single.ambiguity.kernels.truncate(1);
        let rect = rectangularize_enumerate(&single, Rectangularization::PerStateAction).unwrap();
        assert_eq!(rect.kernels.len(), 1);

        // One weight: a single decision state with two action rows gives
        // 2 x 2 = 4 composite kernels row-wise, 2 block-wise.
        let w1 = partition_instance(&PartitionSpec::new(vec![1.0]).unwrap()).unwrap();
        let rows = rectangularize_enumerate(&w1, Rectangularization::PerStateAction).unwrap();
        assert_eq!(rows.kernels.len(), 4);
        let blocks = rectangularize_enumerate(&w1, Rectangularization::PerState).unwrap();
        assert_eq!(blocks.kernels.len(), 2);
        // Every composite kernel row-stochastic by construction.
        let mut widened = w1.clone();
        widened.ambiguity = rows;
        assert!(crate::instance::validate(&widened).is_empty());
    }

    #[test]
    fn rectangularization_guard_trips() {
        let inst = partition_instance(&PartitionSpec::new(vec![1.0; 11]).unwrap()).unwrap();
        assert!(matches!(
            rectangularize_enumerate(&inst, Rectangularization::PerStateAction),
            Err(RmdpError::SizeGuard { .. })
        ));
    }
}
