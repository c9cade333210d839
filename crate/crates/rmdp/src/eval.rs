//! Exact policy evaluation for a fixed transition kernel.
//!
//! [`evaluate`] runs backward induction; [`brute_force_evaluate`] enumerates
//! weighted trajectories and exists solely to cross-check it. The two share
//! no code beyond the domain types.

use crate::error::{Result, RmdpError};
use crate::instance::{check_kernel, check_policy_md, check_policy_mr, FiniteHorizonMdp, Kernel, PolicyMd, PolicyMr};

/// Trajectory-count cap for the brute-force oracle.
pub const BRUTE_FORCE_GUARD: u128 = 10_000_000;

fn check_initial_state(mdp: &FiniteHorizonMdp, s1: usize) -> Result<()> {
    if s1 >= mdp.num_states(0) {
        return Err(RmdpError::DimensionMismatch(format!(
            "initial state {} outside the {} stage-0 states",
            s1,
            mdp.num_states(0)
        )));
    }
    Ok(())
}

/// Expected cumulative cost of `policy` under `kernel`, starting from `s1`.
///
/// Backward induction:
/// `V_T(s) = sum_a pi_T(a|s) c_T(s,a)`,
/// `V_t(s) = sum_a pi_t(a|s) [c_t(s,a) + sum_{s'} P_t(s'|s,a) V_{t+1}(s')]`.
/// Deterministic: identical inputs give bit-identical outputs.
pub fn evaluate(mdp: &FiniteHorizonMdp, kernel: &Kernel, policy: &PolicyMr, s1: usize) -> Result<f64> {
    check_policy_mr(mdp, policy)?;
    check_kernel(mdp, kernel)?;
    check_initial_state(mdp, s1)?;
    Ok(stage_values(mdp, kernel, policy)[0][s1])
}

/// Per-stage value tables `V_t(s)` of a fixed policy under a fixed kernel.
pub fn stage_values(mdp: &FiniteHorizonMdp, kernel: &Kernel, policy: &PolicyMr) -> Vec<Vec<f64>> {
    let horizon = mdp.horizon();
    let mut values = vec![Vec::new(); horizon];
    let mut next: Vec<f64> = Vec::new();
    for t in (0..horizon).rev() {
        let sh = mdp.stages[t];
        let mut cur = vec![0.0; sh.num_states];
        for (s, v) in cur.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..sh.num_actions {
                let mut q = mdp.cost[t][s][a];
                if t + 1 < horizon {
                    for (s2, &p) in kernel.trans[t][s][a].iter().enumerate() {
                        q += p * next[s2];
                    }
                }
                acc += policy.dist[t][s][a] * q;
            }
            *v = acc;
        }
        values[t] = cur.clone();
        next = cur;
    }
    values
}

/// Action-value table `Q_t(s,a) = c_t(s,a) + sum_{s'} P_t(s'|s,a) V_{t+1}(s')`
/// for every stage, alongside the stage values it is built from.
pub fn stage_q_values(
    mdp: &FiniteHorizonMdp,
    kernel: &Kernel,
    policy: &PolicyMr,
) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let horizon = mdp.horizon();
    let values = stage_values(mdp, kernel, policy);
    let mut q_values = vec![Vec::new(); horizon];
    for t in 0..horizon {
        let sh = mdp.stages[t];
        let mut stage_q = vec![vec![0.0; sh.num_actions]; sh.num_states];
        for (s, row) in stage_q.iter_mut().enumerate() {
            for (a, q) in row.iter_mut().enumerate() {
                *q = mdp.cost[t][s][a];
                if t + 1 < horizon {
                    for (s2, &p) in kernel.trans[t][s][a].iter().enumerate() {
                        *q += p * values[t + 1][s2];
                    }
                }
            }
        }
        q_values[t] = stage_q;
    }
    (values, q_values)
}

/// State-visit probabilities `Pr(S_t = s)` induced by `(policy, kernel)`
/// from `s1`, one vector per stage.
pub fn visit_probabilities(
    mdp: &FiniteHorizonMdp,
    kernel: &Kernel,
    policy: &PolicyMr,
    s1: usize,
) -> Vec<Vec<f64>> {
    let horizon = mdp.horizon();
    let mut mu = vec![Vec::new(); horizon];
    let mut cur = vec![0.0; mdp.num_states(0)];
    cur[s1] = 1.0;
    mu[0] = cur.clone();
    for t in 0..horizon.saturating_sub(1) {
        let sh = mdp.stages[t];
        let mut next = vec![0.0; mdp.num_states(t + 1)];
        for s in 0..sh.num_states {
            if cur[s] == 0.0 {
                continue;
            }
            for a in 0..sh.num_actions {
                let w = cur[s] * policy.dist[t][s][a];
                if w == 0.0 {
                    continue;
                }
                for (s2, &p) in kernel.trans[t][s][a].iter().enumerate() {
                    next[s2] += w * p;
                }
            }
        }
        mu[t + 1] = next.clone();
        cur = next;
    }
    mu
}

/// Expected stage cost `E[c_t(S_t, A_t)]` for each stage. The plain value
/// is the sum of this profile; the discounted embedding weights it by
/// powers of the discount factor.
pub fn stage_expected_costs(
    mdp: &FiniteHorizonMdp,
    kernel: &Kernel,
    policy: &PolicyMr,
    s1: usize,
) -> Result<Vec<f64>> {
    check_policy_mr(mdp, policy)?;
    check_kernel(mdp, kernel)?;
    check_initial_state(mdp, s1)?;
    let mu = visit_probabilities(mdp, kernel, policy, s1);
    Ok((0..mdp.horizon())
        .map(|t| {
            let sh = mdp.stages[t];
            let mut e = 0.0;
            for s in 0..sh.num_states {
                for a in 0..sh.num_actions {
                    e += mu[t][s] * policy.dist[t][s][a] * mdp.cost[t][s][a];
                }
            }
            e
        })
        .collect())
}

/// Value of a deterministic policy under one kernel, by backward induction
/// over the chosen actions only. On deterministic kernels this is a pure
/// integer-addition path whenever the costs are integers.
pub fn evaluate_md(mdp: &FiniteHorizonMdp, kernel: &Kernel, policy: &PolicyMd, s1: usize) -> Result<f64> {
    check_policy_md(mdp, policy)?;
    check_kernel(mdp, kernel)?;
    check_initial_state(mdp, s1)?;
    let horizon = mdp.horizon();
    let mut next: Vec<f64> = Vec::new();
    for t in (0..horizon).rev() {
        let sh = mdp.stages[t];
        let mut cur = vec![0.0; sh.num_states];
        for (s, v) in cur.iter_mut().enumerate() {
            let a = policy.act[t][s];
            let mut q = mdp.cost[t][s][a];
            if t + 1 < horizon {
                for (s2, &p) in kernel.trans[t][s][a].iter().enumerate() {
                    if p != 0.0 {
                        q += p * next[s2];
                    }
                }
            }
            *v = q;
        }
        next = cur;
    }
    Ok(next[s1])
}

/// Independent oracle for [`evaluate`]: enumerate every trajectory
/// `(s_1, a_1, ..., s_T, a_T)` with positive probability and sum the
/// probability-weighted cumulative costs.
///
/// Guarded by [`BRUTE_FORCE_GUARD`] on the product of per-stage
/// state-action counts.
pub fn brute_force_evaluate(
    mdp: &FiniteHorizonMdp,
    kernel: &Kernel,
    policy: &PolicyMr,
    s1: usize,
) -> Result<f64> {
    check_policy_mr(mdp, policy)?;
    check_kernel(mdp, kernel)?;
    check_initial_state(mdp, s1)?;
    let mut count: u128 = 1;
    for sh in &mdp.stages {
        count = count.saturating_mul((sh.num_states as u128).saturating_mul(sh.num_actions as u128));
        if count > BRUTE_FORCE_GUARD {
            return Err(RmdpError::SizeGuard {
                what: "brute-force trajectory enumeration",
                actual: count,
                limit: BRUTE_FORCE_GUARD,
            });
        }
    }
    let mut total = 0.0;
    descend(mdp, kernel, policy, 0, s1, 1.0, 0.0, &mut total);
    Ok(total)
}

fn descend(
    mdp: &FiniteHorizonMdp,
    kernel: &Kernel,
    policy: &PolicyMr,
    t: usize,
    s: usize,
    prob: f64,
    cost: f64,
    total: &mut f64,
) {
    let last = t + 1 == mdp.horizon();
    for a in 0..mdp.num_actions(t) {
        let pa = prob * policy.dist[t][s][a];
        if pa == 0.0 {
            continue;
        }
        let ca = cost + mdp.cost[t][s][a];
        if last {
            *total += pa * ca;
        } else {
            for (s2, &p) in kernel.trans[t][s][a].iter().enumerate() {
                if p != 0.0 {
                    descend(mdp, kernel, policy, t + 1, s2, pa * p, ca, total);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{local_minimizer_instance, partition_instance, PartitionSpec};
    use crate::instance::{embed_md, StageShape};
    use proptest::prelude::*;

    fn all_zero_mdp() -> (FiniteHorizonMdp, Kernel) {
        let mdp = FiniteHorizonMdp {
            stages: vec![
                StageShape { num_states: 2, num_actions: 2 },
                StageShape { num_states: 2, num_actions: 1 },
            ],
            cost: vec![vec![vec![0.0; 2]; 2], vec![vec![0.0; 1]; 2]],
        };
        let kernel = Kernel {
            trans: vec![vec![vec![vec![0.5, 0.5]; 2]; 2]],
        };
        (mdp, kernel)
    }

    /// Deterministic all-action-0 / all-action-1 policies on the partition
    /// gadget, whose values the construction pins to subset sums.
    fn constant_partition_policy(inst: &crate::instance::RobustInstance, action: usize) -> PolicyMr {
        let act = inst
            .mdp
            .stages
            .iter()
            .map(|sh| vec![if sh.num_actions > 1 { action } else { 0 }; sh.num_states])
            .collect();
        embed_md(&inst.mdp, &PolicyMd { act })
    }

    #[test]
    fn partition_gadget_action0_value_is_total_weight() {
        // Picking the costly branch at every decision accumulates every
        // weight under the first kernel: 1 + 2 + 3.
        let inst = partition_instance(&PartitionSpec::new(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let policy = constant_partition_policy(&inst, 0);
        let v = evaluate(&inst.mdp, &inst.ambiguity.kernels[0], &policy, inst.initial_state).unwrap();
        assert_eq!(v, 6.0);
        let bf = brute_force_evaluate(&inst.mdp, &inst.ambiguity.kernels[0], &policy, inst.initial_state).unwrap();
        assert_eq!(bf, 6.0);
    }

    #[test]
    fn all_zero_costs_evaluate_to_zero() {
        let (mdp, kernel) = all_zero_mdp();
        let policy = PolicyMr::uniform(&mdp);
        assert_eq!(evaluate(&mdp, &kernel, &policy, 0).unwrap(), 0.0);
        assert_eq!(brute_force_evaluate(&mdp, &kernel, &policy, 1).unwrap(), 0.0);
    }

    #[test]
    fn local_minimizer_gadget_pure_action1_policy_under_first_kernel() {
        // pi1 = (0,1), both second-stage rows (0,1): the first kernel routes
        // to the bottom-right matrix entry, cost 1.
        let inst = local_minimizer_instance();
        let policy = PolicyMr {
            dist: vec![
                vec![vec![0.0, 1.0]],
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
                vec![vec![1.0]; 4],
            ],
        };
        let v = evaluate(&inst.mdp, &inst.ambiguity.kernels[0], &policy, 0).unwrap();
        assert_eq!(v, 1.0);
        let bf = brute_force_evaluate(&inst.mdp, &inst.ambiguity.kernels[0], &policy, 0).unwrap();
        assert_eq!(bf, 1.0);
    }

    #[test]
    fn single_stage_mdp_is_the_expected_immediate_cost() {
        let mdp = FiniteHorizonMdp {
            stages: vec![StageShape { num_states: 1, num_actions: 3 }],
            cost: vec![vec![vec![2.0, -4.0, 10.0]]],
        };
        let kernel = Kernel { trans: vec![] };
        let policy = PolicyMr { dist: vec![vec![vec![0.5, 0.25, 0.25]]] };
        let expected = 0.5 * 2.0 + 0.25 * -4.0 + 0.25 * 10.0;
        assert_eq!(evaluate(&mdp, &kernel, &policy, 0).unwrap(), expected);
        assert_eq!(brute_force_evaluate(&mdp, &kernel, &policy, 0).unwrap(), expected);
    }

    #[test]
    fn single_weight_action1_policy_incurs_nothing() {
        // S_pi is empty, so the first kernel's value is the empty sum; one
        // positive-probability trajectory in total.
        let inst = partition_instance(&PartitionSpec::new(vec![5.0]).unwrap()).unwrap();
        let policy = constant_partition_policy(&inst, 1);
        assert_eq!(evaluate(&inst.mdp, &inst.ambiguity.kernels[0], &policy, 0).unwrap(), 0.0);
        assert_eq!(brute_force_evaluate(&inst.mdp, &inst.ambiguity.kernels[0], &policy, 0).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_md_agrees_with_embedding() {
        let inst = partition_instance(&PartitionSpec::new(vec![1.0, 4.0]).unwrap()).unwrap();
        let md = PolicyMd { act: vec![vec![0], vec![0, 0], vec![1], vec![0, 0]] };
        let mr = embed_md(&inst.mdp, &md);
        for kernel in &inst.ambiguity.kernels {
            let a = evaluate_md(&inst.mdp, kernel, &md, 0).unwrap();
            let b = evaluate(&inst.mdp, kernel, &mr, 0).unwrap();
            let c = brute_force_evaluate(&inst.mdp, kernel, &mr, 0).unwrap();
            assert_eq!(a, b);
            assert_eq!(b, c);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (mdp, kernel) = all_zero_mdp();
        let policy = PolicyMr { dist: vec![vec![vec![1.0]; 2]; 2] };
        assert!(matches!(
            evaluate(&mdp, &kernel, &policy, 0),
            Err(RmdpError::DimensionMismatch(_))
        ));
        let ok_policy = PolicyMr::uniform(&mdp);
        assert!(matches!(
            evaluate(&mdp, &kernel, &ok_policy, 7),
            Err(RmdpError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn brute_force_guard_trips() {
        let mdp = FiniteHorizonMdp {
            stages: vec![StageShape { num_states: 200, num_actions: 200 }; 4],
            cost: vec![vec![vec![0.0; 200]; 200]; 4],
        };
        let kernel = Kernel {
            trans: vec![vec![vec![vec![1.0 / 200.0; 200]; 200]; 200]; 3],
        };
        let policy = PolicyMr::uniform(&mdp);
        assert!(matches!(
            brute_force_evaluate(&mdp, &kernel, &policy, 0),
            Err(RmdpError::SizeGuard { .. })
        ));
    }

    #[test]
    fn stage_expected_costs_sum_to_value() {
        let inst = local_minimizer_instance();
        let policy = PolicyMr::uniform(&inst.mdp);
        for kernel in &inst.ambiguity.kernels {
            let profile = stage_expected_costs(&inst.mdp, kernel, &policy, 0).unwrap();
            let v = evaluate(&inst.mdp, kernel, &policy, 0).unwrap();
            assert!((profile.iter().sum::<f64>() - v).abs() <= 1e-12);
        }
    }

    proptest! {
        /// Scaling every cost by a power of two scales the value exactly;
        /// arbitrary factors hold to 1e-12 relative.
        #[test]
        fn value_is_linear_in_costs(lambda in -8.0f64..8.0, exact in proptest::bool::ANY) {
            let inst = local_minimizer_instance();
            let lambda = if exact { 2.0 } else { lambda };
            let policy = PolicyMr::uniform(&inst.mdp);
            let base = evaluate(&inst.mdp, &inst.ambiguity.kernels[0], &policy, 0).unwrap();
            let mut scaled = inst.clone();
            for stage in &mut scaled.mdp.cost {
                for row in stage {
                    for c in row {
                        *c *= lambda;
                    }
                }
            }
            let v = evaluate(&scaled.mdp, &scaled.ambiguity.kernels[0], &policy, 0).unwrap();
            if exact {
                prop_assert_eq!(v, lambda * base);
            } else {
                let scale = 1.0_f64.max(base.abs() * lambda.abs());
                prop_assert!((v - lambda * base).abs() <= 1e-12 * scale);
            }
        }

        /// The value is affine in any single row of the policy: the midpoint
        /// of two row choices evaluates to the midpoint of the values.
        #[test]
        fn value_is_affine_in_one_policy_row(p0 in 0.0f64..1.0, p1 in 0.0f64..1.0) {
            let inst = local_minimizer_instance();
            let mut low = PolicyMr::uniform(&inst.mdp);
            low.dist[1][0] = vec![p0, 1.0 - p0];
            let mut high = low.clone();
            high.dist[1][0] = vec![p1, 1.0 - p1];
            let mut mid = low.clone();
            mid.dist[1][0] = vec![(p0 + p1) / 2.0, 1.0 - (p0 + p1) / 2.0];
            let k = &inst.ambiguity.kernels[1];
            let vl = evaluate(&inst.mdp, k, &low, 0).unwrap();
            let vh = evaluate(&inst.mdp, k, &high, 0).unwrap();
            let vm = evaluate(&inst.mdp, k, &mid, 0).unwrap();
            prop_assert!((vm - (vl + vh) / 2.0).abs() <= 1e-10);
        }
    }
}
