//! Worst-case (robust) policy evaluation over a finite ambiguity set.
//!
//! The adversary commits to one kernel for the whole horizon, so the robust
//! value of a policy is just the max of its per-kernel values: one backward
//! induction per kernel, polynomial in the instance size.

use serde::Serialize;

use crate::error::{Result, RmdpError};
use crate::eval::evaluate;
use crate::instance::{PolicyMr, RobustInstance};

/// Tolerance used when deciding whether robust values are nonpositive in
/// the max/sum equivalence report.
pub const NONPOSITIVE_TOL: f64 = 1e-9;

/// Full profile of a worst-case evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustEvaluation {
    /// `max_k V_k`, the robust value.
    pub value: f64,
    /// Lowest kernel index attaining the max.
    pub worst_kernel_index: usize,
    /// `V_k` for every kernel, in ambiguity-set order.
    pub per_kernel_values: Vec<f64>,
}

/// Evaluate `policy` against every kernel and take the worst case.
/// Ties go to the lowest kernel index, which keeps downstream subgradient
/// selection deterministic.
pub fn robust_value(instance: &RobustInstance, policy: &PolicyMr) -> Result<RobustEvaluation> {
    if instance.ambiguity.is_empty() {
        return Err(RmdpError::InvalidArgument("ambiguity set is empty".into()));
    }
    let mut per_kernel_values = Vec::with_capacity(instance.ambiguity.len());
    for kernel in &instance.ambiguity.kernels {
        per_kernel_values.push(evaluate(&instance.mdp, kernel, policy, instance.initial_state)?);
    }
    let mut worst = 0;
    for (k, &v) in per_kernel_values.iter().enumerate() {
        if v > per_kernel_values[worst] {
            worst = k;
        }
    }
    Ok(RobustEvaluation {
        value: per_kernel_values[worst],
        worst_kernel_index: worst,
        per_kernel_values,
    })
}

/// Report of the max/sum agreement check behind the multi-kernel hardness
/// argument: with nonnegative costs, the worst-case value is nonpositive
/// exactly when the per-kernel sum is (both force every `V_k` to zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxSumReport {
    pub max_value: f64,
    pub sum_value: f64,
    pub both_nonpositive_agree: bool,
}

/// Compare the max and sum aggregations of the per-kernel values.
///
/// Requires every cost to be nonnegative; under that precondition
/// `both_nonpositive_agree` must always come back true.
pub fn max_sum_equivalence_check(instance: &RobustInstance, policy: &PolicyMr) -> Result<MaxSumReport> {
    for (t, stage) in instance.mdp.cost.iter().enumerate() {
        for (s, row) in stage.iter().enumerate() {
            if let Some((a, &c)) = row.iter().enumerate().find(|(_, &c)| c < 0.0) {
                return Err(RmdpError::Precondition(format!(
                    "max/sum equivalence requires nonnegative costs; cost (stage {t}, state {s}, action {a}) = {c}"
                )));
            }
        }
    }
    let eval = robust_value(instance, policy)?;
    let sum_value = eval.per_kernel_values.iter().sum();
    let max_nonpos = eval.value <= NONPOSITIVE_TOL;
    let sum_nonpos = sum_value <= NONPOSITIVE_TOL;
    Ok(MaxSumReport {
        max_value: eval.value,
        sum_value,
        both_nonpositive_agree: max_nonpos == sum_nonpos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{
        local_minimizer_instance, local_minimizer_trap_policy, partition_instance, PartitionSpec,
    };
    use crate::instance::{embed_md, AmbiguitySet, PolicyMd};

    #[test]
    fn trap_policy_is_worth_zero_under_both_kernels() {
        let inst = local_minimizer_instance();
        let ev = robust_value(&inst, &local_minimizer_trap_policy()).unwrap();
        assert_eq!(ev.value, 0.0);
        assert_eq!(ev.per_kernel_values, vec![0.0, 0.0]);
        assert_eq!(ev.worst_kernel_index, 0, "ties break to the lowest index");
    }

    #[test]
    fn single_kernel_set_degenerates_to_plain_evaluation() {
        let mut inst = local_minimizer_instance();
        inst.ambiguity = AmbiguitySet { kernels: vec![inst.ambiguity.kernels[1].clone()] };
        let policy = PolicyMr::uniform(&inst.mdp);
        let ev = robust_value(&inst, &policy).unwrap();
        let direct = crate::eval::evaluate(&inst.mdp, &inst.ambiguity.kernels[0], &policy, 0).unwrap();
        assert_eq!(ev.value, direct);
        assert_eq!(ev.worst_kernel_index, 0);
    }

    #[test]
    fn partition_single_round_zero_policy_sees_balanced_split() {
        // Action 0 only on round 3: the first kernel pays w_3 = 3, the
        // second pays w_1 + w_2 = 3; tie resolved to kernel 0.
        let inst = partition_instance(&PartitionSpec::new(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let md = PolicyMd {
            act: vec![vec![1], vec![0, 0], vec![1], vec![0, 0], vec![0], vec![0, 0]],
        };
        let policy = embed_md(&inst.mdp, &md);
        let ev = robust_value(&inst, &policy).unwrap();
        assert_eq!(ev.per_kernel_values, vec![3.0, 3.0]);
        assert_eq!(ev.value, 3.0);
        assert_eq!(ev.worst_kernel_index, 0);
    }

    #[test]
    fn robust_value_dominates_every_per_kernel_value() {
        let inst = local_minimizer_instance();
        let policy = PolicyMr {
            dist: vec![
                vec![vec![0.3, 0.7]],
                vec![vec![0.2, 0.8], vec![0.9, 0.1]],
                vec![vec![1.0]; 4],
            ],
        };
        let ev = robust_value(&inst, &policy).unwrap();
        for &v in &ev.per_kernel_values {
            assert!(ev.value >= v);
        }
    }

    #[test]
    fn appending_a_kernel_never_decreases_the_robust_value() {
        let base = partition_instance(&PartitionSpec::new(vec![2.0, 3.0]).unwrap()).unwrap();
        let policy = PolicyMr::uniform(&base.mdp);
        let small = robust_value(&base, &policy).unwrap();
        let mut widened = base.clone();
        widened.ambiguity.kernels.push(base.ambiguity.kernels[0].clone());
        let wide = robust_value(&widened, &policy).unwrap();
        assert!(wide.value >= small.value);
        assert_eq!(wide.value, small.value, "duplicate kernel adds nothing");
    }

    #[test]
    fn max_sum_agreement_on_zero_and_positive_instances() {
        let mut zero = partition_instance(&PartitionSpec::new(vec![1.0]).unwrap()).unwrap();
        for stage in &mut zero.mdp.cost {
            for row in stage {
                row.iter_mut().for_each(|c| *c = 0.0);
            }
        }
        let policy = PolicyMr::uniform(&zero.mdp);
        let report = max_sum_equivalence_check(&zero, &policy).unwrap();
        assert_eq!(report.max_value, 0.0);
        assert_eq!(report.sum_value, 0.0);
        assert!(report.both_nonpositive_agree);

        let positive = partition_instance(&PartitionSpec::new(vec![1.0, 2.0]).unwrap()).unwrap();
        let report = max_sum_equivalence_check(&positive, &PolicyMr::uniform(&positive.mdp)).unwrap();
        assert!(report.max_value > 0.0);
        assert!(report.sum_value > 0.0);
        assert!(report.both_nonpositive_agree);
    }

    #[test]
    fn negative_costs_fail_the_precondition() {
        let inst = local_minimizer_instance();
        let policy = PolicyMr::uniform(&inst.mdp);
        assert!(matches!(
            max_sum_equivalence_check(&inst, &policy),
            Err(RmdpError::Precondition(_))
        ));
    }
}
