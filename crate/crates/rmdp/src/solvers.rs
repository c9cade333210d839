//! Static-formulation optimizers.
//!
//! Deterministic policies are handled by exhaustive enumeration; randomized
//! ones by projected subgradient descent on the robust value, which is a
//! pointwise max of smooth per-kernel values. The grid utilities at the
//! bottom back the local-minimum certificate and the verification suites.

use crate::error::{Result, RmdpError};
use crate::eval::{evaluate_md, stage_q_values, visit_probabilities};
use crate::instance::{check_policy_mr, FiniteHorizonMdp, PolicyMd, PolicyMr, RobustInstance};
use crate::robust::{robust_value, RobustEvaluation};

/// Cap on the number of deterministic Markov policies the exhaustive
/// solver will enumerate.
pub const MD_ENUMERATION_GUARD: u128 = 1 << 24;

/// Cap on total policy coordinates for the grid-ball certificate.
pub const CERTIFICATE_COORD_GUARD: usize = 8;

/// Result of the exhaustive deterministic search.
#[derive(Debug, Clone, PartialEq)]
pub struct MdSolveReport {
    pub best_policy: PolicyMd,
    pub best_value: f64,
    pub policies_examined: u64,
}

/// One recorded subgradient iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub robust_value: f64,
    pub worst_kernel_index: usize,
}

/// Result of the projected subgradient search. `best_policy` is the best
/// iterate seen, not the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct MrSolveReport {
    pub best_policy: PolicyMr,
    pub best_value: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

/// Number of deterministic Markov policies of an MDP, saturating.
pub fn md_policy_count(mdp: &FiniteHorizonMdp) -> u128 {
    let mut count: u128 = 1;
    for sh in &mdp.stages {
        for _ in 0..sh.num_states {
            count = count.saturating_mul(sh.num_actions as u128);
        }
    }
    count
}

/// Enumerate every deterministic Markov policy and return the robust-value
/// minimizer. Ties break to the lexicographically smallest policy in
/// stage-major, state-minor, action-index order. On integer-cost instances
/// with deterministic kernels the comparison is exact integer arithmetic.
pub fn solve_md_exhaustive(instance: &RobustInstance) -> Result<MdSolveReport> {
    let mdp = &instance.mdp;
    let count = md_policy_count(mdp);
    if count > MD_ENUMERATION_GUARD {
        return Err(RmdpError::SizeGuard {
            what: "deterministic policy enumeration",
            actual: count,
            limit: MD_ENUMERATION_GUARD,
        });
    }
    if instance.ambiguity.is_empty() {
        return Err(RmdpError::InvalidArgument("ambiguity set is empty".into()));
    }

    // Flat coordinate list: one action slot per (stage, state), stage-major.
    let mut radix = Vec::new();
    for sh in &mdp.stages {
        for _ in 0..sh.num_states {
            radix.push(sh.num_actions);
        }
    }
    let mut coords = vec![0usize; radix.len()];

    let mut best: Option<(PolicyMd, f64)> = None;
    let mut examined: u64 = 0;
    loop {
        let policy = unflatten_md(mdp, &coords);
        let mut worst = f64::NEG_INFINITY;
        for kernel in &instance.ambiguity.kernels {
            let v = evaluate_md(mdp, kernel, &policy, instance.initial_state)?;
            if v > worst {
                worst = v;
            }
        }
        examined += 1;
        // Strict improvement keeps the first (lexicographically smallest) minimizer.
        if best.as_ref().is_none_or(|(_, bv)| worst < *bv) {
            best = Some((policy, worst));
        }
        if !increment(&mut coords, &radix) {
            break;
        }
    }
    let (best_policy, best_value) = best.expect("at least one policy exists");
    Ok(MdSolveReport {
        best_policy,
        best_value,
        policies_examined: examined,
    })
}

fn unflatten_md(mdp: &FiniteHorizonMdp, coords: &[usize]) -> PolicyMd {
    let mut act = Vec::with_capacity(mdp.horizon());
    let mut idx = 0;
    for sh in &mdp.stages {
        act.push(coords[idx..idx + sh.num_states].to_vec());
        idx += sh.num_states;
    }
    PolicyMd { act }
}

/// Odometer increment with the last coordinate fastest, i.e. ascending
/// lexicographic order. Returns false once the odometer wraps.
fn increment(coords: &mut [usize], radix: &[usize]) -> bool {
    for i in (0..coords.len()).rev() {
        coords[i] += 1;
        if coords[i] < radix[i] {
            return true;
        }
        coords[i] = 0;
    }
    false
}

/// Euclidean projection onto the probability simplex.
///
/// Inputs must be finite and nonempty. The output is nonnegative and sums
/// to 1 within 1e-12.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    assert!(v.iter().all(|x| x.is_finite()), "projection input must be finite");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Exact gradient of the worst kernel's value with respect to every policy
/// coordinate, `d V / d pi_t(a|s) = Pr(S_t = s) * Q_t(s, a)`. At ties the
/// lowest-index worst kernel is used, so the output is a deterministic
/// element of the subdifferential's generating set.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient {
    /// Partial derivatives, shaped like the policy's `dist`.
    pub partials: Vec<Vec<Vec<f64>>>,
    /// Kernel whose value function was differentiated.
    pub worst_kernel_index: usize,
}

pub fn robust_subgradient(instance: &RobustInstance, policy: &PolicyMr) -> Result<PolicyGradient> {
    let (_, grad) = robust_eval_and_subgradient(instance, policy)?;
    Ok(grad)
}

/// Robust evaluation plus subgradient in one pass (the descent loop needs
/// both every iteration).
pub fn robust_eval_and_subgradient(
    instance: &RobustInstance,
    policy: &PolicyMr,
) -> Result<(RobustEvaluation, PolicyGradient)> {
    check_policy_mr(&instance.mdp, policy)?;
    let eval = robust_value(instance, policy)?;
    let kernel = &instance.ambiguity.kernels[eval.worst_kernel_index];
    let (_, q_values) = stage_q_values(&instance.mdp, kernel, policy);
    let mu = visit_probabilities(&instance.mdp, kernel, policy, instance.initial_state);
    let partials = (0..instance.mdp.horizon())
        .map(|t| {
            let sh = instance.mdp.stages[t];
            (0..sh.num_states)
                .map(|s| (0..sh.num_actions).map(|a| mu[t][s] * q_values[t][s][a]).collect())
                .collect()
        })
        .collect();
    let worst_kernel_index = eval.worst_kernel_index;
    Ok((
        eval,
        PolicyGradient {
            partials,
            worst_kernel_index,
        },
    ))
}

/// Projected subgradient descent over randomized Markov policies.
///
/// Iterates `pi <- project(pi - eta_j g)` row by row with the diminishing
/// schedule `eta_j = step0 / sqrt(j + 1)`, records every iterate's robust
/// value, and reports the best iterate seen. Fully deterministic given
/// `(init, step0, iters)`.
pub fn solve_mr_subgradient(
    instance: &RobustInstance,
    init: &PolicyMr,
    step0: f64,
    iters: usize,
) -> Result<MrSolveReport> {
    if iters == 0 {
        return Err(RmdpError::InvalidArgument("iteration count must be at least 1".into()));
    }
    if !(step0 > 0.0) || !step0.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "initial step size must be positive, got {step0}"
        )));
    }
    check_policy_mr(&instance.mdp, init)?;

    let mut policy = init.clone();
    let mut best_policy = policy.clone();
    let mut best_value = f64::INFINITY;
    let mut trace = Vec::with_capacity(iters);
    for j in 0..iters {
        let (eval, grad) = robust_eval_and_subgradient(instance, &policy)?;
        trace.push(TraceRow {
            iteration: j,
            robust_value: eval.value,
            worst_kernel_index: eval.worst_kernel_index,
        });
        if eval.value < best_value {
            best_value = eval.value;
            best_policy = policy.clone();
        }
        let eta = step0 / ((j + 1) as f64).sqrt();
        for (t, stage) in policy.dist.iter_mut().enumerate() {
            for (s, row) in stage.iter_mut().enumerate() {
                if row.len() == 1 {
                    continue;
                }
                let stepped: Vec<f64> = row
                    .iter()
                    .zip(&grad.partials[t][s])
                    .map(|(&p, &g)| p - eta * g)
                    .collect();
                *row = project_simplex(&stepped);
            }
        }
    }
    Ok(MrSolveReport {
        best_policy,
        best_value,
        iterations: iters,
        trace,
    })
}

/// Outcome of the grid-ball local-minimum certificate.
///
/// The certificate is grid-resolution-bounded evidence, not a proof: it
/// inspects every feasible policy whose coordinates lie on the absolute
/// `grid_step` lattice within Euclidean `radius` of the center.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinCertificate {
    /// No inspected grid point is strictly better than the center.
    pub is_local_min: bool,
    /// Every inspected grid point other than the center is strictly worse
    /// (margin > 1e-10).
    pub is_strict: bool,
    /// A grid point contradicting whichever property failed, if any.
    pub witness: Option<PolicyMr>,
}

const VALUE_MARGIN: f64 = 1e-10;

pub fn local_min_certificate(
    instance: &RobustInstance,
    policy: &PolicyMr,
    radius: f64,
    grid_step: f64,
) -> Result<LocalMinCertificate> {
    check_policy_mr(&instance.mdp, policy)?;
    if !(radius > 0.0) || !(grid_step > 0.0) || grid_step > radius {
        return Err(RmdpError::InvalidArgument(format!(
            "need 0 < grid_step <= radius, got grid_step {grid_step}, radius {radius}"
        )));
    }
    // Single-action rows contribute exactly one lattice candidate, so only
    // rows with a real choice count toward the explosion guard.
    let coords: usize = policy
        .dist
        .iter()
        .flatten()
        .filter(|row| row.len() > 1)
        .map(|row| row.len())
        .sum();
    if coords > CERTIFICATE_COORD_GUARD {
        return Err(RmdpError::SizeGuard {
            what: "certificate grid coordinates",
            actual: coords as u128,
            limit: CERTIFICATE_COORD_GUARD as u128,
        });
    }
    let denom = grid_denominator(grid_step)?;
    let center_value = robust_value(instance, policy)?.value;

    // Per-row lattice candidates within the ball, with their squared
    // distances to the center's row.
    let slack = 1e-9;
    let r2 = radius * radius + slack;
    let mut row_candidates: Vec<Vec<(Vec<f64>, f64)>> = Vec::new();
    for (t, stage) in policy.dist.iter().enumerate() {
        for center_row in stage {
            let mut cands = Vec::new();
            for row in simplex_grid_rows(instance.mdp.stages[t].num_actions, denom) {
                let d2: f64 = row
                    .iter()
                    .zip(center_row)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 <= r2 {
                    cands.push((row, d2));
                }
            }
            row_candidates.push(cands);
        }
    }

    let mut descent_witness: Option<PolicyMr> = None;
    let mut tie_witness: Option<PolicyMr> = None;
    let mut current = policy.clone();
    visit_ball(
        instance,
        policy,
        center_value,
        &row_candidates,
        r2,
        0,
        0.0,
        &mut current,
        &mut descent_witness,
        &mut tie_witness,
    )?;

    let is_local_min = descent_witness.is_none();
    let is_strict = is_local_min && tie_witness.is_none();
    let witness = descent_witness.or(tie_witness);
    Ok(LocalMinCertificate {
        is_local_min,
        is_strict,
        witness,
    })
}

#[allow(clippy::too_many_arguments)]
fn visit_ball(
    instance: &RobustInstance,
    center: &PolicyMr,
    center_value: f64,
    row_candidates: &[Vec<(Vec<f64>, f64)>],
    r2: f64,
    row_index: usize,
    d2_so_far: f64,
    current: &mut PolicyMr,
    descent_witness: &mut Option<PolicyMr>,
    tie_witness: &mut Option<PolicyMr>,
) -> Result<()> {
    if row_index == row_candidates.len() {
        if policies_coincide(current, center) {
            return Ok(());
        }
        let v = robust_value(instance, current)?.value;
        if v < center_value - VALUE_MARGIN {
            if descent_witness.is_none() {
                *descent_witness = Some(current.clone());
            }
        } else if v <= center_value + VALUE_MARGIN && tie_witness.is_none() {
            *tie_witness = Some(current.clone());
        }
        return Ok(());
    }
    // Map the flat row index back to (stage, state).
    let (t, s) = locate_row(&instance.mdp, row_index);
    for (row, d2) in &row_candidates[row_index] {
        if d2_so_far + d2 > r2 {
            continue;
        }
        current.dist[t][s] = row.clone();
        visit_ball(
            instance,
            center,
            center_value,
            row_candidates,
            r2,
            row_index + 1,
            d2_so_far + d2,
            current,
            descent_witness,
            tie_witness,
        )?;
    }
    current.dist[t][s] = center.dist[t][s].clone();
    Ok(())
}

fn locate_row(mdp: &FiniteHorizonMdp, mut flat: usize) -> (usize, usize) {
    for (t, sh) in mdp.stages.iter().enumerate() {
        if flat < sh.num_states {
            return (t, flat);
        }
        flat -= sh.num_states;
    }
    unreachable!("row index out of range")
}

fn policies_coincide(a: &PolicyMr, b: &PolicyMr) -> bool {
    a.flatten()
        .iter()
        .zip(b.flatten().iter())
        .all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// Interpret a grid step as a lattice denominator: `1/step` must be an
/// integer (0.01, 0.02, 0.05, ...).
pub fn grid_denominator(step: f64) -> Result<usize> {
    if !(step > 0.0) || step > 1.0 {
        return Err(RmdpError::InvalidArgument(format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    let denom = (1.0 / step).round();
    if (denom * step - 1.0).abs() > 1e-9 || denom < 1.0 {
        return Err(RmdpError::InvalidArgument(format!(
            "grid step {step} must evenly divide 1"
        )));
    }
    Ok(denom as usize)
}

/// All probability vectors over `num_actions` entries whose coordinates are
/// multiples of `1/denom`, in lexicographic order.
pub fn simplex_grid_rows(num_actions: usize, denom: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    let mut parts = vec![0usize; num_actions];
    compositions(denom, 0, &mut parts, &mut rows);
    rows
}

fn compositions(remaining: usize, idx: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
    if idx + 1 == parts.len() {
        parts[idx] = remaining;
        let denom: usize = parts.iter().sum();
        out.push(parts.iter().map(|&k| k as f64 / denom as f64).collect());
        return;
    }
    for k in 0..=remaining {
        parts[idx] = k;
        compositions(remaining - k, idx + 1, parts, out);
    }
}

/// Visit every randomized Markov policy whose rows lie on the `1/denom`
/// lattice. Row order is stage-major, state-minor; enumeration is
/// lexicographic and deterministic.
pub fn for_each_grid_policy<F: FnMut(&PolicyMr)>(mdp: &FiniteHorizonMdp, denom: usize, f: &mut F) {
    let mut per_shape: std::collections::BTreeMap<usize, Vec<Vec<f64>>> = Default::default();
    for sh in &mdp.stages {
        per_shape
            .entry(sh.num_actions)
            .or_insert_with(|| simplex_grid_rows(sh.num_actions, denom));
    }
    let rows: Vec<(usize, usize)> = mdp
        .stages
        .iter()
        .enumerate()
        .flat_map(|(t, sh)| (0..sh.num_states).map(move |s| (t, s)))
        .collect();
    let mut current = PolicyMr::uniform(mdp);
    grid_descend(mdp, &rows, &per_shape, 0, &mut current, f);
}

fn grid_descend<F: FnMut(&PolicyMr)>(
    mdp: &FiniteHorizonMdp,
    rows: &[(usize, usize)],
    per_shape: &std::collections::BTreeMap<usize, Vec<Vec<f64>>>,
    idx: usize,
    current: &mut PolicyMr,
    f: &mut F,
) {
    if idx == rows.len() {
        f(current);
        return;
    }
    let (t, s) = rows[idx];
    let shapes = &per_shape[&mdp.stages[t].num_actions];
    for row in shapes {
        current.dist[t][s] = row.clone();
        grid_descend(mdp, rows, per_shape, idx + 1, current, f);
    }
}

/// Minimum robust value over the full policy lattice at `1/denom`
/// resolution. Intended for tiny instances; cost grows as the product of
/// per-row composition counts.
pub fn grid_min_robust_value(instance: &RobustInstance, denom: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    let mut first_err = None;
    for_each_grid_policy(&instance.mdp, denom, &mut |policy| {
        match robust_value(instance, policy) {
            Ok(ev) => {
                if ev.value < best {
                    best = ev.value;
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    });
    match first_err {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{
        local_minimizer_instance, local_minimizer_trap_policy, partition_instance, PartitionSpec,
    };
    use crate::instance::embed_md;
    use proptest::prelude::*;

    #[test]
    fn partition_three_weights_solves_to_balanced_split() {
        let inst = partition_instance(&PartitionSpec::new(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let report = solve_md_exhaustive(&inst).unwrap();
        assert_eq!(report.best_value, 3.0);
        assert_eq!(report.policies_examined, 8);
        // Recomputable from the reported policy.
        let ev = robust_value(&inst, &embed_md(&inst.mdp, &report.best_policy)).unwrap();
        assert!((ev.value - report.best_value).abs() <= 1e-10);
    }

    #[test]
    fn partition_without_equal_split_stays_above_half_total() {
        // {1,1,3}: the best split is {1,1} vs {3}, worst side 3 > 5/2.
        let inst = partition_instance(&PartitionSpec::new(vec![1.0, 1.0, 3.0]).unwrap()).unwrap();
        let report = solve_md_exhaustive(&inst).unwrap();
        assert_eq!(report.best_value, 3.0);
        assert!(report.best_value > 5.0 / 2.0);
    }

    #[test]
    fn exhaustive_tie_break_is_lexicographically_smallest() {
        // {2,2}: both "split" policies reach 2; (0,1) at the decision stages
        // comes before (1,0).
        let inst = partition_instance(&PartitionSpec::new(vec![2.0, 2.0]).unwrap()).unwrap();
        let report = solve_md_exhaustive(&inst).unwrap();
        assert_eq!(report.best_value, 2.0);
        assert_eq!(report.best_policy.act[0], vec![0]);
        assert_eq!(report.best_policy.act[2], vec![1]);
    }

    #[test]
    fn enumeration_guard_trips() {
        use crate::instance::{AmbiguitySet, Kernel, StageShape};
        let mdp = FiniteHorizonMdp {
            stages: vec![StageShape { num_states: 25, num_actions: 2 }],
            cost: vec![vec![vec![0.0; 2]; 25]],
        };
        let inst = RobustInstance {
            mdp,
            ambiguity: AmbiguitySet { kernels: vec![Kernel { trans: vec![] }] },
            initial_state: 0,
        };
        assert!(matches!(
            solve_md_exhaustive(&inst),
            Err(RmdpError::SizeGuard { .. })
        ));
    }

    #[test]
    fn projection_fixed_points_and_vertices() {
        assert_eq!(project_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn projection_matches_dense_grid_search() {
        let v = [0.9, 0.6, 0.3];
        let p = project_simplex(&v);
        // Independent oracle: scan the simplex at 1e-4 resolution.
        let denom = 10_000usize;
        let mut best = (f64::INFINITY, vec![0.0; 3]);
        for i in 0..=denom {
            for j in 0..=denom - i {
                let k = denom - i - j;
                let q = [
                    i as f64 / denom as f64,
                    j as f64 / denom as f64,
                    k as f64 / denom as f64,
                ];
                let d: f64 = q.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, q.to_vec());
                }
            }
        }
        for (got, want) in p.iter().zip(&best.1) {
            assert!((got - want).abs() <= 1e-4, "projection {p:?} vs grid {best:?}");
        }
    }

    proptest! {
        /// Projection output is feasible, idempotent, and no farther from
        /// the input than any random feasible point.
        #[test]
        fn projection_is_feasible_and_optimal(
            v in proptest::collection::vec(-5.0f64..5.0, 1..6),
            q_raw in proptest::collection::vec(0.01f64..1.0, 1..6),
        ) {
            let p = project_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let pp = project_simplex(&p);
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            // Normalized random competitor of matching dimension.
            let mut q = vec![0.0; v.len()];
            for (i, x) in q_raw.iter().cycle().take(v.len()).enumerate() {
                q[i] = *x;
            }
            let total: f64 = q.iter().sum();
            q.iter_mut().for_each(|x| *x /= total);
            let dp: f64 = p.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
            let dq: f64 = q.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assert!(dp <= dq + 1e-9);
        }
    }

    #[test]
    fn subgradient_at_uniform_second_stage_is_worst_kernel_continuation() {
        // pi1 = (0,1), second stage uniform: both kernels tie at 0, the
        // lowest-index kernel wins, and the first-stage partials are its
        // per-action continuation values (0.5, 0).
        let inst = local_minimizer_instance();
        let mut policy = PolicyMr::uniform(&inst.mdp);
        policy.dist[0][0] = vec![0.0, 1.0];
        let grad = robust_subgradient(&inst, &policy).unwrap();
        assert_eq!(grad.worst_kernel_index, 0);
        assert!((grad.partials[0][0][0] - 0.5).abs() <= 1e-15);
        assert!(grad.partials[0][0][1].abs() <= 1e-15);
    }

    #[test]
    fn zero_costs_give_zero_gradient() {
        let mut inst = local_minimizer_instance();
        for stage in &mut inst.mdp.cost {
            for row in stage {
                row.iter_mut().for_each(|c| *c = 0.0);
            }
        }
        let grad = robust_subgradient(&inst, &PolicyMr::uniform(&inst.mdp)).unwrap();
        assert!(grad.partials.iter().flatten().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn subgradient_matches_central_finite_differences() {
        let inst = local_minimizer_instance();
        let mut policy = PolicyMr::uniform(&inst.mdp);
        policy.dist[0][0] = vec![0.3, 0.7];
        policy.dist[1][0] = vec![0.8, 0.2];
        policy.dist[1][1] = vec![0.6, 0.4];
        let eval = robust_value(&inst, &policy).unwrap();
        let margin = {
            let mut vals = eval.per_kernel_values.clone();
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            vals[0] - vals[1]
        };
        assert!(margin > 1e-3, "need a differentiable point, margin {margin}");
        let grad = robust_subgradient(&inst, &policy).unwrap();
        let h = 1e-6;
        for t in 0..inst.horizon() {
            for s in 0..inst.mdp.num_states(t) {
                for a in 0..inst.mdp.num_actions(t) {
                    let mut plus = policy.clone();
                    plus.dist[t][s][a] += h;
                    let mut minus = policy.clone();
                    minus.dist[t][s][a] -= h;
                    let vp = robust_value(&inst, &plus).unwrap().value;
                    let vm = robust_value(&inst, &minus).unwrap().value;
                    let fd = (vp - vm) / (2.0 * h);
                    assert!(
                        (fd - grad.partials[t][s][a]).abs() <= 1e-6,
                        "coordinate ({t},{s},{a}): fd {fd} vs grad {}",
                        grad.partials[t][s][a]
                    );
                }
            }
        }
    }

    #[test]
    fn descent_from_far_basin_reaches_global_minimum() {
        let inst = local_minimizer_instance();
        let mut init = PolicyMr::uniform(&inst.mdp);
        init.dist[0][0] = vec![0.0, 1.0];
        let report = solve_mr_subgradient(&inst, &init, 0.1, 5000).unwrap();
        assert!(
            (report.best_value - -1.0).abs() <= 1e-6,
            "best value {}",
            report.best_value
        );
        assert_eq!(report.trace.len(), 5000);
    }

    #[test]
    fn descent_started_in_the_trap_basin_stays_at_zero() {
        let inst = local_minimizer_instance();
        let mut init = local_minimizer_trap_policy();
        // Nudge every free coordinate without leaving the 0.05 ball.
        init.dist[0][0] = project_simplex(&[0.98, 0.02]);
        init.dist[1][0] = project_simplex(&[0.02, 0.98]);
        init.dist[1][1] = project_simplex(&[0.015, 0.985]);
        assert!(init.distance(&local_minimizer_trap_policy()) <= 0.05);
        let report = solve_mr_subgradient(&inst, &init, 0.05, 2000).unwrap();
        assert!(report.best_value.abs() <= 1e-6, "best value {}", report.best_value);
    }

    #[test]
    fn best_iterate_is_monotone_in_iteration_budget() {
        let inst = local_minimizer_instance();
        let init = PolicyMr::uniform(&inst.mdp);
        let mut previous = f64::INFINITY;
        for iters in [10, 50, 250, 1000] {
            let report = solve_mr_subgradient(&inst, &init, 0.1, iters).unwrap();
            assert!(report.best_value <= previous + 1e-15);
            previous = report.best_value;
        }
    }

    #[test]
    fn certificate_confirms_the_strict_trap() {
        let inst = local_minimizer_instance();
        let cert = local_min_certificate(&inst, &local_minimizer_trap_policy(), 0.05, 0.01).unwrap();
        assert!(cert.is_local_min);
        assert!(cert.is_strict);
        assert!(cert.witness.is_none());
    }

    #[test]
    fn certificate_accepts_the_global_minimizer() {
        let inst = local_minimizer_instance();
        let cert =
            local_min_certificate(&inst, &crate::generators::local_minimizer_global_policy(), 0.05, 0.01)
                .unwrap();
        assert!(cert.is_local_min);
    }

    #[test]
    fn certificate_rejects_the_uniform_policy_with_witness() {
        let inst = local_minimizer_instance();
        let uniform = PolicyMr::uniform(&inst.mdp);
        let cert = local_min_certificate(&inst, &uniform, 0.05, 0.01).unwrap();
        assert!(!cert.is_local_min);
        let witness = cert.witness.expect("descent direction exists");
        let wv = robust_value(&inst, &witness).unwrap().value;
        let uv = robust_value(&inst, &uniform).unwrap().value;
        assert!(wv < uv - 1e-10);
    }

    #[test]
    fn grid_enumeration_counts_compositions() {
        assert_eq!(simplex_grid_rows(1, 100).len(), 1);
        assert_eq!(simplex_grid_rows(2, 100).len(), 101);
        assert_eq!(simplex_grid_rows(3, 4).len(), 15);
        let inst = local_minimizer_instance();
        let mut count = 0usize;
        for_each_grid_policy(&inst.mdp, 2, &mut |_| count += 1);
        // Three free rows with denominator 2: 3 choices each.
        assert_eq!(count, 27);
    }

    #[test]
    fn grid_min_over_the_gadget_reaches_the_global_minimum() {
        let inst = local_minimizer_instance();
        let best = grid_min_robust_value(&inst, 10).unwrap();
        assert_eq!(best, -1.0);
    }

    #[test]
    fn subgradient_never_beats_the_fine_grid_floor() {
        let inst = local_minimizer_instance();
        let floor = grid_min_robust_value(&inst, 100).unwrap();
        let mut init = PolicyMr::uniform(&inst.mdp);
        init.dist[0][0] = vec![0.0, 1.0];
        let report = solve_mr_subgradient(&inst, &init, 0.1, 5000).unwrap();
        assert!(report.best_value >= floor - 1e-6);
    }
}
