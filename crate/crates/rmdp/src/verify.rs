//! Property suites at desk scale.
//!
//! Each check returns a [`CheckResult`] instead of asserting, so the CLI
//! `verify` subcommand and the acceptance tests share one implementation.
//! All randomness is seeded; defaults live in [`DEFAULT_SEED`].

use serde::Serialize;

use crate::dynamic::{
    dynamic_dp_solve, per_stage_adversary_value, rectangularize_enumerate, DynamicPolicy,
    PolicyClass, Rectangularization,
};
use crate::error::Result;
use crate::eval::brute_force_evaluate;
use crate::generators::{
    evaluate_discounted, extend_infinite_horizon, local_minimizer_instance,
    local_minimizer_trap_policy, partition_instance, subset_sum_oracle, PartitionSpec,
    StationaryPolicy,
};
use crate::instance::{PolicyMr, RobustInstance};
use crate::landscape::{f_closed, scan, InnerScan};
use crate::robust::{max_sum_equivalence_check, robust_value};
use crate::sampling::{
    random_instance, random_nonnegative_instance, random_partition_spec, random_policy,
    random_single_kernel_gadget, random_tiny_instance, seeded_rng, ShapeBounds,
};
use crate::solvers::{
    grid_min_robust_value, local_min_certificate, project_simplex, robust_subgradient,
    solve_md_exhaustive, solve_mr_subgradient,
};

/// Seed used when the caller does not pick one.
pub const DEFAULT_SEED: u64 = 20_240_817;

/// Outcome of one named invariant check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub details: String,
}

impl CheckResult {
    fn new(name: &str, pass: bool, details: String) -> Self {
        CheckResult {
            name: name.to_string(),
            pass,
            details,
        }
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.pass)
}

// ---------------------------------------------------------------------------
// Partition / subset-sum equivalence
// ---------------------------------------------------------------------------

/// Exhaustive optimum equals half the total weight exactly iff a perfect
/// split exists, and exceeds it strictly otherwise. Exact integer
/// arithmetic, zero tolerance.
pub fn partition_equivalence_check(n_max: usize, trials: usize, seed: u64) -> Result<CheckResult> {
    let mut specs: Vec<PartitionSpec> = [
        vec![1.0],
        vec![1.0, 1.0],
        vec![1.0, 2.0],
        vec![2.0, 2.0, 2.0],
        vec![1.0, 2.0, 3.0],
        vec![1.0, 1.0, 3.0],
    ]
    .into_iter()
    .map(|w| PartitionSpec::new(w).expect("edge cases are valid"))
    .collect();
    let mut rng = seeded_rng(seed);
    for _ in 0..trials {
        specs.push(random_partition_spec(&mut rng, n_max, 200));
    }

    let mut splits = 0usize;
    for spec in &specs {
        let instance = partition_instance(spec)?;
        let report = solve_md_exhaustive(&instance)?;
        let has_split = subset_sum_oracle(spec)?;
        let half = spec.total() / 2.0;
        let hit_half = report.best_value == half;
        if hit_half != has_split {
            return Ok(CheckResult::new(
                "partition-equivalence",
                false,
                format!(
                    "weights {:?}: optimum {} vs half-total {}, oracle says split={}",
                    spec.weights, report.best_value, half, has_split
                ),
            ));
        }
        if !has_split && report.best_value <= half {
            return Ok(CheckResult::new(
                "partition-equivalence",
                false,
                format!(
                    "weights {:?}: no split exists but optimum {} is not strictly above {}",
                    spec.weights, report.best_value, half
                ),
            ));
        }
        if has_split {
            splits += 1;
        }
    }
    Ok(CheckResult::new(
        "partition-equivalence",
        true,
        format!("{} specs checked exactly, {} with perfect splits", specs.len(), splits),
    ))
}

/// Every policy's robust value on a partition instance is at least half
/// the total weight after minimization.
pub fn partition_lower_bound_check(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    for _ in 0..trials {
        let spec = random_partition_spec(&mut rng, 6, 60);
        let instance = partition_instance(&spec)?;
        let report = solve_md_exhaustive(&instance)?;
        if report.best_value < spec.total() / 2.0 {
            return Ok(CheckResult::new(
                "partition-lower-bound",
                false,
                format!(
                    "weights {:?}: optimum {} below half total {}",
                    spec.weights,
                    report.best_value,
                    spec.total() / 2.0
                ),
            ));
        }
    }
    Ok(CheckResult::new(
        "partition-lower-bound",
        true,
        format!("{trials} random specs stay at or above half the total weight"),
    ))
}

pub fn partition_suite(n_max: usize, trials: usize, seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        partition_equivalence_check(n_max, trials, seed)?,
        partition_lower_bound_check(trials.min(20), seed ^ 1)?,
    ])
}

// ---------------------------------------------------------------------------
// Local-minimizer gadget
// ---------------------------------------------------------------------------

/// Robust value at the trap policy is 0 and the 0.01-grid global minimum
/// over all free policy coordinates is -1, both within 1e-9.
pub fn gadget_values_check() -> Result<CheckResult> {
    let instance = local_minimizer_instance();
    let trap_value = robust_value(&instance, &local_minimizer_trap_policy())?.value;
    let grid_min = grid_min_robust_value(&instance, 100)?;
    let pass = trap_value.abs() <= 1e-9 && (grid_min - -1.0).abs() <= 1e-9;
    Ok(CheckResult::new(
        "gadget-values",
        pass,
        format!("trap value {trap_value}, grid(0.01) global minimum {grid_min}"),
    ))
}

/// Strictness of the trap: every 0.01-lattice policy within radius 0.05,
/// other than the trap itself, is strictly worse.
pub fn gadget_certificate_check() -> Result<CheckResult> {
    let instance = local_minimizer_instance();
    let cert = local_min_certificate(&instance, &local_minimizer_trap_policy(), 0.05, 0.01)?;
    Ok(CheckResult::new(
        "gadget-strict-local-min",
        cert.is_local_min && cert.is_strict,
        format!(
            "is_local_min={}, is_strict={}, witness={}",
            cert.is_local_min,
            cert.is_strict,
            cert.witness.is_some()
        ),
    ))
}

/// Sample an initial policy inside the 0.05 ball around the trap by
/// jittering each free coordinate by at most 0.02.
pub fn sample_policy_near_trap(seed: u64) -> PolicyMr {
    use rand::Rng;
    let mut rng = seeded_rng(seed);
    let mut init = local_minimizer_trap_policy();
    for (t, s) in [(0usize, 0usize), (1, 0), (1, 1)] {
        let offset: f64 = rng.gen_range(-0.02..0.02);
        let p0 = (init.dist[t][s][0] + offset).clamp(0.0, 1.0);
        init.dist[t][s] = project_simplex(&[p0, 1.0 - p0]);
    }
    debug_assert!(init.distance(&local_minimizer_trap_policy()) <= 0.05);
    init
}

/// Basin separation: descent seeded inside the 0.05 ball stalls at 0,
/// while descent from the far basin reaches -1, both within 1e-6.
pub fn gadget_basin_check(seed: u64) -> Result<CheckResult> {
    let instance = local_minimizer_instance();
    let near = sample_policy_near_trap(seed);
    let trapped = solve_mr_subgradient(&instance, &near, 0.05, 2000)?;

    let mut far = PolicyMr::uniform(&instance.mdp);
    far.dist[0][0] = vec![0.0, 1.0];
    let escaped = solve_mr_subgradient(&instance, &far, 0.1, 5000)?;

    let pass = trapped.best_value.abs() <= 1e-6 && (escaped.best_value - -1.0).abs() <= 1e-6;
    Ok(CheckResult::new(
        "gadget-basin-separation",
        pass,
        format!(
            "trapped best {} (target 0), far-basin best {} (target -1)",
            trapped.best_value, escaped.best_value
        ),
    ))
}

/// The instance machinery reproduces the algebraic two-branch form of the
/// gadget's robust value on a 0.05 grid over all free coordinates.
pub fn gadget_closed_form_check() -> Result<CheckResult> {
    let instance = local_minimizer_instance();
    let mut worst = 0.0_f64;
    let steps = 20usize;
    for i in 0..=steps {
        for j in 0..=steps {
            for k in 0..=steps {
                let p = i as f64 / steps as f64;
                let a = j as f64 / steps as f64;
                let b = k as f64 / steps as f64;
                let policy = PolicyMr {
                    dist: vec![
                        vec![vec![p, 1.0 - p]],
                        vec![vec![a, 1.0 - a], vec![b, 1.0 - b]],
                        vec![vec![1.0]; 4],
                    ],
                };
                let machinery = robust_value(&instance, &policy)?.value;
                let branch1 = p * a + (1.0 - p) * (-b + (1.0 - b));
                let branch2 = p * b + (1.0 - p) * (-a + (1.0 - a));
                let direct = branch1.max(branch2);
                worst = worst.max((machinery - direct).abs());
            }
        }
    }
    Ok(CheckResult::new(
        "gadget-closed-form",
        worst <= 1e-12,
        format!("max |machinery - closed form| = {worst:e} over the 0.05 grid"),
    ))
}

/// Landscape gap: the diagonal numeric partial minimum tracks the closed
/// form within 0.002 across a 0.001 grid.
pub fn landscape_gap_check() -> Result<CheckResult> {
    let rows = scan(0.001, 0.001, InnerScan::Diagonal)?;
    let max_gap = rows.iter().map(|r| r.gap.abs()).fold(0.0_f64, f64::max);
    Ok(CheckResult::new(
        "landscape-gap",
        max_gap <= 0.002,
        format!("max |f_numeric - f_closed| = {max_gap:e} over {} rows", rows.len()),
    ))
}

/// Strict one-sided increase of the closed form next to the trap endpoint.
pub fn landscape_trap_strictness_check() -> Result<CheckResult> {
    let at_one = f_closed(1.0)?;
    let pass = [0.01, 0.02, 0.05]
        .iter()
        .all(|&eps| f_closed(1.0 - eps).expect("in range") > at_one);
    Ok(CheckResult::new(
        "landscape-trap-strictness",
        pass,
        format!("f(1) = {at_one}, f(1 - eps) strictly above for eps in {{0.01, 0.02, 0.05}}"),
    ))
}

pub fn theorem2_suite(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        gadget_values_check()?,
        gadget_certificate_check()?,
        gadget_basin_check(seed)?,
        gadget_closed_form_check()?,
        landscape_gap_check()?,
        landscape_trap_strictness_check()?,
    ])
}

// ---------------------------------------------------------------------------
// Evaluation oracles, gradients, aggregation properties
// ---------------------------------------------------------------------------

/// Backward induction against the trajectory-enumeration oracle, plus the
/// exact max structure of the robust evaluation.
pub fn oracle_equivalence_check(samples: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    let mut max_err = 0.0_f64;
    for i in 0..samples {
        let instance = random_instance(&mut rng, ShapeBounds::default());
        let policy = random_policy(&mut rng, &instance.mdp);
        let ev = robust_value(&instance, &policy)?;
        for (k, kernel) in instance.ambiguity.kernels.iter().enumerate() {
            let bf = brute_force_evaluate(&instance.mdp, kernel, &policy, instance.initial_state)?;
            let err = (bf - ev.per_kernel_values[k]).abs();
            max_err = max_err.max(err);
            if err > 1e-10 {
                return Ok(CheckResult::new(
                    "oracle-equivalence",
                    false,
                    format!("sample {i}, kernel {k}: backward induction vs enumeration differ by {err:e}"),
                ));
            }
        }
        let exact_max = ev.per_kernel_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if ev.value != exact_max || ev.per_kernel_values[ev.worst_kernel_index] != ev.value {
            return Ok(CheckResult::new(
                "oracle-equivalence",
                false,
                format!("sample {i}: robust value {} is not the exact per-kernel max {exact_max}", ev.value),
            ));
        }
    }
    Ok(CheckResult::new(
        "oracle-equivalence",
        true,
        format!("{samples} random instances, max |evaluate - brute force| = {max_err:e}"),
    ))
}

/// Subgradient coordinates against central finite differences at points
/// where the worst kernel is unique by a clear margin.
pub fn gradient_check(points: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    let h = 1e-6;
    let mut accepted = 0usize;
    let mut max_err = 0.0_f64;
    let mut attempts = 0usize;
    while accepted < points {
        attempts += 1;
        if attempts > points * 200 {
            return Ok(CheckResult::new(
                "gradient-finite-difference",
                false,
                format!("only {accepted}/{points} points with a unique worst kernel found"),
            ));
        }
        let bounds = ShapeBounds { max_kernels: 3, ..ShapeBounds::default() };
        let instance = random_instance(&mut rng, bounds);
        if instance.ambiguity.len() < 2 {
            continue;
        }
        let policy = random_policy(&mut rng, &instance.mdp);
        let ev = robust_value(&instance, &policy)?;
        let mut sorted = ev.per_kernel_values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted[0] - sorted[1] <= 1e-3 {
            continue;
        }
        accepted += 1;
        let grad = robust_subgradient(&instance, &policy)?;
        for t in 0..instance.horizon() {
            for s in 0..instance.mdp.num_states(t) {
                for a in 0..instance.mdp.num_actions(t) {
                    let mut plus = policy.clone();
                    plus.dist[t][s][a] += h;
                    let mut minus = policy.clone();
                    minus.dist[t][s][a] -= h;
                    let vp = robust_value(&instance, &plus)?.value;
                    let vm = robust_value(&instance, &minus)?.value;
                    let fd = (vp - vm) / (2.0 * h);
                    let err = (fd - grad.partials[t][s][a]).abs();
                    max_err = max_err.max(err);
                    if err > 1e-6 {
                        return Ok(CheckResult::new(
                            "gradient-finite-difference",
                            false,
                            format!("coordinate ({t},{s},{a}): finite difference {fd} vs gradient {} (err {err:e})",
                                grad.partials[t][s][a]),
                        ));
                    }
                }
            }
        }
    }
    Ok(CheckResult::new(
        "gradient-finite-difference",
        true,
        format!("{points} differentiable points, max coordinate error {max_err:e}"),
    ))
}

/// Max/sum dichotomy under nonnegative costs: nonpositive worst case,
/// nonpositive sum, and all-kernels-nonpositive coincide on every sample.
pub fn proposition1_check(samples: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    let mut zero_cases = 0usize;
    for i in 0..samples {
        let instance = random_nonnegative_instance(&mut rng, ShapeBounds::default(), 2);
        let policy = random_policy(&mut rng, &instance.mdp);
        let report = max_sum_equivalence_check(&instance, &policy)?;
        let ev = robust_value(&instance, &policy)?;
        let tol = 1e-9;
        let max_nonpos = report.max_value <= tol;
        let sum_nonpos = report.sum_value <= tol;
        let all_nonpos = ev.per_kernel_values.iter().all(|&v| v <= tol);
        if !(report.both_nonpositive_agree && max_nonpos == sum_nonpos && max_nonpos == all_nonpos) {
            return Ok(CheckResult::new(
                "max-sum-equivalence",
                false,
                format!(
                    "sample {i}: max {} sum {} disagree on nonpositivity",
                    report.max_value, report.sum_value
                ),
            ));
        }
        if max_nonpos {
            zero_cases += 1;
        }
    }
    Ok(CheckResult::new(
        "max-sum-equivalence",
        true,
        format!("{samples} nonnegative-cost samples agree; {zero_cases} hit the all-zero branch"),
    ))
}

// ---------------------------------------------------------------------------
// Dynamic formulation
// ---------------------------------------------------------------------------

/// Dynamic MR backward induction against the grid-minimized static robust
/// value over the per-state rectangularized set, plus the exact
/// decomposition identities at the DP's own policy.
pub fn dynamic_consistency_check(random_instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    let mut cases: Vec<RobustInstance> = vec![
        local_minimizer_instance(),
        partition_instance(&PartitionSpec::new(vec![1.0]).unwrap())?,
    ];
    for _ in 0..random_instances {
        let kernels = if rng.gen_bool(0.5) { 2 } else { 3 };
        cases.push(random_tiny_instance(&mut rng, kernels));
    }

    let denom = 50usize; // 0.02 lattice
    let mut worst_gap = 0.0_f64;
    for (i, instance) in cases.iter().enumerate() {
        let dp = dynamic_dp_solve(instance, PolicyClass::Mr, 1e-9)?;
        let dp_value = dp.root_value(instance);
        let DynamicPolicy::Mr(dp_policy) = &dp.policy else { unreachable!() };

        // Exact route: the per-stage adversary value of the DP policy and
        // the enumerated per-state product set must reproduce the DP value.
        let adversary = per_stage_adversary_value(instance, dp_policy)?;
        let rect = rectangularize_enumerate(instance, Rectangularization::PerState)?;
        let mut widened = instance.clone();
        widened.ambiguity = rect;
        let static_at_dp = robust_value(&widened, dp_policy)?.value;
        if (adversary - dp_value).abs() > 1e-9 || (static_at_dp - dp_value).abs() > 1e-9 {
            return Ok(CheckResult::new(
                "dynamic-rectangular-consistency",
                false,
                format!(
                    "case {i}: DP value {dp_value}, adversary {adversary}, static-at-DP-policy {static_at_dp}"
                ),
            ));
        }

        // Grid route: minimize the static robust value over the product set
        // on the 0.02 policy lattice and bracket it against the DP value.
        let grid_min = grid_min_robust_value(&widened, denom)?;
        let coords: usize = instance
            .mdp
            .stages
            .iter()
            .map(|sh| sh.num_states * sh.num_actions)
            .sum();
        let lipschitz: f64 = instance
            .mdp
            .cost
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .flatten()
                    .map(|c| c.abs())
                    .fold(0.0_f64, f64::max)
            })
            .sum();
        let slack = lipschitz * coords as f64 * (0.5 / denom as f64) + 1e-6;
        if grid_min < dp_value - 1e-6 || grid_min > dp_value + slack {
            return Ok(CheckResult::new(
                "dynamic-rectangular-consistency",
                false,
                format!(
                    "case {i}: grid minimum {grid_min} outside [{} , {}] around DP value {dp_value}",
                    dp_value - 1e-6,
                    dp_value + slack
                ),
            ));
        }
        worst_gap = worst_gap.max((grid_min - dp_value).abs());
    }
    Ok(CheckResult::new(
        "dynamic-rectangular-consistency",
        true,
        format!("{} instances; worst |grid minimum - DP value| = {worst_gap:e}", cases.len()),
    ))
}

/// For a fixed policy the per-stage adversary is at least as strong as the
/// static one.
pub fn adversary_inequality_check(pairs: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    let mut max_static_minus_dynamic = f64::NEG_INFINITY;
    for i in 0..pairs {
        let instance = random_instance(&mut rng, ShapeBounds::default());
        let policy = random_policy(&mut rng, &instance.mdp);
        let dynamic = per_stage_adversary_value(&instance, &policy)?;
        let fixed = robust_value(&instance, &policy)?.value;
        max_static_minus_dynamic = max_static_minus_dynamic.max(fixed - dynamic);
        if dynamic < fixed - 1e-10 {
            return Ok(CheckResult::new(
                "per-stage-adversary-dominates",
                false,
                format!("pair {i}: per-stage adversary {dynamic} below static {fixed}"),
            ));
        }
    }
    Ok(CheckResult::new(
        "per-stage-adversary-dominates",
        true,
        format!("{pairs} pairs; max static-minus-dynamic = {max_static_minus_dynamic:e}"),
    ))
}

/// Dynamic MR values never exceed dynamic MD values anywhere.
pub fn dynamic_md_mr_ordering_check(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    for i in 0..instances {
        let instance = random_tiny_instance(&mut rng, 2);
        let md = dynamic_dp_solve(&instance, PolicyClass::Md, 1e-9)?;
        let mr = dynamic_dp_solve(&instance, PolicyClass::Mr, 1e-9)?;
        for (vm, vr) in md.values.iter().zip(&mr.values) {
            for (x, y) in vm.iter().zip(vr) {
                if *y > *x + 1e-10 {
                    return Ok(CheckResult::new(
                        "dynamic-md-mr-ordering",
                        false,
                        format!("instance {i}: an MR state value {y} exceeds the MD value {x}"),
                    ));
                }
            }
        }
    }
    Ok(CheckResult::new(
        "dynamic-md-mr-ordering",
        true,
        format!("{instances} instances ordered correctly at every state"),
    ))
}

pub fn dynamic_suite(random_instances: usize, pairs: usize, seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        dynamic_consistency_check(random_instances, seed)?,
        adversary_inequality_check(pairs, seed ^ 2)?,
        dynamic_md_mr_ordering_check(25, seed ^ 3)?,
    ])
}

// ---------------------------------------------------------------------------
// Fixed-kernel sanity and the discounted embedding
// ---------------------------------------------------------------------------

/// With one kernel there is no trap: seeded subgradient runs land on the
/// exhaustive deterministic optimum within 1e-4.
pub fn single_kernel_no_trap_check(runs: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0_f64;
    for i in 0..runs {
        let instance = random_single_kernel_gadget(&mut rng);
        let optimum = solve_md_exhaustive(&instance)?.best_value;
        let init = random_policy(&mut rng, &instance.mdp);
        let report = solve_mr_subgradient(&instance, &init, 0.3, 4000)?;
        let err = (report.best_value - optimum).abs();
        worst = worst.max(err);
        if err > 1e-4 {
            return Ok(CheckResult::new(
                "single-kernel-no-trap",
                false,
                format!("run {i}: subgradient best {} vs exhaustive optimum {optimum}", report.best_value),
            ));
        }
    }
    Ok(CheckResult::new(
        "single-kernel-no-trap",
        true,
        format!("{runs} seeded runs; worst gap to the exhaustive optimum = {worst:e}"),
    ))
}

/// Discounted value of the embedded partition instance against the
/// geometric closed form.
pub fn infinite_embedding_check() -> Result<CheckResult> {
    let instance = partition_instance(&PartitionSpec::new(vec![1.0, 2.0, 3.0]).unwrap())?;
    let gamma = 0.9_f64;
    let ext = extend_infinite_horizon(&instance, gamma)?;
    let policy = StationaryPolicy {
        dist: ext
            .num_actions
            .iter()
            .map(|&na| {
                let mut row = vec![0.0; na];
                row[0] = 1.0;
                row
            })
            .collect(),
    };
    let value = evaluate_discounted(&ext, 0, &policy, ext.initial_state)?;
    let closed = gamma + 2.0 * gamma.powi(3) + 3.0 * gamma.powi(5);
    let err = (value - closed).abs();
    Ok(CheckResult::new(
        "infinite-horizon-embedding",
        err <= 1e-10,
        format!("discounted value {value} vs closed form {closed} (err {err:e})"),
    ))
}

use rand::Rng;
