//! Seeded random instances and policies for the verification suites.
//!
//! Everything here is deterministic given the seed; no ambient entropy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::generators::PartitionSpec;
use crate::instance::{AmbiguitySet, FiniteHorizonMdp, Kernel, PolicyMr, RobustInstance, StageShape};

/// The deterministic RNG used across the toolkit.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bounds for random instance shapes.
#[derive(Debug, Clone, Copy)]
pub struct ShapeBounds {
    pub max_horizon: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_kernels: usize,
}

impl Default for ShapeBounds {
    fn default() -> Self {
        ShapeBounds {
            max_horizon: 4,
            max_states: 3,
            max_actions: 3,
            max_kernels: 3,
        }
    }
}

fn random_row(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    // Occasionally a point mass, otherwise a normalized positive vector.
    if rng.gen_bool(0.3) {
        let mut row = vec![0.0; len];
        row[rng.gen_range(0..len)] = 1.0;
        return row;
    }
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_kernel(rng: &mut ChaCha8Rng, stages: &[StageShape]) -> Kernel {
    let trans = (0..stages.len().saturating_sub(1))
        .map(|t| {
            (0..stages[t].num_states)
                .map(|_| {
                    (0..stages[t].num_actions)
                        .map(|_| random_row(rng, stages[t + 1].num_states))
                        .collect()
                })
                .collect()
        })
        .collect();
    Kernel { trans }
}

/// A random instance within the bounds, with costs drawn from
/// `cost_range` (entries are zeroed with probability `zero_cost_prob`).
pub fn random_instance_with_costs(
    rng: &mut ChaCha8Rng,
    bounds: ShapeBounds,
    cost_range: (f64, f64),
    zero_cost_prob: f64,
) -> RobustInstance {
    let horizon = rng.gen_range(1..=bounds.max_horizon);
    let stages: Vec<StageShape> = (0..horizon)
        .map(|_| StageShape {
            num_states: rng.gen_range(1..=bounds.max_states),
            num_actions: rng.gen_range(1..=bounds.max_actions),
        })
        .collect();
    let cost = stages
        .iter()
        .map(|sh| {
            (0..sh.num_states)
                .map(|_| {
                    (0..sh.num_actions)
                        .map(|_| {
                            if rng.gen_bool(zero_cost_prob) {
                                0.0
                            } else {
                                rng.gen_range(cost_range.0..cost_range.1)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let num_kernels = rng.gen_range(1..=bounds.max_kernels);
    let kernels = (0..num_kernels).map(|_| random_kernel(rng, &stages)).collect();
    let initial_state = rng.gen_range(0..stages[0].num_states);
    RobustInstance {
        mdp: FiniteHorizonMdp { stages, cost },
        ambiguity: AmbiguitySet { kernels },
        initial_state,
    }
}

/// A random instance with signed costs in [-1, 1].
pub fn random_instance(rng: &mut ChaCha8Rng, bounds: ShapeBounds) -> RobustInstance {
    random_instance_with_costs(rng, bounds, (-1.0, 1.0), 0.0)
}

/// A random nonnegative-cost instance with at least `min_kernels` kernels;
/// many zero entries so both branches of the max/sum dichotomy occur.
pub fn random_nonnegative_instance(
    rng: &mut ChaCha8Rng,
    bounds: ShapeBounds,
    min_kernels: usize,
) -> RobustInstance {
    let mut inst = random_instance_with_costs(rng, bounds, (0.0, 1.0), 0.6);
    while inst.ambiguity.len() < min_kernels {
        let extra = random_kernel(rng, &inst.mdp.stages);
        inst.ambiguity.kernels.push(extra);
    }
    if rng.gen_bool(0.2) {
        // Forced zero-cost instance: every policy is worth exactly zero.
        for stage in &mut inst.mdp.cost {
            for row in stage {
                row.iter_mut().for_each(|c| *c = 0.0);
            }
        }
    }
    inst
}

/// A random randomized Markov policy for the MDP.
pub fn random_policy(rng: &mut ChaCha8Rng, mdp: &FiniteHorizonMdp) -> PolicyMr {
    let dist = mdp
        .stages
        .iter()
        .map(|sh| (0..sh.num_states).map(|_| random_row(rng, sh.num_actions)).collect())
        .collect();
    PolicyMr { dist }
}

/// A random policy bounded away from the simplex boundary (every action
/// keeps probability at least `0.2 / num_actions`-ish). Descent from an
/// interior point keeps early visit probabilities positive everywhere,
/// which the boundary-plateau checks rely on.
pub fn random_interior_policy(rng: &mut ChaCha8Rng, mdp: &FiniteHorizonMdp) -> PolicyMr {
    let dist = mdp
        .stages
        .iter()
        .map(|sh| {
            (0..sh.num_states)
                .map(|_| {
                    let raw: Vec<f64> = (0..sh.num_actions).map(|_| rng.gen_range(0.2..1.0)).collect();
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();
    PolicyMr { dist }
}

/// A random integer-weight partition problem with `n <= n_max` weights
/// and total at most `sum_max`.
pub fn random_partition_spec(rng: &mut ChaCha8Rng, n_max: usize, sum_max: u64) -> PartitionSpec {
    let n = rng.gen_range(1..=n_max);
    let mut weights = Vec::with_capacity(n);
    let mut budget = sum_max.saturating_sub(n as u64);
    for i in 0..n {
        let remaining_slots = (n - i - 1) as u64;
        let cap = (budget / (remaining_slots + 1)).max(1);
        let w = rng.gen_range(1..=cap.min(40));
        budget = budget.saturating_sub(w - 1);
        weights.push(w as f64);
    }
    PartitionSpec::new(weights).expect("generated weights are positive")
}

/// Shapes small enough for grid-based consistency checks: at most three
/// free two-action rows before the terminal stage.
pub fn random_tiny_instance(rng: &mut ChaCha8Rng, kernels: usize) -> RobustInstance {
    let shape_pool: Vec<Vec<StageShape>> = vec![
        vec![
            StageShape { num_states: 1, num_actions: 2 },
            StageShape { num_states: 2, num_actions: 2 },
        ],
        vec![
            StageShape { num_states: 1, num_actions: 2 },
            StageShape { num_states: 2, num_actions: 1 },
        ],
        vec![
            StageShape { num_states: 1, num_actions: 2 },
            StageShape { num_states: 2, num_actions: 2 },
            StageShape { num_states: 2, num_actions: 1 },
        ],
        vec![
            StageShape { num_states: 1, num_actions: 2 },
            StageShape { num_states: 1, num_actions: 2 },
            StageShape { num_states: 3, num_actions: 1 },
        ],
    ];
    let stages = shape_pool[rng.gen_range(0..shape_pool.len())].clone();
    let cost = stages
        .iter()
        .map(|sh| {
            (0..sh.num_states)
                .map(|_| (0..sh.num_actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    let kernels = (0..kernels).map(|_| random_kernel(rng, &stages)).collect();
    RobustInstance {
        mdp: FiniteHorizonMdp { stages, cost },
        ambiguity: AmbiguitySet { kernels },
        initial_state: 0,
    }
}

/// Theorem-2-shaped instance (1x2, 2x2, 4x1 stages) with a single random
/// kernel and random costs; used for the fixed-kernel no-trap checks.
pub fn random_single_kernel_gadget(rng: &mut ChaCha8Rng) -> RobustInstance {
    let stages = vec![
        StageShape { num_states: 1, num_actions: 2 },
        StageShape { num_states: 2, num_actions: 2 },
        StageShape { num_states: 4, num_actions: 1 },
    ];
    let cost = stages
        .iter()
        .map(|sh| {
            (0..sh.num_states)
                .map(|_| (0..sh.num_actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    let kernel = random_kernel(rng, &stages);
    RobustInstance {
        mdp: FiniteHorizonMdp { stages, cost },
        ambiguity: AmbiguitySet { kernels: vec![kernel] },
        initial_state: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate;

    #[test]
    fn random_instances_are_valid_and_reproducible() {
        let mut a = seeded_rng(42);
        let mut b = seeded_rng(42);
        for _ in 0..50 {
            let x = random_instance(&mut a, ShapeBounds::default());
            let y = random_instance(&mut b, ShapeBounds::default());
            assert_eq!(x, y, "same seed, same instance");
            assert!(validate(&x).is_empty(), "violations: {:?}", validate(&x));
        }
    }

    #[test]
    fn nonnegative_instances_have_no_negative_costs_and_enough_kernels() {
        let mut rng = seeded_rng(7);
        for _ in 0..50 {
            let inst = random_nonnegative_instance(&mut rng, ShapeBounds::default(), 2);
            assert!(inst.ambiguity.len() >= 2);
            assert!(inst.mdp.cost.iter().flatten().flatten().all(|&c| c >= 0.0));
            assert!(validate(&inst).is_empty());
        }
    }

    #[test]
    fn partition_specs_respect_their_budget() {
        let mut rng = seeded_rng(11);
        for _ in 0..100 {
            let spec = random_partition_spec(&mut rng, 10, 200);
            assert!(spec.len() <= 10);
            assert!(spec.total() <= 200.0);
            assert!(spec.weights.iter().all(|&w| w >= 1.0 && w.fract() == 0.0));
        }
    }

    #[test]
    fn tiny_instances_stay_grid_friendly() {
        let mut rng = seeded_rng(3);
        for _ in 0..20 {
            let inst = random_tiny_instance(&mut rng, 2);
            assert!(validate(&inst).is_empty());
            let free_rows: usize = inst
                .mdp
                .stages
                .iter()
                .map(|sh| if sh.num_actions > 1 { sh.num_states } else { 0 })
                .sum();
            assert!(free_rows <= 3);
        }
    }
}
