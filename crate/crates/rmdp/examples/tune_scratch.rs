// Scratch calibration harness; removed before release.
use rmdp::sampling::{random_interior_policy, random_single_kernel_gadget, seeded_rng};
use rmdp::solvers::{solve_md_exhaustive, solve_mr_subgradient};

fn main() {
    for (step0, iters) in [(10.0, 100_000), (10.0, 300_000)] {
        let started = std::time::Instant::now();
        let mut total_fails = 0;
        let mut worst_all = 0.0_f64;
        for seed in [20_240_817u64, 1, 7, 99, 12345, 777_777, 31, 555] {
            let mut rng = seeded_rng(seed);
            for run in 0..40 {
                let instance = random_single_kernel_gadget(&mut rng);
                let optimum = solve_md_exhaustive(&instance).unwrap().best_value;
                let init = random_interior_policy(&mut rng, &instance.mdp);
                let report = solve_mr_subgradient(&instance, &init, step0, iters).unwrap();
                let err = (report.best_value - optimum).abs();
                if err > 1e-4 {
                    total_fails += 1;
                    println!("  FAIL seed {seed} run {run}: err {err:.3e}");
                }
                worst_all = worst_all.max(err);
            }
        }
        println!(
            "step0={step0} iters={iters}: worst {worst_all:.3e}, fails {total_fails}/320, {:?}",
            started.elapsed()
        );
    }
}
