//! Numerical study of the local-minimizer gadget's value landscape.
//!
//! With the first-stage mixture pinned to `(pi1_0, 1 - pi1_0)` and the two
//! second-stage rows parameterized by their action-0 masses `(a, b)`, the
//! robust value is
//!
//! `g(a, b) = max{ pi1_0*a + pi1_1*(1 - 2b), pi1_0*b + pi1_1*(1 - 2a) }`,
//!
//! a convex, symmetric function of `(a, b)`. Its partial minimum over the
//! second stage therefore lives on the diagonal and collapses to the
//! closed form `f(pi1_0) = min{ pi1_1, pi1_0 - pi1_1 }`. The numeric route
//! evaluates `g` through the full robust-evaluation machinery, so the scan
//! cross-checks the instance construction against the closed form.

use serde::Serialize;

use crate::error::{Result, RmdpError};
use crate::generators::local_minimizer_instance;
use crate::instance::{PolicyMr, RobustInstance};
use crate::robust::robust_value;

/// How the inner minimization over the second stage is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerScan {
    /// Scan the diagonal `a = b`, which the symmetry argument shows is
    /// enough.
    #[default]
    Diagonal,
    /// Scan the full `(a, b)` grid; the trust-but-verify mode.
    Full,
}

/// One landscape sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub pi1_0: f64,
    pub f_numeric: f64,
    pub f_closed: f64,
    /// Signed `f_numeric - f_closed`.
    pub gap: f64,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) || !x.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "{name} must lie in [0, 1], got {x}"
        )));
    }
    Ok(())
}

fn check_step(name: &str, step: f64) -> Result<()> {
    if !(step > 0.0 && step <= 1.0) || !step.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "{name} must lie in (0, 1], got {step}"
        )));
    }
    Ok(())
}

/// Grid `0, step, 2*step, ..., 1` (the endpoint is always included).
fn unit_grid(step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let x = k as f64 * step;
        if x >= 1.0 - 1e-12 {
            break;
        }
        grid.push(x);
        k += 1;
    }
    grid.push(1.0);
    grid
}

/// Robust value of the gadget policy `(pi1_0, a, b)`, evaluated through the
/// instance machinery rather than the algebraic shortcut.
pub fn g_value(instance: &RobustInstance, pi1_0: f64, a: f64, b: f64) -> f64 {
    let policy = PolicyMr {
        dist: vec![
            vec![vec![pi1_0, 1.0 - pi1_0]],
            vec![vec![a, 1.0 - a], vec![b, 1.0 - b]],
            vec![vec![1.0]; 4],
        ],
    };
    robust_value(instance, &policy)
        .expect("the gadget policy is always dimension-compatible")
        .value
}

/// Numeric partial minimum over the second stage at resolution `grid_step`,
/// scanning the diagonal.
pub fn f_numeric(pi1_0: f64, grid_step: f64) -> Result<f64> {
    f_numeric_with(pi1_0, grid_step, InnerScan::Diagonal)
}

/// Numeric partial minimum with an explicit inner-scan mode.
pub fn f_numeric_with(pi1_0: f64, grid_step: f64, mode: InnerScan) -> Result<f64> {
    check_unit("pi1_0", pi1_0)?;
    check_step("grid_step", grid_step)?;
    let instance = local_minimizer_instance();
    Ok(inner_min(&instance, pi1_0, grid_step, mode))
}

fn inner_min(instance: &RobustInstance, pi1_0: f64, grid_step: f64, mode: InnerScan) -> f64 {
    let grid = unit_grid(grid_step);
    let mut best = f64::INFINITY;
    match mode {
        InnerScan::Diagonal => {
            for &a in &grid {
                best = best.min(g_value(instance, pi1_0, a, a));
            }
        }
        InnerScan::Full => {
            for &a in &grid {
                for &b in &grid {
                    best = best.min(g_value(instance, pi1_0, a, b));
                }
            }
        }
    }
    best
}

/// The closed-form partial minimum: with `pi1_1 = 1 - pi1_0`,
/// `f = min{ pi1_1, pi1_0 - pi1_1 }`.
pub fn f_closed(pi1_0: f64) -> Result<f64> {
    check_unit("pi1_0", pi1_0)?;
    let pi1_1 = 1.0 - pi1_0;
    Ok(pi1_1.min(pi1_0 - pi1_1))
}

/// Sample the landscape on the outer grid, carrying both routes and their
/// gap. Rows come out in ascending `pi1_0` order.
pub fn scan(grid_step_pi1: f64, grid_step_inner: f64, mode: InnerScan) -> Result<Vec<ScanRow>> {
    check_step("grid_step_pi1", grid_step_pi1)?;
    check_step("grid_step_inner", grid_step_inner)?;
    let instance = local_minimizer_instance();
    Ok(unit_grid(grid_step_pi1)
        .into_iter()
        .map(|pi1_0| {
            let numeric = inner_min(&instance, pi1_0, grid_step_inner, mode);
            let closed = f_closed(pi1_0).expect("grid point lies in [0, 1]");
            ScanRow {
                pi1_0,
                f_numeric: numeric,
                f_closed: closed,
                gap: numeric - closed,
            }
        })
        .collect())
}

/// Scan rows as CSV with header `pi1_0,f_numeric,f_closed,gap`.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("pi1_0,f_numeric,f_closed,gap\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.pi1_0, row.f_numeric, row.f_closed, row.gap
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn closed_form_endpoints_and_kink() {
        assert_eq!(f_closed(1.0).unwrap(), 0.0);
        assert_eq!(f_closed(0.0).unwrap(), -1.0);
        let kink = f_closed(2.0 / 3.0).unwrap();
        assert!((kink - 1.0 / 3.0).abs() <= 1e-15);
        assert!(f_closed(1.5).is_err());
        assert!(f_closed(-0.1).is_err());
    }

    #[test]
    fn numeric_route_hits_the_paper_values() {
        assert_eq!(f_numeric(1.0, 0.01).unwrap(), 0.0);
        assert_eq!(f_numeric(0.0, 0.01).unwrap(), -1.0);
        let mid = f_numeric(0.6, 0.01).unwrap();
        assert!((mid - 0.2).abs() <= 1e-12, "f(0.6) = {mid}");
    }

    #[test]
    fn diagonal_and_full_scans_agree() {
        for pi1_0 in [0.0, 0.25, 2.0 / 3.0, 0.9, 1.0] {
            let diag = f_numeric_with(pi1_0, 0.05, InnerScan::Diagonal).unwrap();
            let full = f_numeric_with(pi1_0, 0.05, InnerScan::Full).unwrap();
            assert!(
                (diag - full).abs() <= 1e-12,
                "diagonal {diag} vs full {full} at {pi1_0}"
            );
        }
    }

    #[test]
    fn coarse_scan_rows_match_hand_arithmetic() {
        let rows = scan(0.5, 0.5, InnerScan::Diagonal).unwrap();
        let closed: Vec<f64> = rows.iter().map(|r| r.f_closed).collect();
        assert_eq!(closed, vec![-1.0, 0.0, 0.0]);
        let pi: Vec<f64> = rows.iter().map(|r| r.pi1_0).collect();
        assert_eq!(pi, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn gap_stays_within_inner_grid_slack() {
        for row in scan(0.05, 0.05, InnerScan::Diagonal).unwrap() {
            assert!(row.gap.abs() <= 0.05 + 1e-12, "row {row:?}");
        }
    }

    #[test]
    fn closed_form_peaks_at_two_thirds() {
        let rows = scan(0.001, 0.01, InnerScan::Diagonal).unwrap();
        let best = rows
            .iter()
            .max_by(|a, b| a.f_closed.partial_cmp(&b.f_closed).unwrap())
            .unwrap();
        assert!((best.f_closed - 1.0 / 3.0).abs() <= 2e-3);
        assert!((best.pi1_0 - 2.0 / 3.0).abs() <= 1e-3 + 1e-12);
    }

    #[test]
    fn strictness_near_the_trap_endpoint() {
        let at_one = f_closed(1.0).unwrap();
        for eps in [0.01, 0.02, 0.05] {
            assert!(f_closed(1.0 - eps).unwrap() > at_one);
        }
    }

    #[test]
    fn g_is_exactly_symmetric() {
        let instance = local_minimizer_instance();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (p, a, b) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let ab = g_value(&instance, p, a, b);
            let ba = g_value(&instance, p, b, a);
            assert_eq!(ab, ba, "g({p},{a},{b})");
        }
    }

    #[test]
    fn csv_has_the_contracted_header() {
        let rows = scan(0.5, 0.5, InnerScan::Diagonal).unwrap();
        let csv = scan_csv(&rows);
        assert!(csv.starts_with("pi1_0,f_numeric,f_closed,gap\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
