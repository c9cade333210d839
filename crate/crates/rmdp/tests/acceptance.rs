//! Acceptance suite: one test per release criterion, each printing a
//! single PASS/FAIL line. Run with `cargo test --test acceptance --
//! --nocapture` to see the lines on success too.

use std::time::Instant;

use rmdp::verify::{self, CheckResult, DEFAULT_SEED};

fn report(id: &str, result: &CheckResult) {
    println!(
        "ACCEPTANCE {id} [{}]: {} — {}",
        result.name,
        if result.pass { "PASS" } else { "FAIL" },
        result.details
    );
    assert!(result.pass, "{id} failed: {}", result.details);
}

#[test]
fn criterion_01_partition_equivalence() {
    let started = Instant::now();
    let result = verify::partition_equivalence_check(10, 50, DEFAULT_SEED).unwrap();
    let elapsed = started.elapsed();
    report("01", &result);
    println!("ACCEPTANCE 01 runtime: {elapsed:?} (budget 10s)");
    assert!(elapsed.as_secs_f64() < 10.0, "criterion 1 exceeded its 10s budget: {elapsed:?}");
}

#[test]
fn criterion_02_gadget_values() {
    let started = Instant::now();
    let result = verify::gadget_values_check().unwrap();
    let elapsed = started.elapsed();
    report("02", &result);
    println!("ACCEPTANCE 02 runtime: {elapsed:?} (budget 60s)");
    assert!(elapsed.as_secs_f64() < 60.0, "criterion 2 exceeded its 60s budget: {elapsed:?}");
}

#[test]
fn criterion_03_strict_local_minimizer_certificate() {
    report("03", &verify::gadget_certificate_check().unwrap());
}

#[test]
fn criterion_04_basin_separation() {
    report("04", &verify::gadget_basin_check(DEFAULT_SEED).unwrap());
}

#[test]
fn criterion_05_partial_minimum_closed_form() {
    report("05", &verify::landscape_gap_check().unwrap());
}

#[test]
fn criterion_06_oracle_equivalence() {
    report("06", &verify::oracle_equivalence_check(200, DEFAULT_SEED).unwrap());
}

#[test]
fn criterion_07_gradient_finite_differences() {
    report("07", &verify::gradient_check(50, DEFAULT_SEED).unwrap());
}

#[test]
fn criterion_08_max_sum_equivalence() {
    report("08", &verify::proposition1_check(200, DEFAULT_SEED).unwrap());
}

#[test]
fn criterion_09_dynamic_rectangular_consistency() {
    report("09a", &verify::dynamic_consistency_check(20, DEFAULT_SEED).unwrap());
    report("09b", &verify::adversary_inequality_check(200, DEFAULT_SEED ^ 2).unwrap());
}

#[test]
fn criterion_10_single_kernel_no_trap() {
    report("10", &verify::single_kernel_no_trap_check(20, DEFAULT_SEED).unwrap());
}

#[test]
fn criterion_11_infinite_horizon_embedding() {
    report("11", &verify::infinite_embedding_check().unwrap());
}
