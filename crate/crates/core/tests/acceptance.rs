//! Acceptance suite: one test per criterion, sharing the integrated
//! trajectories through a process-wide cache. Run with `-- --nocapture` to
//! see the measured-vs-tolerance line of every criterion.

use std::sync::OnceLock;

use hdp_core::verify::{run_all, CriterionReport};

static REPORTS: OnceLock<Vec<CriterionReport>> = OnceLock::new();

fn report(id: usize) -> &'static CriterionReport {
    let reports = REPORTS.get_or_init(|| run_all(42, None));
    reports
        .iter()
        .find(|r| r.id == id)
        .unwrap_or_else(|| panic!("criterion {id} missing"))
}

fn check(id: usize) {
    let r = report(id);
    println!("{}", r.line());
    assert!(
        r.passed,
        "criterion {} failed: measured {:.3e} > tolerance {:.1e} ({})",
        r.id, r.measured, r.tolerance, r.detail
    );
}

#[test]
fn c01_algebra_identities() {
    check(1);
}

#[test]
fn c02_connection_suite() {
    check(2);
}

#[test]
fn c03_equation_specialization() {
    check(3);
}

#[test]
fn c04_oracle_equivalence() {
    check(4);
}

#[test]
fn c05_reconstruction_round_trip() {
    check(5);
}

#[test]
fn c06_constraint_maintenance() {
    check(6);
}

#[test]
fn c07_energy_conservation() {
    check(7);
}

#[test]
fn c08_derivative_cross_checks() {
    check(8);
}

#[test]
fn c09_symmetry_suite() {
    check(9);
}

#[test]
fn c10_reduction_count() {
    check(10);
}
