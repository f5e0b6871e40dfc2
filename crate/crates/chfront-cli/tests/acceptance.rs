//! Acceptance criteria A1–A9, one test each. Every test writes its PASS/FAIL
//! line to stderr uncaptured, so the full table shows in any test log.

use std::io::Write;

use chfront_cli::verify::{corrupted_spreading, criterion, Oracle};

fn check(id: &str) {
    let r = criterion(id, &Oracle::default());
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{}", r.line());
    for n in &r.notes {
        let _ = writeln!(err, "       {n}");
    }
    assert!(r.pass, "{}", r.line());
}

#[test]
fn a1_closed_form_spreading() {
    check("A1");
}

#[test]
fn a2_crossing_asymptotics() {
    check("A2");
}

#[test]
fn a3_grid_eigenvalue_convergence() {
    check("A3");
}

#[test]
fn a4_eigenvalue_count() {
    check("A4");
}

#[test]
fn a5_evans_nonvanishing() {
    check("A5");
}

#[test]
fn a6_branching_direction() {
    check("A6");
}

#[test]
fn a7_simulation_classification() {
    check("A7");
}

#[test]
fn a8_amplitude_law() {
    check("A8");
}

#[test]
fn a9_property_suites() {
    check("A9");
}

#[test]
fn corrupted_oracle_fails_a1() {
    let r = criterion("A1", &Oracle { spreading: corrupted_spreading });
    let _ = writeln!(std::io::stderr().lock(), "negative control: {}", r.line());
    assert!(!r.pass);
}
