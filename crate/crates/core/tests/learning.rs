mod oracle;

use oracle::experiments::{cd_sanity, gradient_direction};

#[test]
fn cd_training_lowers_exact_nll() {
    let run = cd_sanity(7, 200, 1);
    let initial = run.nll[0];
    let last = *run.nll.last().unwrap();
    let best = run.nll.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(last <= 0.8 * initial, "initial {initial}, final {last}");
    assert!(last - best < 0.05 * initial, "drifted from {best} to {last}");
    assert!(last >= run.teacher_nll - 0.1, "cannot beat the teacher by much: {last} vs {}", run.teacher_nll);
}

#[test]
fn long_chain_statistic_points_downhill() {
    let positive = gradient_direction(100, 500, 11);
    assert!(positive >= 95, "{positive}/100");
}
