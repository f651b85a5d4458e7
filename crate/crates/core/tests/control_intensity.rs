//! On complete local graphs with i.i.d. weights the center keeps a neighbor
//! only when the direct link is the widest edge on every alternative, which
//! happens with probability `2 / (n + 1)` on average over the `n` neighbors.

use pctc::sim::control_intensity_trials;
use pctc::topology::control_intensity_formula;

#[test]
fn empirical_intensity_is_two_over_n_plus_one() {
    for n in [2, 5, 10, 20] {
        let trials = 4000;
        let got = control_intensity_trials(n, trials, 900 + n as u64);
        let want = 2.0 / (n as f64 + 1.0);
        // Per-trial φ/n is bounded in [0, 1]; 0.02 is several standard errors.
        assert!((got - want).abs() < 0.02, "n={n}: {got} vs {want}");
    }
}

#[test]
fn single_neighbor_is_always_kept() {
    assert_eq!(control_intensity_trials(1, 100, 1), 1.0);
    assert_eq!(control_intensity_formula(1).unwrap(), 1.0);
}
