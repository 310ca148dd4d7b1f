mod support;

use std::time::Instant;

use cqe_core::solver::{sweep, SweepParameter};
use support::*;

const POINTS: usize = 100;

#[test]
fn flux_sweep_symmetry_periodicity_and_shape() {
    let c = circuit("zero_pi");
    let m = c.model(&[25, 1, 25]).unwrap();
    let param = SweepParameter::LoopFlux("loop1".into());
    let values: Vec<f64> = (0..POINTS).map(|i| i as f64 / (POINTS - 1) as f64).collect();
    let start = Instant::now();
    let r = sweep(&m, &param, &values, 5).unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "sweep took {elapsed:?}");

    let scale = r.efreqs.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    for i in 0..POINTS {
        let j = POINTS - 1 - i;
        for k in 0..5 {
            let d = (r.efreqs[i][k] - r.efreqs[j][k]).abs();
            assert!(d <= 1e-6 * scale, "asymmetry at point {i}, level {k}: {d}");
        }
    }

    let shifted: Vec<f64> = values.iter().step_by(11).map(|v| v + 1.0).collect();
    let r2 = sweep(&m, &param, &shifted, 5).unwrap();
    for (n, row) in r2.efreqs.iter().enumerate() {
        for k in 0..5 {
            let d = (row[k] - r.efreqs[n * 11][k]).abs();
            assert!(d <= 1e-9 * scale, "period mismatch at point {}, level {k}: {d}", n * 11);
        }
    }

    // Ground level rises and first excited level falls towards half flux,
    // where the two nearly meet; the second excited level stays comparatively flat.
    let half = POINTS / 2;
    for i in 1..half {
        assert!(r.efreqs[i][0] >= r.efreqs[i - 1][0] - 1e-9 * scale);
        assert!(r.efreqs[i][1] <= r.efreqs[i - 1][1] + 1e-9 * scale);
    }
    let gap = |i: usize| r.efreqs[i][1] - r.efreqs[i][0];
    assert!(gap(half) < 0.1 * gap(0), "{} vs {}", gap(half), gap(0));
    let e2: Vec<f64> = r.efreqs.iter().map(|row| row[2] - row[0]).collect();
    let spread = e2.iter().cloned().fold(f64::MIN, f64::max) - e2.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.5 * gap(0));
}
