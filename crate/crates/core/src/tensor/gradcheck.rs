//! Central finite-difference gradient checks (64-bit).

use super::{backward_of, OpRecord, Tensor};

/// Absolute floor of the relative-error denominator.
pub const RELATIVE_FLOOR: f64 = 1e-5;
/// Entries smaller than this fraction of the largest numeric gradient are
/// compared against that fraction instead of their own magnitude, since
/// central differences carry absolute round-off noise.
pub const SCALE_FLOOR: f64 = 1e-3;

/// Central difference estimate of `d f / d x_i` for every coordinate of `point`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + h;
            let plus = f(&probe);
            probe[i] = point[i] - h;
            let minus = f(&probe);
            probe[i] = point[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Maximum elementwise relative error `|a - n| / max(|a|, |n|, floor)` where
/// `floor = max(RELATIVE_FLOOR, SCALE_FLOOR * max|n|)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_relative_error_with_floor(analytic, numeric, RELATIVE_FLOOR.max(SCALE_FLOOR * scale))
}

/// `max |a - n| / max(|a|, |n|, floor)` with an explicit floor, for callers
/// comparing many tensors on one shared scale.
pub fn max_relative_error_with_floor(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Checks every input gradient of `record` against finite differences of the
/// scalar loss `sum(forward(inputs) * weights)`. Returns the worst relative error.
pub fn check_op_record(record: &OpRecord<f64>, weights: &Tensor<f64>, h: f64) -> f64 {
    let analytic = backward_of(record, weights).expect("backward");
    let mut worst: f64 = 0.0;
    for (slot, grad) in analytic.iter().enumerate() {
        let base = record.inputs()[slot].data().to_vec();
        let loss = |values: &[f64]| {
            let mut probe = record.clone();
            probe.inputs_mut()[slot].data_mut().copy_from_slice(values);
            let out = probe.forward().expect("forward");
            out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
        };
        let numeric = finite_difference(loss, &base, h);
        worst = worst.max(max_relative_error(grad.data(), &numeric));
    }
    worst
}
