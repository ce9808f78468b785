use serde::Serialize;

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub pass: bool,
    /// max_i values[i] / (values[0] e^(-rate (t_i - t_0))) over the checked samples.
    pub worst_ratio: f64,
}

/// Checks values[i] <= slack values[0] e^(-rate (t_i - t_0)) for every t_i >= t_0 + skip.
pub fn check_envelope(times: &[f64], values: &[f64], rate: f64, slack: f64, skip: f64) -> Result<EnvelopeReport> {
    if times.is_empty() || values.is_empty() {
        return Err(Error::EmptySeries);
    }
    if times.len() != values.len() {
        return Err(Error::Dimension(format!("{} times vs {} values", times.len(), values.len())));
    }
    if let Some(v) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::InvalidParameter { name: "values", reason: format!("must be >= 0, got {v}") });
    }
    let (t0, v0) = (times[0], values[0]);
    let mut worst = 0.0f64;
    for (t, v) in times.iter().zip(values) {
        if *t < t0 + skip || *v == 0.0 {
            continue;
        }
        // compare in logs so the bound does not underflow on long horizons
        let log_ratio = v.ln() - v0.ln() + rate * (t - t0);
        worst = worst.max(log_ratio.exp());
    }
    Ok(EnvelopeReport { pass: worst <= slack, worst_ratio: worst })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub pass: bool,
    /// Largest v[i+1] - v[i] observed (negative for strictly decreasing series).
    pub worst_increase: f64,
}

/// v[i+1] <= v[i] + rel_slack (|v[i]| + 1) for all i.
pub fn check_monotone(values: &[f64], rel_slack: f64) -> Result<MonotoneReport> {
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    for w in values.windows(2) {
        let inc = w[1] - w[0];
        worst = worst.max(inc);
        if inc > rel_slack * (w[0].abs() + 1.0) {
            pass = false;
        }
    }
    Ok(MonotoneReport { pass, worst_increase: if values.len() == 1 { 0.0 } else { worst } })
}

/// Least-squares decay rate r of v ~ e^(-r t) over the final half of the horizon.
///
/// Samples with v <= 0 are skipped; fewer than two usable samples is an error.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::EmptySeries);
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let mid = t0 + 0.5 * (t1 - t0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= mid && **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptySeries);
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, l)| (t - mt) * (l - ml)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::EmptySeries);
    }
    Ok(-sxy / sxx)
}

/// Per-component reference scale: the initial value, or the largest initial
/// component when that initial value is zero.
pub fn reference_scale(x0: &[f64]) -> Vec<f64> {
    let top = x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x0.iter().map(|v| if *v > 0.0 { *v } else { top }).collect()
}

/// First recorded time after which every series stays below `fraction` of its reference.
/// None if the final sample is still above.
pub fn settling_time(times: &[f64], series: &[Vec<f64>], reference: &[f64], fraction: f64) -> Option<f64> {
    let above = |i: usize| series[i].iter().zip(reference).any(|(v, r)| v.abs() >= fraction * r);
    let n = times.len();
    if n == 0 || above(n - 1) {
        return None;
    }
    let mut i = n - 1;
    while i > 0 && !above(i - 1) {
        i -= 1;
    }
    Some(times[i])
}

/// Time at which all plant states (and estimates, if recorded) settle below
/// `fraction` of their initial scale.
pub fn convergence_time(tr: &Trajectory, fraction: f64) -> Option<f64> {
    let mut series: Vec<Vec<f64>> = tr.states.iter().map(|s| s.to_array().to_vec()).collect();
    let mut reference = reference_scale(&tr.states[0].to_array());
    if let Some(est) = &tr.estimates {
        for (row, e) in series.iter_mut().zip(est) {
            row.extend(e.to_array());
        }
        let x0 = tr.states[0].to_array();
        let e0 = est[0].to_array();
        // estimates are measured against the plant's scale when they start at zero
        let plant = reference_scale(&x0);
        reference.extend(e0.iter().zip(plant).map(|(e, p)| if *e > 0.0 { *e } else { p }));
    }
    settling_time(&tr.times, &series, &reference, fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn envelope_examples() {
        let t = grid(1001, 0.01);
        let zeros = vec![0.0; t.len()];
        assert!(check_envelope(&t, &zeros, 1.0, 1.0, 0.02).unwrap().pass);
        let fast: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        assert!(check_envelope(&t, &fast, 1.0, 1.0, 0.02).unwrap().pass);
        let slow: Vec<f64> = t.iter().map(|t| (-0.5 * t).exp()).collect();
        let r = check_envelope(&t, &slow, 1.0, 1.05, 0.02).unwrap();
        assert!(!r.pass);
        assert!((r.worst_ratio / 5.0f64.exp() - 1.0).abs() < 1e-9);
        assert!(matches!(check_envelope(&[], &[], 1.0, 1.0, 0.0), Err(Error::EmptySeries)));
        assert!(check_envelope(&[0.0], &[-1.0], 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn envelope_survives_long_horizons() {
        let t = grid(2001, 1.0);
        let v: Vec<f64> = t.iter().map(|t| (-0.6 * t).exp()).collect();
        let r = check_envelope(&t, &v, 0.5, 1.0, 0.0).unwrap();
        assert!(r.pass && r.worst_ratio <= 1.0);
    }

    #[test]
    fn monotone_with_slack() {
        assert!(check_monotone(&[3.0, 2.0, 2.0, 1.0], 0.0).unwrap().pass);
        assert!(!check_monotone(&[3.0, 2.0, 2.1], 1e-6).unwrap().pass);
        assert!(check_monotone(&[3.0, 3.0 + 1e-7], 1e-6).unwrap().pass);
    }

    #[test]
    fn decay_rate_fit_recovers_exponent() {
        let t = grid(500, 0.1);
        let v: Vec<f64> = t.iter().map(|t| 7.0 * (-0.3 * t).exp()).collect();
        assert!((fit_decay_rate(&t, &v).unwrap() - 0.3).abs() < 1e-10);
        assert!(fit_decay_rate(&t, &vec![0.0; 500]).is_err());
    }

    #[test]
    fn settling_uses_last_excursion() {
        let t = grid(5, 1.0);
        let s = vec![vec![1.0], vec![0.0005], vec![0.002], vec![0.0001], vec![0.0]];
        assert_eq!(settling_time(&t, &s, &[1.0], 1e-3), Some(3.0));
        assert_eq!(settling_time(&t[..3], &s[..3], &[1.0], 1e-3), None);
        assert_eq!(reference_scale(&[4.0, 0.0, 2.0]), vec![4.0, 4.0, 2.0]);
    }
}
