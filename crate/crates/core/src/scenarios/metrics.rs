//! Summary statistics over sampled trajectories.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub t: f64,
    pub value: f64,
}

/// Interior local maxima of a sampled series. A flat top counts once, at its
/// first sample.
pub fn peaks(times: &[f64], values: &[f64]) -> Vec<Peak> {
    let mut out = Vec::new();
    let m = values.len().min(times.len());
    let mut i = 1;
    while i + 1 < m {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < m && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < m && values[j + 1] < values[i] {
                out.push(Peak {
                    t: times[i],
                    value: values[i],
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Number of excursions above `level`: maxima above it separated by minima
/// below it.
pub fn oscillation_count(values: &[f64], level: f64) -> usize {
    let mut above = false;
    let mut count = 0;
    for &v in values {
        if v > level && !above {
            count += 1;
            above = true;
        } else if v < level {
            above = false;
        }
    }
    count
}

/// Least-squares slope of `ln(peak)` against time; positive when successive
/// peaks grow. Needs at least two peaks.
pub fn peak_growth_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = peaks(times, values)
        .into_iter()
        .filter(|p| p.value > 0.0)
        .map(|p| (p.t, p.value.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(sxy / sxx)
}

/// Composite trapezoid rule on arbitrary sample points.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
