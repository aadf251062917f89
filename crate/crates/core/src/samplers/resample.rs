use rand::Rng;

use super::Resampling;
use crate::model::SimRng;

/// Draw `n` ancestor indices with probabilities `weights / total` into `out`.
///
/// Multinomial draws are i.i.d.; systematic uses one uniform offset and the
/// grid `(u + k)/n`. Both give particle `i` an expected `n·w_i/total` offspring.
pub fn resample(
    scheme: Resampling,
    weights: &[f64],
    total: f64,
    n: usize,
    rng: &mut SimRng,
    cumulative: &mut Vec<f64>,
    out: &mut Vec<u32>,
) {
    cumulative.clear();
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    // Use the running sum as the top so rounding cannot push a draw past the end.
    let top = if acc > 0.0 { acc } else { total };
    let last_positive = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0) as u32;
    let pick = |u: f64| -> u32 {
        let i = cumulative.partition_point(|c| *c <= u);
        if i >= weights.len() {
            last_positive
        } else {
            i as u32
        }
    };
    out.clear();
    match scheme {
        Resampling::Multinomial => {
            for _ in 0..n {
                let u = rng.random::<f64>() * top;
                out.push(pick(u));
            }
        }
        Resampling::Systematic => {
            let u0: f64 = rng.random();
            for k in 0..n {
                let u = (u0 + k as f64) / n as f64 * top;
                out.push(pick(u));
            }
        }
    }
}
