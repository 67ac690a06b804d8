//! Small derivative-free least-squares machinery used by the statistics
//! layer: a Nelder-Mead simplex minimizer and a Gaussian smoothing filter.

use alloc::vec;
use alloc::vec::Vec;

/// Minimize `f` from `x0` with initial simplex steps `step`.
///
/// Plain Nelder-Mead with the standard 1 / 2 / 0.5 / 0.5 coefficients.
/// Returns `(x_best, f_best)`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    step: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let fx = f(&x);
        simplex.push((x, fx));
    }

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() <= 1e-12 * (1.0 + best.abs()) {
            break;
        }
        // centroid of all but the worst
        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let worst_x = simplex[dim].0.clone();
        let reflect: Vec<f64> =
            centroid.iter().zip(&worst_x).map(|(c, w)| c + (c - w)).collect();
        let f_reflect = f(&reflect);
        if f_reflect < simplex[0].1 {
            let expand: Vec<f64> =
                centroid.iter().zip(&worst_x).map(|(c, w)| c + 2.0 * (c - w)).collect();
            let f_expand = f(&expand);
            simplex[dim] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[dim - 1].1 {
            simplex[dim] = (reflect, f_reflect);
        } else {
            let contract: Vec<f64> =
                centroid.iter().zip(&worst_x).map(|(c, w)| c + 0.5 * (w - c)).collect();
            let f_contract = f(&contract);
            if f_contract < simplex[dim].1 {
                simplex[dim] = (contract, f_contract);
            } else {
                // shrink toward the best point
                let best_x = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (xi, bi) in entry.0.iter_mut().zip(&best_x) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx)
}

/// Gaussian filter with truncation at 4 sigma and edge renormalization.
pub fn gaussian_smooth(values: &[f64], sigma: f64) -> Vec<f64> {
    if values.is_empty() || !(sigma > 0.0) {
        return values.to_vec();
    }
    let radius = libm::ceil(4.0 * sigma) as usize;
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| libm::exp(-(k as f64 * k as f64) / (2.0 * sigma * sigma)))
        .collect();
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        let mut norm = 0.0;
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        for j in lo..=hi {
            let w = kernel[i.abs_diff(j)];
            acc += w * values[j];
            norm += w;
        }
        out.push(acc / norm);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.5).powi(2);
        let (x, fx) = nelder_mead(f, &[0.0, 0.0], &[1.0, 1.0], 500);
        assert!((x[0] - 3.0).abs() < 1e-5);
        assert!((x[1] + 1.5).abs() < 1e-5);
        assert!(fx < 1e-9);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, _) = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 2000);
        assert!((x[0] - 1.0).abs() < 1e-3);
        assert!((x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn smoothing_preserves_constants() {
        let v = vec![0.7; 50];
        let s = gaussian_smooth(&v, 10.0);
        assert!(s.iter().all(|&x| (x - 0.7).abs() < 1e-12));
    }

    #[test]
    fn smoothing_reduces_spike_amplitude() {
        let mut v = vec![0.0; 101];
        v[50] = 1.0;
        let s = gaussian_smooth(&v, 5.0);
        assert!(s[50] < 0.1);
        let total: f64 = s.iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
