//! General-purpose eigenvalues and multiset comparison of spectra.

use nalgebra::{Complex, DMatrix};

/// Eigenvalues of a square real matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.clone().complex_eigenvalues().iter().copied().collect()
}

/// Real parts sorted descending, for spectra known to be real.
pub fn real_sorted_desc(values: &[Complex<f64>]) -> Vec<f64> {
    let mut re: Vec<f64> = values.iter().map(|z| z.re).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    re
}

/// Largest distance between two spectra under a greedy nearest matching.
/// Returns `f64::INFINITY` when the lengths differ.
pub fn spectral_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    let mut order: Vec<&Complex<f64>> = a.iter().collect();
    order.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    for z in order {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, w)| (k, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("same length");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}
