//! Strong stationary duals of Möbius monotone chains.
//!
//! In the down case the link is `Lambda(e_j, e_i) = 1{e_i <= e_j} pi(e_i) / H(e_j)`
//! with `H = pi C`, the dual absorbs at the unique maximal state, and
//!
//! ```text
//! nu*  = g (C^T)^{-1} diag(H),            g = nu / pi
//! P*   = (diag(H) C^{-1} P_rev C diag(H)^{-1})^T
//! ```
//!
//! The up case mirrors this with `C^T`, `H_bar = pi C^T` and absorption at the
//! unique minimal state. Both need `g` and the time reversal `P_rev` to be
//! Möbius monotone in the matching direction; otherwise the formulas do not
//! produce a stochastic matrix and construction is refused.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chain::{vec_mat, Chain, StationaryLaw};
use crate::error::{Error, Result};
use crate::monotonicity::{
    function_mobius_monotone, mobius_monotone, mobius_transform, strong_stochastic_monotone, MonotonicityReport,
    DEFAULT_UP_SET_CAP,
};
use crate::poset::ZetaMobius;
use crate::{Direction, Tolerances};

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub lambda: DMatrix<f64>,
    /// `pi C` (down) or `pi C^T` (up).
    pub h: DVector<f64>,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityResiduals {
    /// `|nu - nu* Lambda|_inf`.
    pub initial: f64,
    /// `|Lambda P - P* Lambda|_inf`.
    pub intertwining: f64,
    /// `max_i |sum_j P*(i, j) - 1|`.
    pub row_sum: f64,
    pub min_nu_star: f64,
    pub min_p_star: f64,
}

#[derive(Debug, Clone)]
pub struct DualChain {
    pub nu_star: DVector<f64>,
    pub p_star: DMatrix<f64>,
    pub absorbing_index: usize,
    pub direction: Direction,
    pub link: Link,
    pub residuals: DualityResiduals,
    /// Largest magnitude of the negative float noise set to zero.
    pub clamped: f64,
    /// Built despite failed preconditions; entries may be negative.
    pub forced: bool,
    /// Reports for `g` and for the time reversal, in that order.
    pub preconditions: [MonotonicityReport; 2],
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SsdOptions {
    pub tol: Tolerances,
    /// Emit the raw matrices even when the preconditions fail.
    pub force: bool,
}

impl DualChain {
    /// The dual as a chain on the same poset, started from `nu*`.
    pub fn as_chain(&self, poset: Arc<crate::Poset>) -> Chain {
        Chain::from_parts(poset, self.p_star.clone(), Some(self.nu_star.clone()))
    }

    /// Whether `P*` vanishes strictly below the diagonal.
    pub fn is_upper_triangular(&self, tol: f64) -> bool {
        let m = self.p_star.nrows();
        (0..m).all(|i| (0..i).all(|j| self.p_star[(i, j)].abs() <= tol))
    }
}

fn absorbing_state(poset: &crate::Poset, dir: Direction) -> Result<usize> {
    let ext = match dir {
        Direction::Down => poset.maximal(),
        Direction::Up => poset.minimal(),
    };
    match ext.as_slice() {
        [only] => Ok(*only),
        _ => Err(Error::NoUniqueExtremalState {
            direction: dir,
            count: ext.len(),
        }),
    }
}

/// Link kernel for the given direction; rows are probability vectors.
pub fn build_link(pi: &StationaryLaw, zm: &ZetaMobius, dir: Direction) -> Result<Link> {
    let m = zm.len();
    if pi.len() != m {
        return Err(Error::DimensionMismatch {
            what: "stationary law",
            expected: m,
            found: pi.len(),
        });
    }
    let c = zm.zeta();
    let pi = &pi.pi;
    // support(j, i): e_i <= e_j (down) or e_i >= e_j (up).
    let support = |j: usize, i: usize| match dir {
        Direction::Down => c[(i, j)] != 0,
        Direction::Up => c[(j, i)] != 0,
    };
    let mut h = DVector::from_fn(m, |j, _| (0..m).filter(|&i| support(j, i)).map(|i| pi[i]).sum::<f64>());
    // The extremal row carries all of pi; pin its mass so that row equals pi.
    for j in 0..m {
        if (0..m).all(|i| support(j, i)) {
            h[j] = 1.0;
        }
    }
    let lambda = DMatrix::from_fn(m, m, |j, i| if support(j, i) { pi[i] / h[j] } else { 0.0 });
    Ok(Link {
        lambda,
        h,
        direction: dir,
    })
}

fn residuals(link: &Link, chain: &Chain, nu_star: &DVector<f64>, p_star: &DMatrix<f64>) -> Result<DualityResiduals> {
    let m = chain.len();
    if link.lambda.nrows() != m || nu_star.len() != m || p_star.nrows() != m || p_star.ncols() != m {
        return Err(Error::DimensionMismatch {
            what: "dual chain",
            expected: m,
            found: p_star.nrows(),
        });
    }
    let nu = chain.initial().ok_or(Error::MissingInitialLaw)?;
    let initial = (nu - vec_mat(nu_star, &link.lambda)).amax();
    let intertwining = (&link.lambda * chain.matrix() - p_star * &link.lambda).amax();
    let row_sum = (0..m).map(|i| (p_star.row(i).sum() - 1.0).abs()).fold(0.0, f64::max);
    Ok(DualityResiduals {
        initial,
        intertwining,
        row_sum,
        min_nu_star: nu_star.min(),
        min_p_star: p_star.min(),
    })
}

/// Residuals of `nu = nu* Lambda` and `Lambda P = P* Lambda`, plus the
/// stochasticity diagnostics of the dual.
pub fn verify_duality(link: &Link, chain: &Chain, dual: &DualChain) -> Result<DualityResiduals> {
    residuals(link, chain, &dual.nu_star, &dual.p_star)
}

/// Zeroes entries in `(-tol, 0)` and returns the largest magnitude zeroed,
/// or the first entry below `-tol`.
fn clamp_noise(values: &mut [f64], tol: f64) -> std::result::Result<f64, (usize, f64)> {
    let mut clamped = 0.0f64;
    for (k, v) in values.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -tol {
                return Err((k, *v));
            }
            clamped = clamped.max(-*v);
            *v = 0.0;
        }
    }
    Ok(clamped)
}

fn finish(
    chain: &Chain,
    link: Link,
    mut nu_star: DVector<f64>,
    mut p_star: DMatrix<f64>,
    absorbing_index: usize,
    preconditions: [MonotonicityReport; 2],
    opts: SsdOptions,
) -> Result<DualChain> {
    let mut clamped = 0.0;
    if !opts.force {
        let tol = opts.tol.identity;
        clamped = clamp_noise(nu_star.as_mut_slice(), tol)
            .map_err(|(k, v)| Error::Numerical(format!("nu* has entry {v:e} at state {k}")))?;
        let m = p_star.nrows();
        clamped = f64::max(
            clamped,
            clamp_noise(p_star.as_mut_slice(), tol).map_err(|(k, v)| {
                Error::Numerical(format!("P* has entry {v:e} at ({}, {})", k % m, k / m))
            })?,
        );
        for i in 0..m {
            let s = p_star.row(i).sum();
            p_star.row_mut(i).unscale_mut(s);
        }
        let s = nu_star.sum();
        nu_star.unscale_mut(s);
    }
    let residuals = residuals(&link, chain, &nu_star, &p_star)?;
    if !opts.force && residuals.initial.max(residuals.intertwining) > opts.tol.identity {
        return Err(Error::Numerical(format!(
            "duality residuals {:e} / {:e} exceed {:e}",
            residuals.initial, residuals.intertwining, opts.tol.identity
        )));
    }
    Ok(DualChain {
        nu_star,
        p_star,
        absorbing_index,
        direction: link.direction,
        link,
        residuals,
        clamped,
        forced: opts.force,
        preconditions,
    })
}

fn check_preconditions(reports: &[MonotonicityReport; 2], dir: Direction, force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    let what = ["initial ratio g = nu / pi", "time-reversed kernel"];
    for (r, what) in reports.iter().zip(what) {
        if !r.verdict {
            return Err(Error::PreconditionFailed {
                reason: format!("{what} is not {dir}-monotone ({})", r.notion),
                report: Box::new(r.clone()),
            });
        }
    }
    Ok(())
}

/// Strong stationary dual on the same poset.
pub fn build_ssd(
    chain: &Chain,
    pi: &StationaryLaw,
    zm: &ZetaMobius,
    dir: Direction,
    opts: SsdOptions,
) -> Result<DualChain> {
    let m = chain.len();
    if zm.len() != m || pi.len() != m {
        return Err(Error::DimensionMismatch {
            what: "dual inputs",
            expected: m,
            found: if zm.len() != m { zm.len() } else { pi.len() },
        });
    }
    let nu = chain.initial().ok_or(Error::MissingInitialLaw)?;
    let absorbing = absorbing_state(chain.poset(), dir)?;
    let g = nu.component_div(&pi.pi);
    let g_report = function_mobius_monotone(&g, zm, dir, opts.tol.mono)?;
    let rev = chain.reverse(pi)?;
    let rev_report = mobius_monotone(&rev, zm, dir, opts.tol.mono)?;
    let reports = [g_report, rev_report];
    check_preconditions(&reports, dir, opts.force)?;

    let link = build_link(pi, zm, dir)?;
    let h = &link.h;
    let transformed_g = reports[0].transformed.as_ref().expect("function report carries its vector");
    let nu_star = DVector::from_fn(m, |i, _| h[i] * transformed_g[i]);

    // Same quantity through the Möbius sums, entry by entry.
    let mu = zm.mobius();
    let poset = chain.poset();
    for i in 0..m {
        let sum: f64 = match dir {
            Direction::Down => poset.up_set(i).into_iter().map(|e| mu[(i, e)] as f64 * g[e]).sum(),
            Direction::Up => poset.down_set(i).into_iter().map(|e| mu[(e, i)] as f64 * g[e]).sum(),
        };
        let scale = 1.0 + g.amax();
        if (h[i] * sum - nu_star[i]).abs() > opts.tol.identity * scale {
            return Err(Error::Numerical(format!(
                "nu* matrix and summation forms disagree at state {i}"
            )));
        }
    }

    let t = mobius_transform(rev.matrix(), zm, dir);
    let p_star = DMatrix::from_fn(m, m, |i, j| h[j] * t[(j, i)] / h[i]);
    finish(chain, link, nu_star, p_star, absorbing, reports, opts)
}

/// Dual for a totally ordered state space from the explicit birth-death
/// formulas: in the down case `nu*(i) = H(i)(g(i) - g(i+1))` and
/// `P*(i, j) = H(j)/H(i) (P_rev(j, [1, i]) - P_rev(j + 1, [1, i]))`.
pub fn build_ssd_linear(chain: &Chain, pi: &StationaryLaw, dir: Direction, opts: SsdOptions) -> Result<DualChain> {
    let poset = chain.poset();
    if let Some((a, b)) = poset.total_order_defect() {
        return Err(Error::NotTotalOrder { a, b });
    }
    let m = chain.len();
    if pi.len() != m {
        return Err(Error::DimensionMismatch {
            what: "stationary law",
            expected: m,
            found: pi.len(),
        });
    }
    let zm = poset.zeta_mobius()?;
    let nu = chain.initial().ok_or(Error::MissingInitialLaw)?;
    let g = nu.component_div(&pi.pi);
    let g_report = function_mobius_monotone(&g, &zm, dir, opts.tol.mono)?;
    let rev = chain.reverse(pi)?;
    let rev_report = strong_stochastic_monotone(&rev, DEFAULT_UP_SET_CAP, opts.tol.mono)?;
    let reports = [g_report, rev_report];
    check_preconditions(&reports, dir, opts.force)?;

    let link = build_link(pi, &zm, dir)?;
    let h = &link.h;
    let r = rev.matrix();
    let (nu_star, p_star) = match dir {
        Direction::Down => {
            let g_at = |i: usize| if i < m { g[i] } else { 0.0 };
            // below(k, i) = P_rev(k, {0..=i}), zero past the last state.
            let below = |k: usize, i: usize| if k < m { r.row(k).columns(0, i + 1).sum() } else { 0.0 };
            (
                DVector::from_fn(m, |i, _| h[i] * (g_at(i) - g_at(i + 1))),
                DMatrix::from_fn(m, m, |i, j| h[j] / h[i] * (below(j, i) - below(j + 1, i))),
            )
        }
        Direction::Up => {
            let g_at = |i: usize| if i == 0 { 0.0 } else { g[i - 1] };
            // above(k, i) = P_rev(k - 1, {i..}), zero before the first state.
            let above = |k: usize, i: usize| if k == 0 { 0.0 } else { r.row(k - 1).columns(i, m - i).sum() };
            (
                DVector::from_fn(m, |i, _| h[i] * (g_at(i + 1) - g_at(i))),
                DMatrix::from_fn(m, m, |i, j| h[j] / h[i] * (above(j + 1, i) - above(j, i))),
            )
        }
    };
    let absorbing = match dir {
        Direction::Down => m - 1,
        Direction::Up => 0,
    };
    finish(chain, link, nu_star, p_star, absorbing, reports, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::Poset;

    fn two_state(a: f64, b: f64) -> Chain {
        let poset = Arc::new(Poset::linear(2).unwrap());
        Chain::new(poset, DMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]), None)
            .unwrap()
            .with_point_mass(0)
    }

    fn cube2_symmetric(r: f64) -> Chain {
        let p = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0 - 2.0 * r, r, r, 0.0,
                r, 1.0 - 2.0 * r, 0.0, r,
                r, 0.0, 1.0 - 2.0 * r, r,
                0.0, r, r, 1.0 - 2.0 * r,
            ],
        );
        Chain::new(Arc::new(Poset::cube(2).unwrap()), p, None).unwrap()
    }

    #[test]
    fn link_rows_for_symmetric_two_cube() {
        let c = cube2_symmetric(0.2);
        let zm = c.poset().zeta_mobius().unwrap();
        let pi = c.stationary().unwrap();
        let link = build_link(&pi, &zm, Direction::Down).unwrap();
        let expected_h = [0.25, 0.5, 0.5, 1.0];
        for (h, e) in link.h.iter().zip(expected_h) {
            assert!((h - e).abs() < 1e-15);
        }
        assert_eq!(link.lambda.row(3).transpose(), pi.pi);
        assert_eq!(link.lambda.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        for i in 0..4 {
            assert!((link.lambda.row(i).sum() - 1.0).abs() < 1e-15);
        }
        let up = build_link(&pi, &zm, Direction::Up).unwrap();
        assert_eq!(up.lambda.row(0).transpose(), pi.pi);
    }

    #[test]
    fn two_state_dual_is_geometric() {
        let (a, b) = (0.3, 0.1);
        let c = two_state(a, b);
        let pi = c.stationary().unwrap();
        let zm = c.poset().zeta_mobius().unwrap();
        let dual = build_ssd(&c, &pi, &zm, Direction::Down, SsdOptions::default()).unwrap();
        assert!((dual.p_star[(0, 1)] - (a + b)).abs() < 1e-15);
        assert!((dual.p_star[(0, 0)] - (1.0 - a - b)).abs() < 1e-15);
        assert_eq!(dual.p_star[(1, 1)], 1.0);
        assert_eq!(dual.absorbing_index, 1);
        assert_eq!(dual.nu_star.as_slice(), &[1.0, 0.0]);
        let linear = build_ssd_linear(&c, &pi, Direction::Down, SsdOptions::default()).unwrap();
        assert!((linear.p_star - dual.p_star).amax() < 1e-12);
    }

    #[test]
    fn starting_from_pi_absorbs_immediately() {
        let c = cube2_symmetric(0.15);
        let pi = c.stationary().unwrap();
        let c = c.with_initial(pi.pi.clone()).unwrap();
        let zm = c.poset().zeta_mobius().unwrap();
        let dual = build_ssd(&c, &pi, &zm, Direction::Down, SsdOptions::default()).unwrap();
        // Oracle: nu* = g (C^T)^{-1} diag(pi C) evaluated directly.
        let g = DVector::from_element(4, 1.0);
        let direct = vec_mat(&g, &zm.mobius_f64().transpose()).component_mul(&vec_mat(&pi.pi, zm.zeta_f64()));
        assert!((&dual.nu_star - &direct).amax() < 1e-15);
        assert_eq!(dual.nu_star.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn corrupted_dual_shows_residual() {
        let c = cube2_symmetric(0.2).with_point_mass(0);
        let pi = c.stationary().unwrap();
        let zm = c.poset().zeta_mobius().unwrap();
        let dual = build_ssd(&c, &pi, &zm, Direction::Down, SsdOptions::default()).unwrap();
        assert!(dual.residuals.initial <= 1e-10 && dual.residuals.intertwining <= 1e-10);
        let mut bad = dual.clone();
        bad.p_star[(1, 3)] += 1e-3;
        let r = verify_duality(&dual.link, &c, &bad).unwrap();
        assert!(r.intertwining >= 1e-4);
    }

    #[test]
    fn failed_precondition_returns_report() {
        let c = cube2_symmetric(0.3).with_point_mass(0);
        let pi = c.stationary().unwrap();
        let zm = c.poset().zeta_mobius().unwrap();
        match build_ssd(&c, &pi, &zm, Direction::Down, SsdOptions::default()) {
            Err(Error::PreconditionFailed { report, .. }) => assert!(!report.verdict),
            other => panic!("{other:?}"),
        }
        let forced = build_ssd(
            &c,
            &pi,
            &zm,
            Direction::Down,
            SsdOptions {
                force: true,
                ..SsdOptions::default()
            },
        )
        .unwrap();
        assert!(forced.forced);
        assert!(forced.p_star.min() < 0.0);
    }

    #[test]
    fn needs_unique_extremal_state() {
        let poset = Arc::new(Poset::build(&["a", "b", "c"], &[("a", "b"), ("a", "c")]).unwrap());
        let p = DMatrix::from_row_slice(3, 3, &[0.5, 0.25, 0.25, 0.25, 0.75, 0.0, 0.25, 0.0, 0.75]);
        let c = Chain::new(poset, p, None).unwrap().with_point_mass(0);
        let pi = c.stationary().unwrap();
        let zm = c.poset().zeta_mobius().unwrap();
        assert!(matches!(
            build_ssd(&c, &pi, &zm, Direction::Down, SsdOptions::default()),
            Err(Error::NoUniqueExtremalState { count: 2, .. })
        ));
        assert!(matches!(
            build_ssd_linear(&c, &pi, Direction::Down, SsdOptions::default()),
            Err(Error::NotTotalOrder { a: 1, b: 2 })
        ));
    }

    #[test]
    fn missing_initial_law() {
        let c = cube2_symmetric(0.2);
        let pi = c.stationary().unwrap();
        let zm = c.poset().zeta_mobius().unwrap();
        assert!(matches!(
            build_ssd(&c, &pi, &zm, Direction::Down, SsdOptions::default()),
            Err(Error::MissingInitialLaw)
        ));
    }
}
