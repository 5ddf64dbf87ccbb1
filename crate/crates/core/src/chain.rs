//! Stochastic kernels on a poset.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, RowViolation};
use crate::poset::{Poset, ZetaMobius};
use crate::Tolerances;

/// A validated row-stochastic kernel on a poset, with an optional initial law.
#[derive(Debug, Clone)]
pub struct Chain {
    poset: Arc<Poset>,
    p: DMatrix<f64>,
    nu: Option<DVector<f64>>,
}

/// Stationary law of an ergodic chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryLaw {
    pub pi: DVector<f64>,
    /// `max_e |pi P - pi|(e)`.
    pub residual: f64,
}

impl Chain {
    /// Checks that `p` is square, matches the poset, has non-negative
    /// entries and unit row sums within `row_tol`, and that `nu` (if given)
    /// is a probability vector. Every violated row is reported.
    pub fn validate(
        poset: Arc<Poset>,
        p: DMatrix<f64>,
        nu: Option<DVector<f64>>,
        row_tol: f64,
    ) -> Result<Chain> {
        let m = poset.len();
        if p.nrows() != m || p.ncols() != m {
            return Err(Error::DimensionMismatch {
                what: "transition matrix",
                expected: m,
                found: if p.nrows() != m { p.nrows() } else { p.ncols() },
            });
        }
        let violations = row_violations(&p, row_tol);
        if !violations.is_empty() {
            return Err(Error::NotStochastic(violations));
        }
        if let Some(nu) = &nu {
            check_probability(nu, m, row_tol)?;
        }
        Ok(Chain { poset, p, nu })
    }

    pub fn new(poset: Arc<Poset>, p: DMatrix<f64>, nu: Option<DVector<f64>>) -> Result<Chain> {
        Chain::validate(poset, p, nu, Tolerances::default().row)
    }

    pub(crate) fn from_parts(poset: Arc<Poset>, p: DMatrix<f64>, nu: Option<DVector<f64>>) -> Chain {
        Chain { poset, p, nu }
    }

    pub fn poset(&self) -> &Arc<Poset> {
        &self.poset
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn initial(&self) -> Option<&DVector<f64>> {
        self.nu.as_ref()
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_initial(mut self, nu: DVector<f64>) -> Result<Chain> {
        check_probability(&nu, self.len(), Tolerances::default().row)?;
        self.nu = Some(nu);
        Ok(self)
    }

    /// Starts the chain deterministically in state `i`.
    pub fn with_point_mass(mut self, i: usize) -> Chain {
        let mut nu = DVector::zeros(self.len());
        nu[i] = 1.0;
        self.nu = Some(nu);
        self
    }

    pub fn stationary(&self) -> Result<StationaryLaw> {
        self.stationary_with(&Tolerances::default())
    }

    /// Solves `pi P = pi`, `sum pi = 1` after checking irreducibility and
    /// aperiodicity of the support digraph.
    pub fn stationary_with(&self, tol: &Tolerances) -> Result<StationaryLaw> {
        check_irreducible(&self.p)?;
        let period = period(&self.p);
        if period != 1 {
            return Err(Error::NotAperiodic { period });
        }
        let m = self.len();
        // (P^T - I) pi^T = 0 with the last equation swapped for sum(pi) = 1.
        let mut a = self.p.transpose() - DMatrix::identity(m, m);
        for j in 0..m {
            a[(m - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(m);
        b[m - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical("stationary system is singular".into()))?;
        if let Some(i) = pi.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Numerical(format!(
                "stationary law has non-positive mass {} at state {i}",
                pi[i]
            )));
        }
        let pi = &pi / pi.sum();
        let residual = (vec_mat(&pi, &self.p) - &pi).amax();
        if residual > tol.identity {
            return Err(Error::Numerical(format!("stationary residual {residual:e}")));
        }
        Ok(StationaryLaw { pi, residual })
    }

    /// Time reversal `diag(pi)^{-1} P^T diag(pi)`. The initial law is dropped.
    pub fn reverse(&self, pi: &StationaryLaw) -> Result<Chain> {
        let m = self.len();
        let pi = &pi.pi;
        if pi.len() != m {
            return Err(Error::DimensionMismatch {
                what: "stationary law",
                expected: m,
                found: pi.len(),
            });
        }
        let mut rev = DMatrix::from_fn(m, m, |i, j| pi[j] * self.p[(j, i)] / pi[i]);
        let violations = row_violations(&rev, Tolerances::default().identity);
        if !violations.is_empty() {
            return Err(Error::NotStochastic(violations));
        }
        for i in 0..m {
            let s = rev.row(i).sum();
            rev.row_mut(i).unscale_mut(s);
        }
        Ok(Chain {
            poset: Arc::clone(&self.poset),
            p: rev,
            nu: None,
        })
    }
}

impl StationaryLaw {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// Row vector times matrix, `v M`.
pub fn vec_mat(v: &DVector<f64>, m: &DMatrix<f64>) -> DVector<f64> {
    m.tr_mul(v)
}

pub(crate) fn row_violations(p: &DMatrix<f64>, tol: f64) -> Vec<RowViolation> {
    let mut out = Vec::new();
    for i in 0..p.nrows() {
        let mut bad_entry = false;
        for j in 0..p.ncols() {
            let v = p[(i, j)];
            if !(v >= 0.0) || !v.is_finite() {
                out.push(RowViolation::BadEntry { row: i, col: j, value: v });
                bad_entry = true;
            }
        }
        let sum = p.row(i).sum();
        if !bad_entry && (sum - 1.0).abs() > tol {
            out.push(RowViolation::RowSum { row: i, sum });
        }
    }
    out
}

fn check_probability(nu: &DVector<f64>, m: usize, tol: f64) -> Result<()> {
    if nu.len() != m {
        return Err(Error::DimensionMismatch {
            what: "initial law",
            expected: m,
            found: nu.len(),
        });
    }
    if let Some(i) = nu.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::BadInitialLaw(format!("entry {i} is {}", nu[i])));
    }
    let s = nu.sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::BadInitialLaw(format!("sums to {s}")));
    }
    Ok(())
}

fn reachable(p: &DMatrix<f64>, start: usize, forward: bool) -> Vec<bool> {
    let m = p.nrows();
    let mut seen = vec![false; m];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..m {
            let w = if forward { p[(u, v)] } else { p[(v, u)] };
            if w > 0.0 && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn check_irreducible(p: &DMatrix<f64>) -> Result<()> {
    if let Some(to) = reachable(p, 0, true).iter().position(|&s| !s) {
        return Err(Error::NotIrreducible { from: 0, to });
    }
    if let Some(from) = reachable(p, 0, false).iter().position(|&s| !s) {
        return Err(Error::NotIrreducible { from, to: 0 });
    }
    Ok(())
}

/// Period of an irreducible kernel: gcd of `level(u) + 1 - level(v)` over
/// all support edges, with BFS levels from state 0.
fn period(p: &DMatrix<f64>) -> usize {
    let m = p.nrows();
    let mut level = vec![usize::MAX; m];
    level[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for v in 0..m {
            if p[(u, v)] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for u in 0..m {
        for v in 0..m {
            if p[(u, v)] > 0.0 {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_len(f: &DVector<f64>, zm: &ZetaMobius) -> Result<()> {
    if f.len() != zm.len() {
        return Err(Error::DimensionMismatch {
            what: "function vector",
            expected: zm.len(),
            found: f.len(),
        });
    }
    Ok(())
}

/// `S_down f (e_i) = sum_{e <= e_i} f(e)`, i.e. `f C`.
pub fn sum_down(f: &DVector<f64>, zm: &ZetaMobius) -> Result<DVector<f64>> {
    check_len(f, zm)?;
    Ok(vec_mat(f, zm.zeta_f64()))
}

/// `S_up f (e_i) = sum_{e >= e_i} f(e)`, i.e. `f C^T`.
pub fn sum_up(f: &DVector<f64>, zm: &ZetaMobius) -> Result<DVector<f64>> {
    check_len(f, zm)?;
    Ok(zm.zeta_f64() * f)
}

/// `D_down f = f C^{-1}`, the inverse of [`sum_down`].
pub fn diff_down(f: &DVector<f64>, zm: &ZetaMobius) -> Result<DVector<f64>> {
    check_len(f, zm)?;
    Ok(vec_mat(f, zm.mobius_f64()))
}

/// `D_up f = f (C^T)^{-1}`, the inverse of [`sum_up`].
pub fn diff_up(f: &DVector<f64>, zm: &ZetaMobius) -> Result<DVector<f64>> {
    check_len(f, zm)?;
    Ok(zm.mobius_f64() * f)
}
