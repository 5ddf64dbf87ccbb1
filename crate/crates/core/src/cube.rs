//! Chains on the Boolean cube `{0,1}^d`: nearest-neighbour walks, their
//! powers, the pairwise `g+` mass move, supermodular-order checks and
//! admissibility sweeps.
//!
//! States are bitmasks with bit `i - 1` holding coordinate `e_i`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::Chain;
use crate::dual::{build_ssd, SsdOptions};
use crate::error::{Error, Result};
use crate::monotonicity::mobius_monotone;
use crate::par::Exec;
use crate::poset::Poset;
use crate::{Direction, Tolerances};

/// Flip rates of a nearest-neighbour walk: `alpha[i]` for `0 -> 1`,
/// `beta[i]` for `1 -> 0` in coordinate `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeWalkParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl CubeWalkParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<CubeWalkParams> {
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                what: "beta",
                expected: alpha.len(),
                found: beta.len(),
            });
        }
        if alpha.is_empty() {
            return Err(Error::InvalidParameter("cube dimension must be at least 1".into()));
        }
        if let Some(x) = alpha.iter().chain(&beta).find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidParameter(format!("flip rate {x} is not positive")));
        }
        Ok(CubeWalkParams { alpha, beta })
    }

    /// The symmetric walk `alpha_i = beta_i = (1 - r) / d`.
    pub fn symmetric(d: usize, r: f64) -> Result<CubeWalkParams> {
        let rate = (1.0 - r) / d as f64;
        CubeWalkParams::new(vec![rate; d], vec![rate; d])
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    /// `sum_i (alpha_i + beta_i)`.
    pub fn total(&self) -> f64 {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a + b).sum()
    }

    /// Whether the walk is Möbius monotone, i.e. `total() <= 1`.
    pub fn is_admissible(&self) -> bool {
        self.total() <= 1.0
    }

    /// Product-form stationary law in the cube enumeration order.
    pub fn stationary(&self, poset: &Poset) -> DVector<f64> {
        DVector::from_fn(poset.len(), |k, _| {
            let mask = poset.mask(k).expect("cube poset");
            (0..self.d())
                .map(|i| {
                    let (a, b) = (self.alpha[i], self.beta[i]);
                    if mask & (1 << i) != 0 {
                        a / (a + b)
                    } else {
                        b / (a + b)
                    }
                })
                .product()
        })
    }
}

/// The walk that flips one coordinate per step.
pub fn nearest_neighbor_walk(params: &CubeWalkParams) -> Result<Chain> {
    let d = params.d();
    let poset = Arc::new(Poset::cube(d)?);
    let m = poset.len();
    let mut p = DMatrix::zeros(m, m);
    for k in 0..m {
        let mask = poset.mask(k).expect("cube poset");
        let mut hold = 1.0;
        for i in 0..d {
            let (target, rate) = if mask & (1 << i) == 0 {
                (mask | (1 << i), params.alpha[i])
            } else {
                (mask & !(1 << i), params.beta[i])
            };
            p[(k, poset.index_of_mask(target).expect("cube state"))] = rate;
            hold -= rate;
        }
        if hold < 0.0 {
            return Err(Error::NegativeHoldingProbability { state: k, value: hold });
        }
        p[(k, k)] = hold;
    }
    Chain::new(poset, p, None)
}

/// `P^k` on the same poset, keeping the initial law.
pub fn power_chain(c: &Chain, k: usize) -> Result<Chain> {
    if k == 0 {
        return Err(Error::InvalidParameter("power must be at least 1".into()));
    }
    let mut p = c.matrix().clone();
    for _ in 1..k {
        p = &p * c.matrix();
    }
    Chain::new(Arc::clone(c.poset()), p, c.initial().cloned())
}

/// Moves mass `kappa` in row `row` from the incomparable states `x`, `y` to
/// `x ∧ y` and `x ∨ y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GPlusMove {
    pub row: usize,
    pub x: usize,
    pub y: usize,
    pub kappa: f64,
}

/// Applies one `g+` move. Requires the meet and join of `x`, `y` to exist.
pub fn gplus_transform(c: &Chain, mv: GPlusMove) -> Result<Chain> {
    let poset = c.poset();
    let m = c.len();
    for s in [mv.row, mv.x, mv.y] {
        if s >= m {
            return Err(Error::UnknownState(s.to_string()));
        }
    }
    if poset.comparable(mv.x, mv.y) {
        return Err(Error::IncomparableRequired { x: mv.x, y: mv.y });
    }
    let (meet, join) = poset.meet_join(mv.x, mv.y).ok_or(Error::NotLattice { a: mv.x, b: mv.y })?;
    if !(mv.kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("kappa = {} must be non-negative", mv.kappa)));
    }
    let mut p = c.matrix().clone();
    for s in [mv.x, mv.y] {
        let available = p[(mv.row, s)];
        if mv.kappa > available {
            return Err(Error::InsufficientMass {
                state: s,
                available,
                kappa: mv.kappa,
            });
        }
    }
    p[(mv.row, mv.x)] -= mv.kappa;
    p[(mv.row, mv.y)] -= mv.kappa;
    p[(mv.row, meet)] += mv.kappa;
    p[(mv.row, join)] += mv.kappa;
    Chain::new(Arc::clone(poset), p, c.initial().cloned())
}

/// The moves on the rows whose first and last coordinates agree: with
/// `e_1 = e_d = 0` the two up-neighbours in those coordinates give mass to
/// the row state and to the double flip; with `e_1 = e_d = 1` the two
/// down-neighbours do.
pub fn symmetry_axis_moves(poset: &Poset, kappa: f64) -> Result<Vec<GPlusMove>> {
    let d = poset
        .cube_dim()
        .ok_or_else(|| Error::InvalidParameter("symmetry-axis moves need a cube poset".into()))?;
    if d < 2 {
        return Err(Error::InvalidParameter("symmetry-axis moves need d >= 2".into()));
    }
    let (first, last) = (1u32, 1u32 << (d - 1));
    let mut moves = Vec::new();
    for row in 0..poset.len() {
        let mask = poset.mask(row).expect("cube poset");
        let (x, y) = match (mask & first != 0, mask & last != 0) {
            (false, false) => (mask | first, mask | last),
            (true, true) => (mask & !first, mask & !last),
            _ => continue,
        };
        moves.push(GPlusMove {
            row,
            x: poset.index_of_mask(x).expect("cube state"),
            y: poset.index_of_mask(y).expect("cube state"),
            kappa,
        });
    }
    Ok(moves)
}

/// Applies moves one after another, checking each step.
pub fn apply_moves(c: &Chain, moves: &[GPlusMove]) -> Result<Chain> {
    moves.iter().try_fold(c.clone(), |acc, &mv| gplus_transform(&acc, mv))
}

/// First pair violating `f(x ∧ y) + f(x ∨ y) >= f(x) + f(y) - tol`, with
/// the defect.
pub fn supermodular_defect(poset: &Poset, f: &[f64], tol: f64) -> Result<Option<(usize, usize, f64)>> {
    let m = poset.len();
    for x in 0..m {
        for y in x + 1..m {
            if poset.comparable(x, y) {
                continue;
            }
            let (lo, hi) = poset.meet_join(x, y).ok_or(Error::NotLattice { a: x, b: y })?;
            let defect = f[lo] + f[hi] - f[x] - f[y];
            if defect < -tol {
                return Ok(Some((x, y, defect)));
            }
        }
    }
    Ok(None)
}

/// Candidate supermodular function: on cubes a modular part, products of
/// non-negative non-decreasing coordinate functions and convex functions of
/// a non-negative weighted sum; on every lattice, weighted indicators of
/// principal up- and down-sets.
fn candidate_supermodular(poset: &Poset, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = poset.len();
    let mut f = vec![rng.random_range(-1.0..1.0); m];
    for _ in 0..rng.random_range(1..=3) {
        let a = rng.random_range(0..m);
        let w: f64 = rng.random();
        let up: bool = rng.random();
        for (e, v) in f.iter_mut().enumerate() {
            if (up && poset.leq(a, e)) || (!up && poset.leq(e, a)) {
                *v += w;
            }
        }
    }
    let Some(d) = poset.cube_dim() else {
        return f;
    };
    let masks: Vec<u32> = (0..m).map(|k| poset.mask(k).expect("cube poset")).collect();
    let bit = |k: usize, i: usize| masks[k] & (1 << i) != 0;

    let modular: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    for (k, v) in f.iter_mut().enumerate() {
        *v += (0..d).filter(|&i| bit(k, i)).map(|i| modular[i]).sum::<f64>();
    }
    for _ in 0..rng.random_range(1..=3) {
        // h_i(0) = u_i, h_i(1) = u_i + v_i with u_i, v_i >= 0.
        let mut coords: Vec<(usize, f64, f64)> = Vec::new();
        for i in 0..d {
            if rng.random_bool(0.6) {
                coords.push((i, rng.random(), rng.random()));
            }
        }
        let scale: f64 = rng.random();
        for (k, v) in f.iter_mut().enumerate() {
            *v += scale * coords.iter().map(|&(i, u, dv)| if bit(k, i) { u + dv } else { u }).product::<f64>();
        }
    }
    let weights: Vec<f64> = (0..d).map(|_| rng.random()).collect();
    let shift: f64 = rng.random_range(0.0..2.0);
    let kind = rng.random_range(0..3);
    for (k, v) in f.iter_mut().enumerate() {
        let t: f64 = (0..d).filter(|&i| bit(k, i)).map(|i| weights[i]).sum();
        *v += match kind {
            0 => t * t,
            1 => t.exp() - 1.0,
            _ => (t - shift).max(0.0),
        };
    }
    f
}

/// Draws a random supermodular function, verified by checking every pair.
/// Returns the function and the number of rejected candidates.
pub fn random_supermodular(poset: &Poset, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, usize)> {
    if let Some((a, b)) = poset.lattice_defect() {
        return Err(Error::NotLattice { a, b });
    }
    let mut rejected = 0;
    loop {
        let f = candidate_supermodular(poset, rng);
        if supermodular_defect(poset, &f, 1e-12)?.is_none() {
            return Ok((f, rejected));
        }
        rejected += 1;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SupermodularOptions {
    pub trials: usize,
    pub seed: u64,
    pub exec: Exec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupermodularReport {
    /// `min_f (E f(p2) - E f(p1))` over the sampled functions.
    pub min_difference: f64,
    pub argmin_trial: usize,
    pub trials: usize,
    /// Candidates that failed the pair check and were redrawn.
    pub rejected: usize,
}

/// Searches for a supermodular `f` with `E f(p2) < E f(p1)`; a
/// non-negative minimum is evidence for `p1 ≺_sm p2`.
///
/// Trial `t` draws its function from stream `t` of a ChaCha generator seeded
/// with `seed`, so the same seed tests the same functions on every row.
pub fn supermodular_order_witness(
    poset: &Poset,
    p1: &[f64],
    p2: &[f64],
    opts: &SupermodularOptions,
) -> Result<SupermodularReport> {
    let m = poset.len();
    for row in [p1, p2] {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                what: "distribution",
                expected: m,
                found: row.len(),
            });
        }
    }
    if let Some((a, b)) = poset.lattice_defect() {
        return Err(Error::NotLattice { a, b });
    }
    let results = opts.exec.try_map(opts.trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(t as u64);
        let (f, rejected) = random_supermodular(poset, &mut rng)?;
        let diff: f64 = (0..m).map(|e| (p2[e] - p1[e]) * f[e]).sum();
        Ok::<_, Error>((diff, rejected))
    })?;
    let mut report = SupermodularReport {
        min_difference: f64::INFINITY,
        argmin_trial: 0,
        trials: opts.trials,
        rejected: 0,
    };
    for (t, (diff, rejected)) in results.into_iter().enumerate() {
        report.rejected += rejected;
        if diff < report.min_difference {
            report.min_difference = diff;
            report.argmin_trial = t;
        }
    }
    Ok(report)
}

/// Grid of uniform walks `alpha_i = alpha`, `beta_i = beta` on `{0,1}^d`,
/// each modified by the symmetry-axis moves with mass `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub d: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub tol: Tolerances,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Evaluated {
        mobius_down: bool,
        mobius_up: bool,
        worst_down: f64,
        worst_up: f64,
        /// Dual from the minimal state is upper triangular; `None` when the
        /// down check fails.
        triangular_dual: Option<bool>,
    },
    /// The parameters do not define a chain (negative holding or too
    /// little mass for the move).
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub outcome: SweepOutcome,
}

fn sweep_point(grid: &SweepGrid, alpha: f64, beta: f64, kappa: f64) -> Result<SweepOutcome> {
    let params = CubeWalkParams::new(vec![alpha; grid.d], vec![beta; grid.d])?;
    let walk = match nearest_neighbor_walk(&params) {
        Ok(c) => c,
        Err(e @ Error::NegativeHoldingProbability { .. }) => return Ok(SweepOutcome::Invalid(e.to_string())),
        Err(e) => return Err(e),
    };
    let chain = if kappa > 0.0 {
        match apply_moves(&walk, &symmetry_axis_moves(walk.poset(), kappa)?) {
            Ok(c) => c,
            Err(e @ Error::InsufficientMass { .. }) => return Ok(SweepOutcome::Invalid(e.to_string())),
            Err(e) => return Err(e),
        }
    } else {
        walk
    }
    .with_point_mass(0);
    let zm = chain.poset().zeta_mobius()?;
    let down = mobius_monotone(&chain, &zm, Direction::Down, grid.tol.mono)?;
    let up = mobius_monotone(&chain, &zm, Direction::Up, grid.tol.mono)?;
    let triangular_dual = if down.verdict {
        let pi = chain.stationary_with(&grid.tol)?;
        let opts = SsdOptions {
            tol: grid.tol,
            force: false,
        };
        match build_ssd(&chain, &pi, &zm, Direction::Down, opts) {
            Ok(dual) => Some(dual.is_upper_triangular(grid.tol.identity)),
            Err(Error::PreconditionFailed { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(SweepOutcome::Evaluated {
        mobius_down: down.verdict,
        mobius_up: up.verdict,
        worst_down: down.worst_value,
        worst_up: up.worst_value,
        triangular_dual,
    })
}

/// Evaluates every grid point; results are in `alpha`-major,
/// `kappa`-minor order regardless of `exec`.
pub fn sweep(grid: &SweepGrid, exec: Exec) -> Result<Vec<SweepPoint>> {
    if grid.d < 2 {
        return Err(Error::InvalidParameter("sweep needs d >= 2".into()));
    }
    let (nb, nk) = (grid.beta.len(), grid.kappa.len());
    let n = grid.alpha.len() * nb * nk;
    exec.try_map(n, |idx| {
        let (alpha, beta, kappa) = (grid.alpha[idx / (nb * nk)], grid.beta[idx / nk % nb], grid.kappa[idx % nk]);
        Ok(SweepPoint {
            alpha,
            beta,
            kappa,
            outcome: sweep_point(grid, alpha, beta, kappa)?,
        })
    })
}
