//! Separation distance, absorption-time laws of duals, the strong stationary
//! time bound, closed forms for cube walks, and Monte Carlo validation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{vec_mat, Chain, StationaryLaw};
use crate::dual::DualChain;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::poset::MAX_CUBE_DIM;

/// Horizon used by front ends when none is given.
pub const DEFAULT_HORIZON: usize = 200;
/// Curves longer than this are refused to bound memory.
pub const MAX_HORIZON: usize = 10_000_000;
/// Separation below this is indistinguishable from float noise.
pub const DEFAULT_STOP_BELOW: f64 = 1e-14;
/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.5758293035489004;
/// Number of independent random streams in [`simulate_absorption`].
pub const SHARDS: usize = 64;
/// Walks still running after this many steps are counted as censored.
pub const MAX_WALK_STEPS: u64 = 100_000_000;

/// `s(nu P^n, pi)` for `n = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationCurve {
    pub values: Vec<f64>,
    pub horizon: usize,
}

/// `P(T* > n)` for `n = 0..=horizon` and `E T*`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionLaw {
    pub tail: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SstReport {
    /// Largest `s(n) - tail(n)`, clipped below at zero.
    pub max_violation: f64,
    /// First `n` where `s(n) > tail(n) + tol`.
    pub first_violation: Option<usize>,
    /// Largest `|s(n) - tail(n)|`.
    pub max_gap: f64,
    /// `max_gap <= tol`.
    pub equality: bool,
    /// Number of indices compared (the shorter of the two curves).
    pub compared: usize,
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon > MAX_HORIZON {
        return Err(Error::HorizonTooLarge {
            horizon,
            max: MAX_HORIZON,
        });
    }
    Ok(())
}

fn separation(v: &DVector<f64>, pi: &DVector<f64>) -> f64 {
    v.iter()
        .zip(pi.iter())
        .map(|(a, b)| 1.0 - a / b)
        .fold(0.0f64, f64::max)
        .min(1.0)
}

/// Separation distance along the chain started from its initial law.
pub fn separation_curve(c: &Chain, pi: &StationaryLaw, horizon: usize) -> Result<SeparationCurve> {
    separation_curve_until(c, pi, horizon, None)
}

/// As [`separation_curve`], but stops once the value drops below
/// `stop_below`; the curve is then shorter than `horizon + 1`.
pub fn separation_curve_until(
    c: &Chain,
    pi: &StationaryLaw,
    horizon: usize,
    stop_below: Option<f64>,
) -> Result<SeparationCurve> {
    check_horizon(horizon)?;
    let nu = c.initial().ok_or(Error::MissingInitialLaw)?;
    if pi.len() != c.len() {
        return Err(Error::DimensionMismatch {
            what: "stationary law",
            expected: c.len(),
            found: pi.len(),
        });
    }
    let mut v = nu.clone();
    let mut values = Vec::with_capacity(horizon + 1);
    for n in 0..=horizon {
        let s = separation(&v, &pi.pi);
        values.push(s);
        if stop_below.is_some_and(|t| s < t) || n == horizon {
            break;
        }
        v = vec_mat(&v, c.matrix());
    }
    Ok(SeparationCurve {
        horizon: values.len() - 1,
        values,
    })
}

/// States from which `target` cannot be reached along positive entries.
fn cannot_reach(p: &DMatrix<f64>, target: usize) -> Option<usize> {
    let m = p.nrows();
    let mut seen = vec![false; m];
    seen[target] = true;
    let mut stack = vec![target];
    while let Some(j) = stack.pop() {
        for i in 0..m {
            if !seen[i] && p[(i, j)] > 0.0 {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    seen.iter().position(|s| !s)
}

/// Tail and mean of the absorption time of a dual.
pub fn absorption_tail(d: &DualChain, horizon: usize) -> Result<AbsorptionLaw> {
    check_horizon(horizon)?;
    let m = d.p_star.nrows();
    let a = d.absorbing_index;
    if cannot_reach(&d.p_star, a).is_some() {
        return Err(Error::SingularFundamentalMatrix);
    }
    let transient: Vec<usize> = (0..m).filter(|&i| i != a).collect();
    let k = transient.len();
    let q = DMatrix::from_fn(k, k, |i, j| d.p_star[(transient[i], transient[j])]);
    let mut v = DVector::from_fn(k, |i, _| d.nu_star[transient[i]]);

    let mut tail = Vec::with_capacity(horizon + 1);
    for n in 0..=horizon {
        tail.push(v.sum().max(0.0));
        if n < horizon {
            v = vec_mat(&v, &q);
        }
    }

    let ones = DVector::from_element(k, 1.0);
    let mut fundamental = DMatrix::identity(k, k) - &q;
    let lower_zero = (0..k).all(|i| (0..i).all(|j| q[(i, j)] == 0.0));
    let x = if lower_zero {
        // Triangular duals (the usual case under a linear extension).
        fundamental
            .solve_upper_triangular(&ones)
            .ok_or(Error::SingularFundamentalMatrix)?
    } else {
        std::mem::replace(&mut fundamental, DMatrix::zeros(0, 0))
            .lu()
            .solve(&ones)
            .ok_or(Error::SingularFundamentalMatrix)?
    };
    if x.iter().any(|t| !t.is_finite()) {
        return Err(Error::SingularFundamentalMatrix);
    }
    let mean = (0..k).map(|i| d.nu_star[transient[i]] * x[i]).sum();
    Ok(AbsorptionLaw { tail, mean })
}

/// Compares a separation curve with an absorption tail, `s(n) <= tail(n) + tol`.
pub fn sst_bound_check(s: &SeparationCurve, a: &AbsorptionLaw, tol: f64) -> SstReport {
    let compared = s.values.len().min(a.tail.len());
    let mut report = SstReport {
        max_violation: 0.0,
        first_violation: None,
        max_gap: 0.0,
        equality: true,
        compared,
    };
    for n in 0..compared {
        let diff = s.values[n] - a.tail[n];
        report.max_violation = report.max_violation.max(diff);
        report.max_gap = report.max_gap.max(diff.abs());
        if diff > tol && report.first_violation.is_none() {
            report.first_violation = Some(n);
        }
    }
    report.equality = report.max_gap <= tol;
    report
}

fn check_rates(alpha: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            what: "beta",
            expected: alpha.len(),
            found: beta.len(),
        });
    }
    if alpha.len() > MAX_CUBE_DIM {
        return Err(Error::DimensionTooLarge {
            what: "cube dimension",
            value: alpha.len(),
            max: MAX_CUBE_DIM,
        });
    }
    if let Some(x) = alpha.iter().chain(beta).find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidParameter(format!("rate {x} is not a non-negative number")));
    }
    Ok(alpha.iter().zip(beta).map(|(a, b)| a + b).collect())
}

fn check_admissible(rates: &[f64]) -> Result<()> {
    let total: f64 = rates.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::InadmissibleRates { total });
    }
    Ok(())
}

/// Visits every subset `gamma` in Gray-code order with `(|gamma|, s_gamma)`.
fn for_each_subset(rates: &[f64], mut f: impl FnMut(usize, f64)) {
    let d = rates.len();
    let mut size = 0usize;
    let mut s = 0.0f64;
    let mut gray = 0u32;
    f(0, 0.0);
    for step in 1u32..(1u32 << d) {
        let bit = step.trailing_zeros() as usize;
        gray ^= 1 << bit;
        if gray & (1 << bit) != 0 {
            size += 1;
            s += rates[bit];
        } else {
            size -= 1;
            s -= rates[bit];
        }
        // Resynchronise occasionally so the running sum does not drift.
        if step & 0xff == 0 {
            s = (0..d).filter(|i| gray & (1 << i) != 0).map(|i| rates[i]).sum();
        }
        f(size, s);
    }
}

/// Inclusion–exclusion closed form of `s(delta_0 P^n, pi)` for the
/// nearest-neighbour cube walk,
/// `sum_{k=1}^d (-1)^{k-1} sum_{|gamma| = k} (1 - s_gamma)^n`.
pub fn cube_separation_formula(alpha: &[f64], beta: &[f64], n: usize) -> Result<f64> {
    let rates = check_rates(alpha, beta)?;
    check_admissible(&rates)?;
    let n = i32::try_from(n).map_err(|_| Error::HorizonTooLarge {
        horizon: n,
        max: i32::MAX as usize,
    })?;
    let mut total = 0.0;
    for_each_subset(&rates, |k, s| {
        if k > 0 {
            let term = (1.0 - s).powi(n);
            if k % 2 == 1 {
                total += term;
            } else {
                total -= term;
            }
        }
    });
    Ok(total)
}

/// [`cube_separation_formula`] for every `n = 0..=horizon` in one pass.
pub fn cube_separation_formula_curve(alpha: &[f64], beta: &[f64], horizon: usize) -> Result<Vec<f64>> {
    check_horizon(horizon)?;
    let rates = check_rates(alpha, beta)?;
    check_admissible(&rates)?;
    let mut out = vec![0.0; horizon + 1];
    for_each_subset(&rates, |k, s| {
        if k > 0 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let mut term = 1.0;
            for v in out.iter_mut() {
                *v += sign * term;
                term *= 1.0 - s;
            }
        }
    });
    Ok(out)
}

/// `{1 - s_gamma : gamma ⊆ {1..d}}` with multiplicity, sorted descending.
pub fn cube_eigenvalues(alpha: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
    let rates = check_rates(alpha, beta)?;
    let mut out = Vec::with_capacity(1 << rates.len());
    // Direct sums per subset so each value is rounded the same way as the
    // dual diagonal.
    let d = rates.len();
    for mask in 0u32..(1u32 << d) {
        let s: f64 = (0..d).filter(|i| mask & (1 << i) != 0).map(|i| rates[i]).sum();
        out.push(1.0 - s);
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationOptions {
    pub samples: usize,
    pub seed: u64,
    pub horizon: usize,
    pub exec: Exec,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            samples: 100_000,
            seed: 0,
            horizon: 50,
            exec: Exec::default(),
        }
    }
}

/// Empirical absorption-time law with pointwise 99% Wilson score bands.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTail {
    pub tail: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    /// Mean over walks that were absorbed within [`MAX_WALK_STEPS`].
    pub mean: f64,
    /// Standard error of `mean`.
    pub std_error: f64,
    pub samples: usize,
    pub censored: usize,
    pub seed: u64,
}

impl EmpiricalTail {
    /// Whether `analytic(n)` lies inside the band for every compared `n`.
    pub fn envelopes(&self, analytic: &[f64]) -> Option<usize> {
        analytic
            .iter()
            .zip(self.band_lo.iter().zip(&self.band_hi))
            .position(|(a, (lo, hi))| a < lo || a > hi)
    }
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Sparse cumulative rows for inverse-CDF sampling.
struct Sampler {
    states: Vec<Vec<usize>>,
    cum: Vec<Vec<f64>>,
}

impl Sampler {
    fn new(rows: impl Iterator<Item = Vec<f64>>) -> Sampler {
        let mut states = Vec::new();
        let mut cum = Vec::new();
        for row in rows {
            let mut s = Vec::new();
            let mut c = Vec::new();
            let mut acc = 0.0;
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    acc += p;
                    s.push(j);
                    c.push(acc);
                }
            }
            if let Some(last) = c.last_mut() {
                *last = 1.0;
            }
            states.push(s);
            cum.push(c);
        }
        Sampler { states, cum }
    }

    fn draw(&self, row: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let k = self.cum[row].partition_point(|&c| c <= u);
        self.states[row][k.min(self.states[row].len() - 1)]
    }
}

struct ShardTally {
    /// `hist[t]` counts absorption at time `t` for `t <= horizon`; the last
    /// slot collects everything later.
    hist: Vec<u64>,
    sum: u128,
    sum_sq: u128,
    absorbed: u64,
    censored: u64,
}

/// Simulates the absorption time of the dual by categorical sampling.
///
/// The samples are split over [`SHARDS`] ChaCha streams derived from `seed`
/// and merged in shard order, so the output depends only on
/// `(seed, samples, horizon)` and not on `exec`.
pub fn simulate_absorption(d: &DualChain, opts: &SimulationOptions) -> Result<EmpiricalTail> {
    if opts.samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    check_horizon(opts.horizon)?;
    let m = d.p_star.nrows();
    if d.nu_star.iter().chain(d.p_star.iter()).any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidParameter("dual has negative entries; cannot sample".into()));
    }
    let rows = Sampler::new((0..m).map(|i| d.p_star.row(i).iter().copied().collect()));
    let start = Sampler::new(std::iter::once(d.nu_star.iter().copied().collect()));
    let absorbing = d.absorbing_index;
    let horizon = opts.horizon;

    let tallies = opts.exec.map(SHARDS, |shard| {
        let n = opts.samples / SHARDS + usize::from(shard < opts.samples % SHARDS);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(shard as u64);
        let mut t = ShardTally {
            hist: vec![0; horizon + 2],
            sum: 0,
            sum_sq: 0,
            absorbed: 0,
            censored: 0,
        };
        for _ in 0..n {
            let mut state = start.draw(0, &mut rng);
            let mut steps = 0u64;
            while state != absorbing && steps < MAX_WALK_STEPS {
                state = rows.draw(state, &mut rng);
                steps += 1;
            }
            if state == absorbing {
                t.absorbed += 1;
                t.sum += steps as u128;
                t.sum_sq += (steps as u128) * (steps as u128);
            } else {
                t.censored += 1;
            }
            t.hist[(steps as usize).min(horizon + 1)] += 1;
        }
        t
    });

    let mut hist = vec![0u64; horizon + 2];
    let (mut sum, mut sum_sq, mut absorbed, mut censored) = (0u128, 0u128, 0u64, 0u64);
    for t in tallies {
        for (h, x) in hist.iter_mut().zip(&t.hist) {
            *h += x;
        }
        sum += t.sum;
        sum_sq += t.sum_sq;
        absorbed += t.absorbed;
        censored += t.censored;
    }

    let total = opts.samples;
    let mut above = total as u64;
    let mut tail = Vec::with_capacity(horizon + 1);
    let mut band_lo = Vec::with_capacity(horizon + 1);
    let mut band_hi = Vec::with_capacity(horizon + 1);
    for h in hist.iter().take(horizon + 1) {
        above -= h;
        tail.push(above as f64 / total as f64);
        let (lo, hi) = wilson_interval(above as usize, total, Z_99);
        band_lo.push(lo);
        band_hi.push(hi);
    }
    let (mean, std_error) = if absorbed > 0 {
        let k = absorbed as f64;
        let mean = sum as f64 / k;
        let var = (sum_sq as f64 / k - mean * mean).max(0.0);
        (mean, (var / k).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(EmpiricalTail {
        tail,
        band_lo,
        band_hi,
        mean,
        std_error,
        samples: total,
        censored: censored as usize,
        seed: opts.seed,
    })
}
