//! Model generators shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssdual::chain::vec_mat;
use ssdual::cube::CubeWalkParams;
use ssdual::monotonicity::{mobius_monotone, strong_stochastic_monotone, DEFAULT_UP_SET_CAP};
use ssdual::{Chain, DMatrix, DVector, Direction, Poset, ZetaMobius};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive rates with `sum(alpha + beta) = total`.
pub fn rates_with_total(rng: &mut ChaCha8Rng, d: usize, total: f64) -> CubeWalkParams {
    let raw: Vec<f64> = (0..2 * d).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let scaled: Vec<f64> = raw.iter().map(|x| x * total / s).collect();
    CubeWalkParams::new(scaled[..d].to_vec(), scaled[d..].to_vec()).unwrap()
}

/// Random admissible rates, total in `[0.3, 1]`.
pub fn random_admissible(rng: &mut ChaCha8Rng, d: usize) -> CubeWalkParams {
    let total = rng.random_range(0.3..=1.0);
    rates_with_total(rng, d, total)
}

/// Random poset on `m >= 2` states with a unique minimum `"0"` and maximum
/// `"m-1"`; middle elements are related with probability `density`.
pub fn random_bounded_poset(rng: &mut ChaCha8Rng, m: usize, density: f64) -> Poset {
    let labels: Vec<String> = (0..m).map(|i| i.to_string()).collect();
    let mut rel = Vec::new();
    for i in 1..m - 1 {
        rel.push((labels[0].clone(), labels[i].clone()));
        rel.push((labels[i].clone(), labels[m - 1].clone()));
        for j in i + 1..m - 1 {
            if rng.random_bool(density) {
                rel.push((labels[i].clone(), labels[j].clone()));
            }
        }
    }
    if m == 2 {
        rel.push((labels[0].clone(), labels[1].clone()));
    }
    Poset::build(&labels, &rel).unwrap()
}

/// One LP vertex of the reversible Möbius-monotone kernels with stationary
/// law `pi`: variables are the symmetric flows `S = diag(pi) P`.
fn monotone_flow_vertex(rng: &mut ChaCha8Rng, zm: &ZetaMobius, pi: &DVector<f64>, dir: Direction) -> Option<DMatrix<f64>> {
    let m = pi.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut var = vec![vec![None; m]; m];
    for i in 0..m {
        for j in i..m {
            let v = lp.add_var(rng.random_range(-1.0..1.0), (0.0, f64::INFINITY));
            var[i][j] = Some(v);
            var[j][i] = Some(v);
        }
    }
    for i in 0..m {
        let mut row = LinearExpr::empty();
        for j in 0..m {
            row.add(var[i][j].unwrap(), 1.0);
        }
        lp.add_constraint(row, ComparisonOp::Eq, pi[i]);
    }
    // T = L diag(pi)^{-1} S R >= 0 with (L, R) = (C^{-1}, C) or their transposes.
    let (mu, c) = (zm.mobius_f64(), zm.zeta_f64());
    let (l, r) = match dir {
        Direction::Down => (mu.clone(), c.clone()),
        Direction::Up => (mu.transpose(), c.transpose()),
    };
    for a in 0..m {
        for b in 0..m {
            let mut coef = vec![vec![0.0; m]; m];
            for i in 0..m {
                if l[(a, i)] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    if r[(j, b)] != 0.0 {
                        coef[i][j] += l[(a, i)] / pi[i] * r[(j, b)];
                    }
                }
            }
            let mut expr = LinearExpr::empty();
            for i in 0..m {
                for j in i..m {
                    let w = if i == j { coef[i][j] } else { coef[i][j] + coef[j][i] };
                    if w != 0.0 {
                        expr.add(var[i][j].unwrap(), w);
                    }
                }
            }
            lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
        }
    }
    let sol = lp.solve().ok()?;
    Some(DMatrix::from_fn(m, m, |i, j| sol[var[i][j].unwrap()].max(0.0)))
}

/// Randomized search for an ergodic, reversible, Möbius-monotone chain on
/// `poset`: a random stationary law, a few random LP vertices of the
/// feasible flows, mixed with the independent-sampling kernel (`P(x, .) = pi`)
/// and the identity. Candidates failing the float checks are redrawn.
pub fn random_monotone_chain(rng: &mut ChaCha8Rng, poset: Arc<Poset>, dir: Direction) -> Chain {
    let zm = poset.zeta_mobius().unwrap();
    let m = poset.len();
    for _ in 0..100 {
        let raw = DVector::from_fn(m, |_, _| rng.random_range(0.2..1.0));
        let pi = &raw / raw.sum();
        let mut weights = vec![rng.random_range(0.05..0.3), rng.random_range(0.0..0.3)];
        let vertices: Vec<DMatrix<f64>> = (0..3).filter_map(|_| monotone_flow_vertex(rng, &zm, &pi, dir)).collect();
        weights.extend(vertices.iter().map(|_| rng.random_range(0.1..1.0)));
        let total: f64 = weights.iter().sum();
        let mut flow = &pi * pi.transpose() * (weights[0] / total) + DMatrix::from_diagonal(&pi) * (weights[1] / total);
        for (v, w) in vertices.iter().zip(&weights[2..]) {
            flow += v * (w / total);
        }
        let mut p = DMatrix::from_fn(m, m, |i, j| flow[(i, j)] / pi[i]);
        for i in 0..m {
            let s = p.row(i).sum();
            p.row_mut(i).unscale_mut(s);
        }
        let Ok(chain) = Chain::new(Arc::clone(&poset), p, None) else {
            continue;
        };
        let ok = chain.stationary().is_ok() && mobius_monotone(&chain, &zm, dir, 1e-10).unwrap().verdict;
        if ok {
            return chain;
        }
    }
    panic!("no monotone chain found");
}

/// Initial law whose ratio to `pi` is Möbius monotone in `dir`: `g` is a
/// non-negative combination of indicators of principal down-sets (down
/// case) or principal up-sets (up case).
pub fn random_monotone_initial(rng: &mut ChaCha8Rng, pi: &DVector<f64>, zm: &ZetaMobius, dir: Direction) -> DVector<f64> {
    let m = pi.len();
    let h = DVector::from_fn(m, |_, _| if rng.random_bool(0.5) { rng.random::<f64>() } else { 0.0 });
    let h = if h.sum() == 0.0 { DVector::from_element(m, 1.0) } else { h };
    let c = zm.zeta_f64();
    // down: g(x) = sum_{y >= x} h(y); up: g(x) = sum_{y <= x} h(y).
    let g = match dir {
        Direction::Down => vec_mat(&h, &c.transpose()),
        Direction::Up => vec_mat(&h, c),
    };
    let nu = g.component_mul(pi);
    &nu / nu.sum()
}

/// All order-preserving self-maps of `{0,1}^2` in enumeration order.
pub fn monotone_maps_two_cube(poset: &Poset) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for code in 0..256usize {
        let f = [code & 3, (code >> 2) & 3, (code >> 4) & 3, (code >> 6) & 3];
        let ok = (0..4).all(|x| (0..4).all(|y| !poset.leq(x, y) || poset.leq(f[x], f[y])));
        if ok {
            out.push(f);
        }
    }
    out
}

/// A chain on `{0,1}^2` found by the seeded search, with entries `num / den`.
pub struct SearchHit {
    pub attempt: usize,
    pub den: u64,
    pub num: Vec<Vec<u64>>,
}

impl SearchHit {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(4, 4, |i, j| self.num[i][j] as f64 / self.den as f64)
    }
}

/// Searches mixtures of monotone maps (strongly monotone by construction)
/// for an ergodic chain on `{0,1}^2` that is not down-Möbius monotone.
pub fn search_strong_not_mobius(seed: u64) -> SearchHit {
    let poset = Arc::new(Poset::cube(2).unwrap());
    let zm = poset.zeta_mobius().unwrap();
    let maps = monotone_maps_two_cube(&poset);
    let mut rng = rng(seed);
    for attempt in 0.. {
        let mut num = vec![vec![0u64; 4]; 4];
        let mut den = 0;
        for _ in 0..rng.random_range(2..=4) {
            let f = maps[rng.random_range(0..maps.len())];
            let w = rng.random_range(1..=9);
            den += w;
            for x in 0..4 {
                num[x][f[x]] += w;
            }
        }
        let hit = SearchHit { attempt, den, num };
        let Ok(chain) = Chain::new(Arc::clone(&poset), hit.matrix(), None) else {
            continue;
        };
        if chain.stationary().is_err() {
            continue;
        }
        let strong = strong_stochastic_monotone(&chain, DEFAULT_UP_SET_CAP, 1e-10).unwrap();
        let mobius = mobius_monotone(&chain, &zm, Direction::Down, 1e-10).unwrap();
        if strong.verdict && !mobius.verdict {
            return hit;
        }
    }
    unreachable!()
}

/// Reads a chain stored in the spec-file layout used by the fixtures:
/// `[poset] cube = d` and `[chain] matrix = [["p/q", ...], ...]` in
/// bitmask row order.
pub fn load_cube_fixture(text: &str) -> (Chain, Vec<Vec<ssdual::exact::Rational>>) {
    let doc: toml::Table = text.parse().unwrap();
    let d = doc["poset"]["cube"].as_integer().unwrap() as usize;
    let poset = Arc::new(Poset::cube(d).unwrap());
    let rows = doc["chain"]["matrix"].as_array().unwrap();
    let parse = |v: &toml::Value| match v {
        toml::Value::String(s) => ssdual::exact::parse_rational(s).unwrap(),
        toml::Value::Float(x) => ssdual::exact::parse_rational(&x.to_string()).unwrap(),
        toml::Value::Integer(x) => ssdual::exact::parse_rational(&x.to_string()).unwrap(),
        other => panic!("{other:?}"),
    };
    let m = poset.len();
    // File rows and columns are bitmasks; reorder to the enumeration.
    let by_mask: Vec<Vec<_>> = rows.iter().map(|r| r.as_array().unwrap().iter().map(parse).collect()).collect();
    let exact: Vec<Vec<_>> = (0..m)
        .map(|i| {
            let mi = poset.mask(i).unwrap() as usize;
            (0..m).map(|j| by_mask[mi][poset.mask(j).unwrap() as usize].clone()).collect()
        })
        .collect();
    use num_traits::ToPrimitive;
    let p = DMatrix::from_fn(m, m, |i, j| exact[i][j].to_f64().unwrap());
    (Chain::new(poset, p, None).unwrap(), exact)
}
