//! Finite partially ordered state spaces.
//!
//! Elements are stored in a fixed linear extension: `leq(i, j)` implies
//! `i <= j`, so the zeta matrix is upper unitriangular. General posets keep a
//! dense bit relation; boolean cubes `{0,1}^d` compare bitmasks lazily and
//! scale to `d = 20`.

use std::borrow::Cow;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest cube dimension [`Poset::cube`] accepts.
pub const MAX_CUBE_DIM: usize = 20;
/// Largest state count for dense matrices (zeta, kernels).
pub const MAX_DENSE_STATES: usize = 1 << 14;

#[derive(Debug, Clone)]
pub struct Poset {
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense {
        labels: Vec<String>,
        index: HashMap<String, usize>,
        /// Row-major bit matrix, `words` u64 per row.
        leq: Vec<u64>,
        words: usize,
        /// Position of each enumerated element in the caller's label list.
        input_pos: Vec<usize>,
    },
    Cube {
        d: usize,
        masks: Vec<u32>,
        position: Vec<u32>,
    },
}

impl Poset {
    /// Builds a poset from labels and generating relations `a <= b`.
    ///
    /// The order is the reflexive-transitive closure of `relations`. The
    /// enumeration is a topological sort that breaks ties by input order.
    pub fn build<S: AsRef<str>>(labels: &[S], relations: &[(S, S)]) -> Result<Poset> {
        let m = labels.len();
        if m == 0 {
            return Err(Error::InvalidParameter("poset needs at least one state".into()));
        }
        if m > MAX_DENSE_STATES {
            return Err(Error::DimensionTooLarge {
                what: "state count",
                value: m,
                max: MAX_DENSE_STATES,
            });
        }
        let mut input_index = HashMap::with_capacity(m);
        for (i, l) in labels.iter().enumerate() {
            if input_index.insert(l.as_ref().to_string(), i).is_some() {
                return Err(Error::DuplicateLabel(l.as_ref().to_string()));
            }
        }
        let lookup = |s: &S| {
            input_index
                .get(s.as_ref())
                .copied()
                .ok_or_else(|| Error::UnknownState(s.as_ref().to_string()))
        };

        let words = m.div_ceil(64);
        let mut rel = vec![0u64; m * words];
        let set = |rel: &mut [u64], i: usize, j: usize| rel[i * words + j / 64] |= 1 << (j % 64);
        for i in 0..m {
            set(&mut rel, i, i);
        }
        for (a, b) in relations {
            let (a, b) = (lookup(a)?, lookup(b)?);
            set(&mut rel, a, b);
        }
        // Warshall over bit rows.
        for k in 0..m {
            let row_k: Vec<u64> = rel[k * words..(k + 1) * words].to_vec();
            for i in 0..m {
                if rel[i * words + k / 64] >> (k % 64) & 1 == 1 {
                    for (w, bits) in row_k.iter().enumerate() {
                        rel[i * words + w] |= bits;
                    }
                }
            }
        }
        let get = |rel: &[u64], i: usize, j: usize| rel[i * words + j / 64] >> (j % 64) & 1 == 1;
        for i in 0..m {
            for j in (i + 1)..m {
                if get(&rel, i, j) && get(&rel, j, i) {
                    return Err(Error::Cycle {
                        a: labels[i].as_ref().to_string(),
                        b: labels[j].as_ref().to_string(),
                    });
                }
            }
        }

        // Kahn's algorithm, smallest input position first.
        let mut indegree: Vec<usize> = (0..m)
            .map(|j| (0..m).filter(|&i| i != j && get(&rel, i, j)).count())
            .collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..m)
            .filter(|&j| indegree[j] == 0)
            .map(Reverse)
            .collect();
        let mut order = Vec::with_capacity(m);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for j in 0..m {
                if j != i && get(&rel, i, j) {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        ready.push(Reverse(j));
                    }
                }
            }
        }
        debug_assert_eq!(order.len(), m);

        let mut leq = vec![0u64; m * words];
        for (new_i, &old_i) in order.iter().enumerate() {
            for (new_j, &old_j) in order.iter().enumerate() {
                if get(&rel, old_i, old_j) {
                    leq[new_i * words + new_j / 64] |= 1 << (new_j % 64);
                }
            }
        }
        let labels: Vec<String> = order.iter().map(|&i| labels[i].as_ref().to_string()).collect();
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Ok(Poset {
            repr: Repr::Dense {
                labels,
                index,
                leq,
                words,
                input_pos: order,
            },
        })
    }

    /// Total order `0 < 1 < ... < m-1` with labels `"1"..="m"`.
    pub fn linear(m: usize) -> Result<Poset> {
        let labels: Vec<String> = (1..=m).map(|i| i.to_string()).collect();
        let rel: Vec<(String, String)> = labels.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        Poset::build(&labels, &rel)
    }

    /// The boolean cube `{0,1}^d` under the coordinatewise order.
    ///
    /// State `e` is stored as a bitmask with bit `i - 1` holding `e_i`. The
    /// enumeration sorts by weight, then by mask value; labels list the
    /// coordinates left to right, so `"100"` is `(1,0,0)`.
    pub fn cube(d: usize) -> Result<Poset> {
        if d == 0 || d > MAX_CUBE_DIM {
            return Err(Error::DimensionTooLarge {
                what: "cube dimension",
                value: d,
                max: MAX_CUBE_DIM,
            });
        }
        let mut masks: Vec<u32> = (0..1u32 << d).collect();
        masks.sort_by_key(|&m| (m.count_ones(), m));
        let mut position = vec![0u32; masks.len()];
        for (i, &m) in masks.iter().enumerate() {
            position[m as usize] = i as u32;
        }
        Ok(Poset {
            repr: Repr::Cube { d, masks, position },
        })
    }

    pub fn len(&self) -> usize {
        match &self.repr {
            Repr::Dense { labels, .. } => labels.len(),
            Repr::Cube { masks, .. } => masks.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cube_dim(&self) -> Option<usize> {
        match &self.repr {
            Repr::Cube { d, .. } => Some(*d),
            Repr::Dense { .. } => None,
        }
    }

    /// Bitmask of cube state `i`.
    pub fn mask(&self, i: usize) -> Option<u32> {
        match &self.repr {
            Repr::Cube { masks, .. } => Some(masks[i]),
            Repr::Dense { .. } => None,
        }
    }

    /// Enumeration index of a cube bitmask.
    pub fn index_of_mask(&self, mask: u32) -> Option<usize> {
        match &self.repr {
            Repr::Cube { position, .. } => position.get(mask as usize).map(|&p| p as usize),
            Repr::Dense { .. } => None,
        }
    }

    pub fn label(&self, i: usize) -> Cow<'_, str> {
        match &self.repr {
            Repr::Dense { labels, .. } => Cow::Borrowed(&labels[i]),
            Repr::Cube { d, masks, .. } => Cow::Owned(
                (0..*d)
                    .map(|b| if masks[i] >> b & 1 == 1 { '1' } else { '0' })
                    .collect(),
            ),
        }
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        let unknown = || Error::UnknownState(label.to_string());
        match &self.repr {
            Repr::Dense { index, .. } => index.get(label).copied().ok_or_else(unknown),
            Repr::Cube { d, position, .. } => {
                if label.len() != *d {
                    return Err(unknown());
                }
                let mut mask = 0u32;
                for (b, ch) in label.chars().enumerate() {
                    match ch {
                        '0' => {}
                        '1' => mask |= 1 << b,
                        _ => return Err(unknown()),
                    }
                }
                Ok(position[mask as usize] as usize)
            }
        }
    }

    /// Position of enumerated state `i` in the caller's original state list
    /// (the label list for built posets, the bitmask value for cubes).
    pub fn input_position(&self, i: usize) -> usize {
        match &self.repr {
            Repr::Dense { input_pos, .. } => input_pos[i],
            Repr::Cube { masks, .. } => masks[i] as usize,
        }
    }

    /// `e_i <= e_j`.
    #[inline]
    pub fn leq(&self, i: usize, j: usize) -> bool {
        match &self.repr {
            Repr::Dense { leq, words, .. } => leq[i * words + j / 64] >> (j % 64) & 1 == 1,
            Repr::Cube { masks, .. } => masks[i] & !masks[j] == 0,
        }
    }

    #[inline]
    pub fn lt(&self, i: usize, j: usize) -> bool {
        i != j && self.leq(i, j)
    }

    pub fn comparable(&self, i: usize, j: usize) -> bool {
        self.leq(i, j) || self.leq(j, i)
    }

    /// `{e : e_i <= e}` in enumeration order.
    pub fn up_set(&self, i: usize) -> Vec<usize> {
        (i..self.len()).filter(|&j| self.leq(i, j)).collect()
    }

    /// `{e : e <= e_i}` in enumeration order.
    pub fn down_set(&self, i: usize) -> Vec<usize> {
        (0..=i).filter(|&j| self.leq(j, i)).collect()
    }

    pub fn maximal(&self) -> Vec<usize> {
        let m = self.len();
        (0..m).filter(|&i| ((i + 1)..m).all(|j| !self.leq(i, j))).collect()
    }

    pub fn minimal(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| (0..i).all(|j| !self.leq(j, i))).collect()
    }

    /// Cover pairs `(i, j)`: `e_i < e_j` with nothing strictly between.
    pub fn covers(&self) -> Vec<(usize, usize)> {
        let m = self.len();
        if let Repr::Cube { d, masks, position } = &self.repr {
            let mut out = Vec::new();
            for i in 0..m {
                for b in 0..*d {
                    if masks[i] >> b & 1 == 0 {
                        out.push((i, position[(masks[i] | 1 << b) as usize] as usize));
                    }
                }
            }
            return out;
        }
        let mut out = Vec::new();
        for i in 0..m {
            let ups: Vec<usize> = ((i + 1)..m).filter(|&j| self.leq(i, j)).collect();
            for &j in &ups {
                if !ups.iter().any(|&k| k != j && self.lt(k, j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Greatest lower bound, when it exists.
    pub fn meet(&self, x: usize, y: usize) -> Option<usize> {
        if let Repr::Cube { masks, position, .. } = &self.repr {
            return Some(position[(masks[x] & masks[y]) as usize] as usize);
        }
        let lower: Vec<usize> = (0..=x.min(y)).filter(|&z| self.leq(z, x) && self.leq(z, y)).collect();
        let top = *lower.last()?;
        lower.iter().all(|&z| self.leq(z, top)).then_some(top)
    }

    /// Least upper bound, when it exists.
    pub fn join(&self, x: usize, y: usize) -> Option<usize> {
        if let Repr::Cube { masks, position, .. } = &self.repr {
            return Some(position[(masks[x] | masks[y]) as usize] as usize);
        }
        let upper: Vec<usize> = (x.max(y)..self.len())
            .filter(|&z| self.leq(x, z) && self.leq(y, z))
            .collect();
        let bottom = *upper.first()?;
        upper.iter().all(|&z| self.leq(bottom, z)).then_some(bottom)
    }

    /// `(meet, join)` when both exist.
    pub fn meet_join(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        Some((self.meet(x, y)?, self.join(x, y)?))
    }

    /// First pair lacking a meet or a join, if any.
    pub fn lattice_defect(&self) -> Option<(usize, usize)> {
        if self.cube_dim().is_some() {
            return None;
        }
        let m = self.len();
        (0..m)
            .flat_map(|x| ((x + 1)..m).map(move |y| (x, y)))
            .find(|&(x, y)| self.meet_join(x, y).is_none())
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice_defect().is_none()
    }

    /// First incomparable pair, if any.
    pub fn total_order_defect(&self) -> Option<(usize, usize)> {
        let m = self.len();
        (0..m)
            .flat_map(|x| ((x + 1)..m).map(move |y| (x, y)))
            .find(|&(x, y)| !self.leq(x, y))
    }

    pub fn is_total(&self) -> bool {
        self.total_order_defect().is_none()
    }

    /// Zeta and Möbius matrices in the stored enumeration.
    pub fn zeta_mobius(&self) -> Result<ZetaMobius> {
        ZetaMobius::new(self)
    }

    /// Enumerates every up-set, failing once more than `cap` have been seen.
    pub fn up_sets(&self, cap: usize) -> Result<Vec<Vec<usize>>> {
        struct Collect(Vec<Vec<usize>>);
        impl UpSetVisitor for Collect {
            fn leaf(&mut self, members: &[bool]) {
                self.0.push(members.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect());
            }
        }
        let mut c = Collect(Vec::new());
        self.visit_up_sets(cap, &mut c)?;
        Ok(c.0)
    }

    /// Depth-first walk over all up-sets: elements are decided from the top
    /// of the enumeration down, and `k` may join only after every element
    /// strictly above it has. Each leaf is a distinct up-set.
    pub(crate) fn visit_up_sets<V: UpSetVisitor>(&self, cap: usize, v: &mut V) -> Result<usize> {
        let m = self.len();
        let above: Vec<Vec<usize>> = (0..m).map(|k| ((k + 1)..m).filter(|&j| self.leq(k, j)).collect()).collect();
        let mut members = vec![false; m];
        let mut included = vec![false; m];
        let mut depth = 0usize;
        let mut leaves = 0usize;
        loop {
            if depth < m {
                // Exclude first.
                included[depth] = false;
                depth += 1;
                continue;
            }
            leaves += 1;
            if leaves > cap {
                return Err(Error::UpSetExplosion { cap });
            }
            v.leaf(&members);
            // Backtrack to the deepest level that can still switch to include.
            loop {
                if depth == 0 {
                    return Ok(leaves);
                }
                depth -= 1;
                let k = m - 1 - depth;
                if included[depth] {
                    members[k] = false;
                    v.exclude(k);
                } else if above[k].iter().all(|&j| members[j]) {
                    included[depth] = true;
                    members[k] = true;
                    v.include(k);
                    depth += 1;
                    break;
                }
            }
        }
    }
}

pub(crate) trait UpSetVisitor {
    fn include(&mut self, _k: usize) {}
    fn exclude(&mut self, _k: usize) {}
    fn leaf(&mut self, members: &[bool]);
}

/// Zeta matrix `C` and its inverse, the Möbius matrix, both exact integers.
#[derive(Debug, Clone)]
pub struct ZetaMobius {
    zeta: DMatrix<i64>,
    mobius: DMatrix<i64>,
    zeta_f: DMatrix<f64>,
    mobius_f: DMatrix<f64>,
}

impl ZetaMobius {
    pub fn new(p: &Poset) -> Result<ZetaMobius> {
        let m = p.len();
        if m > MAX_DENSE_STATES {
            return Err(Error::DimensionTooLarge {
                what: "state count",
                value: m,
                max: MAX_DENSE_STATES,
            });
        }
        let zeta = DMatrix::from_fn(m, m, |i, j| i64::from(p.leq(i, j)));
        // Back-substitution on the unitriangular system C X = I, bottom row up:
        // X(i, .) = e_i - sum_{k > i, e_i <= e_k} X(k, .).
        let mut rows: Vec<Vec<i64>> = vec![Vec::new(); m];
        for i in (0..m).rev() {
            let mut row = vec![0i64; m];
            row[i] = 1;
            for k in (i + 1)..m {
                if p.leq(i, k) {
                    for j in k..m {
                        row[j] -= rows[k][j];
                    }
                }
            }
            rows[i] = row;
        }
        let mobius = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
        Ok(ZetaMobius {
            zeta_f: zeta.map(|x| x as f64),
            mobius_f: mobius.map(|x| x as f64),
            zeta,
            mobius,
        })
    }

    pub fn len(&self) -> usize {
        self.zeta.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `C`.
    pub fn zeta(&self) -> &DMatrix<i64> {
        &self.zeta
    }

    /// `C^{-1}`, entry `(i, j)` is `mu(e_i, e_j)`.
    pub fn mobius(&self) -> &DMatrix<i64> {
        &self.mobius
    }

    pub fn zeta_f64(&self) -> &DMatrix<f64> {
        &self.zeta_f
    }

    pub fn mobius_f64(&self) -> &DMatrix<f64> {
        &self.mobius_f
    }
}
