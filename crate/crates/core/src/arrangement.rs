//! Exact enumeration of the full-dimensional cells of small affine
//! hyperplane arrangements, and the tope graph on those cells.
//!
//! Feasibility of an open cell `{x : s_i (<w_i, x> - b_i) > 0}` is decided
//! exactly by Fourier-Motzkin elimination over rationals. Float inputs are
//! snapped to dyadic rationals with denominator `2^40`; callers needing
//! exact inputs use [`Arrangement::from_rationals`].

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use rayon::prelude::*;

use crate::bounds;
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;
pub const MAX_HYPERPLANES: usize = 12;
const SNAP_BITS: u32 = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<BigRational>,
    pub offset: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arrangement {
    dim: usize,
    hyperplanes: Vec<Hyperplane>,
}

/// Rounds `v` to the nearest multiple of `2^-40`.
pub fn snap(v: f64) -> Result<BigRational> {
    if !v.is_finite() {
        return Err(Error::domain("arrangement coefficients must be finite"));
    }
    let scaled = (v * (1u64 << SNAP_BITS) as f64).round();
    let num = BigInt::from_f64(scaled).expect("finite float");
    Ok(BigRational::new(num, BigInt::from(1u64 << SNAP_BITS)))
}

impl Arrangement {
    /// `hyperplanes[i] = (normal, offset)` describing `<normal, x> = offset`.
    pub fn new(dim: usize, hyperplanes: &[(Vec<f64>, f64)]) -> Result<Self> {
        let exact = hyperplanes
            .iter()
            .map(|(w, b)| {
                Ok(Hyperplane {
                    normal: w.iter().map(|&v| snap(v)).collect::<Result<_>>()?,
                    offset: snap(*b)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rationals(dim, exact)
    }

    pub fn from_rationals(dim: usize, hyperplanes: Vec<Hyperplane>) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::SizeLimit(format!("dimension {dim} exceeds {MAX_DIM}")));
        }
        if hyperplanes.len() > MAX_HYPERPLANES {
            return Err(Error::SizeLimit(format!(
                "{} hyperplanes exceed {MAX_HYPERPLANES}",
                hyperplanes.len()
            )));
        }
        for (i, h) in hyperplanes.iter().enumerate() {
            if h.normal.len() != dim {
                return Err(Error::shape(format!("hyperplane {i} normal has wrong length")));
            }
            if h.normal.iter().all(|c| c.is_zero()) {
                return Err(Error::domain(format!("hyperplane {i} has a zero normal")));
            }
        }
        Ok(Arrangement { dim, hyperplanes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.hyperplanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperplanes.is_empty()
    }

    pub fn hyperplanes(&self) -> &[Hyperplane] {
        &self.hyperplanes
    }

    /// Parses the text format: a `d N` header, then `N` lines of `d + 1`
    /// numbers (normal, then offset). Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing 'd N' header".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header token {t:?}"))))
            .collect::<Result<_>>()?;
        let [d, n] = nums[..] else {
            return Err(Error::Parse("header must be 'd N'".into()));
        };
        let mut hs = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {n} hyperplanes, found {i}")))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "hyperplane line {} has {} numbers, expected {}",
                    i + 1,
                    vals.len(),
                    d + 1
                )));
            }
            hs.push((vals[..d].to_vec(), vals[d]));
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after hyperplanes".into()));
        }
        Arrangement::new(d, &hs)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.dim, self.len());
        for h in &self.hyperplanes {
            let vals: Vec<String> = h
                .normal
                .iter()
                .chain(std::iter::once(&h.offset))
                .map(|r| format!("{}", rational_to_f64(r)))
                .collect();
            let _ = writeln!(s, "{}", vals.join(" "));
        }
        s
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

/// A candidate full-dimensional cell: one sign (`-1` or `+1`) per hyperplane.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignVector(pub Vec<i8>);

impl SignVector {
    pub fn hamming(&self, other: &SignVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

/// Strict inequality `coeffs . x > rhs`, tagged with the original rows it combines.
#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<BigRational>,
    rhs: BigRational,
    ancestors: u32,
}

impl Row {
    /// Scales so the largest absolute coefficient is 1; returns `None` for a
    /// constant row (all coefficients zero).
    fn normalized(mut self) -> Option<Row> {
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.abs())
            .max()
            .filter(|m| !m.is_zero())?;
        for c in &mut self.coeffs {
            *c /= &scale;
        }
        self.rhs /= &scale;
        Some(self)
    }
}

/// Whether `rows` (all strict) admit a common solution.
fn strictly_feasible(mut rows: Vec<Row>, dim: usize) -> bool {
    // Constant rows `0 > rhs` are decided immediately.
    let mut pending = Vec::with_capacity(rows.len());
    for r in rows.drain(..) {
        match r.clone().normalized() {
            Some(n) => pending.push(n),
            None => {
                if !r.rhs.is_negative() {
                    return false;
                }
            }
        }
    }
    rows = pending;
    for (eliminated, var) in (0..dim).enumerate() {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for r in rows {
            if r.coeffs[var].is_positive() {
                pos.push(r);
            } else if r.coeffs[var].is_negative() {
                neg.push(r);
            } else {
                rest.push(r);
            }
        }
        // Chernikov: after eliminating `k` variables a non-redundant row
        // combines at most `k + 1` originals.
        let max_ancestors = eliminated as u32 + 2;
        let mut seen: BTreeSet<(Vec<BigRational>, BigRational)> = BTreeSet::new();
        let mut next: Vec<Row> = Vec::new();
        for r in rest {
            if seen.insert((r.coeffs.clone(), r.rhs.clone())) {
                next.push(r);
            }
        }
        for p in &pos {
            for n in &neg {
                let anc = p.ancestors | n.ancestors;
                if anc.count_ones() > max_ancestors {
                    continue;
                }
                let a = &p.coeffs[var];
                let b = -&n.coeffs[var];
                let combined = Row {
                    coeffs: p
                        .coeffs
                        .iter()
                        .zip(&n.coeffs)
                        .map(|(x, y)| x * &b + y * a)
                        .collect(),
                    rhs: &p.rhs * &b + &n.rhs * a,
                    ancestors: anc,
                };
                match combined.normalized() {
                    Some(r) => {
                        if seen.insert((r.coeffs.clone(), r.rhs.clone())) {
                            next.push(r);
                        }
                    }
                    None => {
                        if !combined_rhs_negative(p, n, a, &b) {
                            return false;
                        }
                    }
                }
            }
        }
        rows = next;
    }
    rows.iter().all(|r| r.rhs.is_negative())
}

fn combined_rhs_negative(p: &Row, n: &Row, a: &BigRational, b: &BigRational) -> bool {
    (&p.rhs * b + &n.rhs * a).is_negative()
}

fn row_for(h: &Hyperplane, sign: i8, idx: usize) -> Row {
    let s = BigRational::from_integer(BigInt::from(sign));
    Row {
        coeffs: h.normal.iter().map(|c| c * &s).collect(),
        rhs: &h.offset * &s,
        ancestors: 1 << idx,
    }
}

/// Whether the open cell with the given signs on the first `signs.len()`
/// hyperplanes is nonempty.
pub fn cell_is_nonempty(arr: &Arrangement, signs: &[i8]) -> bool {
    let rows = signs
        .iter()
        .enumerate()
        .map(|(i, &s)| row_for(&arr.hyperplanes[i], s, i))
        .collect();
    strictly_feasible(rows, arr.dim)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Regions {
    pub count: usize,
    /// Sorted lexicographically (`-1 < +1`).
    pub cells: Vec<SignVector>,
}

/// Every nonempty open cell, built by adding hyperplanes one at a time and
/// keeping the feasible refinements of each cell.
pub fn enumerate_regions(arr: &Arrangement) -> Result<Regions> {
    if arr.dim > MAX_DIM || arr.len() > MAX_HYPERPLANES {
        return Err(Error::SizeLimit("arrangement exceeds enumeration limits".into()));
    }
    let mut cells: Vec<Vec<i8>> = vec![Vec::new()];
    for _ in 0..arr.len() {
        let candidates: Vec<Vec<i8>> = cells
            .iter()
            .flat_map(|c| {
                [-1i8, 1].into_iter().map(move |s| {
                    let mut v = c.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
        cells = candidates
            .into_par_iter()
            .filter(|c| cell_is_nonempty(arr, c))
            .collect();
    }
    let mut cells: Vec<SignVector> = cells.into_iter().map(SignVector).collect();
    cells.sort();
    Ok(Regions {
        count: cells.len(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZaslavskyCheck {
    pub exact: u64,
    pub bound: u64,
    pub tight: bool,
}

pub fn verify_zaslavsky(arr: &Arrangement) -> Result<ZaslavskyCheck> {
    let exact = enumerate_regions(arr)?.count as u64;
    let bound = bounds::zaslavsky(arr.len() as i64, arr.dim as i64)?;
    let bound = num_traits::ToPrimitive::to_u64(&bound).expect("N <= 12 fits in u64");
    Ok(ZaslavskyCheck {
        exact,
        bound,
        tight: exact == bound,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopeGraph {
    pub edges: Vec<(usize, usize)>,
    /// Max shortest-path length over connected pairs.
    pub diameter: usize,
    pub connected: bool,
}

/// Graph on cells with edges between sign vectors at Hamming distance 1.
pub fn tope_graph(cells: &[SignVector]) -> Result<TopeGraph> {
    if cells.is_empty() {
        return Err(Error::Empty("tope graph needs at least one cell".into()));
    }
    let len = cells[0].0.len();
    if cells.iter().any(|c| c.0.len() != len) {
        return Err(Error::shape("sign vectors have different lengths"));
    }
    let mut adj = vec![Vec::new(); cells.len()];
    let mut edges = Vec::new();
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if cells[i].hamming(&cells[j]) == 1 {
                adj[i].push(j);
                adj[j].push(i);
                edges.push((i, j));
            }
        }
    }
    let (diameter, connected) = diameter_of(&adj);
    Ok(TopeGraph {
        edges,
        diameter,
        connected,
    })
}

fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        let du = dist[u].expect("visited");
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

fn diameter_of(adj: &[Vec<usize>]) -> (usize, bool) {
    let results: Vec<(usize, bool)> = (0..adj.len())
        .into_par_iter()
        .map(|s| {
            let d = bfs(adj, s);
            let far = d.iter().flatten().copied().max().unwrap_or(0);
            (far, d.iter().all(|x| x.is_some()))
        })
        .collect();
    let diameter = results.iter().map(|r| r.0).max().unwrap_or(0);
    (diameter, results.iter().all(|r| r.1))
}

/// Graph on all binary patterns of length `n` with at most `k` ones, edges
/// being single-bit flips. Vertices are bitmasks.
pub struct SparseTopeGraph {
    pub vertices: Vec<u32>,
    adj: Vec<Vec<usize>>,
}

impl SparseTopeGraph {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n > 20 {
            return Err(Error::SizeLimit("k-sparse tope graph supports n <= 20".into()));
        }
        let vertices: Vec<u32> = (0u32..(1u32 << n))
            .filter(|v| v.count_ones() as usize <= k)
            .collect();
        let index: std::collections::HashMap<u32, usize> =
            vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let adj = vertices
            .iter()
            .map(|&v| {
                (0..n)
                    .filter_map(|b| index.get(&(v ^ (1 << b))).copied())
                    .collect()
            })
            .collect();
        Ok(SparseTopeGraph { vertices, adj })
    }

    pub fn distance(&self, a: u32, b: u32) -> Option<usize> {
        let ia = self.vertices.iter().position(|&v| v == a)?;
        let ib = self.vertices.iter().position(|&v| v == b)?;
        bfs(&self.adj, ia)[ib]
    }

    pub fn diameter(&self) -> usize {
        diameter_of(&self.adj).0
    }
}
