//! Weighted graphs `(X, b, mu)` over countable vertex sets.
//!
//! A graph is given by oracles rather than materialized storage: a symmetric
//! edge-weight function `b`, a strictly positive vertex measure `mu`, a
//! weighted degree `deg(x) = sum_y b(x,y)` that is always answered in closed
//! form (so it stays exact even when the neighbor list of `x` is infinite),
//! and a deterministic neighbor enumeration.  Finite families materialize all
//! of this; infinite families (half-line chains, the planar lattice, stars
//! with infinitely many leaves) answer lazily.
//!
//! Everything downstream — section assembly, energy forms, resolvent
//! experiments — works through finite vertex subsets produced here, typically
//! the balls of [`ball_exhaustion`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::accum::Neumaier;

/// Opaque vertex identifier.  Families choose their own encoding; only
/// equality and the enumeration order are meaningful to callers.
pub type Vertex = u64;

/// Hard default on how many neighbors a single enumeration may yield before
/// the graph is declared not locally finite at that vertex.
pub const DEFAULT_ENUM_CAP: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("non-positive or non-finite weight at sequence index {index}: {value}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("non-positive or non-finite measure at vertex {x}: {value}")]
    NonPositiveMeasure { x: Vertex, value: f64 },
    #[error("inconsistent construction data: {detail}")]
    MismatchedLengths { detail: String },
    #[error("vertex {x} out of range for a graph with {len} vertices")]
    VertexOutOfRange { x: Vertex, len: usize },
    #[error("self-loop on vertex {x} is not allowed")]
    SelfLoop { x: Vertex },
    #[error("edge ({x},{y}) listed more than once with different weights {w1} and {w2}")]
    AsymmetricEdge { x: Vertex, y: Vertex, w1: f64, w2: f64 },
    #[error("neighbor enumeration at vertex {x} exceeded cap {cap}; not locally finite there")]
    NotLocallyFinite { x: Vertex, cap: usize },
    #[error("cannot certify the tail of an infinite neighbor sum at vertex {x}; supply a tail bound")]
    UnboundedTail { x: Vertex },
    #[error("total edge weight at vertex {x} diverges; b(x,.) must be summable")]
    DegreeDiverges { x: Vertex },
    #[error("radii must be strictly increasing, got {prev} then {next}")]
    InvalidRadii { prev: usize, next: usize },
}

// ---------------------------------------------------------------------------
// Weight sequences
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
#[doc(hidden)]
pub struct RatioCache {
    values: Vec<f64>,
    logs: Vec<f64>,
}

/// A positive sequence `n -> value(n)`, used for birth–death edge weights,
/// vertex measures and star leaf weights.  Closed forms also answer
/// `log_value`, which keeps extreme growth (`4^n` and friends) usable far
/// beyond f64 range.
#[derive(Debug, Clone)]
pub enum WeightSeq {
    /// `value(n) = c`.
    Const(f64),
    /// `value(n) = coeff * (n+1)^exponent` — offset keeps the value positive at 0.
    Power { coeff: f64, exponent: f64 },
    /// `value(n) = initial * ratio^n`.
    Geometric { initial: f64, ratio: f64 },
    /// `value(0) = initial`, `value(n) = value(n-1) * (step0 + step1 * n)`;
    /// with `initial = 1, step0 = 1, step1 = 1` this is `(n+1)!`.
    RatioRecurrence {
        initial: f64,
        step0: f64,
        step1: f64,
        cache: Arc<Mutex<RatioCache>>,
    },
    /// Explicit finite table.
    Values(Arc<Vec<f64>>),
}

impl WeightSeq {
    pub fn ratio_recurrence(initial: f64, step0: f64, step1: f64) -> Self {
        WeightSeq::RatioRecurrence {
            initial,
            step0,
            step1,
            cache: Arc::new(Mutex::new(RatioCache::default())),
        }
    }

    pub fn values(v: Vec<f64>) -> Self {
        WeightSeq::Values(Arc::new(v))
    }

    /// Length of the table for table-backed sequences, `None` for closed forms.
    pub fn table_len(&self) -> Option<usize> {
        match self {
            WeightSeq::Values(v) => Some(v.len()),
            _ => None,
        }
    }

    pub fn value(&self, n: usize) -> f64 {
        match self {
            WeightSeq::Const(c) => *c,
            WeightSeq::Power { coeff, exponent } => coeff * ((n + 1) as f64).powf(*exponent),
            WeightSeq::Geometric { initial, ratio } => initial * ratio.powi(n as i32),
            WeightSeq::RatioRecurrence {
                initial,
                step0,
                step1,
                cache,
            } => {
                let mut cache = cache.lock().unwrap();
                if cache.values.is_empty() {
                    cache.values.push(*initial);
                    cache.logs.push(initial.ln());
                }
                while cache.values.len() <= n {
                    let m = cache.values.len() as f64;
                    let mult = step0 + step1 * m;
                    let last = *cache.values.last().unwrap();
                    let last_log = *cache.logs.last().unwrap();
                    cache.values.push(last * mult);
                    cache.logs.push(last_log + mult.ln());
                }
                cache.values[n]
            }
            WeightSeq::Values(v) => v[n],
        }
    }

    /// `ln(value(n))`, exact in log space even where `value(n)` overflows.
    pub fn log_value(&self, n: usize) -> f64 {
        match self {
            WeightSeq::Const(c) => c.ln(),
            WeightSeq::Power { coeff, exponent } => coeff.ln() + exponent * ((n + 1) as f64).ln(),
            WeightSeq::Geometric { initial, ratio } => initial.ln() + n as f64 * ratio.ln(),
            WeightSeq::RatioRecurrence { cache, .. } => {
                self.value(n); // fill the cache
                cache.lock().unwrap().logs[n]
            }
            WeightSeq::Values(v) => v[n].ln(),
        }
    }

    /// Check strict positivity (and finiteness) of every value the sequence
    /// can be asked for.  `needed` bounds the index range for finite graphs;
    /// `None` means the sequence must stay positive for all n.
    pub(crate) fn require_positive(&self, needed: Option<usize>) -> Result<(), GraphError> {
        let bad = |index, value| GraphError::NonPositiveWeight { index, value };
        match self {
            WeightSeq::Const(c) => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(bad(0, *c));
                }
            }
            WeightSeq::Power { coeff, exponent } => {
                if !(coeff.is_finite() && *coeff > 0.0) || !exponent.is_finite() {
                    return Err(bad(0, *coeff));
                }
            }
            WeightSeq::Geometric { initial, ratio } => {
                if !(initial.is_finite() && *initial > 0.0) || !(ratio.is_finite() && *ratio > 0.0)
                {
                    return Err(bad(0, initial.min(*ratio)));
                }
            }
            WeightSeq::RatioRecurrence {
                initial,
                step0,
                step1,
                ..
            } => {
                if !(initial.is_finite() && *initial > 0.0) {
                    return Err(bad(0, *initial));
                }
                match needed {
                    Some(hi) => {
                        for m in 1..=hi {
                            let mult = step0 + step1 * m as f64;
                            if !(mult.is_finite() && mult > 0.0) {
                                return Err(bad(m, mult));
                            }
                        }
                    }
                    None => {
                        // Positive for every n requires a nondecreasing positive multiplier.
                        if *step1 < 0.0 || !(step0 + step1).is_finite() || step0 + step1 <= 0.0 {
                            return Err(bad(1, step0 + step1));
                        }
                    }
                }
            }
            WeightSeq::Values(v) => {
                for (i, &x) in v.iter().enumerate() {
                    if !(x.is_finite() && x > 0.0) {
                        return Err(bad(i, x));
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// The graph oracle and its wrapper
// ---------------------------------------------------------------------------

/// Oracle access to a weighted graph.  Implementations must answer `b`
/// symmetrically with zero diagonal, `mu` strictly positive, and `degree`
/// as the full sum of `b(x,.)` over the whole vertex set.
pub trait GraphOracle: Send + Sync {
    /// Symmetric edge weight `b(x,y)`; zero when not adjacent.
    fn edge_weight(&self, x: Vertex, y: Vertex) -> f64;
    /// Vertex measure `mu(x) > 0`.
    fn measure(&self, x: Vertex) -> f64;
    /// Weighted degree `deg(x) = sum_y b(x,y)` over all of X (closed form).
    fn degree(&self, x: Vertex) -> f64;
    /// Deterministic enumeration of the support of `b(x,.)`.
    /// May be unbounded when the graph is not locally finite at `x`.
    fn neighbors(&self, x: Vertex) -> Box<dyn Iterator<Item = Vertex> + '_>;
    /// Whether `neighbors(x)` is a finite list.
    fn locally_finite_at(&self, x: Vertex) -> bool;
    /// Fixed injective enumeration of the vertex set.
    fn vertex_by_index(&self, index: usize) -> Option<Vertex>;
    /// Total number of vertices, `None` when infinite.
    fn vertex_count(&self) -> Option<usize>;
}

/// Shared handle to a weighted graph.
#[derive(Clone)]
pub struct WeightedGraph {
    inner: Arc<dyn GraphOracle>,
}

impl std::fmt::Debug for WeightedGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightedGraph")
            .field("vertex_count", &self.vertex_count())
            .finish()
    }
}

impl WeightedGraph {
    pub fn from_oracle(oracle: impl GraphOracle + 'static) -> Self {
        Self {
            inner: Arc::new(oracle),
        }
    }

    pub fn b(&self, x: Vertex, y: Vertex) -> f64 {
        self.inner.edge_weight(x, y)
    }

    pub fn mu(&self, x: Vertex) -> f64 {
        self.inner.measure(x)
    }

    pub fn deg(&self, x: Vertex) -> f64 {
        self.inner.degree(x)
    }

    pub fn neighbors(&self, x: Vertex) -> Box<dyn Iterator<Item = Vertex> + '_> {
        self.inner.neighbors(x)
    }

    pub fn locally_finite_at(&self, x: Vertex) -> bool {
        self.inner.locally_finite_at(x)
    }

    pub fn vertex_by_index(&self, index: usize) -> Option<Vertex> {
        self.inner.vertex_by_index(index)
    }

    pub fn vertex_count(&self) -> Option<usize> {
        self.inner.vertex_count()
    }

    /// Collect the neighbor list of `x`, failing once it exceeds `cap`.
    pub fn neighbor_list(&self, x: Vertex, cap: usize) -> Result<Vec<Vertex>, GraphError> {
        let mut out = Vec::new();
        for y in self.neighbors(x) {
            if out.len() >= cap {
                return Err(GraphError::NotLocallyFinite { x, cap });
            }
            out.push(y);
        }
        Ok(out)
    }

    /// Birth–death chain on `0..n` (or the half line when `n_vertices` is
    /// `None` and both sequences are closed forms).  `b_seq(n)` weights the
    /// edge `(n, n+1)`; `mu_seq(n)` is the measure of vertex `n`.
    pub fn birth_death(
        b_seq: WeightSeq,
        mu_seq: WeightSeq,
        n_vertices: Option<usize>,
    ) -> Result<Self, GraphError> {
        let chain = BirthDeathChain::new(b_seq, mu_seq, n_vertices)?;
        Ok(Self::from_oracle(chain))
    }

    /// Finite graph from an explicit symmetric edge list and measure table.
    pub fn explicit(
        n: usize,
        edges: &[(usize, usize, f64)],
        mu: Vec<f64>,
    ) -> Result<Self, GraphError> {
        Ok(Self::from_oracle(ExplicitGraph::new(n, edges, mu)?))
    }

    /// Infinite planar lattice Z^2 with uniform nearest-neighbor weight and measure.
    pub fn lattice2d(weight: f64, mu: f64) -> Result<Self, GraphError> {
        Ok(Self::from_oracle(Lattice2d::new(weight, mu)?))
    }

    /// Star with center 0 and leaves 1, 2, ...; `leaf_weights(k-1)` is
    /// `b(0, k)`.  With infinitely many leaves the graph is not locally
    /// finite at the center, so the total weight must have a closed form.
    pub fn star(
        leaf_weights: WeightSeq,
        mu_center: f64,
        leaf_measures: WeightSeq,
        n_leaves: Option<usize>,
    ) -> Result<Self, GraphError> {
        Ok(Self::from_oracle(StarGraph::new(
            leaf_weights,
            mu_center,
            leaf_measures,
            n_leaves,
        )?))
    }
}

// ---------------------------------------------------------------------------
// Birth–death chains
// ---------------------------------------------------------------------------

struct BirthDeathChain {
    b_seq: WeightSeq,
    mu_seq: WeightSeq,
    /// Number of vertices; `None` for the half line.
    len: Option<usize>,
}

impl BirthDeathChain {
    fn new(
        b_seq: WeightSeq,
        mu_seq: WeightSeq,
        n_vertices: Option<usize>,
    ) -> Result<Self, GraphError> {
        // Reconcile the requested length with any table-backed sequence.
        let mut len = n_vertices;
        if let Some(eb) = b_seq.table_len() {
            let implied = eb + 1;
            match len {
                None => len = Some(implied),
                Some(l) if l != implied => {
                    return Err(GraphError::MismatchedLengths {
                        detail: format!(
                            "edge table has {eb} entries which implies {implied} vertices, \
                             but {l} vertices were requested"
                        ),
                    })
                }
                _ => {}
            }
        }
        if let Some(em) = mu_seq.table_len() {
            match len {
                None => len = Some(em),
                Some(l) if l != em => {
                    return Err(GraphError::MismatchedLengths {
                        detail: format!(
                            "measure table has {em} entries but the chain has {l} vertices"
                        ),
                    })
                }
                _ => {}
            }
        }
        if len == Some(0) {
            return Err(GraphError::MismatchedLengths {
                detail: "a chain needs at least one vertex".into(),
            });
        }
        let edge_hi = len.map(|l| l.saturating_sub(1));
        b_seq.require_positive(edge_hi)?;
        mu_seq.require_positive(len.map(|l| l - 1))?;
        Ok(Self { b_seq, mu_seq, len })
    }

    fn contains(&self, x: Vertex) -> bool {
        match self.len {
            Some(l) => (x as usize) < l,
            None => true,
        }
    }

    /// Weight of the edge `(n, n+1)`, zero outside the chain.
    fn edge(&self, n: usize) -> f64 {
        match self.len {
            Some(l) if n + 1 >= l => 0.0,
            _ => self.b_seq.value(n),
        }
    }
}

impl GraphOracle for BirthDeathChain {
    fn edge_weight(&self, x: Vertex, y: Vertex) -> f64 {
        if !self.contains(x) || !self.contains(y) {
            return 0.0;
        }
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        if hi - lo == 1 {
            self.edge(lo as usize)
        } else {
            0.0
        }
    }

    fn measure(&self, x: Vertex) -> f64 {
        self.mu_seq.value(x as usize)
    }

    fn degree(&self, x: Vertex) -> f64 {
        let n = x as usize;
        let left = if n == 0 { 0.0 } else { self.edge(n - 1) };
        left + self.edge(n)
    }

    fn neighbors(&self, x: Vertex) -> Box<dyn Iterator<Item = Vertex> + '_> {
        let n = x as usize;
        let mut out = Vec::with_capacity(2);
        if n > 0 && self.edge(n - 1) > 0.0 {
            out.push(x - 1);
        }
        if self.edge(n) > 0.0 {
            out.push(x + 1);
        }
        Box::new(out.into_iter())
    }

    fn locally_finite_at(&self, _x: Vertex) -> bool {
        true
    }

    fn vertex_by_index(&self, index: usize) -> Option<Vertex> {
        match self.len {
            Some(l) if index >= l => None,
            _ => Some(index as Vertex),
        }
    }

    fn vertex_count(&self) -> Option<usize> {
        self.len
    }
}

// ---------------------------------------------------------------------------
// Explicit finite graphs
// ---------------------------------------------------------------------------

struct ExplicitGraph {
    mu: Vec<f64>,
    /// Sorted adjacency per vertex: `(neighbor, weight)`.
    adj: Vec<Vec<(u32, f64)>>,
    deg: Vec<f64>,
}

impl ExplicitGraph {
    fn new(n: usize, edges: &[(usize, usize, f64)], mu: Vec<f64>) -> Result<Self, GraphError> {
        if mu.len() != n {
            return Err(GraphError::MismatchedLengths {
                detail: format!("{n} vertices but {} measure entries", mu.len()),
            });
        }
        for (x, &m) in mu.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(GraphError::NonPositiveMeasure {
                    x: x as Vertex,
                    value: m,
                });
            }
        }
        let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
        for (i, &(x, y, w)) in edges.iter().enumerate() {
            if x >= n {
                return Err(GraphError::VertexOutOfRange {
                    x: x as Vertex,
                    len: n,
                });
            }
            if y >= n {
                return Err(GraphError::VertexOutOfRange {
                    x: y as Vertex,
                    len: n,
                });
            }
            if x == y {
                return Err(GraphError::SelfLoop { x: x as Vertex });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(GraphError::NonPositiveWeight { index: i, value: w });
            }
            let key = (x.min(y), x.max(y));
            match seen.get(&key) {
                // Listing both orientations with the same weight is fine;
                // conflicting weights are not.
                Some(&prev) if prev != w => {
                    return Err(GraphError::AsymmetricEdge {
                        x: key.0 as Vertex,
                        y: key.1 as Vertex,
                        w1: prev,
                        w2: w,
                    })
                }
                _ => {
                    seen.insert(key, w);
                }
            }
        }
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        let mut pairs: Vec<_> = seen.into_iter().collect();
        pairs.sort_by_key(|&(k, _)| k);
        for ((x, y), w) in pairs {
            adj[x].push((y as u32, w));
            adj[y].push((x as u32, w));
        }
        let mut deg = Vec::with_capacity(n);
        for list in adj.iter_mut() {
            list.sort_by_key(|&(y, _)| y);
            let mut acc = Neumaier::new();
            for &(_, w) in list.iter() {
                acc.add(w);
            }
            deg.push(acc.total());
        }
        Ok(Self { mu, adj, deg })
    }

    fn n(&self) -> usize {
        self.mu.len()
    }
}

impl GraphOracle for ExplicitGraph {
    fn edge_weight(&self, x: Vertex, y: Vertex) -> f64 {
        let (x, y) = (x as usize, y as usize);
        if x >= self.n() || y >= self.n() {
            return 0.0;
        }
        match self.adj[x].binary_search_by_key(&(y as u32), |&(v, _)| v) {
            Ok(pos) => self.adj[x][pos].1,
            Err(_) => 0.0,
        }
    }

    fn measure(&self, x: Vertex) -> f64 {
        self.mu[x as usize]
    }

    fn degree(&self, x: Vertex) -> f64 {
        self.deg[x as usize]
    }

    fn neighbors(&self, x: Vertex) -> Box<dyn Iterator<Item = Vertex> + '_> {
        Box::new(self.adj[x as usize].iter().map(|&(y, _)| y as Vertex))
    }

    fn locally_finite_at(&self, _x: Vertex) -> bool {
        true
    }

    fn vertex_by_index(&self, index: usize) -> Option<Vertex> {
        (index < self.n()).then_some(index as Vertex)
    }

    fn vertex_count(&self) -> Option<usize> {
        Some(self.n())
    }
}

// ---------------------------------------------------------------------------
// The planar lattice
// ---------------------------------------------------------------------------

struct Lattice2d {
    weight: f64,
    mu: f64,
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

impl Lattice2d {
    fn new(weight: f64, mu: f64) -> Result<Self, GraphError> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(GraphError::NonPositiveWeight {
                index: 0,
                value: weight,
            });
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(GraphError::NonPositiveMeasure { x: 0, value: mu });
        }
        Ok(Self { weight, mu })
    }

    pub fn encode(i: i64, j: i64) -> Vertex {
        zigzag(i) | (zigzag(j) << 32)
    }

    pub fn decode(v: Vertex) -> (i64, i64) {
        (unzigzag(v & 0xffff_ffff), unzigzag(v >> 32))
    }
}

impl GraphOracle for Lattice2d {
    fn edge_weight(&self, x: Vertex, y: Vertex) -> f64 {
        let (xi, xj) = Lattice2d::decode(x);
        let (yi, yj) = Lattice2d::decode(y);
        if (xi - yi).abs() + (xj - yj).abs() == 1 {
            self.weight
        } else {
            0.0
        }
    }

    fn measure(&self, _x: Vertex) -> f64 {
        self.mu
    }

    fn degree(&self, _x: Vertex) -> f64 {
        4.0 * self.weight
    }

    fn neighbors(&self, x: Vertex) -> Box<dyn Iterator<Item = Vertex> + '_> {
        let (i, j) = Lattice2d::decode(x);
        let nbrs = [
            Lattice2d::encode(i - 1, j),
            Lattice2d::encode(i + 1, j),
            Lattice2d::encode(i, j - 1),
            Lattice2d::encode(i, j + 1),
        ];
        Box::new(nbrs.into_iter())
    }

    fn locally_finite_at(&self, _x: Vertex) -> bool {
        true
    }

    fn vertex_by_index(&self, index: usize) -> Option<Vertex> {
        // Ring enumeration: index 0 is the origin, then Chebyshev rings in
        // lexicographic (i, j) order within each ring.
        if index == 0 {
            return Some(Lattice2d::encode(0, 0));
        }
        let mut remaining = index - 1;
        let mut r: i64 = 1;
        loop {
            let ring = (8 * r) as usize;
            if remaining < ring {
                let mut seen = 0usize;
                for i in -r..=r {
                    for j in -r..=r {
                        if i.abs().max(j.abs()) == r {
                            if seen == remaining {
                                return Some(Lattice2d::encode(i, j));
                            }
                            seen += 1;
                        }
                    }
                }
                unreachable!("ring enumeration exhausted early");
            }
            remaining -= ring;
            r += 1;
        }
    }

    fn vertex_count(&self) -> Option<usize> {
        None
    }
}

// ---------------------------------------------------------------------------
// Stars
// ---------------------------------------------------------------------------

struct StarGraph {
    leaf_weights: WeightSeq,
    mu_center: f64,
    leaf_measures: WeightSeq,
    n_leaves: Option<usize>,
    total_weight: f64,
}

impl StarGraph {
    fn new(
        leaf_weights: WeightSeq,
        mu_center: f64,
        leaf_measures: WeightSeq,
        n_leaves: Option<usize>,
    ) -> Result<Self, GraphError> {
        if !(mu_center.is_finite() && mu_center > 0.0) {
            return Err(GraphError::NonPositiveMeasure {
                x: 0,
                value: mu_center,
            });
        }
        let mut count = n_leaves;
        if let Some(l) = leaf_weights.table_len() {
            match count {
                None => count = Some(l),
                Some(c) if c != l => {
                    return Err(GraphError::MismatchedLengths {
                        detail: format!("{c} leaves requested but weight table has {l} entries"),
                    })
                }
                _ => {}
            }
        }
        if let Some(l) = leaf_measures.table_len() {
            match count {
                None => count = Some(l),
                Some(c) if c != l => {
                    return Err(GraphError::MismatchedLengths {
                        detail: format!("{c} leaves requested but measure table has {l} entries"),
                    })
                }
                _ => {}
            }
        }
        let hi = count.map(|c| c.saturating_sub(1));
        leaf_weights.require_positive(hi)?;
        leaf_measures.require_positive(hi)?;
        // deg(center) must be finite: sum the table, or use the geometric
        // closed form; anything else with infinitely many leaves diverges.
        let total_weight = match (&leaf_weights, count) {
            (_, Some(c)) => {
                let mut acc = Neumaier::new();
                for k in 0..c {
                    acc.add(leaf_weights.value(k));
                }
                acc.total()
            }
            (WeightSeq::Geometric { initial, ratio }, None) if *ratio < 1.0 => {
                initial / (1.0 - ratio)
            }
            _ => return Err(GraphError::DegreeDiverges { x: 0 }),
        };
        Ok(Self {
            leaf_weights,
            mu_center,
            leaf_measures,
            n_leaves: count,
            total_weight,
        })
    }

    fn has_leaf(&self, k: Vertex) -> bool {
        k >= 1
            && match self.n_leaves {
                Some(c) => (k as usize) <= c,
                None => true,
            }
    }
}

impl GraphOracle for StarGraph {
    fn edge_weight(&self, x: Vertex, y: Vertex) -> f64 {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        if lo == 0 && self.has_leaf(hi) {
            self.leaf_weights.value(hi as usize - 1)
        } else {
            0.0
        }
    }

    fn measure(&self, x: Vertex) -> f64 {
        if x == 0 {
            self.mu_center
        } else {
            self.leaf_measures.value(x as usize - 1)
        }
    }

    fn degree(&self, x: Vertex) -> f64 {
        if x == 0 {
            self.total_weight
        } else if self.has_leaf(x) {
            self.leaf_weights.value(x as usize - 1)
        } else {
            0.0
        }
    }

    fn neighbors(&self, x: Vertex) -> Box<dyn Iterator<Item = Vertex> + '_> {
        if x == 0 {
            match self.n_leaves {
                Some(c) => Box::new(1..=(c as Vertex)),
                None => Box::new(1..),
            }
        } else if self.has_leaf(x) {
            Box::new(std::iter::once(0))
        } else {
            Box::new(std::iter::empty())
        }
    }

    fn locally_finite_at(&self, x: Vertex) -> bool {
        x != 0 || self.n_leaves.is_some()
    }

    fn vertex_by_index(&self, index: usize) -> Option<Vertex> {
        match self.n_leaves {
            Some(c) if index > c => None,
            _ => Some(index as Vertex),
        }
    }

    fn vertex_count(&self) -> Option<usize> {
        self.n_leaves.map(|c| c + 1)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A single failed axiom found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AsymmetricWeight {
        x: Vertex,
        y: Vertex,
        bxy: f64,
        byx: f64,
    },
    SelfLoop {
        x: Vertex,
        weight: f64,
    },
    NegativeWeight {
        x: Vertex,
        y: Vertex,
        weight: f64,
    },
    NonPositiveMeasure {
        x: Vertex,
        mu: f64,
    },
    /// The neighbor-list sum disagrees with the degree oracle beyond
    /// `1e-12 * (1 + deg(x))`, or (for not-locally-finite vertices) a partial
    /// sum already exceeds it.
    DegreeMismatch {
        x: Vertex,
        listed_sum: f64,
        degree: f64,
    },
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub checked_vertices: usize,
    pub checked_pairs: usize,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the graph axioms — symmetry, zero diagonal, summability against the
/// degree oracle, positive measure — on a finite vertex sample.
pub fn validate(g: &WeightedGraph, sample: &[Vertex], cap: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    for &x in sample {
        report.checked_vertices += 1;
        let mu = g.mu(x);
        if !(mu.is_finite() && mu > 0.0) {
            report.violations.push(Violation::NonPositiveMeasure { x, mu });
        }
        let loop_w = g.b(x, x);
        if loop_w != 0.0 {
            report.violations.push(Violation::SelfLoop { x, weight: loop_w });
        }
        let deg = g.deg(x);
        let tol = 1e-12 * (1.0 + deg.abs());
        let mut listed = Neumaier::new();
        let mut truncated = false;
        for (count, y) in g.neighbors(x).enumerate() {
            if count >= cap {
                truncated = true;
                break;
            }
            report.checked_pairs += 1;
            let bxy = g.b(x, y);
            let byx = g.b(y, x);
            if bxy != byx {
                report
                    .violations
                    .push(Violation::AsymmetricWeight { x, y, bxy, byx });
            }
            if !(bxy.is_finite() && bxy >= 0.0) {
                report
                    .violations
                    .push(Violation::NegativeWeight { x, y, weight: bxy });
            }
            listed.add(bxy);
        }
        let listed_sum = listed.total();
        let consistent = if truncated || !g.locally_finite_at(x) {
            // Can only check one direction: partial sums never exceed deg.
            listed_sum <= deg + tol
        } else {
            (listed_sum - deg).abs() <= tol
        };
        if !consistent {
            report.violations.push(Violation::DegreeMismatch {
                x,
                listed_sum,
                degree: deg,
            });
        }
    }
    report
}

// ---------------------------------------------------------------------------
// The finiteness condition
// ---------------------------------------------------------------------------

/// Caller-supplied certificate about the tail of an infinite neighbor sum,
/// after the first `after` enumerated neighbors.  The meaning of the bound
/// depends on the sum being certified (`b^2/mu` terms for [`check_fc`],
/// `b |f|` terms for the operator-domain test).
#[derive(Debug, Clone, Copy)]
pub enum Tail {
    /// The remaining terms sum to at most `bound`.
    RemainderBound { after: usize, bound: f64 },
    /// The remaining terms are known to diverge.
    Divergent { after: usize },
}

/// Outcome of [`check_fc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fc {
    /// `sum_y b(x,y)^2 / mu(y)` is finite; `exact` is false when the value
    /// includes a caller-supplied tail bound.
    Finite { value: f64, exact: bool },
    /// The sum is certified to diverge.
    Infinite,
}

/// Evaluate the squared `l^2(mu)`-norm of `y -> b(x,y)/mu(y)`, i.e.
/// `sum_y b(x,y)^2 / mu(y)`.  Finiteness of this quantity at every vertex is
/// what lets pointwise pairings against arbitrary `l^2` functions converge.
pub fn check_fc(
    g: &WeightedGraph,
    x: Vertex,
    tail: Option<Tail>,
    cap: usize,
) -> Result<Fc, GraphError> {
    let prefix_len = match tail {
        Some(Tail::RemainderBound { after, .. }) | Some(Tail::Divergent { after }) => after,
        None => cap,
    };
    let mut acc = Neumaier::new();
    let mut iter = g.neighbors(x);
    let mut exhausted = true;
    for count in 0.. {
        match iter.next() {
            Some(y) => {
                if count >= prefix_len {
                    exhausted = false;
                    break;
                }
                let b = g.b(x, y);
                acc.add(b * b / g.mu(y));
            }
            None => break,
        }
    }
    if exhausted {
        return Ok(Fc::Finite {
            value: acc.total(),
            exact: true,
        });
    }
    match tail {
        Some(Tail::RemainderBound { bound, .. }) => Ok(Fc::Finite {
            value: acc.total() + bound,
            exact: false,
        }),
        Some(Tail::Divergent { .. }) => Ok(Fc::Infinite),
        None => Err(GraphError::UnboundedTail { x }),
    }
}

// ---------------------------------------------------------------------------
// Components and exhaustions
// ---------------------------------------------------------------------------

/// Adjacency of the subgraph induced on `set`, as index lists into `set`.
/// Falls back to pairwise weight queries at vertices whose neighbor list is
/// not finite.
pub(crate) fn adjacency_within(
    g: &WeightedGraph,
    set: &[Vertex],
    cap: usize,
) -> Result<Vec<Vec<usize>>, GraphError> {
    let index: HashMap<Vertex, usize> = set.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj = vec![Vec::new(); set.len()];
    for (i, &x) in set.iter().enumerate() {
        if g.locally_finite_at(x) {
            for y in g.neighbor_list(x, cap)? {
                if let Some(&j) = index.get(&y) {
                    if i != j {
                        adj[i].push(j);
                    }
                }
            }
        } else {
            for (j, &y) in set.iter().enumerate() {
                if i != j && g.b(x, y) > 0.0 {
                    adj[i].push(j);
                }
            }
        }
        adj[i].sort_unstable();
        adj[i].dedup();
    }
    Ok(adj)
}

/// Connected components of the subgraph induced on `within`, each in BFS
/// discovery order, components ordered by their first vertex's position in
/// the input.
pub fn connected_components(
    g: &WeightedGraph,
    within: &[Vertex],
    cap: usize,
) -> Result<Vec<Vec<Vertex>>, GraphError> {
    let adj = adjacency_within(g, within, cap)?;
    let mut seen = vec![false; within.len()];
    let mut components = Vec::new();
    for start in 0..within.len() {
        if seen[start] {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(within[i]);
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        components.push(comp);
    }
    Ok(components)
}

/// A nested family of finite vertex sets: the balls around `root` at the
/// given radii, each listed in BFS discovery order (so smaller balls are
/// prefixes of larger ones).
#[derive(Debug, Clone)]
pub struct Exhaustion {
    pub root: Vertex,
    pub radii: Vec<usize>,
    pub subsets: Vec<Vec<Vertex>>,
}

impl Exhaustion {
    /// The largest ball.
    pub fn largest(&self) -> &[Vertex] {
        self.subsets.last().map(|s| s.as_slice()).unwrap_or(&[])
    }
}

/// Breadth-first balls `B(root, r)` for each radius in `radii` (strictly
/// increasing).  Fails with [`GraphError::NotLocallyFinite`] when the
/// enumeration cap is exceeded, which is what happens at a vertex with
/// infinitely many neighbors.
pub fn ball_exhaustion(
    g: &WeightedGraph,
    root: Vertex,
    radii: &[usize],
    cap: usize,
) -> Result<Exhaustion, GraphError> {
    for pair in radii.windows(2) {
        if pair[1] <= pair[0] {
            return Err(GraphError::InvalidRadii {
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    let max_radius = radii.last().copied().unwrap_or(0);
    let mut order: Vec<(Vertex, usize)> = vec![(root, 0)];
    let mut dist: HashMap<Vertex, usize> = HashMap::from([(root, 0)]);
    let mut head = 0;
    while head < order.len() {
        let (x, d) = order[head];
        head += 1;
        if d == max_radius {
            continue;
        }
        for y in g.neighbor_list(x, cap)? {
            if !dist.contains_key(&y) {
                dist.insert(y, d + 1);
                order.push((y, d + 1));
                if order.len() > cap {
                    return Err(GraphError::NotLocallyFinite { x, cap });
                }
            }
        }
    }
    let subsets = radii
        .iter()
        .map(|&r| {
            order
                .iter()
                .filter(|&&(_, d)| d <= r)
                .map(|&(v, _)| v)
                .collect()
        })
        .collect();
    Ok(Exhaustion {
        root,
        radii: radii.to_vec(),
        subsets,
    })
}
