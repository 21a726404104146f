//! Complex-valued functions on the vertex set.
//!
//! Pointwise evaluation plus an optional *known finite support*.  The support
//! is what makes sums like `sum_y b(x,y) f(y)` computable without enumerating
//! neighborhoods: when it is present, every such sum runs over the support
//! and is exact.  Functions without support information can still be used
//! wherever the graph is locally finite.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_complex::Complex64;

use crate::graph::Vertex;

/// Three-valued answer for questions that finite data cannot always settle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ternary {
    Yes,
    No,
    Unknown,
}

/// A function `X -> C`, with its finite support recorded when known.
#[derive(Clone)]
pub struct GraphFn {
    eval: Arc<dyn Fn(Vertex) -> Complex64 + Send + Sync>,
    support: Option<Arc<BTreeSet<Vertex>>>,
}

impl std::fmt::Debug for GraphFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.support {
            Some(s) => write!(f, "GraphFn(support: {} vertices)", s.len()),
            None => f.write_str("GraphFn(no support info)"),
        }
    }
}

impl GraphFn {
    pub fn zero() -> Self {
        Self::from_map(BTreeMap::new())
    }

    pub fn delta(x: Vertex) -> Self {
        Self::from_map(BTreeMap::from([(x, Complex64::new(1.0, 0.0))]))
    }

    pub fn from_map(map: BTreeMap<Vertex, Complex64>) -> Self {
        let support: BTreeSet<Vertex> = map.keys().copied().collect();
        Self {
            eval: Arc::new(move |x| map.get(&x).copied().unwrap_or_default()),
            support: Some(Arc::new(support)),
        }
    }

    pub fn from_real_map(map: BTreeMap<Vertex, f64>) -> Self {
        Self::from_map(
            map.into_iter()
                .map(|(x, v)| (x, Complex64::new(v, 0.0)))
                .collect(),
        )
    }

    /// Table indexed by vertex id; the support is the whole index range.
    pub fn from_real_values(values: &[f64]) -> Self {
        Self::from_real_map(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as Vertex, v))
                .collect(),
        )
    }

    /// Values paired with explicit vertices (e.g. a section's vertex list).
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Vertex, Complex64)>) -> Self {
        Self::from_map(pairs.into_iter().collect())
    }

    /// A closure with no support information (possibly infinite support).
    pub fn from_closure(f: impl Fn(Vertex) -> Complex64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            support: None,
        }
    }

    pub fn value(&self, x: Vertex) -> Complex64 {
        match &self.support {
            Some(s) if !s.contains(&x) => Complex64::default(),
            _ => (self.eval)(x),
        }
    }

    pub fn is_finitely_supported(&self) -> bool {
        self.support.is_some()
    }

    /// Sorted support list, when known.
    pub fn support(&self) -> Option<Vec<Vertex>> {
        self.support.as_ref().map(|s| s.iter().copied().collect())
    }

    /// Pointwise absolute value, keeping the support.
    pub fn abs(&self) -> Self {
        let eval = self.eval.clone();
        Self {
            eval: Arc::new(move |x| Complex64::new(eval(x).norm(), 0.0)),
            support: self.support.clone(),
        }
    }
}
