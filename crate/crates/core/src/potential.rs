//! Real-valued potentials on the vertex set.
//!
//! A potential is just a total function `Vertex -> f64`, stored as a shared
//! closure so graph families and transforms (shifts, truncations) compose
//! without materializing anything.  The sign decomposition `v = v+ - v-`
//! used throughout the truncation machinery lives here.

use std::collections::HashMap;
use std::sync::Arc;

use crate::graph::Vertex;

/// A real potential `V : X -> R`.
#[derive(Clone)]
pub struct Potential {
    f: Arc<dyn Fn(Vertex) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Potential(..)")
    }
}

impl Potential {
    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self {
            f: Arc::new(move |_| c),
        }
    }

    /// Table indexed by vertex id; vertices beyond the table get 0.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            f: Arc::new(move |x| values.get(x as usize).copied().unwrap_or(0.0)),
        }
    }

    /// Sparse table; missing vertices get 0.
    pub fn from_map(map: HashMap<Vertex, f64>) -> Self {
        Self {
            f: Arc::new(move |x| map.get(&x).copied().unwrap_or(0.0)),
        }
    }

    pub fn from_fn(f: impl Fn(Vertex) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn value(&self, x: Vertex) -> f64 {
        (self.f)(x)
    }

    /// `v+(x) = max(v(x), 0)`.
    pub fn positive_part(&self, x: Vertex) -> f64 {
        self.value(x).max(0.0)
    }

    /// `v-(x) = max(-v(x), 0)`, so that `v = v+ - v-`.
    pub fn negative_part(&self, x: Vertex) -> f64 {
        (-self.value(x)).max(0.0)
    }

    /// `x -> v(x) + delta`.
    pub fn plus_const(&self, delta: f64) -> Self {
        let inner = self.f.clone();
        Self {
            f: Arc::new(move |x| inner(x) + delta),
        }
    }

    /// Pointwise sum of two potentials.
    pub fn plus(&self, other: &Potential) -> Self {
        let a = self.f.clone();
        let b = other.f.clone();
        Self {
            f: Arc::new(move |x| a(x) + b(x)),
        }
    }

    /// Keep the positive part but cut the negative part off at depth `k`:
    /// `x -> v+(x) - min(v-(x), k)`.  Increasing `k` recovers `v` from below
    /// on the negative side.
    pub fn with_negative_part_cut(&self, k: f64) -> Self {
        let inner = self.f.clone();
        Self {
            f: Arc::new(move |x| {
                let v = inner(x);
                v.max(0.0) - (-v).max(0.0).min(k)
            }),
        }
    }

    /// Cap the potential at `k`: `x -> min(v(x), k)`.  Only meaningful for
    /// nonnegative potentials, which the caller is expected to check on the
    /// vertices in play.
    pub fn capped_at(&self, k: f64) -> Self {
        let inner = self.f.clone();
        Self {
            f: Arc::new(move |x| inner(x).min(k)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_decomposition_reassembles_the_value() {
        let v = Potential::from_values(vec![3.0, -2.0, 0.0, -0.5]);
        for x in 0..6u64 {
            let val = v.value(x);
            assert_eq!(v.positive_part(x) - v.negative_part(x), val);
            assert!(v.positive_part(x) >= 0.0);
            assert!(v.negative_part(x) >= 0.0);
        }
        // Out of table: zero.
        assert_eq!(v.value(17), 0.0);
    }

    #[test]
    fn negative_part_cut_only_touches_the_negative_side() {
        let v = Potential::from_values(vec![0.0, -5.0, -1.0, 2.0]);
        let cut = v.with_negative_part_cut(2.0);
        assert_eq!(cut.value(0), 0.0);
        assert_eq!(cut.value(1), -2.0);
        assert_eq!(cut.value(2), -1.0);
        assert_eq!(cut.value(3), 2.0);
    }

    #[test]
    fn cap_freezes_once_values_exceed_it() {
        let w = Potential::from_fn(|x| x as f64);
        let capped = w.capped_at(3.0);
        let got: Vec<f64> = (0..6u64).map(|x| capped.value(x)).collect();
        assert_eq!(got, vec![0.0, 1.0, 2.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn shifts_and_sums_compose() {
        let v = Potential::from_values(vec![1.0, -1.0]);
        let w = v.plus_const(0.5).plus(&Potential::constant(0.5));
        assert_eq!(w.value(0), 2.0);
        assert_eq!(w.value(1), 0.0);
    }
}
