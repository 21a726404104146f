//! Cross-checks between the summation-by-parts identities, the pointwise
//! operator, and assembled sections on randomly generated finite graphs.

use num_complex::Complex64;
use proptest::prelude::*;

use schrograph_core::{
    dirichlet_section, form_q, form_q_quadratic, greens_identity_residual, lambda0, GraphFn,
    Potential, Vertex, WeightedGraph,
};

/// A random finite weighted graph with a potential, in plain data form.
#[derive(Debug, Clone)]
struct RawGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    mu: Vec<f64>,
    w: Vec<f64>,
}

impl RawGraph {
    fn build(&self) -> (WeightedGraph, Potential) {
        let g = WeightedGraph::explicit(self.n, &self.edges, self.mu.clone()).unwrap();
        (g, Potential::from_values(self.w.clone()))
    }

    fn window(&self) -> Vec<Vertex> {
        (0..self.n as Vertex).collect()
    }
}

fn raw_graph() -> impl Strategy<Value = RawGraph> {
    (2usize..12).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let m = pairs.len();
        (
            proptest::collection::vec(proptest::option::weighted(0.5, 0.1f64..5.0), m),
            proptest::collection::vec(0.1f64..4.0, n),
            proptest::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(weights, mu, w)| {
                let edges = pairs
                    .iter()
                    .zip(&weights)
                    .filter_map(|(&(i, j), &opt)| opt.map(|b| (i, j, b)))
                    .collect();
                RawGraph { n, edges, mu, w }
            })
    })
}

fn complex_fn(n: usize, parts: &[(f64, f64)]) -> GraphFn {
    GraphFn::from_pairs(
        (0..n as Vertex).zip(parts.iter().map(|&(re, im)| Complex64::new(re, im))),
    )
}

fn magnitude_scale(raw: &RawGraph, fs: &[&GraphFn]) -> f64 {
    let weight: f64 = raw.edges.iter().map(|&(_, _, b)| b).sum::<f64>()
        + raw
            .mu
            .iter()
            .zip(&raw.w)
            .map(|(m, w)| m * w.abs())
            .sum::<f64>()
        + raw.mu.iter().sum::<f64>();
    let amp: f64 = fs
        .iter()
        .map(|f| {
            (0..raw.n as Vertex)
                .map(|x| f.value(x).norm())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    1.0 + weight * (1.0 + amp * amp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn greens_identity_residual_is_negligible(
        raw in raw_graph(),
        parts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 24),
    ) {
        let (g, w) = raw.build();
        let f = complex_fn(raw.n, &parts[..raw.n]);
        let u = complex_fn(raw.n, &parts[12..12 + raw.n]);
        let residual = greens_identity_residual(&g, &w, &f, &u).unwrap();
        let scale = magnitude_scale(&raw, &[&f, &u]);
        prop_assert!(residual <= 1e-11 * scale, "residual {residual} vs scale {scale}");
    }

    #[test]
    fn quadratic_form_is_the_diagonal_of_the_sesquilinear_one(
        raw in raw_graph(),
        parts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 12),
    ) {
        let (g, w) = raw.build();
        let f = complex_fn(raw.n, &parts[..raw.n]);
        let quad = form_q_quadratic(&g, &w, &f).unwrap();
        let sesq = form_q(&g, &w, &f, &f).unwrap();
        let scale = magnitude_scale(&raw, &[&f]);
        prop_assert!(quad.energy_part >= 0.0);
        prop_assert!((quad.total - sesq.total.re).abs() <= 1e-12 * scale);
        prop_assert!(sesq.total.im.abs() <= 1e-12 * scale);
        prop_assert!((quad.energy_part - sesq.energy_part.re).abs() <= 1e-12 * scale);
    }

    #[test]
    fn moduli_never_increase_the_energy_part(
        raw in raw_graph(),
        parts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 12),
    ) {
        let (g, w) = raw.build();
        let f = complex_fn(raw.n, &parts[..raw.n]);
        let with_signs = form_q_quadratic(&g, &w, &f).unwrap();
        let without = form_q_quadratic(&g, &w, &f.abs()).unwrap();
        let scale = magnitude_scale(&raw, &[&f]);
        prop_assert!(
            without.energy_part <= with_signs.energy_part + 1e-12 * scale,
            "|f| energy {} vs f energy {}",
            without.energy_part,
            with_signs.energy_part
        );
    }

    #[test]
    fn the_full_window_section_reproduces_the_form(
        raw in raw_graph(),
        reals in proptest::collection::vec(-3.0f64..3.0, 12),
    ) {
        let (g, w) = raw.build();
        let window = raw.window();
        let sec = dirichlet_section(&g, &w, &window).unwrap();
        let vals = &reals[..raw.n];
        let f = GraphFn::from_real_values(vals);
        let quad = form_q_quadratic(&g, &w, &f).unwrap();
        let through_section = sec.quad_action_mu(vals);
        let scale = magnitude_scale(&raw, &[&f]);
        prop_assert!(
            (quad.total - through_section).abs() <= 1e-11 * scale,
            "form {} vs section {}",
            quad.total,
            through_section
        );
    }

    #[test]
    fn nonnegative_potentials_only_raise_the_ground_energy(
        raw in raw_graph(),
        bump in proptest::collection::vec(0.0f64..6.0, 12),
    ) {
        let (g, w) = raw.build();
        let window = raw.window();
        let base = dirichlet_section(&g, &w, &window).unwrap();
        let bigger = Potential::from_values(
            raw.w.iter().zip(&bump).map(|(a, b)| a + b).collect(),
        );
        let lifted = dirichlet_section(&g, &bigger, &window).unwrap();
        let l_base = lambda0(&base, 1e-10).unwrap().value;
        let l_lifted = lambda0(&lifted, 1e-10).unwrap().value;
        prop_assert!(
            l_lifted >= l_base - 1e-10,
            "lambda0 dropped: {l_base} -> {l_lifted}"
        );
    }
}
