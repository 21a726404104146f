//! End-to-end traces of the experiment drivers on small deterministic
//! inputs, checking the qualitative shapes the drivers are meant to
//! certify: nonnegativity and monotone convergence of the truncation
//! traces, contraction of the stability pipeline along the resolvent
//! parameter, agreement of the log-space growth probe with plain
//! arithmetic, and coincidence of the two assembly paths at scale.

use rand::Rng;

use schrograph_core::{
    deficiency_probe_birth_death, dirichlet_section, formsum_vs_friedrichs, lambda0,
    positive_core_approximation, seeded_rng, stability_pipeline, Potential, Vertex, WeightSeq,
    WeightedGraph,
};

fn unit_chain(n: usize) -> WeightedGraph {
    WeightedGraph::birth_death(WeightSeq::Const(1.0), WeightSeq::Const(1.0), Some(n)).unwrap()
}

fn window(n: usize) -> Vec<Vertex> {
    (0..n as Vertex).collect()
}

#[test]
fn the_half_line_well_trace_is_nonnegative_and_monotone() {
    let n = 30;
    let g = unit_chain(n);
    let v1 = Potential::from_values((0..n).map(|i| -(i as f64) / 2.0).collect());
    let s = window(n);
    let u: Vec<f64> = (0..n).map(|i| 0.5f64.powi(i as i32)).collect();
    let ks: Vec<f64> = vec![2.0, 5.0, 9.0, 15.0];
    let rs = vec![1.0, 4.0];
    let trace = positive_core_approximation(&g, &v1, &s, &u, &ks, &rs, 1.0).unwrap();

    assert!(trace.worst_min_entry >= -1e-12, "{}", trace.worst_min_entry);
    assert!(
        trace.worst_estimate_margin >= -1e-10,
        "{}",
        trace.worst_estimate_margin
    );
    // Deeper cuts can only improve the approximation at fixed r.
    for r in &rs {
        let errs: Vec<f64> = trace
            .rows
            .iter()
            .filter(|row| row.r == *r)
            .map(|row| row.form_err_to_u_r)
            .collect();
        assert_eq!(errs.len(), ks.len());
        for pair in errs.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "k-errors rose at r = {r}: {pair:?}"
            );
        }
    }
    // Larger r brings the plain resolvent closer to u on both axes.
    assert_eq!(trace.r_axis.len(), 2);
    assert!(trace.r_axis[1].1 < trace.r_axis[0].1);
    assert!(trace.r_axis[1].2 < trace.r_axis[0].2);
    // The deep well makes the normalizing shift strictly negative.
    assert!(trace.shift < 0.0);
}

#[test]
fn the_stability_pipeline_contracts_along_the_resolvent_parameter() {
    let n = 20;
    let g = unit_chain(n);
    let v1 = Potential::zero();
    let v2 = Potential::from_values((0..n).map(|i| (i * i) as f64).collect());
    let s = window(n);

    // Probe with the ground vector of the full section, scaled small so the
    // later thresholds sit inside the asymptotic regime.
    let sec = dirichlet_section(&g, &v1.plus(&v2), &s).unwrap();
    let m = sec.dense_sym();
    let eig = m.symmetric_eigen();
    let mut idx = 0;
    for i in 1..n {
        if eig.eigenvalues[i] < eig.eigenvalues[idx] {
            idx = i;
        }
    }
    let lam = eig.eigenvalues[idx];
    let raw: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, idx)]).collect();
    let norm = sec.mu_norm(&raw);
    let u: Vec<f64> = raw.iter().map(|x| x * 1e-3 / norm).collect();

    let ks = vec![400.0];
    let rs = vec![4.0, 16.0, 64.0];
    let report = stability_pipeline(&g, &v1, &v2, &s, &u, 1.0, &ks, &rs).unwrap();

    // The unperturbed full-window section is PSD with ground energy 0 (the
    // constant vector), so the normalizing shift is zero up to rounding.
    assert!(report.shift.abs() < 1e-12, "{}", report.shift);
    assert_eq!(report.identity_max_diff, 0.0);
    // The single truncation level covers max V2 = 361, so every selection
    // meets the 1/r rule exactly.
    for sel in &report.selected {
        assert_eq!(sel.k, 400.0);
        assert!(sel.selection_margin >= 0.0);
    }
    // The eigenvector contracts by lambda/(lambda + r).
    let mut last = f64::INFINITY;
    for (row, &r) in report.r_rows.iter().zip(&rs) {
        let want = 1e-3 * lam / (lam + r);
        assert!(
            (row.l2_error - want).abs() <= 1e-9 + 1e-6 * want,
            "r = {r}: {} vs {want}",
            row.l2_error
        );
        assert!(row.l2_error < last);
        last = row.l2_error;
    }
    assert!(report.r_rows.last().unwrap().l2_error < 1e-4);
    assert!(report.commutation_worst <= 1e-10);
    assert!(report.domination_worst <= 1e-12);
}

#[test]
fn the_log_space_probe_shadows_plain_arithmetic_through_sign_flips() {
    let n = 120;
    let mut rng = seeded_rng(0x9e0b_57ac);
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mu: Vec<f64> = (0..=n).map(|_| rng.random_range(0.5..2.0)).collect();
    let v = Potential::constant(-3.0);
    let alpha = 1.0;

    // Plain three-term recursion, safe from overflow at this length.
    let mut plain = vec![1.0f64; n + 1];
    plain[1] = 1.0 + mu[0] * (-3.0 + alpha) / b[0];
    for m in 1..n {
        plain[m + 1] =
            ((b[m - 1] + b[m] + mu[m] * (-3.0 + alpha)) * plain[m] - b[m - 1] * plain[m - 1])
                / b[m];
    }
    assert!(plain.iter().any(|&x| x < 0.0), "the probe should oscillate");

    let report = deficiency_probe_birth_death(
        &WeightSeq::values(b),
        &WeightSeq::values(mu),
        &v,
        alpha,
        n,
    )
    .unwrap();
    for &(idx, log_abs, sign) in &report.checkpoints {
        let want = plain[idx];
        assert_eq!(
            sign,
            if want > 0.0 {
                1
            } else if want < 0.0 {
                -1
            } else {
                0
            },
            "sign at {idx}"
        );
        let rel = (log_abs - want.abs().ln()).abs() / (1.0 + want.abs().ln().abs());
        assert!(rel <= 1e-9, "log mismatch at {idx}: {log_abs} vs plain {want}");
    }
    // The head of the report is the plain recursion verbatim.
    for (i, &h) in report.u_head.iter().enumerate() {
        let rel = (h - plain[i]).abs() / (1.0 + plain[i].abs());
        assert!(rel <= 1e-12, "head {i}: {h} vs {}", plain[i]);
    }
}

#[test]
fn assembly_paths_coincide_on_a_long_chain() {
    let n = 64;
    let g = unit_chain(n);
    let v1 = Potential::from_values((0..n).map(|i| ((i as f64) * 0.37).sin() * 2.0).collect());
    let v2 = Potential::from_values((0..n).map(|i| ((i as f64) * 0.11).cos().abs()).collect());
    let s = window(n);
    let out = formsum_vs_friedrichs(&g, &v1, &v2, &s).unwrap();
    let sec = dirichlet_section(&g, &v1.plus(&v2), &s).unwrap();
    let scale = 1.0
        + sec
            .diagonal()
            .iter()
            .fold(0.0f64, |acc, &d| acc.max(d.abs()));
    assert!(
        out.max_matrix_discrepancy <= 2.0f64.powi(-45) * scale,
        "discrepancy {} at scale {scale}",
        out.max_matrix_discrepancy
    );
    assert!(out.max_drift <= 1e-10, "drift {}", out.max_drift);
    assert_eq!(out.section_size, n);
    // Sanity: the associated ground energy is finite and cached coherently.
    let l0 = lambda0(&sec, 1e-10).unwrap();
    assert!(l0.value.is_finite());
}
