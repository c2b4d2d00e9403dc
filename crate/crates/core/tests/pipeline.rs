use bsr_core::analysis::pair_spectra;
use bsr_core::eigensolve::BlockTridiag2;
use bsr_core::reduction::{EffectiveChannel, Grushin, ProjectionBasis};
use bsr_core::scan::{scan_level, PAIR_CAP};
use bsr_core::setup::Problem;

#[test]
fn coarse_scan_pairs_resonances_with_the_dirichlet_spectrum() {
    let p = Problem::default_problem().unwrap();
    let s = scan_level(&p, 0.04, true).unwrap();
    assert!(s.dirichlet.len() >= 10);
    assert!(s.filled_vs_dirichlet.is_bijection());
    assert!(s.filled_vs_dirichlet.max_distance() < 1e-6);

    let res = s.resonances.as_ref().unwrap();
    let pairing = s.resonance_vs_dirichlet.as_ref().unwrap();
    assert!(pairing.is_bijection(), "{pairing:?}");
    assert!(pairing.max_distance() < PAIR_CAP * s.h);
    for r in res {
        assert!(r.im <= 1e-10, "positive width {r:?}");
        assert!(r.re >= s.window.lo - s.window.margin && r.re <= s.window.hi + s.window.margin);
        assert!(r.residual.unwrap() <= 1e-9);
    }
    // the snapped top sits in a gap of the comparison spectrum
    assert!(s.dirichlet.iter().all(|&e| (e - s.window.hi).abs() > 1e-3 * s.h));
}

#[test]
fn refined_grid_nests_the_coarse_nodes() {
    let p = Problem::default_problem().unwrap();
    let lv = p.level(0.03).unwrap();
    let fine = lv.refined(2).unwrap();
    assert_eq!(fine.grid.n, 2 * lv.grid.n + 1);
    for i in 0..lv.grid.n {
        assert!((fine.grid.node(2 * i + 1) - lv.grid.node(i)).abs() < 1e-12);
    }
    assert!(fine.n_cut >= 2 * lv.n_cut);
}

#[test]
fn reductions_agree_with_block_diagonalization() {
    let p = Problem::default_problem().unwrap();
    let l = &p.layout;
    let h = 0.04;
    let lv = p.level(h).unwrap();
    let op = lv.two_channel(true, false).unwrap();
    let bt = BlockTridiag2::from_operator(&op).unwrap();

    let top = l.critical.m2 - l.alpha;
    let ec = EffectiveChannel::new(&op, top).unwrap();
    let (direct, (k0, _)) = bt.eigenvalues_in(l.critical.m1, top);
    for (i, &e) in direct.iter().enumerate() {
        let f = ec.fixed_point(k0 + i, e + 1e-3, 1e-12).unwrap();
        assert!((f.lambda - e).abs() < 1e-8, "level {i}: {} vs {e}", f.lambda);
    }

    let basis = ProjectionBasis::build(&op, l.critical.m2, l.alpha).unwrap();
    let g = Grushin::new(&op, &basis, h).unwrap();
    let (lo, hi) = (l.critical.m2 - 0.05, l.critical.m2 + 0.05);
    let roots: Vec<f64> = g.branch_solve(lo, hi, 1e-12).unwrap().iter().map(|r| r.lambda).collect();
    let (direct, _) = bt.eigenvalues_in(lo, hi);
    let pairing = pair_spectra(&roots, &direct, 10.0 * h).unwrap();
    assert!(pairing.is_bijection());
    assert!(pairing.max_distance() < 1e-8);
}
