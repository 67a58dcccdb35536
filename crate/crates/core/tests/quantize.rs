use std::collections::BTreeMap;

use hjred::chain::run_chain;
use hjred::expr::{parse_free, Expr, Symbol, DEFAULT_SEED};
use hjred::legendre::build_hj_system;
use hjred::model::builtin_model;
use hjred::quantize::{
    check_annihilation, oscillator_operator, oscillator_spectrum, reduced_spectrum, ComplexExpr, Grid, Stencil,
    Wave, HERMITIAN_TOLERANCE,
};

fn spacetime() -> Vec<(Symbol, Symbol)> {
    (0..4).map(|i| (Symbol::new(&format!("x{i}")), Symbol::new(&format!("p{i}")))).collect()
}

fn klein_gordon() -> Expr {
    parse_free("-p0^2 + p1^2 + p2^2 + p3^2 + m^2").unwrap()
}

fn plane(k0: &str) -> Wave {
    Wave::plane(parse_free(&format!("{k0}*x0 + k1*x1 + k2*x2 + k3*x3")).unwrap())
}

#[test]
fn on_shell_plane_wave_is_annihilated() {
    let r = check_annihilation(&klein_gordon(), &plane("(k1^2 + k2^2 + k3^2 + m^2)^(1/2)"), &spacetime()).unwrap();
    assert!(r.is_zero(), "{:?}", r.amplitude);
}

#[test]
fn off_shell_plane_wave_leaves_its_mass_shell() {
    let r = check_annihilation(&klein_gordon(), &plane("k0"), &spacetime()).unwrap();
    assert_eq!(r.amplitude.re, parse_free("-k0^2 + k1^2 + k2^2 + k3^2 + m^2").unwrap());
    assert!(r.amplitude.im.is_zero_const());
    assert_eq!(r.phase, plane("k0").phase);
}

#[test]
fn frozen_momentum_kills_functions_of_the_reduced_coordinate() {
    let pairs = [(Symbol::new("q1"), Symbol::new("p1")), (Symbol::new("q2"), Symbol::new("p2"))];
    let psi = Wave::real(parse_free("q1^3 + 2*q1").unwrap());
    assert!(check_annihilation(&Expr::sym("p2"), &psi, &pairs).unwrap().is_zero());
    assert!(!check_annihilation(&Expr::sym("p1"), &psi, &pairs).unwrap().is_zero());
}

#[test]
fn annihilation_is_linear_in_the_wave() {
    let pairs = [(Symbol::new("q1"), Symbol::new("p1"))];
    let c = parse_free("p1^2 + q1*p1 + q1^2").unwrap();
    let phase = parse_free("k*q1").unwrap();
    let a = ComplexExpr { re: parse_free("q1^2").unwrap(), im: parse_free("3*q1").unwrap() };
    let b = ComplexExpr { re: parse_free("q1 + 1").unwrap(), im: parse_free("-q1^3").unwrap() };
    let run = |amp: &ComplexExpr| {
        check_annihilation(&c, &Wave { amplitude: amp.clone(), phase: phase.clone() }, &pairs).unwrap().amplitude
    };
    assert_eq!(run(&a.add(&b)), run(&a).add(&run(&b)));
}

#[test]
fn oscillator_levels_are_odd_integers() {
    let levels = oscillator_spectrum(&Grid::new(512, 10.0).unwrap(), Stencil::Sinc);
    for (n, l) in levels.iter().take(10).enumerate() {
        assert!((l - (2 * n + 1) as f64).abs() <= 1e-6, "level {n}: {l}");
    }
}

fn three_point_error(n: usize) -> f64 {
    let levels = oscillator_spectrum(&Grid::new(n, 10.0).unwrap(), Stencil::ThreePoint);
    (0..10).map(|k| (levels[k] - (2 * k + 1) as f64).abs()).fold(0.0, f64::max)
}

#[test]
fn three_point_levels_converge_as_the_grid_doubles() {
    let errors: Vec<f64> = [16, 128, 256, 512, 1024].into_iter().map(three_point_error).collect();
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "{errors:?}");
    }
    // Second order: doubling N divides the error by about four.
    let ratio = errors[3] / errors[4];
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn operators_are_hermitian() {
    for n in [16, 100] {
        let op = oscillator_operator(&Grid::new(n, 6.0).unwrap(), Stencil::Sinc);
        assert!(op.hermitian);
        assert!(op.asymmetry() <= HERMITIAN_TOLERANCE);
    }
}

fn reduced(name: &str) -> (Expr, (Symbol, Symbol)) {
    let sys = build_hj_system(&builtin_model(name).unwrap(), DEFAULT_SEED).unwrap();
    let rep = run_chain(&sys, DEFAULT_SEED).unwrap();
    let b = rep.branches.iter().find(|b| b.admissible).unwrap();
    (b.reduced_h0.clone(), (Symbol::new("q1"), Symbol::new("p1")))
}

fn radius(r2: f64) -> BTreeMap<Symbol, f64> {
    BTreeMap::from([(Symbol::new("R"), r2.sqrt())])
}

#[test]
fn disc_has_finitely_many_states() {
    let (h, pair) = reduced("disc");
    let grid = Grid::new(512, 10.0).unwrap();
    for r2 in [1.0, 4.0, 9.0, 25.0, 0.5] {
        let s = reduced_spectrum(&h, &pair, &radius(r2), &grid, Stencil::Sinc).unwrap();
        let expected = if r2 < 1.0 { 0 } else { ((r2 - 1.0) / 2.0).floor() as usize + 1 };
        assert_eq!(s.count(), expected, "R^2 = {r2}");
    }
    let s = reduced_spectrum(&h, &pair, &radius(9.0), &grid, Stencil::Sinc).unwrap();
    let adm: Vec<_> = s.admissible().collect();
    for (k, l) in adm.iter().enumerate() {
        assert_eq!(l.n, k);
        assert!((l.lambda - (2 * k + 1) as f64).abs() <= 1e-6);
    }
    let g0 = adm[0].g.unwrap();
    assert!((g0.abs() - 2.0 / 3.0 * 8f64.powf(1.5)).abs() <= 1e-5, "{g0}");
    // g is monotone increasing towards the rim of the disc.
    assert!(adm.windows(2).all(|w| w[0].g.unwrap() < w[1].g.unwrap()));
}

#[test]
fn punctured_plane_starts_at_the_rim() {
    let (h, pair) = reduced("punctured_plane");
    let s = reduced_spectrum(&h, &pair, &radius(9.0), &Grid::new(512, 10.0).unwrap(), Stencil::Sinc).unwrap();
    let adm: Vec<_> = s.admissible().collect();
    assert_eq!(adm[0].n, 4);
    assert!(adm[0].g.unwrap().abs() <= 1e-6);
    assert!((adm[1].g.unwrap() - 2.0 / 3.0 * 2f64.powf(1.5)).abs() <= 1e-6);
    assert!(adm.len() >= 10);
}

#[test]
fn non_radial_hamiltonian_is_rejected() {
    let pair = (Symbol::new("q1"), Symbol::new("p1"));
    let h = parse_free("p1^2 + 2*q1^2").unwrap();
    assert!(reduced_spectrum(&h, &pair, &BTreeMap::new(), &Grid::new(64, 5.0).unwrap(), Stencil::Sinc).is_err());
}
