use hjred::chain::{run_chain, ChainReport, Status};
use hjred::dynamics::{
    action_residual, gauge_orbit_check, integrate, integrate_reduced, DynamicsError, ParameterPath, PhasePoint,
};
use hjred::expr::{Symbol, DEFAULT_SEED};
use hjred::legendre::{build_hj_system, HJSystem};
use hjred::model::builtin_model;

fn analyzed(name: &str) -> (HJSystem, ChainReport) {
    let sys = build_hj_system(&builtin_model(name).unwrap(), DEFAULT_SEED).unwrap();
    let rep = run_chain(&sys, DEFAULT_SEED).unwrap();
    assert_eq!(rep.status, Status::Integrable);
    (sys, rep)
}

fn disc_init() -> PhasePoint {
    PhasePoint::new([("q1", 0.6), ("p1", 0.0), ("q2", 0.8)])
}

fn disc_path(span: f64) -> ParameterPath {
    ParameterPath::along(vec![0.0, 0.8], 0, span)
}

#[test]
fn disc_flow_is_harmonic() {
    let (sys, rep) = analyzed("disc");
    let traj = integrate(&sys, &rep, &disc_init(), &disc_path(10.0), 1e-3).unwrap();
    assert_eq!(traj.samples.len(), 10_001);
    let mut err: f64 = 0.0;
    for x in &traj.samples {
        let t = x.parameters[0];
        err = err.max((x.q[0] - 0.6 * (1.6 * t).cos()).abs());
        err = err.max((x.p[0] + 0.6 * (1.6 * t).sin()).abs());
    }
    assert!(err < 1e-6, "max error {err:e}");
    assert!(traj.max_drift() <= 1e-8, "drift {:e}", traj.max_drift());
    // The frozen parameter does not move.
    assert!(traj.samples.iter().all(|x| x.parameters[1] == 0.8));
}

#[test]
fn disc_drift_scales_with_fourth_power_in_truncation_regime() {
    let (sys, rep) = analyzed("disc");
    let coarse = integrate(&sys, &rep, &disc_init(), &disc_path(10.0), 0.02).unwrap();
    let fine = integrate(&sys, &rep, &disc_init(), &disc_path(10.0), 0.01).unwrap();
    let ratio = coarse.drift_of("H'2").unwrap() / fine.drift_of("H'2").unwrap();
    assert!(ratio >= 8.0, "ratio {ratio}");
}

#[test]
fn disc_action_matches_lagrangian_integral() {
    let (sys, rep) = analyzed("disc");
    let traj = integrate(&sys, &rep, &disc_init(), &disc_path(10.0), 1e-3).unwrap();
    let r = action_residual(&traj, &sys).unwrap();
    assert!(r <= 1e-6, "residual {r:e}");
    let empty = integrate(&sys, &rep, &disc_init(), &disc_path(0.0), 1e-3).unwrap();
    assert_eq!(empty.samples.len(), 1);
    assert_eq!(action_residual(&empty, &sys).unwrap(), 0.0);
}

fn particle_init() -> PhasePoint {
    PhasePoint::new([
        ("x0", 0.0),
        ("x1", 0.0),
        ("x2", 0.0),
        ("x3", 0.0),
        ("p0", 2f64.sqrt()),
        ("p1", 1.0),
        ("p2", 0.0),
        ("p3", 0.0),
        ("e", 1.0),
    ])
}

#[test]
fn free_particle_moves_along_momentum() {
    let (sys, rep) = analyzed("relativistic_particle");
    let path = ParameterPath::along(vec![0.0, 1.0], 0, 1.0);
    let traj = integrate(&sys, &rep, &particle_init(), &path, 1e-3).unwrap();
    let end = traj.last();
    // dx^mu/dtau = e p^mu with p^0 = -p_0.
    assert!((end.q[0] + 2f64.sqrt()).abs() < 1e-12);
    assert!((end.q[1] - 1.0).abs() < 1e-12);
    assert!((end.z + 1.0).abs() < 1e-12, "z = {}", end.z);
    let r = action_residual(&traj, &sys).unwrap();
    assert!(r <= 1e-8, "residual {r:e}");
}

#[test]
fn gauge_orbits() {
    let (sys, rep) = analyzed("relativistic_particle");
    let g = gauge_orbit_check(&sys, &rep, &particle_init(), 1.0, 1.0, 1e-3).unwrap();
    assert!(g.observable_mismatch <= 1e-9);
    assert!(g.alignment <= 1e-9);
    assert!((g.displacement - 3f64.sqrt()).abs() < 1e-9);
    let g = gauge_orbit_check(&sys, &rep, &particle_init(), 1.0, 0.0, 1e-3).unwrap();
    assert_eq!((g.observable_mismatch, g.alignment, g.displacement), (0.0, 0.0, 0.0));
    let g = gauge_orbit_check(&sys, &rep, &particle_init(), 0.0, 1.0, 1e-3).unwrap();
    assert_eq!(g.displacement, 0.0);
}

#[test]
fn off_surface_and_frozen_paths_are_rejected() {
    let (sys, rep) = analyzed("disc");
    let bad = PhasePoint::new([("q1", 1.0), ("p1", 1.0), ("q2", 1.0)]);
    let err = integrate(&sys, &rep, &bad, &disc_path(1.0), 1e-3).unwrap_err();
    assert!(matches!(err, DynamicsError::OffSurface { ref label, .. } if label == "H'2"), "{err}");
    let path = ParameterPath::along(vec![0.0, 0.8], 1, 0.1);
    assert!(matches!(
        integrate(&sys, &rep, &disc_init(), &path, 1e-3),
        Err(DynamicsError::FrozenVaries(_))
    ));
    let unknown = PhasePoint::new([("q1", 0.6), ("p1", 0.0), ("q2", 0.8), ("w", 1.0)]);
    assert!(matches!(
        integrate(&sys, &rep, &unknown, &disc_path(1.0), 1e-3),
        Err(DynamicsError::Unknown(_))
    ));
}

#[test]
fn reduced_flow_matches_full_flow() {
    let (sys, rep) = analyzed("disc");
    let branch = rep.branches.iter().find(|b| b.admissible).unwrap();
    let traj = integrate(&sys, &rep, &disc_init(), &disc_path(10.0), 1e-3).unwrap();
    let pairs = vec![(Symbol::new("q1"), Symbol::new("p1"))];
    let reduced =
        integrate_reduced(&branch.reduced_h0, &pairs, &sys.model.constant_values(), &[(0.6, 0.0)], 10.0, 1e-3)
            .unwrap();
    assert_eq!(reduced.len(), traj.samples.len());
    let mut err: f64 = 0.0;
    for ((_, q, p), x) in reduced.iter().zip(&traj.samples) {
        err = err.max((q[0] - x.q[0]).abs()).max((p[0] - x.p[0]).abs());
    }
    assert!(err <= 1e-6, "max deviation {err:e}");
}

#[test]
fn csv_layout() {
    let (sys, rep) = analyzed("disc");
    let traj = integrate(&sys, &rep, &disc_init(), &disc_path(0.002), 1e-3).unwrap();
    let csv = traj.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,t,q2,q1,p1,p_t,p2,z");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.0000000000000000e0,0.0000000000000000e0,8.0000000000000004e-1"));
}
