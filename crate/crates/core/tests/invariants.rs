use proptest::prelude::*;

use flowknot::claims::orbit_census;
use flowknot::fields::{self, SphericalDirection};
use flowknot::ode::{integrate, integrate_backward, IntegratorConfig};
use flowknot::orbits::{self, Arc, ManifoldBranch};
use flowknot::section::{self, CrossingKind, JacobianMethod, ReturnOutcome, SectionPoint, SectionSpec};
use flowknot::topo::{analytic_index, numerical_degree};
use flowknot::{State, SystemParams};

const NH: SystemParams = SystemParams::NoseHoover { q: 1.0 };
const MS: SystemParams = SystemParams::MooreSpiegel { t: 27.0, r: 100.0 };

fn dist(a: State, b: State) -> f64 {
    State::new(a.x - b.x, a.y - b.y, a.z - b.z).norm()
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn nose_hoover_is_time_reversible(x in -1.5..1.5f64, y in -1.5..1.5f64, z in -1.5..1.5f64) {
        let s0 = State::new(x, y, z);
        let fwd = integrate(&NH, s0, (0.0, 5.0), &cfg()).unwrap();
        let e = fwd.final_state();
        let back = integrate(&NH, State::new(e.x, -e.y, -e.z), (0.0, 5.0), &cfg()).unwrap();
        let r = back.final_state();
        prop_assert!(dist(r, State::new(x, -y, -z)) < 1e-6);
    }

    #[test]
    fn halving_tolerances_converges(x in -1.5..1.5f64, y in -1.5..1.5f64, z in -1.5..1.5f64) {
        let s0 = State::new(x, y, z);
        let loose = cfg();
        let tight = loose.with_tolerances(loose.rel_tol / 2.0, loose.abs_tol / 2.0);
        let a = integrate(&NH, s0, (0.0, 10.0), &loose).unwrap().final_state();
        let b = integrate(&NH, s0, (0.0, 10.0), &tight).unwrap().final_state();
        let scale = 1.0 + a.norm();
        prop_assert!(dist(a, b) < 10.0 * loose.rel_tol * scale, "{}", dist(a, b));
    }

    #[test]
    fn return_map_preserves_orientation(x in -3.0..-0.3f64, z in -1.5..1.5f64) {
        let spec = SectionSpec::for_system(&NH);
        let p = SectionPoint::on_plane(&NH, &spec, x, z).unwrap();
        let ret = section::first_return(&NH, &p, &spec, &cfg()).unwrap();
        prop_assume!(matches!(ret, ReturnOutcome::Returned(_)));
        if let ReturnOutcome::Returned(q) = ret {
            prop_assert!(q.t >= 1e-6);
            prop_assert_eq!(q.kind, CrossingKind::Up);
            prop_assert!(q.x < 0.0);
        }
        let j = section::return_map_jacobian(&NH, &p, &spec, JacobianMethod::Variational, &cfg()).unwrap();
        prop_assert!(section::det2(&j) > 0.0);
    }

    #[test]
    fn moore_spiegel_jacobian_obeys_liouville(x in -1.0..1.0f64, z in 0.5..20.0f64) {
        // det DP = (f_y(p) / f_y(q)) exp(-tau) for a field with divergence -1.
        let spec = SectionSpec::for_system(&MS);
        let tight = cfg().with_tolerances(1e-12, 1e-14);
        let p = SectionPoint::on_plane(&MS, &spec, x, z).unwrap();
        let ret = section::first_return(&MS, &p, &spec, &tight).unwrap();
        prop_assume!(matches!(ret, ReturnOutcome::Returned(_)));
        let ReturnOutcome::Returned(q) = ret else { unreachable!() };
        let j = section::return_map_jacobian(&MS, &p, &spec, JacobianMethod::Variational, &tight).unwrap();
        let expected = p.z / q.z * (-q.t).exp();
        let det = section::det2(&j);
        let scale = (j[0][0] * j[1][1]).abs() + (j[0][1] * j[1][0]).abs();
        prop_assert!((det - expected).abs() < 1e-8 * scale, "{det} vs {expected}, scale {scale}");
    }
}

#[test]
fn up_crossings_stay_in_admissible_regions() {
    for (p, s0) in [(NH, State::new(1.0, 0.0, 0.0)), (MS, State::new(0.1, 0.0, 0.1))] {
        let spec = SectionSpec::for_system(&p);
        let traj = integrate(&p, s0, (0.0, 200.0), &cfg()).unwrap();
        let cross = section::detect_crossings(&traj, &spec).unwrap();
        let ups: Vec<_> = cross.iter().filter(|c| c.kind == CrossingKind::Up).collect();
        assert!(ups.len() >= 10);
        for c in ups {
            assert!(spec.admits(c.x, c.z), "{c:?}");
            assert!(c.speed > 1e-6);
        }
    }
}

#[test]
fn radial_asymptotic_error_shrinks_with_radius() {
    for p in [SystemParams::NoseHoover { q: 0.1 }, MS] {
        let mut errors = Vec::new();
        for r in [1e3, 1e4, 1e5] {
            let mut worst: f64 = 0.0;
            for i in 0..16 {
                for j in 0..32 {
                    let theta = (i as f64 + 0.5) * std::f64::consts::PI / 16.0;
                    let psi = 2.0 * std::f64::consts::PI * j as f64 / 32.0;
                    let dir = SphericalDirection::new(theta, psi).unwrap();
                    let (c, order) = fields::radial_asymptotic_coefficient(&p, dir).unwrap();
                    if c.abs() < 0.05 {
                        continue;
                    }
                    let v = fields::radial_component(&p, r, dir).unwrap() / r.powi(order);
                    worst = worst.max(((v - c) / c).abs());
                }
            }
            errors.push(worst);
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{p:?}: {errors:?}");
    }
}

#[test]
fn degree_is_stable_under_subdivision() {
    let small = SystemParams::MooreSpiegel { t: 27.0, r: 100.0 };
    for (p, radius) in [(small, 1e-2), (NH, 50.0), (SystemParams::NoseHoover { q: 0.1 }, 50.0)] {
        let a = numerical_degree(&p, State::ORIGIN, radius, 4).unwrap();
        let b = numerical_degree(&p, State::ORIGIN, radius, 5).unwrap();
        assert_eq!(a.numerical_degree, b.numerical_degree);
        assert!((a.raw_degree - b.raw_degree).abs() < 0.05);
    }
}

#[test]
fn analytic_index_is_minus_sign_of_t() {
    for t in [1.0, 27.0, 100.0, -1.0, -27.0, -100.0] {
        let p = SystemParams::MooreSpiegel { t, r: 100.0 };
        let expected = if t > 0.0 { -1 } else { 1 };
        assert_eq!(analytic_index(&p, State::ORIGIN).unwrap(), expected, "T = {t}");
    }
}

#[test]
fn periodic_orbits_cross_transversally() {
    let census = orbit_census(&MS, State::new(0.1, 0.0, 0.1), 500.0, 12, &cfg()).unwrap();
    assert!(!census.orbits.is_empty());
    for o in &census.orbits {
        assert_eq!(o.section_points.len(), o.n_strands);
        assert!(o.section_points.iter().all(|p| p.speed > 1e-6));
        assert!(o.residual < 1e-9);
    }
}

/// Points of the branch traced from its seed by dense output, paired with
/// arclength measured from the origin.
fn arclength_samples(b: &ManifoldBranch) -> Vec<(f64, State)> {
    let t_end = *b.times.last().unwrap();
    let traj = integrate_backward(&MS, b.polyline[0], (0.0, t_end), &cfg()).unwrap();
    let n = 100_000;
    let mut s = b.polyline[0].norm();
    let mut prev = traj.state_at(0.0);
    let mut out = vec![(s, prev)];
    for k in 1..=n {
        let q = traj.state_at(t_end * k as f64 / n as f64);
        s += dist(q, prev);
        out.push((s, q));
        prev = q;
    }
    out
}

fn point_at(curve: &[(f64, State)], s: f64) -> State {
    let i = curve.partition_point(|p| p.0 < s).clamp(1, curve.len() - 1);
    let ((s0, a), (s1, b)) = (curve[i - 1], curve[i]);
    let u = (s - s0) / (s1 - s0);
    State::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.z + u * (b.z - a.z))
}

#[test]
fn manifold_is_independent_of_seed_offset() {
    let eps = 1e-6;
    let (a, _) = orbits::trace_stable_manifold(&MS, eps, 100.0, &cfg()).unwrap();
    let (b, _) = orbits::trace_stable_manifold(&MS, eps / 2.0, 100.0, &cfg()).unwrap();
    let (ca, cb) = (arclength_samples(&a), arclength_samples(&b));
    let mut worst: f64 = 0.0;
    for &(s, pa) in ca.iter().step_by(20) {
        if pa.norm() > 50.0 {
            break;
        }
        worst = worst.max(dist(pa, point_at(&cb, s)));
    }
    assert!(worst < 10.0 * eps, "{worst}");
}

#[test]
fn exit_time_is_continuous_along_l1() {
    let s: Vec<f64> = (0..=1200).map(|k| 0.9 + 1e-3 * k as f64).collect();
    let curve = orbits::exit_time_sweep(&MS, Arc::L1, &s, &cfg()).unwrap();
    for w in curve.records.windows(2) {
        if w[0].exit_surface == w[1].exit_surface {
            let (a, b) = (w[0].t_exit.unwrap(), w[1].t_exit.unwrap());
            assert!((a - b).abs() < 0.5, "jump at s = {}: {a} -> {b}", w[1].s);
        }
    }
}
