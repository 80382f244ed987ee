use flowknot::claims::{Criterion, Suite, SuiteConfig};
use flowknot::io;
use flowknot::ode::IntegratorConfig;
use flowknot::orbits::{self, Arc};
use flowknot::section::{self, SectionPoint, SectionSpec};
use flowknot::topo::{alexander_polynomial, extract_braid, KnotVerdict, LaurentPoly};
use flowknot::{State, SystemParams};

#[test]
fn hopf_orbit_to_braid_export() {
    let p = SystemParams::ValidationHopf { mu: 2.0, omega: 3.0 };
    let spec = SectionSpec::for_system(&p);
    let cfg = IntegratorConfig::default();
    let guess = SectionPoint::on_plane(&p, &spec, 1.0, 0.3).unwrap();
    let orbit = orbits::find_periodic_orbit(&p, &guess, &spec, 1, &cfg).unwrap();
    assert!((orbit.period - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-8);
    assert!((orbit.section_points[0].x - 2f64.sqrt()).abs() < 1e-8);

    let braid = extract_braid(&orbit, &p, &cfg).unwrap();
    assert_eq!(braid.verdict, KnotVerdict::CertifiedUnknot);
    let v = serde_json::to_value(&braid).unwrap();
    for key in ["n_strands", "word_up", "word_down", "alexander", "verdict"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let back: LaurentPoly = serde_json::from_value(v["alexander"].clone()).unwrap();
    assert_eq!(back, LaurentPoly::one());
}

#[test]
fn moore_spiegel_period_one_orbit_is_an_unknot() {
    let p = SystemParams::MooreSpiegel { t: 27.0, r: 100.0 };
    let cfg = IntegratorConfig::default();
    let census = flowknot::claims::orbit_census(&p, State::new(0.1, 0.0, 0.1), 500.0, 12, &cfg).unwrap();
    let o = census.orbits.iter().find(|o| o.n_strands == 1).expect("period-one orbit");
    assert!((o.period - 1.607028).abs() < 1e-5);
    let b = extract_braid(o, &p, &cfg).unwrap();
    assert_eq!(b.verdict, KnotVerdict::CertifiedUnknot);
    assert_eq!(b.up_strands, b.down_strands);
}

#[test]
fn braid_words_and_closures() {
    let trefoil = alexander_polynomial(&[1, 1, 1], 2).unwrap();
    assert_eq!(trefoil.to_string(), "t^2 - t + 1");
    let figure_eight = alexander_polynomial(&[1, -2, 1, -2], 3).unwrap();
    assert_eq!(figure_eight, LaurentPoly::new(0, vec![1, -3, 1]));
    assert!(alexander_polynomial(&[1, 3], 3).is_err());
}

#[test]
fn suite_reports_are_reproducible() {
    let run = || {
        let mut s = Suite::new(SuiteConfig::default());
        let mut entries = Vec::new();
        for c in [Criterion::InvariantLine, Criterion::SectionStructure, Criterion::ManifoldAndTrapping] {
            entries.extend(s.run_criterion(c));
        }
        io::to_json(&entries).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn csv_exports() {
    let p = SystemParams::MooreSpiegel { t: 27.0, r: 100.0 };
    let cfg = IntegratorConfig::default();
    let curve = orbits::exit_time_sweep(&p, Arc::L1, &[0.1, 1.0], &cfg).unwrap();
    let csv = io::sweep_csv(&curve);
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["s", "t_exit", "exit_surface", "x", "y", "z"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][2], "H1");

    let spec = SectionSpec::for_system(&p);
    let traj = flowknot::ode::integrate(&p, State::new(0.1, 0.0, 0.1), (0.0, 20.0), &cfg).unwrap();
    let pts = section::detect_crossings(&traj, &spec).unwrap();
    let csv = io::section_csv(&pts);
    assert_eq!(csv.lines().count(), pts.len() + 1);
    for line in csv.lines().skip(1) {
        let kind = line.rsplit(',').next().unwrap();
        assert!(["Up", "Down", "Tangent"].contains(&kind), "{kind}");
    }
}
