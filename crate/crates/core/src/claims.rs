//! End-to-end verification of the computable claims about both oscillators.
//!
//! Each [`Criterion`] produces one or more [`ClaimEntry`] records with the
//! measured values and the tolerances they were held to. Expensive
//! intermediate results (sphere degrees, orbit searches) are cached in the
//! [`Suite`] so that re-running with a different index rule is cheap.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Result;
use crate::fields::{self, SearchBox, SphericalDirection, State, SystemParams};
use crate::ode::{integrate, IntegratorConfig};
use crate::orbits::{self, Arc, ExitSurface, PeriodicOrbit};
use crate::section::{self, CrossingKind, SectionPoint, SectionSpec};
use crate::topo::braid::{self, KnotVerdict};
use crate::topo::degree::{self, IndexResult, IndexRule};
use crate::topo::laurent::LaurentPoly;
use crate::topo::spectrum::{self, StabilityClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimEntry {
    pub claim_id: String,
    pub anchor: String,
    pub status: ClaimStatus,
    pub measured: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, Value>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemSelection {
    NoseHoover,
    MooreSpiegel,
    Both,
}

impl SystemSelection {
    fn nose_hoover(&self) -> bool {
        matches!(self, SystemSelection::NoseHoover | SystemSelection::Both)
    }

    fn moore_spiegel(&self) -> bool {
        matches!(self, SystemSelection::MooreSpiegel | SystemSelection::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub systems: SystemSelection,
    pub index_rule: IndexRule,
    pub subdivision: u32,
    pub avoidance_samples: usize,
    pub integrator: IntegratorConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            systems: SystemSelection::Both,
            index_rule: IndexRule::Standard,
            subdivision: 5,
            avoidance_samples: 100_000,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimReport {
    pub config: SuiteConfig,
    pub entries: Vec<ClaimEntry>,
}

impl ClaimReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != ClaimStatus::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn failures(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.status == ClaimStatus::Fail)
            .map(|e| e.claim_id.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    FixedPointCensus,
    InvariantLine,
    RadialAsymptotics,
    IndexAndDegree,
    PoincareHopf,
    RouthHurwitz,
    SectionStructure,
    HopfOrbit,
    MultiplierProductLaw,
    BraidStructure,
    ManifoldAndTrapping,
    NegativeControl,
}

impl Criterion {
    pub const ALL: [Criterion; 12] = [
        Criterion::FixedPointCensus,
        Criterion::InvariantLine,
        Criterion::RadialAsymptotics,
        Criterion::IndexAndDegree,
        Criterion::PoincareHopf,
        Criterion::RouthHurwitz,
        Criterion::SectionStructure,
        Criterion::HopfOrbit,
        Criterion::MultiplierProductLaw,
        Criterion::BraidStructure,
        Criterion::ManifoldAndTrapping,
        Criterion::NegativeControl,
    ];

    pub fn number(&self) -> usize {
        Self::ALL.iter().position(|c| c == self).unwrap() + 1
    }

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::FixedPointCensus => "fixed-point census",
            Criterion::InvariantLine => "invariant line",
            Criterion::RadialAsymptotics => "radial asymptotics",
            Criterion::IndexAndDegree => "index and degree",
            Criterion::PoincareHopf => "Poincare-Hopf consistency",
            Criterion::RouthHurwitz => "Routh-Hurwitz",
            Criterion::SectionStructure => "section structure",
            Criterion::HopfOrbit => "orbit pipeline oracle",
            Criterion::MultiplierProductLaw => "multiplier product law",
            Criterion::BraidStructure => "braid structure",
            Criterion::ManifoldAndTrapping => "manifold and trapping",
            Criterion::NegativeControl => "negative control",
        }
    }
}

/// Ids of the claims whose verdict depends on the index rule.
pub const INDEX_CLAIMS: [&str; 2] = ["index.analytic", "poincare-hopf.moore-spiegel"];

const NH_PARAMS: [f64; 3] = [0.1, 1.0, 10.0];
const MS_PARAMS: [(f64, f64); 2] = [(27.0, 100.0), (39.25, 100.0)];
const LARGE_RADIUS: f64 = 50.0;
const SMALL_RADIUS: f64 = 1e-2;

struct Builder {
    id: String,
    anchor: String,
    measured: BTreeMap<String, Value>,
    tolerances: BTreeMap<String, Value>,
}

impl Builder {
    fn new(id: &str, anchor: &str) -> Self {
        Self {
            id: id.into(),
            anchor: anchor.into(),
            measured: BTreeMap::new(),
            tolerances: BTreeMap::new(),
        }
    }

    fn measure(mut self, key: &str, v: impl Serialize) -> Self {
        self.measured.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    fn tolerance(mut self, key: &str, v: impl Serialize) -> Self {
        self.tolerances.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    fn finish(self, status: ClaimStatus, detail: impl Into<String>) -> ClaimEntry {
        ClaimEntry {
            claim_id: self.id,
            anchor: self.anchor,
            status,
            measured: self.measured,
            tolerances: self.tolerances,
            detail: detail.into(),
        }
    }

    fn verdict(self, ok: bool, detail: impl Into<String>) -> ClaimEntry {
        self.finish(if ok { ClaimStatus::Pass } else { ClaimStatus::Fail }, detail)
    }

    fn error(self, e: impl std::fmt::Display) -> ClaimEntry {
        self.finish(ClaimStatus::Fail, format!("error: {e}"))
    }
}

fn nh(q: f64) -> SystemParams {
    SystemParams::NoseHoover { q }
}

fn ms(t: f64, r: f64) -> SystemParams {
    SystemParams::MooreSpiegel { t, r }
}

fn label(p: &SystemParams) -> String {
    match p {
        SystemParams::NoseHoover { q } => format!("nose-hoover(Q={q})"),
        SystemParams::MooreSpiegel { t, r } => format!("moore-spiegel(T={t},R={r})"),
        SystemParams::ValidationHopf { mu, omega } => format!("hopf(mu={mu},omega={omega})"),
        SystemParams::Custom { .. } => "custom".into(),
    }
}

/// Orbits found for one parameter set by the recurrence-seeded search.
#[derive(Debug, Clone)]
pub struct OrbitCensus {
    pub params: SystemParams,
    pub orbits: Vec<PeriodicOrbit>,
    pub candidates: usize,
    pub best_failed_residual: Option<f64>,
    pub scan_best_distance: Option<f64>,
}

/// Searches for periodic orbits seeded by near-returns of a long trajectory
/// from `start`, keeping distinct converged orbits.
pub fn orbit_census(
    params: &SystemParams,
    start: State,
    t_span: f64,
    max_seeds: usize,
    cfg: &IntegratorConfig,
) -> Result<OrbitCensus> {
    let spec = SectionSpec::for_system(params);
    let long = cfg.with_t_max(t_span);
    let traj = integrate(params, start, (0.0, t_span), &long)?;
    let cands = orbits::recurrence_scan(params, &traj, &spec, 0.5, 4)?;
    let mut found: Vec<PeriodicOrbit> = Vec::new();
    let mut best_failed: Option<f64> = None;
    for c in cands.iter().take(max_seeds) {
        let known = found.iter().any(|o| {
            o.section_points
                .iter()
                .any(|p| (p.x - c.point.x).hypot(p.z - c.point.z) < 1e-3)
        });
        if known {
            continue;
        }
        match orbits::find_periodic_orbit(params, &c.point, &spec, c.n_return, cfg) {
            Ok(o) => {
                let dup = found.iter().any(|f| {
                    f.n_strands == o.n_strands
                        && f.section_points.iter().any(|p| {
                            (p.x - o.section_points[0].x).hypot(p.z - o.section_points[0].z) < 1e-6
                        })
                });
                if !dup {
                    found.push(o);
                }
            }
            Err(crate::Error::SearchFailure { best_residual, .. }) => {
                best_failed = Some(best_failed.map_or(best_residual, |b: f64| b.min(best_residual)));
            }
            Err(_) => {}
        }
    }
    Ok(OrbitCensus {
        params: params.clone(),
        orbits: found,
        candidates: cands.len(),
        best_failed_residual: best_failed,
        scan_best_distance: cands.first().map(|c| c.distance),
    })
}

fn census_start(p: &SystemParams) -> State {
    match p {
        SystemParams::MooreSpiegel { .. } => State::new(0.1, 0.0, 0.1),
        _ => State::new(1.0, 0.0, 0.0),
    }
}

/// Runs criteria and caches expensive intermediate results.
pub struct Suite {
    pub config: SuiteConfig,
    degrees: BTreeMap<String, std::result::Result<IndexResult, String>>,
    censuses: BTreeMap<String, std::result::Result<OrbitCensus, String>>,
}

impl Suite {
    pub fn new(config: SuiteConfig) -> Self {
        Self {
            config,
            degrees: BTreeMap::new(),
            censuses: BTreeMap::new(),
        }
    }

    pub fn set_index_rule(&mut self, rule: IndexRule) {
        self.config.index_rule = rule;
    }

    fn degree(&mut self, p: &SystemParams, radius: f64) -> std::result::Result<IndexResult, String> {
        let key = format!("{}@{radius}", label(p));
        let sub = self.config.subdivision;
        self.degrees
            .entry(key)
            .or_insert_with(|| {
                degree::numerical_degree(p, State::ORIGIN, radius, sub).map_err(|e| e.to_string())
            })
            .clone()
    }

    fn census(&mut self, p: &SystemParams) -> std::result::Result<OrbitCensus, String> {
        let cfg = self.config.integrator;
        self.censuses
            .entry(label(p))
            .or_insert_with(|| orbit_census(p, census_start(p), 500.0, 12, &cfg).map_err(|e| e.to_string()))
            .clone()
    }

    pub fn run_all(&mut self) -> ClaimReport {
        let mut entries = Vec::new();
        for c in Criterion::ALL {
            entries.extend(self.run_criterion(c));
        }
        ClaimReport {
            config: self.config.clone(),
            entries,
        }
    }

    pub fn run_criterion(&mut self, c: Criterion) -> Vec<ClaimEntry> {
        match c {
            Criterion::FixedPointCensus => self.fixed_point_census(),
            Criterion::InvariantLine => self.invariant_line(),
            Criterion::RadialAsymptotics => self.radial_asymptotics(),
            Criterion::IndexAndDegree => self.index_and_degree(),
            Criterion::PoincareHopf => self.poincare_hopf(),
            Criterion::RouthHurwitz => self.routh_hurwitz(),
            Criterion::SectionStructure => self.section_structure(),
            Criterion::HopfOrbit => self.hopf_orbit(),
            Criterion::MultiplierProductLaw => self.multiplier_product_law(),
            Criterion::BraidStructure => self.braid_structure(),
            Criterion::ManifoldAndTrapping => self.manifold_and_trapping(),
            Criterion::NegativeControl => self.negative_control(),
        }
    }

    fn fixed_point_census(&mut self) -> Vec<ClaimEntry> {
        let mut out = Vec::new();
        let search = SearchBox::cube(20.0);
        if self.config.systems.nose_hoover() {
            let b = Builder::new(
                "census.nose-hoover",
                "the Nose-Hoover field has no fixed points",
            )
            .tolerance("search_box_half_width", 20.0);
            let mut counts = BTreeMap::new();
            let mut err = None;
            for q in NH_PARAMS {
                match fields::fixed_points(&nh(q), &search) {
                    Ok(f) => {
                        counts.insert(format!("Q={q}"), f.len());
                    }
                    Err(e) => err = Some(e),
                }
            }
            out.push(match err {
                Some(e) => b.error(e),
                None => {
                    let ok = counts.values().all(|c| *c == 0);
                    b.measure("fixed_point_counts", &counts).verdict(ok, "")
                }
            });
        }
        if self.config.systems.moore_spiegel() {
            let b = Builder::new(
                "census.moore-spiegel",
                "the Moore-Spiegel field has exactly one fixed point, the origin",
            )
            .tolerance("search_box_half_width", 20.0)
            .tolerance("origin_distance", 1e-9);
            let mut found = BTreeMap::new();
            let mut ok = true;
            let mut err = None;
            for (t, r) in MS_PARAMS {
                match fields::fixed_points(&ms(t, r), &search) {
                    Ok(f) => {
                        let pts: Vec<State> = f.iter().map(|p| p.state).collect();
                        ok &= pts.len() == 1 && pts[0].norm() < 1e-9;
                        found.insert(format!("T={t},R={r}"), pts);
                    }
                    Err(e) => err = Some(e),
                }
            }
            out.push(match err {
                Some(e) => b.error(e),
                None => b.measure("fixed_points", &found).verdict(ok, ""),
            });
        }
        out
    }

    fn invariant_line(&mut self) -> Vec<ClaimEntry> {
        if !self.config.systems.nose_hoover() {
            return Vec::new();
        }
        let b = Builder::new(
            "invariant-line",
            "the z-axis is a Nose-Hoover flow line traversed at unit speed downward",
        )
        .tolerance("max_xy", 1e-9)
        .tolerance("max_z_error", 1e-8);
        let traj = match integrate(&nh(1.0), State::new(0.0, 0.0, 5.0), (0.0, 10.0), &self.config.integrator) {
            Ok(t) => t,
            Err(e) => return vec![b.error(e)],
        };
        let mut max_xy: f64 = 0.0;
        let mut max_z: f64 = 0.0;
        let mut check = |t: f64, s: State| {
            max_xy = max_xy.max(s.x.abs()).max(s.y.abs());
            max_z = max_z.max((s.z - (5.0 - t)).abs());
        };
        for (t, s) in traj.samples() {
            check(t, s);
        }
        for k in 0..=1000 {
            let t = 0.01 * k as f64;
            check(t, traj.state_at(t));
        }
        let ok = max_xy < 1e-9 && max_z < 1e-8 && traj.t_end() == 10.0;
        vec![b
            .measure("max_xy", max_xy)
            .measure("max_z_error", max_z)
            .verdict(ok, "")]
    }

    fn radial_asymptotics(&mut self) -> Vec<ClaimEntry> {
        let mut cases = Vec::new();
        if self.config.systems.nose_hoover() {
            cases.push((
                "radial-asymptotics.nose-hoover",
                "on large spheres the Nose-Hoover radial component is independent of r at leading order and depends only on direction",
                vec![(nh(0.1), 1e4), (nh(1.0), 1e4)],
            ));
        }
        if self.config.systems.moore_spiegel() {
            cases.push((
                "radial-asymptotics.moore-spiegel",
                "on large spheres the Moore-Spiegel radial component is dominated by the cubic term",
                vec![(ms(27.0, 100.0), 1e3)],
            ));
        }
        let mut out = Vec::new();
        for (id, anchor, systems) in cases {
            let b = Builder::new(id, anchor)
                .tolerance("max_relative_error", 0.01)
                .tolerance("mask_fraction_of_max_coefficient", MASK_FRACTION)
                .tolerance("grid", [64, 128]);
            let mut errors = BTreeMap::new();
            let mut ok = true;
            let mut failure = None;
            for (p, r) in systems {
                match radial_error(&p, r) {
                    Ok((err, n)) => {
                        ok &= err < 0.01;
                        errors.insert(label(&p), json!({"radius": r, "max_relative_error": err, "points": n}));
                    }
                    Err(e) => failure = Some(e),
                }
            }
            out.push(match failure {
                Some(e) => b.error(e),
                None => b.measure("cases", &errors).verdict(ok, ""),
            });
        }
        out
    }

    fn index_and_degree(&mut self) -> Vec<ClaimEntry> {
        let mut out = Vec::new();
        let rule = self.config.index_rule;
        if self.config.systems.moore_spiegel() {
            let b = Builder::new(
                "index.analytic",
                "the index of the Moore-Spiegel origin is -1 for T > 0 (sign of the Jacobian determinant)",
            )
            .tolerance("expected_index", -1);
            let mut idx = BTreeMap::new();
            let mut ok = true;
            let mut failure = None;
            for (t, r) in MS_PARAMS {
                match degree::analytic_index_with(&ms(t, r), State::ORIGIN, rule) {
                    Ok(i) => {
                        ok &= i == -1;
                        idx.insert(format!("T={t},R={r}"), i);
                    }
                    Err(e) => failure = Some(e),
                }
            }
            out.push(match failure {
                Some(e) => b.error(e),
                None => b.measure("index", &idx).measure("index_rule", rule).verdict(ok, ""),
            });

            for (id, radius, anchor) in [
                ("degree.small-sphere.moore-spiegel", SMALL_RADIUS, "the degree of F/|F| on a small sphere about the Moore-Spiegel origin is its index, -1"),
                ("degree.large-sphere.moore-spiegel", LARGE_RADIUS, "the degree of F/|F| on a large sphere for Moore-Spiegel is -1"),
            ] {
                out.push(self.degree_claim(id, anchor, &MS_PARAMS.map(|(t, r)| ms(t, r)), radius, -1));
            }
        }
        if self.config.systems.nose_hoover() {
            out.push(self.degree_claim(
                "degree.large-sphere.nose-hoover",
                "the Nose-Hoover direction field has degree 0 on large spheres",
                &NH_PARAMS.map(nh),
                LARGE_RADIUS,
                0,
            ));
            let b = Builder::new(
                "avoidance.nose-hoover",
                "on a large sphere the Nose-Hoover field never points in the (0, 0, 1) direction",
            )
            .tolerance("min_angle_lower_bound_exclusive", 0.0)
            .tolerance("samples", self.config.avoidance_samples);
            out.push(
                match degree::direction_avoidance(&nh(1.0), LARGE_RADIUS, [0.0, 0.0, 1.0], self.config.avoidance_samples, 0) {
                    Ok(a) => {
                        let cross = self.degree(&nh(1.0), LARGE_RADIUS).ok().map(|d| d.numerical_degree);
                        b.measure("min_angle", a.min_angle)
                            .measure("argmin", a.argmin)
                            .measure("degree_cross_check", cross)
                            .verdict(a.min_angle > 0.0 && cross == Some(0), "")
                    }
                    Err(e) => b.error(e),
                },
            );
        }
        out
    }

    fn degree_claim(
        &mut self,
        id: &str,
        anchor: &str,
        systems: &[SystemParams],
        radius: f64,
        expected: i32,
    ) -> ClaimEntry {
        let b = Builder::new(id, anchor)
            .tolerance("expected_degree", expected)
            .tolerance("radius", radius)
            .tolerance("rounding_guard", degree::ROUNDING_GUARD)
            .tolerance("subdivision", self.config.subdivision);
        let mut measured = BTreeMap::new();
        let mut ok = true;
        for p in systems {
            match self.degree(p, radius) {
                Ok(d) => {
                    ok &= d.numerical_degree == expected
                        && (d.raw_degree - d.numerical_degree as f64).abs() < degree::ROUNDING_GUARD;
                    measured.insert(
                        label(p),
                        json!({"degree": d.numerical_degree, "raw_degree": d.raw_degree, "triangles": d.triangles}),
                    );
                }
                Err(e) => return b.measure("partial", &measured).error(e),
            }
        }
        b.measure("degrees", &measured).verdict(ok, "")
    }

    fn poincare_hopf(&mut self) -> Vec<ClaimEntry> {
        let rule = self.config.index_rule;
        let mut groups: Vec<(&str, &str, Vec<SystemParams>)> = Vec::new();
        if self.config.systems.nose_hoover() {
            groups.push((
                "poincare-hopf.nose-hoover",
                "large-sphere degree equals the sum of enclosed indices (none for Nose-Hoover)",
                NH_PARAMS.map(nh).to_vec(),
            ));
        }
        if self.config.systems.moore_spiegel() {
            groups.push((
                "poincare-hopf.moore-spiegel",
                "large-sphere degree equals the sum of enclosed indices (the origin for Moore-Spiegel)",
                MS_PARAMS.map(|(t, r)| ms(t, r)).to_vec(),
            ));
        }
        let mut out = Vec::new();
        for (id, anchor, systems) in groups {
            let b = Builder::new(id, anchor)
                .tolerance("radius", LARGE_RADIUS)
                .tolerance("index_rule", rule);
            let mut measured = BTreeMap::new();
            let mut ok = true;
            let mut failure = None;
            for p in &systems {
                let d = match self.degree(p, LARGE_RADIUS) {
                    Ok(d) => d,
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                };
                let sum = degree::enclosed_index_sum(p, &[0.0; 3], LARGE_RADIUS, rule);
                ok &= sum == Some(d.numerical_degree);
                measured.insert(label(p), json!({"degree": d.numerical_degree, "index_sum": sum}));
            }
            out.push(match failure {
                Some(e) => b.error(e),
                None => b.measure("cases", &measured).verdict(ok, ""),
            });
        }
        out
    }

    fn routh_hurwitz(&mut self) -> Vec<ClaimEntry> {
        if !self.config.systems.moore_spiegel() {
            return Vec::new();
        }
        let grid: Vec<f64> = (0..10).map(|k| 1.0 + 11.0 * k as f64).collect();
        let b = Builder::new(
            "routh-hurwitz.grid",
            "the Routh-Hurwitz triple of the origin is (1, -R, T), so the origin is never a sink for R > 0",
        )
        .tolerance("rh_triple", "exact")
        .tolerance("grid", &grid);
        let mut mismatches = Vec::new();
        let mut min_max_re = f64::INFINITY;
        let mut sinks = 0;
        for &t in &grid {
            for &r in &grid {
                match spectrum::classify_spectrum(&ms(t, r), State::ORIGIN) {
                    Ok(s) => {
                        let rh = s.rh_triple;
                        if (rh.a, rh.ab_minus_c, rh.c) != (1.0, -r, t) {
                            mismatches.push(json!({"T": t, "R": r, "rh": rh}));
                        }
                        min_max_re = min_max_re.min(s.max_real_part());
                        if s.class == StabilityClass::Sink {
                            sinks += 1;
                        }
                    }
                    Err(e) => return vec![b.error(e)],
                }
            }
        }
        let ok = mismatches.is_empty() && min_max_re > 0.0 && sinks == 0;
        let grid_entry = b
            .measure("mismatches", &mismatches)
            .measure("min_of_max_real_part", min_max_re)
            .measure("sinks", sinks)
            .verdict(ok, "");

        let b = Builder::new(
            "routh-hurwitz.plane-angle",
            "the unstable plane at the origin is transverse to the section plane",
        )
        .tolerance("min_angle", 1e-3);
        let angle_entry = match spectrum::classify_spectrum(&ms(27.0, 100.0), State::ORIGIN) {
            Ok(s) => {
                let a = s.unstable_plane_section_angle;
                b.measure("angle", a).measure("class", s.class).verdict(a.is_some_and(|a| a > 1e-3), "")
            }
            Err(e) => b.error(e),
        };
        vec![grid_entry, angle_entry]
    }

    fn section_structure(&mut self) -> Vec<ClaimEntry> {
        if !self.config.systems.nose_hoover() {
            return Vec::new();
        }
        let b = Builder::new(
            "section.structure",
            "Up crossings of y = 0 lie in x < 0, alternate with Down crossings and are transverse",
        )
        .tolerance("min_up_crossings", 10)
        .tolerance("min_speed", 1e-6);
        let p = nh(1.0);
        let spec = SectionSpec::for_system(&p);
        let crossings = integrate(&p, State::new(1.0, 0.0, 0.0), (0.0, 200.0), &self.config.integrator)
            .and_then(|traj| section::detect_crossings(&traj, &spec));
        let crossings = match crossings {
            Ok(c) => c,
            Err(e) => return vec![b.error(e)],
        };
        let ups: Vec<&SectionPoint> = crossings.iter().filter(|c| c.kind == CrossingKind::Up).collect();
        let max_up_x = ups.iter().map(|c| c.x).fold(f64::NEG_INFINITY, f64::max);
        let kinds: Vec<CrossingKind> = crossings
            .iter()
            .map(|c| c.kind)
            .filter(|k| *k != CrossingKind::Tangent)
            .collect();
        let alternating = kinds.windows(2).all(|w| w[0] != w[1]);
        let min_speed = crossings.iter().map(|c| c.speed).fold(f64::INFINITY, f64::min);
        let ok = ups.len() >= 10 && max_up_x < 0.0 && alternating && min_speed > 1e-6;
        vec![b
            .measure("crossings", crossings.len())
            .measure("up_crossings", ups.len())
            .measure("max_up_x", max_up_x)
            .measure("alternating", alternating)
            .measure("min_speed", min_speed)
            .verdict(ok, "")]
    }

    fn hopf_orbit(&mut self) -> Vec<ClaimEntry> {
        let b = Builder::new(
            "orbit.hopf-oracle",
            "the validation limit cycle has period 2 pi, radial multiplier exp(-4 pi) and is an unknot",
        )
        .tolerance("period", 1e-8)
        .tolerance("radial_multiplier", 1e-6)
        .tolerance("residual", 1e-9);
        let p = SystemParams::ValidationHopf { mu: 1.0, omega: 1.0 };
        let spec = SectionSpec::for_system(&p);
        let cfg = self.config.integrator;
        let res = SectionPoint::on_plane(&p, &spec, 1.2, 0.0)
            .and_then(|g| orbits::find_periodic_orbit(&p, &g, &spec, 1, &cfg))
            .and_then(|o| braid::extract_braid(&o, &p, &cfg).map(|b| (o, b)));
        let (orbit, braid) = match res {
            Ok(v) => v,
            Err(e) => return vec![b.error(e)],
        };
        let radial = (-4.0 * PI).exp();
        let m = orbit
            .multipliers
            .iter()
            .map(|m| (m.re - radial).hypot(m.im))
            .fold(f64::INFINITY, f64::min);
        let dp = (orbit.period - 2.0 * PI).abs();
        let ok = dp < 1e-8 && m < 1e-6 && orbit.residual < 1e-9 && braid.verdict == KnotVerdict::CertifiedUnknot;
        vec![b
            .measure("period", orbit.period)
            .measure("period_error", dp)
            .measure("multipliers", orbit.multipliers)
            .measure("radial_multiplier_error", m)
            .measure("residual", orbit.residual)
            .measure("verdict", braid.verdict)
            .verdict(ok, "")]
    }

    fn multiplier_product_law(&mut self) -> Vec<ClaimEntry> {
        if !self.config.systems.moore_spiegel() {
            return Vec::new();
        }
        let b = Builder::new(
            "orbit.multiplier-product",
            "the Moore-Spiegel divergence is -1, so the multipliers of a period-T orbit multiply to exp(-T)",
        )
        .tolerance("relative_error", 1e-5);
        let mut rows = Vec::new();
        let mut ok = true;
        let mut primary_found = false;
        let mut scan = BTreeMap::new();
        for (t, r) in MS_PARAMS {
            let p = ms(t, r);
            let census = match self.census(&p) {
                Ok(c) => c,
                Err(e) => return vec![b.error(e)],
            };
            if (t, r) == MS_PARAMS[0] {
                primary_found = !census.orbits.is_empty();
            }
            scan.insert(
                label(&p),
                json!({
                    "candidates": census.candidates,
                    "scan_best_distance": census.scan_best_distance,
                    "best_failed_residual": census.best_failed_residual,
                }),
            );
            for o in &census.orbits {
                let [m1, m2] = o.multipliers;
                let prod = (m1.re * m2.re - m1.im * m2.im, m1.re * m2.im + m1.im * m2.re);
                let expected = (-o.period).exp();
                let rel = (prod.0 - expected).hypot(prod.1) / expected;
                ok &= rel < 1e-5;
                rows.push(json!({
                    "params": label(&p),
                    "n_strands": o.n_strands,
                    "period": o.period,
                    "residual": o.residual,
                    "relative_error": rel,
                }));
            }
        }
        let b = b.measure("orbits", &rows).measure("scan", &scan);
        if !primary_found {
            return vec![b.finish(
                ClaimStatus::Skipped,
                "no orbit converged from the recurrence seeds at T = 27, R = 100",
            )];
        }
        vec![b.verdict(ok, "")]
    }

    fn braid_structure(&mut self) -> Vec<ClaimEntry> {
        let mut systems: Vec<SystemParams> = Vec::new();
        if self.config.systems.nose_hoover() {
            systems.extend(NH_PARAMS.map(nh));
        }
        if self.config.systems.moore_spiegel() {
            systems.extend(MS_PARAMS.map(|(t, r)| ms(t, r)));
        }
        let cfg = self.config.integrator;
        let counts = Builder::new(
            "braid.strand-counts",
            "the two half-space pieces of a periodic orbit are braids on the same number of strands",
        )
        .tolerance("equal_counts", true);
        let unknots = Builder::new(
            "braid.period-one-unknot",
            "a periodic orbit crossing the section once is an unknot",
        )
        .tolerance("verdict", KnotVerdict::CertifiedUnknot);
        let mut rows = Vec::new();
        let mut counts_ok = true;
        let mut unknot_ok = true;
        let mut period_one = 0;
        let mut failure = None;
        for p in &systems {
            let census = match self.census(p) {
                Ok(c) => c,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            };
            for o in &census.orbits {
                match braid::extract_braid(o, p, &cfg) {
                    Ok(b) => {
                        let equal = b.up_strands == b.down_strands
                            && b.up_strands == o.n_strands
                            && o.down_crossings.len() == o.n_strands;
                        counts_ok &= equal;
                        if o.n_strands == 1 {
                            period_one += 1;
                            unknot_ok &= b.verdict == KnotVerdict::CertifiedUnknot;
                        }
                        rows.push(json!({
                            "params": label(p),
                            "n_strands": o.n_strands,
                            "up_crossings": o.section_points.len(),
                            "down_crossings": o.down_crossings.len(),
                            "period": o.period,
                            "word_up": b.word_up,
                            "word_down": b.word_down,
                            "alexander": b.alexander.to_string(),
                            "verdict": b.verdict,
                        }));
                    }
                    Err(e) => {
                        counts_ok = false;
                        rows.push(json!({"params": label(p), "n_strands": o.n_strands, "error": e.to_string()}));
                    }
                }
            }
        }
        let mut out = Vec::new();
        match failure {
            Some(e) => {
                out.push(counts.error(&e));
                out.push(unknots.error(&e));
            }
            None => {
                out.push(counts.measure("orbits", &rows).verdict(counts_ok && !rows.is_empty(), ""));
                let u = unknots.measure("period_one_orbits", period_one);
                out.push(if period_one == 0 {
                    u.finish(ClaimStatus::Skipped, "no period-one orbit converged")
                } else {
                    u.verdict(unknot_ok, "")
                });
            }
        }

        let b = Builder::new(
            "braid.trefoil-fixture",
            "the braid closure of an explicit trefoil curve has Alexander polynomial t^2 - t + 1",
        )
        .tolerance("alexander", "t^2 - t + 1")
        .tolerance("verdict", KnotVerdict::NotUnknot);
        let axis = braid::BraidAxis { along: 2, across: 0 };
        out.push(match braid::braid_of_closed_curve(&braid::trefoil_fixture(), axis) {
            Ok(br) => {
                let ok = br.alexander == LaurentPoly::new(0, vec![1, -1, 1]) && br.verdict == KnotVerdict::NotUnknot;
                b.measure("word", br.word())
                    .measure("alexander", br.alexander.to_string())
                    .measure("verdict", br.verdict)
                    .verdict(ok, "")
            }
            Err(e) => b.error(e),
        });
        out
    }

    fn manifold_and_trapping(&mut self) -> Vec<ClaimEntry> {
        if !self.config.systems.moore_spiegel() {
            return Vec::new();
        }
        let p = ms(27.0, 100.0);
        let cfg = self.config.integrator;
        let mut out = Vec::new();
        let containment = Builder::new(
            "manifold.delta1-containment",
            "the stable manifold branch Delta1 is unbounded and trapped in the quadrant x >= 0, y <= 0",
        )
        .tolerance("containment", orbits::CONTAINMENT_TOLERANCE)
        .tolerance("target_norm", orbits::DEFAULT_REACHED_NORM);
        let reflection = Builder::new(
            "manifold.point-reflection",
            "Delta2 is the point reflection of Delta1",
        )
        .tolerance("max_deviation", 1e-6);
        match orbits::trace_stable_manifold(&p, 1e-6, orbits::DEFAULT_REACHED_NORM, &cfg) {
            Ok((d1, d2)) => {
                let ok = d1.contained() && d1.reached_norm >= orbits::DEFAULT_REACHED_NORM;
                out.push(
                    containment
                        .measure("reached_norm", d1.reached_norm)
                        .measure("points", d1.polyline.len())
                        .measure("violation", d1.violation)
                        .measure("eigenvalue", d1.eigenvalue)
                        .verdict(ok, ""),
                );
                let dev = if d1.polyline.len() == d2.polyline.len() {
                    d1.polyline
                        .iter()
                        .zip(&d2.polyline)
                        .map(|(a, b)| (a.x + b.x).abs().max((a.y + b.y).abs()).max((a.z + b.z).abs()))
                        .fold(0.0, f64::max)
                } else {
                    f64::INFINITY
                };
                out.push(
                    reflection
                        .measure("max_deviation", dev)
                        .measure("delta2_reached_norm", d2.reached_norm)
                        .verdict(dev < 1e-6 && d2.reached_norm >= orbits::DEFAULT_REACHED_NORM, ""),
                );
            }
            Err(e) => {
                out.push(containment.error(&e));
                out.push(reflection.error(&e));
            }
        }

        let s_values = [0.1, 0.5, 1.0, 2.0, 5.0];
        let b = Builder::new(
            "sweep.l1-exit",
            "orbits leaving l1 exit the trapping quadrant through H1 or U in finite time",
        )
        .tolerance("s_values", s_values)
        .tolerance("containment", orbits::CONTAINMENT_TOLERANCE)
        .tolerance("on_surface", 1e-8);
        out.push(match orbits::exit_time_sweep(&p, Arc::L1, &s_values, &cfg) {
            Ok(curve) => {
                let mut ok = true;
                for r in &curve.records {
                    let on_surface = match (r.exit_surface, r.exit_state) {
                        (ExitSurface::H1, Some(e)) => e.x.abs() < 1e-8 && e.y < 0.0,
                        (ExitSurface::U, Some(e)) => e.y.abs() < 1e-8 && e.z > 0.0,
                        _ => false,
                    };
                    ok &= on_surface && r.t_exit.is_some_and(|t| t > 0.0) && r.violation.is_none();
                }
                b.measure("records", &curve.records).verdict(ok, "")
            }
            Err(e) => b.error(e),
        });
        out
    }

    fn negative_control(&mut self) -> Vec<ClaimEntry> {
        let b = Builder::new(
            "negative-control.index-sign",
            "flipping the sign in the index rule makes exactly the index claims fail",
        )
        .tolerance("expected_failures", INDEX_CLAIMS);
        if self.config.index_rule != IndexRule::Standard {
            return vec![b.finish(ClaimStatus::Skipped, "suite already runs with a mutated index rule")];
        }
        if !self.config.systems.moore_spiegel() {
            return vec![b.finish(ClaimStatus::Skipped, "no system with a nondegenerate fixed point selected")];
        }
        self.config.index_rule = IndexRule::FlippedSign;
        let mut entries = self.index_and_degree();
        entries.extend(self.poincare_hopf());
        self.config.index_rule = IndexRule::Standard;
        let failing: Vec<&str> = entries
            .iter()
            .filter(|e| e.status == ClaimStatus::Fail)
            .map(|e| e.claim_id.as_str())
            .collect();
        let ok = failing == INDEX_CLAIMS;
        vec![b.measure("mutated_failures", &failing).verdict(ok, "")]
    }
}

const MASK_FRACTION: f64 = 1e-2;

/// Largest relative error of `radial_component / r^order` against the
/// leading coefficient over a 64 x 128 direction grid, ignoring directions
/// where the coefficient is below `MASK_FRACTION` of its maximum.
fn radial_error(p: &SystemParams, r: f64) -> Result<(f64, usize)> {
    let mut samples = Vec::with_capacity(64 * 128);
    for i in 0..64 {
        let theta = (i as f64 + 0.5) * PI / 64.0;
        for j in 0..128 {
            let psi = 2.0 * PI * j as f64 / 128.0;
            let dir = SphericalDirection::new(theta, psi)?;
            let (c, order) = fields::radial_asymptotic_coefficient(p, dir)?;
            let v = fields::radial_component(p, r, dir)? / r.powi(order);
            samples.push((c, v));
        }
    }
    let cmax = samples.iter().map(|s| s.0.abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (c, v) in samples {
        if c.abs() >= MASK_FRACTION * cmax {
            worst = worst.max((v - c).abs() / c.abs());
            n += 1;
        }
    }
    Ok((worst, n))
}

/// Runs every criterion with `config`.
pub fn run_verification_suite(config: &SuiteConfig) -> ClaimReport {
    Suite::new(config.clone()).run_all()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_numbering() {
        assert_eq!(Criterion::FixedPointCensus.number(), 1);
        assert_eq!(Criterion::NegativeControl.number(), 12);
    }

    #[test]
    fn report_exit_code() {
        let pass = Builder::new("a", "x").verdict(true, "");
        let skip = Builder::new("b", "y").finish(ClaimStatus::Skipped, "");
        let fail = Builder::new("c", "z").verdict(false, "");
        let mut r = ClaimReport {
            config: SuiteConfig::default(),
            entries: vec![pass, skip],
        };
        assert_eq!(r.exit_code(), 0);
        r.entries.push(fail);
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.failures(), vec!["c"]);
    }

    #[test]
    fn radial_error_is_small() {
        let (e, n) = radial_error(&nh(0.1), 1e4).unwrap();
        assert!(e < 0.01 && n > 1000);
    }

    #[test]
    fn cheap_criteria_pass() {
        let mut suite = Suite::new(SuiteConfig::default());
        for c in [Criterion::InvariantLine, Criterion::RouthHurwitz, Criterion::SectionStructure, Criterion::HopfOrbit] {
            for e in suite.run_criterion(c) {
                assert_eq!(e.status, ClaimStatus::Pass, "{e:?}");
                assert!(!e.anchor.is_empty());
            }
        }
    }
}
