use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use flowknot::claims::{self, Suite, SuiteConfig, SystemSelection};
use flowknot::fields::{self, SearchBox, SystemParams};
use flowknot::io::{self, fmt_f64};
use flowknot::ode::{self, Termination};
use flowknot::orbits::{self, Arc};
use flowknot::section::{self, JacobianMethod, ReturnOutcome, SectionPoint, SectionSpec};
use flowknot::topo::{self, IndexRule};
use flowknot::State;

use crate::config::{ArcName, MethodName, OutputFormat, RunConfig, SystemName};
use crate::Command;

enum Failure {
    Usage(String),
    Run(flowknot::Error),
}

impl From<flowknot::Error> for Failure {
    fn from(e: flowknot::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<crate::config::ConfigError> for Failure {
    fn from(e: crate::config::ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

struct Output {
    result: Value,
    csv: Option<String>,
    exit: u8,
}

impl Output {
    fn json(result: impl Serialize) -> Result<Self, Failure> {
        Ok(Self {
            result: to_value(result)?,
            csv: None,
            exit: 0,
        })
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn to_value(v: impl Serialize) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Run(e.into()))
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Simulate { .. } => "simulate",
        Command::FieldEval { .. } => "field-eval",
        Command::SectionMap { .. } => "section-map",
        Command::FindOrbit(_) => "find-orbit",
        Command::ClassifyOrbit(_) => "classify-orbit",
        Command::Index { .. } => "index",
        Command::Degree { .. } => "degree",
        Command::Avoidance { .. } => "avoidance",
        Command::Spectrum { .. } => "spectrum",
        Command::Manifold { .. } => "manifold",
        Command::SweepExit { .. } => "sweep-exit",
        Command::VerifyClaims { .. } => "verify-claims",
        Command::ParseField => "parse-field",
    }
}

/// Runs `cmd` and writes its artifacts; returns the process exit status.
pub fn run(cmd: &Command, mut cfg: RunConfig) -> u8 {
    let command = name(cmd);
    match execute(cmd, &mut cfg) {
        Ok(out) => {
            if cfg.format == OutputFormat::Csv && out.csv.is_none() {
                eprintln!("error: {command} has no CSV output; use --format json");
                return 2;
            }
            let report = json!({"command": command, "config": cfg, "result": out.result});
            match emit(command, &cfg, &report, out.csv.as_deref()) {
                Ok(()) => out.exit,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            let report = json!({
                "command": command,
                "config": cfg,
                "error": {"kind": e.kind(), "message": e.to_string()},
            });
            let text = io::to_json(&report).unwrap_or_default();
            match &cfg.out {
                Some(dir) => {
                    let _ = io::write_atomic(&dir.join(format!("{command}.error.json")), text.as_bytes());
                }
                None => write_stdout(&text),
            }
            1
        }
    }
}

fn emit(command: &str, cfg: &RunConfig, report: &Value, csv: Option<&str>) -> flowknot::Result<()> {
    let json = io::to_json(report)?;
    match &cfg.out {
        Some(dir) => {
            io::write_atomic(&dir.join(format!("{command}.json")), json.as_bytes())?;
            if let (OutputFormat::Csv, Some(csv)) = (cfg.format, csv) {
                io::write_atomic(&dir.join(format!("{command}.csv")), csv.as_bytes())?;
            }
        }
        None => match (cfg.format, csv) {
            (OutputFormat::Csv, Some(csv)) => write_stdout(csv),
            _ => write_stdout(&json),
        },
    }
    Ok(())
}

/// Writes to stdout, treating a closed pipe as success.
fn write_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn default_init(p: &SystemParams) -> [f64; 3] {
    match p {
        SystemParams::MooreSpiegel { .. } => [0.1, 0.0, 0.1],
        SystemParams::ValidationHopf { .. } => [1.2, 0.0, 0.0],
        _ => [1.0, 0.0, 0.0],
    }
}

fn state(v: [f64; 3]) -> State {
    State::new(v[0], v[1], v[2])
}

fn point3(v: &Option<Vec<f64>>, default: [f64; 3]) -> Result<[f64; 3], Failure> {
    match v {
        None => Ok(default),
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|_| Failure::Usage("--point needs three coordinates".into())),
    }
}

fn execute(cmd: &Command, cfg: &mut RunConfig) -> Result<Output, Failure> {
    if let Command::ParseField = cmd {
        return parse_field(cfg);
    }
    if let Command::VerifyClaims { .. } = cmd {
        return verify_claims(cfg);
    }
    let p = cfg.params()?;
    let icfg = cfg.integrator;
    let o = &mut cfg.options;
    match cmd {
        Command::Simulate { .. } => {
            let init = *o.init.get_or_insert(default_init(&p));
            let t_end = *o.t_end.get_or_insert(100.0);
            let backward = *o.backward.get_or_insert(false);
            let traj = if backward {
                ode::integrate_backward(&p, state(init), (0.0, t_end), &icfg)?
            } else {
                ode::integrate(&p, state(init), (0.0, t_end), &icfg)?
            };
            let (escaped, escape_t) = match traj.termination() {
                Termination::Completed => (false, None),
                Termination::Escaped { t, .. } => (true, Some(t)),
            };
            let meta = json!({
                "samples": traj.len(),
                "t_start": traj.t_start(),
                "t_end": traj.t_end(),
                "backward": backward,
                "final_state": traj.final_state(),
                "escaped": escaped,
                "escape_time": escape_t,
                "max_step_error": traj.max_step_error(),
            });
            Ok(Output::json(meta)?.with_csv(io::trajectory_csv(&traj)))
        }
        Command::FieldEval { .. } => {
            let pt = point3(&o.point, [0.0; 3])?;
            o.point = Some(pt.to_vec());
            let s = state(pt);
            Output::json(json!({
                "point": s,
                "field": fields::eval_field(&p, s)?,
                "jacobian": fields::eval_jacobian(&p, s)?,
                "section_normal": if s.y == 0.0 { Some(fields::section_normal_component(&p, s)?) } else { None },
            }))
        }
        Command::SectionMap { .. } => {
            let spec = SectionSpec::for_system(&p);
            match o.point.clone() {
                Some(v) => {
                    let [x, z]: [f64; 2] = v
                        .try_into()
                        .map_err(|_| Failure::Usage("--point needs two coordinates x,z".into()))?;
                    let method = *o.method.get_or_insert(MethodName::Variational);
                    let method = match method {
                        MethodName::Variational => JacobianMethod::Variational,
                        MethodName::FiniteDifference => JacobianMethod::FiniteDifference,
                    };
                    let start = SectionPoint::on_plane(&p, &spec, x, z)?;
                    let ret = section::first_return(&p, &start, &spec, &icfg)?;
                    let (jac, pts) = match &ret {
                        ReturnOutcome::Returned(q) => (
                            Some(section::return_map_jacobian(&p, &start, &spec, method, &icfg)?),
                            vec![start, *q],
                        ),
                        ReturnOutcome::NoReturn(_) => (None, vec![start]),
                    };
                    let det = jac.as_ref().map(section::det2);
                    Ok(Output::json(json!({
                        "start": start,
                        "return": ret,
                        "jacobian": jac,
                        "jacobian_determinant": det,
                    }))?
                    .with_csv(io::section_csv(&pts)))
                }
                None => {
                    let init = *o.init.get_or_insert(default_init(&p));
                    let t_end = *o.t_end.get_or_insert(200.0);
                    let traj = ode::integrate(&p, state(init), (0.0, t_end), &icfg)?;
                    let pts = section::detect_crossings(&traj, &spec)?;
                    Ok(Output::json(json!({"crossings": pts}))?.with_csv(io::section_csv(&pts)))
                }
            }
        }
        Command::FindOrbit(_) | Command::ClassifyOrbit(_) => {
            let classify = matches!(cmd, Command::ClassifyOrbit(_));
            let spec = SectionSpec::for_system(&p);
            let found = match o.guess {
                Some([x, z]) => {
                    let n = *o.n_return.get_or_insert(1);
                    let guess = SectionPoint::on_plane(&p, &spec, x, z)?;
                    vec![orbits::find_periodic_orbit(&p, &guess, &spec, n, &icfg)?]
                }
                None => {
                    let init = *o.init.get_or_insert(default_init(&p));
                    let t_end = *o.t_end.get_or_insert(500.0);
                    let seeds = *o.max_seeds.get_or_insert(12);
                    let census = claims::orbit_census(&p, state(init), t_end, seeds, &icfg)?;
                    if census.orbits.is_empty() {
                        return Err(Failure::Run(flowknot::Error::SearchFailure {
                            best_residual: census.best_failed_residual.unwrap_or(f64::INFINITY),
                            iterations: 0,
                        }));
                    }
                    census.orbits
                }
            };
            let mut rows = Vec::new();
            for orbit in &found {
                let mut row = to_value(orbit)?;
                if classify {
                    let b = topo::extract_braid(orbit, &p, &icfg)?;
                    row = json!({
                        "period": orbit.period,
                        "section_points": orbit.section_points,
                        "braid": {
                            "n_strands": b.n_strands,
                            "word_up": b.word_up,
                            "word_down": b.word_down,
                            "alexander": b.alexander,
                            "alexander_text": b.alexander.to_string(),
                            "verdict": b.verdict,
                            "strand_parameter": b.parameter,
                            "projection_rotation": b.projection_rotation,
                        },
                    });
                }
                rows.push(row);
            }
            Output::json(json!({"orbits": rows}))
        }
        Command::Index { .. } => {
            let pt = point3(&o.point, [0.0; 3])?;
            o.point = Some(pt.to_vec());
            let s = state(pt);
            Output::json(json!({
                "point": s,
                "index": topo::analytic_index(&p, s)?,
            }))
        }
        Command::Spectrum { .. } => {
            let pt = point3(&o.point, [0.0; 3])?;
            o.point = Some(pt.to_vec());
            Output::json(topo::classify_spectrum(&p, state(pt))?)
        }
        Command::Degree { .. } => {
            let center = *o.center.get_or_insert([0.0; 3]);
            let radius = *o.radius.get_or_insert(1e-2);
            let sub = *o.subdivision.get_or_insert(5);
            let d = topo::numerical_degree(&p, state(center), radius, sub)?;
            Output::json(json!({
                "center": d.point,
                "radius": d.radius,
                "subdivision": d.subdivision,
                "raw_degree": d.raw_degree,
                "degree": d.numerical_degree,
                "analytic_index": d.analytic_index,
                "agreement": d.agreement,
                "triangles": d.triangles,
                "min_field_norm": d.min_field_norm,
            }))
        }
        Command::Avoidance { .. } => {
            let radius = *o.radius.get_or_insert(50.0);
            let dir = *o.direction.get_or_insert([0.0, 0.0, 1.0]);
            let samples = *o.samples.get_or_insert(100_000);
            Output::json(topo::direction_avoidance(&p, radius, dir, samples, cfg.seed)?)
        }
        Command::Manifold { .. } => {
            let eps = *o.epsilon.get_or_insert(1e-6);
            let target = *o.target_norm.get_or_insert(orbits::DEFAULT_REACHED_NORM);
            let (d1, d2) = orbits::trace_stable_manifold(&p, eps, target, &icfg)?;
            let mut csv = String::from("branch,t,x,y,z\n");
            for (label, b) in [("delta1", &d1), ("delta2", &d2)] {
                for (t, s) in b.times.iter().zip(&b.polyline) {
                    let _ = writeln!(csv, "{label},{},{},{},{}", fmt_f64(*t), fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.z));
                }
            }
            Ok(Output::json(json!({
                "delta1": d1,
                "delta2": d2,
                "delta1_contained": d1.contained(),
                "delta2_contained": d2.contained(),
            }))?
            .with_csv(csv))
        }
        Command::SweepExit { .. } => {
            let (arc, sign) = match *o.arc.get_or_insert(ArcName::L1) {
                ArcName::L1 => (Arc::L1, 1.0),
                ArcName::L2 => (Arc::L2, -1.0),
            };
            let s = o
                .s_values
                .get_or_insert_with(|| [0.1, 0.5, 1.0, 2.0, 5.0].map(|s| sign * s).to_vec())
                .clone();
            let curve = orbits::exit_time_sweep(&p, arc, &s, &icfg)?;
            let csv = io::sweep_csv(&curve);
            Ok(Output::json(curve)?.with_csv(csv))
        }
        Command::VerifyClaims { .. } | Command::ParseField => unreachable!(),
    }
}

fn verify_claims(cfg: &mut RunConfig) -> Result<Output, Failure> {
    let systems = match cfg.system {
        SystemName::NoseHoover => SystemSelection::NoseHoover,
        SystemName::MooreSpiegel => SystemSelection::MooreSpiegel,
        SystemName::Both => SystemSelection::Both,
        other => {
            return Err(Failure::Usage(format!(
                "verify-claims needs --system nose-hoover, moore-spiegel or both, got {}",
                serde_json::to_value(other).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
            )))
        }
    };
    cfg.integrator.validate()?;
    let o = &mut cfg.options;
    let mutate = *o.mutate_index_sign.get_or_insert(false);
    let defaults = SuiteConfig::default();
    let suite_cfg = SuiteConfig {
        systems,
        index_rule: if mutate { IndexRule::FlippedSign } else { IndexRule::Standard },
        subdivision: *o.subdivision.get_or_insert(defaults.subdivision),
        avoidance_samples: *o.samples.get_or_insert(defaults.avoidance_samples),
        integrator: cfg.integrator,
    };
    let report = Suite::new(suite_cfg).run_all();
    let exit = report.exit_code() as u8;
    let mut out = Output::json(&report)?;
    out.exit = exit;
    for e in &report.entries {
        eprintln!("{:<8} {}", format!("{:?}", e.status).to_uppercase(), e.claim_id);
    }
    Ok(out)
}

fn parse_field(cfg: &mut RunConfig) -> Result<Output, Failure> {
    let path = cfg
        .field_file
        .clone()
        .ok_or_else(|| Failure::Usage("parse-field requires --field-file".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Usage(format!("cannot read field file {}: {e}", path.display())))?;
    let field = flowknot::expr::CustomField::parse_with(&text, &cfg.field_params)
        .map_err(|e| Failure::Run(e.into()))?;
    let components: Vec<String> = field.components().iter().map(|c| c.to_string()).collect();
    let p = SystemParams::Custom { field: field.clone() };
    let fps = fields::fixed_points(&p, &SearchBox::cube(20.0)).ok().map(|f| f.len());
    Output::json(json!({
        "file": display(&path),
        "valid": true,
        "params": field.params(),
        "components": components,
        "fixed_points_in_cube_20": fps,
    }))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
