use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{ArcName, ConfigError, MethodName, OutputFormat, RunConfig, SystemName};

/// Numerical dynamics and topology of the Nose-Hoover and Moore-Spiegel
/// oscillators.
#[derive(Parser, Debug)]
#[command(name = "flowknot", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Dynamical system to use.
    #[arg(long, global = true, value_enum)]
    system: Option<SystemName>,
    /// Nose-Hoover thermostat parameter.
    #[arg(long = "Q", global = true, allow_hyphen_values = true)]
    q: Option<f64>,
    /// Moore-Spiegel parameter T.
    #[arg(long = "T", global = true, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Moore-Spiegel parameter R.
    #[arg(long = "R", global = true, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Option<f64>,
    /// Polynomial field file for `--system custom`.
    #[arg(long, global = true)]
    field_file: Option<PathBuf>,
    /// Parameter override for a custom field, as NAME=VALUE.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Seed for sampling operations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    /// Largest integrator step.
    #[arg(long, global = true)]
    max_step: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a trajectory.
    Simulate {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        init: Option<[f64; 3]>,
        /// Integration time.
        #[arg(long = "t")]
        t_end: Option<f64>,
        /// Integrate backward in time.
        #[arg(long)]
        backward: bool,
    },
    /// Evaluate the field and its Jacobian at a point.
    FieldEval {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        point: Option<[f64; 3]>,
    },
    /// Section crossings of a trajectory, or the return map and its
    /// Jacobian at a section point given as `x,z`.
    SectionMap {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        init: Option<[f64; 3]>,
        #[arg(long = "t")]
        t_end: Option<f64>,
        #[arg(long, value_parser = parse_vec2, allow_hyphen_values = true, conflicts_with = "init")]
        point: Option<[f64; 2]>,
        #[arg(long, value_enum)]
        method: Option<MethodName>,
    },
    /// Newton search for a periodic orbit.
    FindOrbit(OrbitArgs),
    /// Find a periodic orbit and classify it by its braid word.
    ClassifyOrbit(OrbitArgs),
    /// Analytic index of a fixed point.
    Index {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        point: Option<[f64; 3]>,
    },
    /// Degree of F/|F| on a sphere.
    Degree {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        center: Option<[f64; 3]>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        subdivision: Option<u32>,
    },
    /// Smallest angle between F/|F| and a direction on a sphere.
    Avoidance {
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        direction: Option<[f64; 3]>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Spectral classification of a fixed point.
    Spectrum {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        point: Option<[f64; 3]>,
    },
    /// Trace the stable manifold of the Moore-Spiegel origin.
    Manifold {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        target_norm: Option<f64>,
    },
    /// Exit times from the trapping quadrant along an arc.
    SweepExit {
        #[arg(long, value_enum)]
        arc: Option<ArcName>,
        /// Comma-separated arc parameters.
        #[arg(long = "s", value_parser = parse_list, allow_hyphen_values = true)]
        s_values: Option<Vec<f64>>,
    },
    /// Run the claims verification suite.
    VerifyClaims {
        #[arg(long)]
        subdivision: Option<u32>,
        #[arg(long)]
        samples: Option<usize>,
        /// Flip the sign of the index rule (negative control).
        #[arg(long)]
        mutate_index_sign: bool,
    },
    /// Validate a custom field file.
    ParseField,
}

#[derive(Args, Debug)]
struct OrbitArgs {
    /// Initial guess on the section, `x,z`.
    #[arg(long, value_parser = parse_vec2, allow_hyphen_values = true)]
    guess: Option<[f64; 2]>,
    #[arg(long)]
    n_return: Option<usize>,
    /// Start of the trajectory scanned for recurrences when no guess is given.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    init: Option<[f64; 3]>,
    #[arg(long = "t")]
    t_end: Option<f64>,
    #[arg(long)]
    max_seeds: Option<usize>,
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}

fn parse_fixed<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v = parse_list(s)?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_fixed::<3>(s)
}

fn parse_vec2(s: &str) -> Result<[f64; 2], String> {
    parse_fixed::<2>(s)
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v = value.trim().parse::<f64>().map_err(|e| format!("`{value}`: {e}"))?;
    Ok((name.trim().to_string(), v))
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn resolve(common: &Common, cmd: &Command) -> Result<RunConfig, ConfigError> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.system {
        c.system = s;
    }
    let scalars = [
        (&mut c.q, common.q),
        (&mut c.t, common.t),
        (&mut c.r, common.r),
        (&mut c.mu, common.mu),
        (&mut c.omega, common.omega),
        (&mut c.integrator.rel_tol, common.tol_rel),
        (&mut c.integrator.abs_tol, common.tol_abs),
        (&mut c.integrator.max_step, common.max_step),
    ];
    for (slot, v) in scalars {
        if let Some(v) = v {
            *slot = v;
        }
    }
    set(&mut c.field_file, common.field_file.clone());
    set(&mut c.out, common.out.clone());
    if let Some(f) = common.format {
        c.format = f;
    }
    if let Some(s) = common.seed {
        c.seed = s;
    }
    for (k, v) in &common.params {
        c.field_params.insert(k.clone(), *v);
    }

    let o = &mut c.options;
    match cmd {
        Command::Simulate { init, t_end, backward } => {
            set(&mut o.init, *init);
            set(&mut o.t_end, *t_end);
            if *backward {
                o.backward = Some(true);
            }
        }
        Command::FieldEval { point } | Command::Index { point } | Command::Spectrum { point } => {
            set(&mut o.point, point.map(|p| p.to_vec()));
        }
        Command::SectionMap { init, t_end, point, method } => {
            set(&mut o.init, *init);
            set(&mut o.t_end, *t_end);
            set(&mut o.point, point.map(|p| p.to_vec()));
            set(&mut o.method, *method);
        }
        Command::FindOrbit(a) | Command::ClassifyOrbit(a) => {
            set(&mut o.guess, a.guess);
            set(&mut o.n_return, a.n_return);
            set(&mut o.init, a.init);
            set(&mut o.t_end, a.t_end);
            set(&mut o.max_seeds, a.max_seeds);
        }
        Command::Degree { center, radius, subdivision } => {
            set(&mut o.center, *center);
            set(&mut o.radius, *radius);
            set(&mut o.subdivision, *subdivision);
        }
        Command::Avoidance { radius, direction, samples } => {
            set(&mut o.radius, *radius);
            set(&mut o.direction, *direction);
            set(&mut o.samples, *samples);
        }
        Command::Manifold { epsilon, target_norm } => {
            set(&mut o.epsilon, *epsilon);
            set(&mut o.target_norm, *target_norm);
        }
        Command::SweepExit { arc, s_values } => {
            set(&mut o.arc, *arc);
            set(&mut o.s_values, s_values.clone());
        }
        Command::VerifyClaims { subdivision, samples, mutate_index_sign } => {
            set(&mut o.subdivision, *subdivision);
            set(&mut o.samples, *samples);
            if *mutate_index_sign {
                o.mutate_index_sign = Some(true);
            }
        }
        Command::ParseField => {}
    }
    Ok(c)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = match resolve(&cli.common, &cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    ExitCode::from(commands::run(&cli.command, config))
}
