//! CSV and JSON export. Every floating-point value is written with 17
//! significant digits, and files are replaced atomically.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::ode::Trajectory;
use crate::orbits::SweepCurve;
use crate::section::SectionPoint;

/// `v` in scientific notation with 17 significant digits; non-finite
/// values are written as `nan`, `inf` or `-inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn write_json_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.is_finite() {
                    out.push_str(&fmt_f64(f));
                } else {
                    out.push_str("null");
                }
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = items.iter().all(|i| !matches!(i, Value::Array(_) | Value::Object(_)));
            if flat {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_json_value(out, item, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_json_value(out, item, indent + 2);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_json_value(out, item, indent + 2);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Pretty JSON with 17 significant digits for every float.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_json_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,y,z\n");
    for (t, s) in traj.samples() {
        let _ = writeln!(out, "{},{},{},{}", fmt_f64(t), fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.z));
    }
    out
}

pub fn section_csv(points: &[SectionPoint]) -> String {
    let mut out = String::from("t,x,z,speed,kind\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(p.t),
            fmt_f64(p.x),
            fmt_f64(p.z),
            fmt_f64(p.speed),
            p.kind.as_str()
        );
    }
    out
}

pub fn sweep_csv(curve: &SweepCurve) -> String {
    let mut out = String::from("s,t_exit,exit_surface,x,y,z\n");
    for r in &curve.records {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let e = r.exit_state;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.s),
            opt(r.t_exit),
            r.exit_surface.as_str(),
            opt(e.map(|s| s.x)),
            opt(e.map(|s| s.y)),
            opt(e.map(|s| s.z)),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{State, SystemParams};
    use crate::ode::{integrate, IntegratorConfig};

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 1.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
            let mantissa = s.split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn json_floats_and_structure() {
        let v = serde_json::json!({"a": 0.5, "b": [1, 2.25], "c": {"d": null, "e": "x\"y"}, "n": 3});
        let s = to_json(&v).unwrap();
        assert!(s.contains("5.0000000000000000e-1"));
        assert!(s.contains("\"n\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"][1].as_f64(), Some(2.25));
        assert_eq!(back["c"]["e"], "x\"y");
    }

    #[test]
    fn params_survive_json() {
        let p = SystemParams::MooreSpiegel { t: 0.1, r: 1.0 / 3.0 };
        let back: SystemParams = serde_json::from_str(&to_json(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn trajectory_csv_shape() {
        let p = SystemParams::NoseHoover { q: 1.0 };
        let traj = integrate(&p, State::new(1.0, 0.0, 0.0), (0.0, 1.0), &IntegratorConfig::default()).unwrap();
        let csv = trajectory_csv(&traj);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,y,z");
        assert_eq!(lines.len(), traj.len() + 1);
        assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0,"));
    }
}
