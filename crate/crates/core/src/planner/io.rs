//! Text serialization of planner configurations and solved trajectories.
//!
//! Solutions use a line-oriented format: a header, the solve report, then one
//! `channel` section per spline with a `segment` line per Hermite segment
//! (`f64` values printed shortest-round-trip, so save/load is bit-exact).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::nlp::{SolveReport, SolveStatus};
use crate::robot::{LEG_NAMES, N_LEGS};
use crate::spline::{HermiteSegment, PhaseKind, PhaseSpline};

use super::solution::CentroidalSolution;
use super::PlannerConfig;

const SOLUTION_MAGIC: &str = "terragait-solution v1";

#[derive(Debug, Error)]
pub enum PlannerIoError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad solution file {path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Render a planner configuration as a key-value document.
pub fn config_to_key_values(config: &PlannerConfig) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.set_f64s("horizon", &[config.horizon]);
    kv.set_f64s("goal_displacement", &[config.goal_displacement]);
    kv.set_f64s("start_xy", &[config.start_xy.x, config.start_xy.y]);
    kv.set_f64s("n_swing_phases", &[config.n_swing_phases as f64]);
    kv.set_f64s("n_com_segments", &[config.n_com_segments as f64]);
    kv.set_f64s("dynamics_dt", &[config.dynamics_dt]);
    kv.set_f64s("force_constraint_dt", &[config.force_constraint_dt]);
    kv.set_f64s("swing_constraint_dt", &[config.swing_constraint_dt]);
    kv.set_f64s("f_max", &[config.f_max]);
    kv.set_f64s(
        "phase_duration_bounds",
        &[config.phase_duration_min, config.phase_duration_max],
    );
    kv.set_f64s("init_pos_noise", &[config.init_pos_noise]);
    kv.set_f64s("init_force_noise", &[config.init_force_noise]);
    kv.set_f64s("gravity", &[config.gravity]);
    kv.set_f64s(
        "full_orientation_box",
        &[if config.full_orientation_box { 1.0 } else { 0.0 }],
    );
    kv
}

/// Parse a planner configuration; missing keys keep their defaults.
pub fn config_from_key_values(kv: &KeyValues) -> Result<PlannerConfig, ConfigError> {
    let mut config = PlannerConfig::default();
    config.horizon = kv.get_f64_or("horizon", config.horizon)?;
    config.goal_displacement = kv.get_f64_or("goal_displacement", config.goal_displacement)?;
    if kv.contains("start_xy") {
        let v = kv.get_f64s("start_xy", 2)?;
        config.start_xy = Vector2::new(v[0], v[1]);
    }
    if kv.contains("n_swing_phases") {
        config.n_swing_phases = kv.get_usize("n_swing_phases")?;
    }
    if kv.contains("n_com_segments") {
        config.n_com_segments = kv.get_usize("n_com_segments")?;
    }
    config.dynamics_dt = kv.get_f64_or("dynamics_dt", config.dynamics_dt)?;
    config.force_constraint_dt = kv.get_f64_or("force_constraint_dt", config.force_constraint_dt)?;
    config.swing_constraint_dt = kv.get_f64_or("swing_constraint_dt", config.swing_constraint_dt)?;
    config.f_max = kv.get_f64_or("f_max", config.f_max)?;
    if kv.contains("phase_duration_bounds") {
        let v = kv.get_f64s("phase_duration_bounds", 2)?;
        config.phase_duration_min = v[0];
        config.phase_duration_max = v[1];
    }
    config.init_pos_noise = kv.get_f64_or("init_pos_noise", config.init_pos_noise)?;
    config.init_force_noise = kv.get_f64_or("init_force_noise", config.init_force_noise)?;
    config.gravity = kv.get_f64_or("gravity", config.gravity)?;
    if kv.contains("full_orientation_box") {
        config.full_orientation_box = kv.get_f64("full_orientation_box")? != 0.0;
    }
    Ok(config)
}

pub fn save_planner_config(config: &PlannerConfig, path: impl AsRef<Path>) -> Result<(), ConfigError> {
    config_to_key_values(config).save(path)
}

pub fn load_planner_config(path: impl AsRef<Path>) -> Result<PlannerConfig, ConfigError> {
    config_from_key_values(&KeyValues::load(path)?)
}

fn status_str(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::IterationLimit => "iteration-limit",
        SolveStatus::TimeLimit => "time-limit",
    }
}

fn status_from_str(s: &str) -> Option<SolveStatus> {
    match s {
        "converged" => Some(SolveStatus::Converged),
        "iteration-limit" => Some(SolveStatus::IterationLimit),
        "time-limit" => Some(SolveStatus::TimeLimit),
        _ => None,
    }
}

fn tag_str(tag: Option<PhaseKind>) -> &'static str {
    match tag {
        Some(PhaseKind::Stance) => "stance",
        Some(PhaseKind::Swing) => "swing",
        None => "none",
    }
}

fn write_channel(out: &mut String, name: &str, spline: &PhaseSpline) {
    writeln!(out, "channel {name} {}", spline.segments().len()).unwrap();
    let tags = spline.phase_tags();
    for (i, seg) in spline.segments().iter().enumerate() {
        let tag = tag_str(tags.get(i).copied());
        write!(out, "segment {tag} {}", seg.duration).unwrap();
        for v in [&seg.p0, &seg.v0, &seg.p1, &seg.v1] {
            write!(out, " {} {} {}", v.x, v.y, v.z).unwrap();
        }
        out.push('\n');
    }
}

/// Serialize a solution to text.
pub fn render_solution(solution: &CentroidalSolution) -> String {
    let mut out = String::new();
    writeln!(out, "{SOLUTION_MAGIC}").unwrap();
    writeln!(out, "horizon {}", solution.horizon).unwrap();
    let r = &solution.report;
    writeln!(out, "status {}", status_str(r.status)).unwrap();
    writeln!(out, "violation {} {}", r.max_violation, r.initial_violation).unwrap();
    writeln!(out, "iterations {} {}", r.outer_iterations, r.inner_iterations).unwrap();
    writeln!(out, "wall_time {}", r.wall_time_s).unwrap();
    write_channel(&mut out, "com_pos", &solution.com_pos);
    write_channel(&mut out, "com_ang", &solution.com_ang);
    for leg in 0..N_LEGS {
        write_channel(&mut out, &format!("ee_{}", LEG_NAMES[leg]), &solution.ee[leg]);
    }
    for leg in 0..N_LEGS {
        write_channel(&mut out, &format!("force_{}", LEG_NAMES[leg]), &solution.force[leg]);
    }
    out
}

pub fn save_solution(solution: &CentroidalSolution, path: impl AsRef<Path>) -> Result<(), PlannerIoError> {
    let path = path.as_ref();
    fs::write(path, render_solution(solution)).map_err(|source| PlannerIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct LineReader<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
    path: String,
}

impl<'a> LineReader<'a> {
    fn bad(&self, message: impl Into<String>) -> PlannerIoError {
        PlannerIoError::Parse {
            path: self.path.clone(),
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str, PlannerIoError> {
        self.lines
            .next()
            .ok_or_else(|| self.bad("unexpected end of file"))
    }
}

fn parse_floats(reader: &LineReader, parts: &[&str]) -> Result<Vec<f64>, PlannerIoError> {
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| reader.bad(format!("bad number {p:?}")))
        })
        .collect()
}

fn read_channel(reader: &mut LineReader, expect: &str) -> Result<PhaseSpline, PlannerIoError> {
    let header = reader.next_line()?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "channel" || parts[1] != expect {
        return Err(reader.bad(format!("expected channel {expect}, found {header:?}")));
    }
    let count: usize = parts[2]
        .parse()
        .map_err(|_| reader.bad(format!("bad segment count {:?}", parts[2])))?;
    let mut segments = Vec::with_capacity(count);
    let mut tags = Vec::new();
    for _ in 0..count {
        let line = reader.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 15 || parts[0] != "segment" {
            return Err(reader.bad(format!("bad segment line {line:?}")));
        }
        match parts[1] {
            "stance" => tags.push(PhaseKind::Stance),
            "swing" => tags.push(PhaseKind::Swing),
            "none" => {}
            other => return Err(reader.bad(format!("bad segment tag {other:?}"))),
        }
        let nums = parse_floats(reader, &parts[2..])?;
        segments.push(HermiteSegment {
            duration: nums[0],
            p0: Vector3::new(nums[1], nums[2], nums[3]),
            v0: Vector3::new(nums[4], nums[5], nums[6]),
            p1: Vector3::new(nums[7], nums[8], nums[9]),
            v1: Vector3::new(nums[10], nums[11], nums[12]),
        });
    }
    if tags.is_empty() {
        Ok(PhaseSpline::new(segments))
    } else if tags.len() == segments.len() {
        Ok(PhaseSpline::with_tags(segments, tags))
    } else {
        Err(reader.bad("mixed tagged and untagged segments"))
    }
}

pub fn parse_solution(text: &str, path: &str) -> Result<CentroidalSolution, PlannerIoError> {
    let mut reader = LineReader {
        lines: text.lines().peekable(),
        path: path.to_string(),
    };
    if reader.next_line()?.trim() != SOLUTION_MAGIC {
        return Err(reader.bad("missing header"));
    }

    let mut horizon = None;
    let mut status = None;
    let mut violation = (f64::NAN, f64::NAN);
    let mut iterations = (0usize, 0usize);
    let mut wall_time = 0.0;
    while let Some(&line) = reader.lines.peek() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.first().copied() {
            Some("horizon") if parts.len() == 2 => {
                horizon = Some(parse_floats(&reader, &parts[1..])?[0]);
            }
            Some("status") if parts.len() == 2 => {
                status = Some(
                    status_from_str(parts[1])
                        .ok_or_else(|| reader.bad(format!("bad status {:?}", parts[1])))?,
                );
            }
            Some("violation") if parts.len() == 3 => {
                let v = parse_floats(&reader, &parts[1..])?;
                violation = (v[0], v[1]);
            }
            Some("iterations") if parts.len() == 3 => {
                let v = parse_floats(&reader, &parts[1..])?;
                iterations = (v[0] as usize, v[1] as usize);
            }
            Some("wall_time") if parts.len() == 2 => {
                wall_time = parse_floats(&reader, &parts[1..])?[0];
            }
            _ => break,
        }
        reader.lines.next();
    }
    let horizon = horizon.ok_or_else(|| reader.bad("missing horizon"))?;
    let status = status.ok_or_else(|| reader.bad("missing status"))?;

    let com_pos = read_channel(&mut reader, "com_pos")?;
    let com_ang = read_channel(&mut reader, "com_ang")?;
    let mut ee = Vec::with_capacity(N_LEGS);
    for leg in 0..N_LEGS {
        ee.push(read_channel(&mut reader, &format!("ee_{}", LEG_NAMES[leg]))?);
    }
    let mut force = Vec::with_capacity(N_LEGS);
    for leg in 0..N_LEGS {
        force.push(read_channel(&mut reader, &format!("force_{}", LEG_NAMES[leg]))?);
    }

    Ok(CentroidalSolution {
        horizon,
        com_pos,
        com_ang,
        ee: ee.try_into().map_err(|_| PlannerIoError::Parse {
            path: path.to_string(),
            message: "bad channel count".into(),
        })?,
        force: force.try_into().map_err(|_| PlannerIoError::Parse {
            path: path.to_string(),
            message: "bad channel count".into(),
        })?,
        report: SolveReport {
            status,
            max_violation: violation.0,
            initial_violation: violation.1,
            outer_iterations: iterations.0,
            inner_iterations: iterations.1,
            wall_time_s: wall_time,
        },
    })
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<CentroidalSolution, PlannerIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PlannerIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_solution(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::HermiteSegment;
    use nalgebra::Vector3;

    fn sample_solution() -> CentroidalSolution {
        let seg = |a: f64| HermiteSegment {
            p0: Vector3::new(a, a + 0.1, a + 0.2),
            v0: Vector3::new(-a, 0.5 * a, 0.0),
            p1: Vector3::new(a + 1.0, a, a - 0.3),
            v1: Vector3::new(0.0, -a, a),
            duration: 0.7 + a.abs() * 0.1,
        };
        let tagged = |a: f64| {
            PhaseSpline::with_tags(
                vec![seg(a), seg(a + 0.5), seg(a - 0.25)],
                vec![PhaseKind::Stance, PhaseKind::Swing, PhaseKind::Swing],
            )
        };
        CentroidalSolution {
            horizon: 2.0,
            com_pos: PhaseSpline::new(vec![seg(0.1), seg(0.2)]),
            com_ang: PhaseSpline::new(vec![seg(-0.1), seg(0.05)]),
            ee: std::array::from_fn(|leg| tagged(leg as f64 * 0.3)),
            force: std::array::from_fn(|leg| tagged(-(leg as f64) * 0.2)),
            report: SolveReport {
                status: SolveStatus::Converged,
                max_violation: 3.5e-5,
                initial_violation: 1.25,
                outer_iterations: 7,
                inner_iterations: 91,
                wall_time_s: 1.625,
            },
        }
    }

    #[test]
    fn solution_round_trip_is_bit_exact() {
        let solution = sample_solution();
        let text = render_solution(&solution);
        let loaded = parse_solution(&text, "mem").unwrap();
        assert_eq!(loaded.horizon, solution.horizon);
        assert_eq!(loaded.report.status, solution.report.status);
        assert_eq!(loaded.report.max_violation, solution.report.max_violation);
        for (a, b) in [
            (&loaded.com_pos, &solution.com_pos),
            (&loaded.com_ang, &solution.com_ang),
            (&loaded.ee[2], &solution.ee[2]),
            (&loaded.force[3], &solution.force[3]),
        ] {
            assert_eq!(a.segments().len(), b.segments().len());
            for (sa, sb) in a.segments().iter().zip(b.segments()) {
                assert_eq!(sa.duration, sb.duration);
                assert_eq!(sa.p0, sb.p0);
                assert_eq!(sa.v0, sb.v0);
                assert_eq!(sa.p1, sb.p1);
                assert_eq!(sa.v1, sb.v1);
            }
            assert_eq!(a.phase_tags(), b.phase_tags());
        }
    }

    #[test]
    fn truncated_solution_is_rejected() {
        let text = render_solution(&sample_solution());
        let cut = &text[..text.len() / 2];
        assert!(parse_solution(cut, "mem").is_err());
        assert!(parse_solution("not a solution\n", "mem").is_err());
    }

    #[test]
    fn planner_config_round_trip() {
        let mut config = PlannerConfig::short_walk();
        config.full_orientation_box = true;
        config.init_pos_noise = 0.07;
        let kv = config_to_key_values(&config);
        let loaded = config_from_key_values(&kv).unwrap();
        assert_eq!(loaded.horizon, config.horizon);
        assert_eq!(loaded.n_swing_phases, config.n_swing_phases);
        assert_eq!(loaded.init_pos_noise, config.init_pos_noise);
        assert!(loaded.full_orientation_box);
    }

    #[test]
    fn missing_keys_fall_back_to_defaults() {
        let kv = KeyValues::parse("horizon 3.0\n").unwrap();
        let config = config_from_key_values(&kv).unwrap();
        assert_eq!(config.horizon, 3.0);
        assert_eq!(config.dynamics_dt, PlannerConfig::default().dynamics_dt);
    }
}
