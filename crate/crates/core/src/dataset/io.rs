//! Clip directory format.
//!
//! A clip is a directory holding a text manifest plus one raw binary file
//! per channel:
//!
//! ```text
//! clip_0000/
//!   manifest.txt      # magic, frame count, horizon, seeds, channel table
//!   terrain.f32       # rows*cols heights, row-major little-endian f32
//!   com_pos.f32       # frames*3 values, frame-major little-endian f32
//!   ... one .f32 file per channel ...
//! ```
//!
//! Channels are stored exactly as held in memory (f32), so a save/load
//! round-trip reproduces the clip bit for bit. Contact flags are encoded as
//! 0.0 / 1.0.

use std::fs;
use std::path::Path;

use nalgebra::Vector2;

use super::{DatasetError, TrajectoryClip};
use crate::heightfield::HeightField;
use crate::robot::{N_JOINTS, N_LEGS};

pub const CLIP_MAGIC: &str = "terragait-clip v1";

/// Channel table: name, values per frame. Order fixes the manifest layout.
const CHANNELS: [(&str, usize); 8] = [
    ("com_pos", 3),
    ("com_linvel", 3),
    ("com_angvel", 3),
    ("base_quat", 4),
    ("ee_pos", 3 * N_LEGS),
    ("contact_flags", N_LEGS),
    ("q", N_JOINTS),
    ("qdot", N_JOINTS),
];

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, message: impl Into<String>) -> DatasetError {
    DatasetError::Parse { path: path.display().to_string(), message: message.into() }
}

/// Write `clip` into directory `dir` (created if needed).
pub fn save_clip(clip: &TrajectoryClip, dir: &Path) -> Result<(), DatasetError> {
    clip.validate()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let terrain = &clip.terrain_image;
    let mut manifest = String::new();
    manifest.push_str(CLIP_MAGIC);
    manifest.push('\n');
    manifest.push_str(&format!("frames {}\n", clip.frames()));
    manifest.push_str("rate 100\n");
    manifest.push_str(&format!("horizon {}\n", clip.horizon));
    manifest.push_str(&format!("terrain_seed {}\n", clip.terrain_seed));
    manifest.push_str(&format!("robot_hash {}\n", clip.robot_hash));
    manifest.push_str(&format!(
        "terrain {} {} {} {} {}\n",
        terrain.rows(),
        terrain.cols(),
        terrain.cell_size(),
        terrain.origin().x,
        terrain.origin().y
    ));
    for (name, width) in CHANNELS {
        manifest.push_str(&format!("channel {name} {width}\n"));
    }
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, manifest).map_err(|e| io_err(&manifest_path, e))?;

    let terrain_path = dir.join("terrain.f32");
    fs::write(&terrain_path, terrain.raw_f32_bytes()).map_err(|e| io_err(&terrain_path, e))?;

    for (name, width) in CHANNELS {
        let values = gather_channel(clip, name);
        debug_assert_eq!(values.len(), clip.frames() * width);
        let mut bytes = Vec::with_capacity(values.len() * 4);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(format!("{name}.f32"));
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

/// Flatten one channel to frame-major f32 values.
fn gather_channel(clip: &TrajectoryClip, name: &str) -> Vec<f32> {
    match name {
        "com_pos" => clip.com_pos.iter().flatten().copied().collect(),
        "com_linvel" => clip.com_linvel.iter().flatten().copied().collect(),
        "com_angvel" => clip.com_angvel.iter().flatten().copied().collect(),
        "base_quat" => clip.base_quat.iter().flatten().copied().collect(),
        "ee_pos" => clip
            .ee_pos
            .iter()
            .flat_map(|frame| frame.iter().flatten())
            .copied()
            .collect(),
        "contact_flags" => clip
            .contact_flags
            .iter()
            .flatten()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect(),
        "q" => clip.q.iter().flatten().copied().collect(),
        "qdot" => clip.qdot.iter().flatten().copied().collect(),
        other => unreachable!("unknown channel {other}"),
    }
}

/// Read a clip directory written by [`save_clip`].
pub fn load_clip(dir: &Path) -> Result<TrajectoryClip, DatasetError> {
    let manifest_path = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(line) if line.trim() == CLIP_MAGIC => {}
        other => {
            return Err(parse_err(
                &manifest_path,
                format!("bad magic line {other:?}, expected {CLIP_MAGIC:?}"),
            ))
        }
    }

    let mut frames = None;
    let mut horizon = None;
    let mut terrain_seed = 0u64;
    let mut robot_hash = 0u64;
    let mut terrain_meta: Option<(usize, usize, f64, f64, f64)> = None;
    let mut channels: Vec<(String, usize)> = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        let one = |what: &str| -> Result<&str, DatasetError> {
            rest.first()
                .copied()
                .ok_or_else(|| parse_err(&manifest_path, format!("{what} line missing value")))
        };
        match key {
            "frames" => {
                frames = Some(one("frames")?.parse::<usize>().map_err(|e| {
                    parse_err(&manifest_path, format!("bad frame count: {e}"))
                })?)
            }
            "rate" => {
                let rate: f64 = one("rate")?
                    .parse()
                    .map_err(|e| parse_err(&manifest_path, format!("bad rate: {e}")))?;
                if rate != 100.0 {
                    return Err(parse_err(
                        &manifest_path,
                        format!("unsupported rate {rate}, clips are 100 Hz"),
                    ));
                }
            }
            "horizon" => {
                horizon = Some(one("horizon")?.parse::<f64>().map_err(|e| {
                    parse_err(&manifest_path, format!("bad horizon: {e}"))
                })?)
            }
            "terrain_seed" => {
                terrain_seed = one("terrain_seed")?
                    .parse()
                    .map_err(|e| parse_err(&manifest_path, format!("bad terrain_seed: {e}")))?
            }
            "robot_hash" => {
                robot_hash = one("robot_hash")?
                    .parse()
                    .map_err(|e| parse_err(&manifest_path, format!("bad robot_hash: {e}")))?
            }
            "terrain" => {
                if rest.len() != 5 {
                    return Err(parse_err(
                        &manifest_path,
                        "terrain line needs rows cols cell_size origin_x origin_y",
                    ));
                }
                let parse_f = |s: &str| -> Result<f64, DatasetError> {
                    s.parse()
                        .map_err(|e| parse_err(&manifest_path, format!("bad terrain field: {e}")))
                };
                let parse_u = |s: &str| -> Result<usize, DatasetError> {
                    s.parse()
                        .map_err(|e| parse_err(&manifest_path, format!("bad terrain field: {e}")))
                };
                terrain_meta = Some((
                    parse_u(rest[0])?,
                    parse_u(rest[1])?,
                    parse_f(rest[2])?,
                    parse_f(rest[3])?,
                    parse_f(rest[4])?,
                ));
            }
            "channel" => {
                if rest.len() != 2 {
                    return Err(parse_err(&manifest_path, "channel line needs name width"));
                }
                let width: usize = rest[1]
                    .parse()
                    .map_err(|e| parse_err(&manifest_path, format!("bad channel width: {e}")))?;
                channels.push((rest[0].to_string(), width));
            }
            other => {
                return Err(parse_err(&manifest_path, format!("unknown manifest key {other:?}")))
            }
        }
    }

    let frames =
        frames.ok_or_else(|| parse_err(&manifest_path, "manifest missing frames line"))?;
    let horizon =
        horizon.ok_or_else(|| parse_err(&manifest_path, "manifest missing horizon line"))?;
    let (rows, cols, cell, ox, oy) = terrain_meta
        .ok_or_else(|| parse_err(&manifest_path, "manifest missing terrain line"))?;
    let expected: Vec<(String, usize)> =
        CHANNELS.iter().map(|&(n, w)| (n.to_string(), w)).collect();
    if channels != expected {
        return Err(parse_err(
            &manifest_path,
            format!("channel table {channels:?} does not match the v1 layout"),
        ));
    }

    let terrain_path = dir.join("terrain.f32");
    let heights = read_f32s(&terrain_path, "terrain", rows * cols)
        .map_err(|e| relabel_count_mismatch(e, rows, cols))?;
    let terrain_image = HeightField::new(
        Vector2::new(ox, oy),
        cell,
        rows,
        cols,
        heights.iter().map(|&h| h as f64).collect(),
    )
    .map_err(|e| parse_err(&terrain_path, e.to_string()))?;

    let mut raw: Vec<Vec<f32>> = Vec::with_capacity(CHANNELS.len());
    for (name, width) in CHANNELS {
        let path = dir.join(format!("{name}.f32"));
        raw.push(read_f32s(&path, name, frames * width)?);
    }
    let [com_pos, com_linvel, com_angvel, base_quat, ee_pos, contact_raw, q, qdot]: [Vec<f32>; 8] =
        raw.try_into().unwrap();

    let mut contact_flags = Vec::with_capacity(frames);
    for frame in contact_raw.chunks_exact(N_LEGS) {
        let mut flags = [false; N_LEGS];
        for (leg, &v) in frame.iter().enumerate() {
            flags[leg] = match v {
                v if v == 0.0 => false,
                v if v == 1.0 => true,
                other => {
                    return Err(parse_err(
                        &dir.join("contact_flags.f32"),
                        format!("contact flag must be 0 or 1, found {other}"),
                    ))
                }
            };
        }
        contact_flags.push(flags);
    }

    let clip = TrajectoryClip {
        horizon,
        terrain_image,
        terrain_seed,
        robot_hash,
        com_pos: chunks3(&com_pos),
        com_linvel: chunks3(&com_linvel),
        com_angvel: chunks3(&com_angvel),
        base_quat: base_quat.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect(),
        ee_pos: ee_pos
            .chunks_exact(3 * N_LEGS)
            .map(|frame| {
                std::array::from_fn(|leg| {
                    [frame[leg * 3], frame[leg * 3 + 1], frame[leg * 3 + 2]]
                })
            })
            .collect(),
        contact_flags,
        q: chunks_n::<N_JOINTS>(&q),
        qdot: chunks_n::<N_JOINTS>(&qdot),
    };
    clip.validate()?;
    Ok(clip)
}

fn chunks3(values: &[f32]) -> Vec<[f32; 3]> {
    values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn chunks_n<const W: usize>(values: &[f32]) -> Vec<[f32; W]> {
    values
        .chunks_exact(W)
        .map(|c| std::array::from_fn(|i| c[i]))
        .collect()
}

/// Read exactly `expected` little-endian f32 values from `path`; a short or
/// long file reports the frame counts implied by the channel width.
fn read_f32s(path: &Path, channel: &str, expected: usize) -> Result<Vec<f32>, DatasetError> {
    let bytes = fs::read(path).map_err(|source| DatasetError::MissingChannel {
        channel: channel.to_string(),
        path: path.display().to_string(),
        source,
    })?;
    if bytes.len() != expected * 4 {
        // Convert byte counts to value counts; the caller knows the width.
        return Err(DatasetError::FrameCountMismatch {
            channel: channel.to_string(),
            expected,
            got: bytes.len() / 4,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Terrain files report heights, not frames; rewrite the counts as a grid
/// mismatch message.
fn relabel_count_mismatch(err: DatasetError, rows: usize, cols: usize) -> DatasetError {
    match err {
        DatasetError::FrameCountMismatch { channel, expected, got } => DatasetError::Parse {
            path: format!("{channel}.f32"),
            message: format!(
                "terrain grid {rows}x{cols} needs {expected} heights, file holds {got}"
            ),
        },
        other => other,
    }
}
