//! Height-field serialization.
//!
//! Two formats: a human-readable text format (full f64 precision, used for
//! standalone terrain files) and a raw little-endian f32 array with a text
//! sidecar manifest (used inside clip directories).

use std::fs;
use std::path::Path;

use nalgebra::Vector2;
use thiserror::Error;

use super::{HeightField, HeightFieldError};

pub const TEXT_MAGIC: &str = "terragait-heightfield v1";

#[derive(Debug, Error)]
pub enum HeightFieldIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid height field: {0}")]
    Invalid(#[from] HeightFieldError),
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

fn parse_err(path: &Path, message: impl Into<String>) -> HeightFieldIoError {
    HeightFieldIoError::Parse { path: path.display().to_string(), message: message.into() }
}

impl HeightField {
    /// Write the text format: a small header followed by one row of
    /// space-separated heights per line. Floats use shortest round-trip
    /// formatting, so load/save is lossless.
    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<(), HeightFieldIoError> {
        let path = path.as_ref();
        let mut s = String::new();
        s.push_str(TEXT_MAGIC);
        s.push('\n');
        s.push_str(&format!("rows {}\n", self.rows()));
        s.push_str(&format!("cols {}\n", self.cols()));
        s.push_str(&format!("cell_size {}\n", self.cell_size()));
        s.push_str(&format!("origin {} {}\n", self.origin().x, self.origin().y));
        s.push_str("heights\n");
        for r in 0..self.rows() {
            let row: Vec<String> = (0..self.cols()).map(|c| self.height(r, c).to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        fs::write(path, s)?;
        Ok(())
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<HeightField, HeightFieldIoError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let magic = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
        if magic.trim() != TEXT_MAGIC {
            return Err(parse_err(path, format!("bad magic line {magic:?}")));
        }
        let mut field = |name: &str| -> Result<String, HeightFieldIoError> {
            let line = lines
                .next()
                .ok_or_else(|| parse_err(path, format!("missing {name} line")))?;
            let Some(rest) = line.strip_prefix(name) else {
                return Err(parse_err(path, format!("expected {name} line, got {line:?}")));
            };
            Ok(rest.trim().to_string())
        };
        let rows: usize = field("rows")?
            .parse()
            .map_err(|e| parse_err(path, format!("rows: {e}")))?;
        let cols: usize = field("cols")?
            .parse()
            .map_err(|e| parse_err(path, format!("cols: {e}")))?;
        let cell_size: f64 = field("cell_size")?
            .parse()
            .map_err(|e| parse_err(path, format!("cell_size: {e}")))?;
        let origin_parts = field("origin")?;
        let origin: Vec<f64> = origin_parts
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(path, format!("origin: {e}")))?;
        if origin.len() != 2 {
            return Err(parse_err(path, "origin needs two components"));
        }
        let header = field("heights")?;
        if !header.is_empty() {
            return Err(parse_err(path, "unexpected tokens after heights header"));
        }
        let mut heights = Vec::with_capacity(rows * cols);
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split_whitespace() {
                let h: f64 = tok
                    .parse()
                    .map_err(|e| parse_err(path, format!("height {tok:?}: {e}")))?;
                heights.push(h);
            }
        }
        Ok(HeightField::new(
            Vector2::new(origin[0], origin[1]),
            cell_size,
            rows,
            cols,
            heights,
        )?)
    }

    /// Write `<stem>.f32` (row-major little-endian f32 heights) plus
    /// `<stem>.manifest.txt` describing the grid.
    pub fn save_raw(&self, dir: impl AsRef<Path>, stem: &str) -> Result<(), HeightFieldIoError> {
        let dir = dir.as_ref();
        fs::write(dir.join(format!("{stem}.f32")), self.raw_f32_bytes())?;
        let manifest = format!(
            "format raw-f32-le\nrows {}\ncols {}\ncell_size {}\norigin {} {}\n",
            self.rows(),
            self.cols(),
            self.cell_size(),
            self.origin().x,
            self.origin().y
        );
        fs::write(dir.join(format!("{stem}.manifest.txt")), manifest)?;
        Ok(())
    }

    pub fn load_raw(dir: impl AsRef<Path>, stem: &str) -> Result<HeightField, HeightFieldIoError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(format!("{stem}.manifest.txt"));
        let manifest = fs::read_to_string(&manifest_path)?;
        let mut rows = None;
        let mut cols = None;
        let mut cell_size = None;
        let mut origin = None;
        for line in manifest.lines() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("format") => {
                    let f = parts.next().unwrap_or("");
                    if f != "raw-f32-le" {
                        return Err(parse_err(&manifest_path, format!("unknown format {f:?}")));
                    }
                }
                Some("rows") => rows = parts.next().and_then(|t| t.parse().ok()),
                Some("cols") => cols = parts.next().and_then(|t| t.parse().ok()),
                Some("cell_size") => cell_size = parts.next().and_then(|t| t.parse().ok()),
                Some("origin") => {
                    let x: Option<f64> = parts.next().and_then(|t| t.parse().ok());
                    let y: Option<f64> = parts.next().and_then(|t| t.parse().ok());
                    origin = x.zip(y);
                }
                _ => {}
            }
        }
        let rows: usize = rows.ok_or_else(|| parse_err(&manifest_path, "missing rows"))?;
        let cols: usize = cols.ok_or_else(|| parse_err(&manifest_path, "missing cols"))?;
        let cell_size: f64 =
            cell_size.ok_or_else(|| parse_err(&manifest_path, "missing cell_size"))?;
        let (ox, oy) = origin.ok_or_else(|| parse_err(&manifest_path, "missing origin"))?;

        let data_path = dir.join(format!("{stem}.f32"));
        let bytes = fs::read(&data_path)?;
        if bytes.len() != rows * cols * 4 {
            return Err(parse_err(
                &data_path,
                format!("expected {} bytes, got {}", rows * cols * 4, bytes.len()),
            ));
        }
        let heights: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Ok(HeightField::new(Vector2::new(ox, oy), cell_size, rows, cols, heights)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heightfield::{generate_terrain, GenerateParams};

    #[test]
    fn text_round_trip_is_lossless() {
        let field = generate_terrain(9, &GenerateParams::default())
            .with_origin(Vector2::new(0.3, -1.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("terrain.hf");
        field.save_text(&path).unwrap();
        let loaded = HeightField::load_text(&path).unwrap();
        assert_eq!(field, loaded);
    }

    #[test]
    fn raw_round_trip_preserves_f32_heights() {
        let field = generate_terrain(13, &GenerateParams::default());
        let dir = tempfile::tempdir().unwrap();
        field.save_raw(dir.path(), "terrain").unwrap();
        let loaded = HeightField::load_raw(dir.path(), "terrain").unwrap();
        assert_eq!((loaded.rows(), loaded.cols()), (field.rows(), field.cols()));
        for (a, b) in field.heights().iter().zip(loaded.heights()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn corrupt_text_reports_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.hf");
        std::fs::write(&path, "not a heightfield\n").unwrap();
        assert!(matches!(
            HeightField::load_text(&path),
            Err(HeightFieldIoError::Parse { .. })
        ));
    }
}
