//! On-disk formats: the dataset `poses.json`, parameter checkpoints and
//! checkpoint-directory layout.
//!
//! Checkpoints are a single JSON shape-descriptor header line (UTF-8,
//! newline-terminated) followed by the flat parameter vector as little-endian
//! 64-bit floats.

use crate::error::{Error, Result};
use crate::field::{FieldParams, FieldShape};
use crate::image::ImageBuffer;
use crate::islm::{IslmParams, IslmShape};
use crate::renderer::Intrinsics;
use crate::se3::Pose;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureEntry {
    pub file: String,
    /// 4x4 row-major camera-to-world matrix at exposure start.
    pub t_start: [[f64; 4]; 4],
    /// 4x4 row-major camera-to-world matrix at exposure end.
    pub t_end: [[f64; 4]; 4],
    pub intrinsics: Intrinsics,
    /// Virtual images averaged over the exposure.
    pub n: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldoutEntry {
    pub file: String,
    pub pose: [[f64; 4]; 4],
    pub intrinsics: Intrinsics,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosesFile {
    pub images: Vec<ExposureEntry>,
    #[serde(default)]
    pub holdout: Vec<HoldoutEntry>,
}

pub fn write_poses(path: &Path, poses: &PosesFile) -> Result<()> {
    let json = serde_json::to_string_pretty(poses)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_poses(path: &Path) -> Result<PosesFile> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// One training view loaded into memory.
#[derive(Clone, Debug)]
pub struct TrainView {
    pub blurred: ImageBuffer,
    pub start: Pose,
    pub end: Pose,
    pub intrinsics: Intrinsics,
    pub n: usize,
}

/// One held-out sharp view.
#[derive(Clone, Debug)]
pub struct HoldoutView {
    pub sharp: ImageBuffer,
    pub pose: Pose,
    pub intrinsics: Intrinsics,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub views: Vec<TrainView>,
    pub holdout: Vec<HoldoutView>,
    pub width: usize,
    pub height: usize,
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let poses = read_poses(&dir.join("poses.json"))?;
    if poses.images.len() < 2 {
        return Err(Error::Dataset(format!(
            "need at least 2 training views, found {}",
            poses.images.len()
        )));
    }
    let mut views = Vec::with_capacity(poses.images.len());
    let mut dims: Option<(usize, usize)> = None;
    for entry in &poses.images {
        let blurred = ImageBuffer::read_png(&dir.join(&entry.file))?;
        match dims {
            None => dims = Some((blurred.width, blurred.height)),
            Some((w, h)) => {
                if blurred.width != w || blurred.height != h {
                    return Err(Error::Dataset(format!(
                        "image {} has size {}x{}, expected {w}x{h}",
                        entry.file, blurred.width, blurred.height
                    )));
                }
            }
        }
        views.push(TrainView {
            blurred,
            start: Pose::from_matrix4(&entry.t_start)?,
            end: Pose::from_matrix4(&entry.t_end)?,
            intrinsics: entry.intrinsics,
            n: entry.n.max(1),
        });
    }
    let mut holdout = Vec::with_capacity(poses.holdout.len());
    for entry in &poses.holdout {
        holdout.push(HoldoutView {
            sharp: ImageBuffer::read_png(&dir.join(&entry.file))?,
            pose: Pose::from_matrix4(&entry.pose)?,
            intrinsics: entry.intrinsics,
        });
    }
    let (width, height) = dims.expect("at least two views checked above");
    Ok(Dataset { views, holdout, width, height })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CkptHeader {
    Field { shape: FieldShape },
    Islm { shape: IslmShape },
}

fn write_checkpoint(path: &Path, header: &CkptHeader, values: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut line = serde_json::to_string(header)?;
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_checkpoint(path: &Path) -> Result<(CkptHeader, Vec<f64>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: CkptHeader = serde_json::from_str(line.trim_end())?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Dataset(format!(
            "checkpoint payload length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

pub fn write_field_checkpoint(path: &Path, params: &FieldParams) -> Result<()> {
    write_checkpoint(path, &CkptHeader::Field { shape: params.shape.clone() }, &params.values)
}

pub fn read_field_checkpoint(path: &Path) -> Result<FieldParams> {
    match read_checkpoint(path)? {
        (CkptHeader::Field { shape }, values) => FieldParams::from_values(shape, values),
        _ => Err(Error::Dataset(format!("{} is not a field checkpoint", path.display()))),
    }
}

pub fn write_islm_checkpoint(path: &Path, params: &IslmParams) -> Result<()> {
    write_checkpoint(path, &CkptHeader::Islm { shape: params.shape.clone() }, &params.values)
}

pub fn read_islm_checkpoint(path: &Path) -> Result<IslmParams> {
    match read_checkpoint(path)? {
        (CkptHeader::Islm { shape }, values) => IslmParams::from_values(shape, values),
        _ => Err(Error::Dataset(format!("{} is not an islm checkpoint", path.display()))),
    }
}
