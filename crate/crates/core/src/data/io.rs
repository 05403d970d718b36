//! Pose files.
//!
//! `QPSE` binary layout, all little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `QPSE`                  |
//! | 4      | 4    | u32 version (1)               |
//! | 8      | 4    | u32 joint count               |
//! | 12     | 4    | reserved, zero                |
//! | 16     | 8    | u64 pose count                |
//! | 24     | ...  | f32 `w x y z` per joint, per pose |
//!
//! JSON lines: one pose per line, an array of `[w, x, y, z]` arrays.
//!
//! Both loaders re-canonicalize every quaternion.

use super::PoseDataset;
use crate::geometry::{Pose, Skeleton, UnitQuaternion};
use crate::{Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const QPSE_MAGIC: [u8; 4] = *b"QPSE";
pub const QPSE_VERSION: u32 = 1;
pub const QPSE_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseFormat {
    Binary,
    JsonLines,
}

impl PoseFormat {
    /// `.jsonl` / `.json` select JSON lines; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Self::JsonLines,
            _ => Self::Binary,
        }
    }
}

pub fn save_poses(path: &Path, ds: &PoseDataset, format: PoseFormat) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<std::fs::File>, bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    match format {
        PoseFormat::Binary => {
            let joints = ds.poses[0].len();
            write(&mut w, &QPSE_MAGIC)?;
            write(&mut w, &QPSE_VERSION.to_le_bytes())?;
            write(&mut w, &(joints as u32).to_le_bytes())?;
            write(&mut w, &0u32.to_le_bytes())?;
            write(&mut w, &(ds.len() as u64).to_le_bytes())?;
            for p in &ds.poses {
                if p.len() != joints {
                    return Err(Error::InvalidPose("poses have differing joint counts".into()));
                }
                for q in &p.joints {
                    for c in q.to_array() {
                        write(&mut w, &(c as f32).to_le_bytes())?;
                    }
                }
            }
        }
        PoseFormat::JsonLines => {
            for p in &ds.poses {
                let rows: Vec<[f64; 4]> = p.joints.iter().map(|q| q.to_array()).collect();
                let line = serde_json::to_string(&rows)?;
                write(&mut w, line.as_bytes())?;
                write(&mut w, b"\n")?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_poses(path: &Path, skeleton: &Skeleton, format: PoseFormat) -> Result<PoseDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let poses = match format {
        PoseFormat::Binary => {
            let mut bytes = Vec::new();
            BufReader::new(file)
                .read_to_end(&mut bytes)
                .map_err(|e| Error::io(path, e))?;
            decode_qpse(&bytes, skeleton)?
        }
        PoseFormat::JsonLines => {
            let mut poses = Vec::new();
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rows: Vec<[f64; 4]> = serde_json::from_str(&line)
                    .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
                poses.push(pose_from_rows(&rows, skeleton)?);
            }
            poses
        }
    };
    PoseDataset::new(skeleton.name(), poses, format!("file:{}", path.display()))
}

fn pose_from_rows(rows: &[[f64; 4]], skeleton: &Skeleton) -> Result<Pose> {
    if rows.len() != skeleton.joint_count() {
        return Err(Error::SkeletonMismatch {
            expected: format!("{} joints", skeleton.joint_count()),
            actual: format!("{} joints", rows.len()),
        });
    }
    let joints = rows
        .iter()
        .map(|r| {
            if r.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("pose file component".into()));
            }
            UnitQuaternion::canonicalize(*r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Pose::new(skeleton.name(), joints))
}

fn decode_qpse(bytes: &[u8], skeleton: &Skeleton) -> Result<Vec<Pose>> {
    if bytes.len() < QPSE_HEADER_LEN {
        return Err(Error::Format("truncated QPSE header".into()));
    }
    if bytes[0..4] != QPSE_MAGIC {
        return Err(Error::Format("bad magic, expected QPSE".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != QPSE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: QPSE_VERSION,
        });
    }
    let joints = u32_at(8) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    if joints != skeleton.joint_count() {
        return Err(Error::SkeletonMismatch {
            expected: format!("{} joints", skeleton.joint_count()),
            actual: format!("{joints} joints"),
        });
    }
    let expected = (count as u128) * (joints as u128) * 16 + QPSE_HEADER_LEN as u128;
    if bytes.len() as u128 != expected {
        return Err(Error::Format(format!(
            "QPSE payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut poses = Vec::with_capacity(count as usize);
    let mut rows = vec![[0.0f64; 4]; joints];
    for chunk in bytes[QPSE_HEADER_LEN..].chunks_exact(16 * joints) {
        for (row, q) in rows.iter_mut().zip(chunk.chunks_exact(16)) {
            for (c, b) in row.iter_mut().zip(q.chunks_exact(4)) {
                *c = f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64;
            }
        }
        poses.push(pose_from_rows(&rows, skeleton)?);
    }
    Ok(poses)
}
