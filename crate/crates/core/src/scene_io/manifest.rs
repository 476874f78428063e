use std::path::{Path, PathBuf};

use image::GrayImage;

use super::{
    load_calibration, load_gray_image, load_mask, load_poses, load_scan, CameraModel,
    ExtrinsicsSE3, Pose, SegmentationMask,
};
use crate::error::{Error, ParseErrorKind, Result};
use crate::ring_geometry::RingScan;

pub const FRAMES_FILE: &str = "frames.txt";
pub const CALIB_FILE: &str = "calib.txt";
pub const POSES_FILE: &str = "poses.txt";

pub fn image_name(id: u32) -> String {
    format!("image_{id:06}.png")
}

pub fn scan_name(id: u32) -> String {
    format!("scan_{id:06}.txt")
}

pub fn mask_name(id: u32) -> String {
    format!("mask_{id:06}.png")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFiles {
    pub id: u32,
    pub image: PathBuf,
    pub scan: PathBuf,
    pub mask: Option<PathBuf>,
    pub pose: Pose,
}

/// A validated sequence directory. Calibration and poses are read eagerly;
/// per-frame rasters and scans load on demand via [`SequenceManifest::load_frame`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub root: PathBuf,
    pub frames: Vec<FrameFiles>,
    pub camera: CameraModel,
    pub extrinsics: ExtrinsicsSE3,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub id: u32,
    pub image: GrayImage,
    pub scan: RingScan,
    pub mask: Option<SegmentationMask>,
    pub pose: Pose,
}

pub fn load_sequence(root: &Path) -> Result<SequenceManifest> {
    let frames_path = root.join(FRAMES_FILE);
    let text = std::fs::read_to_string(&frames_path).map_err(|e| Error::io(&frames_path, e))?;
    let mut ids: Vec<u32> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let id: u32 = line.parse().map_err(|_| {
            Error::parse(
                &frames_path,
                i + 1,
                ParseErrorKind::InvalidNumber(line.into()),
            )
        })?;
        if let Some(&previous) = ids.last() {
            if id <= previous {
                return Err(Error::UnorderedFrames {
                    path: frames_path,
                    line: i + 1,
                    previous,
                    id,
                });
            }
        }
        ids.push(id);
    }

    let (camera, extrinsics) = load_calibration(&root.join(CALIB_FILE))?;
    let poses_path = root.join(POSES_FILE);
    let poses = load_poses(&poses_path)?;
    if poses.len() != ids.len() {
        return Err(Error::Invalid(format!(
            "{}: {} poses for {} frames",
            poses_path.display(),
            poses.len(),
            ids.len()
        )));
    }

    let mut frames = Vec::with_capacity(ids.len());
    for (id, mut pose) in ids.into_iter().zip(poses) {
        pose.frame_id = id;
        let image = root.join(image_name(id));
        let scan = root.join(scan_name(id));
        for path in [&image, &scan] {
            if !path.is_file() {
                return Err(Error::DanglingReference {
                    frame: id,
                    path: path.clone(),
                });
            }
        }
        let mask = Some(root.join(mask_name(id))).filter(|p| p.is_file());
        frames.push(FrameFiles {
            id,
            image,
            scan,
            mask,
            pose,
        });
    }
    Ok(SequenceManifest {
        root: root.to_path_buf(),
        frames,
        camera,
        extrinsics,
    })
}

impl SequenceManifest {
    pub fn ids(&self) -> Vec<u32> {
        self.frames.iter().map(|f| f.id).collect()
    }

    pub fn position(&self, id: u32) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }

    pub fn has_masks(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.mask.is_some())
    }

    pub fn load_frame(&self, index: usize) -> Result<Frame> {
        let files = &self.frames[index];
        let image = load_gray_image(&files.image)?;
        if image.dimensions() != (self.camera.width, self.camera.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.camera.width, self.camera.height),
                found: image.dimensions(),
            });
        }
        let mask = files.mask.as_deref().map(load_mask).transpose()?;
        if let Some(mask) = &mask {
            if (mask.width(), mask.height()) != image.dimensions() {
                return Err(Error::DimensionMismatch {
                    expected: image.dimensions(),
                    found: (mask.width(), mask.height()),
                });
            }
        }
        Ok(Frame {
            id: files.id,
            image,
            scan: load_scan(&files.scan)?,
            mask,
            pose: files.pose,
        })
    }
}
