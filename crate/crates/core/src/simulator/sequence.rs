use std::path::Path;

use rayon::prelude::*;

use super::{gray_image, raycast_scan, render_ground_truth, SceneSpec};
use crate::error::{Error, Result};
use crate::scene_io::{
    image_name, load_sequence, mask_name, save_calibration, save_gray_image, save_mask, save_poses,
    save_scan, scan_name, ExtrinsicsSE3, Pose, SequenceManifest, FRAMES_FILE,
};

/// Camera-to-world pose for a LiDAR-to-world pose.
pub fn camera_pose(lidar_pose: &Pose, xi: &ExtrinsicsSE3) -> Pose {
    lidar_pose.compose(&xi.camera_in_lidar())
}

/// Writes a complete sequence directory: scans, ground-truth masks, gray
/// images, poses and calibration. Frames are generated in parallel; output
/// bytes do not depend on the thread count.
pub fn simulate_sequence(scene: &SceneSpec, out_dir: &Path) -> Result<SequenceManifest> {
    scene.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    scene
        .trajectory
        .par_iter()
        .map(|pose| -> Result<()> {
            let id = pose.frame_id;
            let scan = raycast_scan(scene, pose, &scene.lidar);
            save_scan(&scan, &out_dir.join(scan_name(id)))?;
            let cam = camera_pose(pose, &scene.extrinsics);
            let mask = render_ground_truth(scene, &cam, &scene.camera);
            save_mask(&mask, &out_dir.join(mask_name(id)))?;
            let seed = scene.seed ^ (id as u64).wrapping_mul(0xD134_2543_DE82_EF95);
            save_gray_image(
                &gray_image(&mask, scene.image_noise, seed),
                &out_dir.join(image_name(id)),
            )
        })
        .collect::<Result<Vec<()>>>()?;

    let frames: String = scene
        .trajectory
        .iter()
        .map(|p| format!("{}\n", p.frame_id))
        .collect();
    let frames_path = out_dir.join(FRAMES_FILE);
    std::fs::write(&frames_path, frames).map_err(|e| Error::io(&frames_path, e))?;
    save_poses(
        &scene.trajectory,
        &out_dir.join(crate::scene_io::POSES_FILE),
    )?;
    save_calibration(
        &scene.camera,
        &scene.extrinsics,
        &out_dir.join(crate::scene_io::CALIB_FILE),
    )?;
    load_sequence(out_dir)
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::super::{straight_trajectory, BoxObstacle};
    use super::*;

    #[test]
    fn one_frame_sequence_loads() {
        let dir = tempfile::tempdir().unwrap();
        let b = BoxObstacle::on_road(0.0, 12.0, Vector3::new(0.3, 0.3, 0.3)).unwrap();
        let scene = SceneSpec::new(vec![b], vec![], 1.75).unwrap();
        let manifest = simulate_sequence(&scene, dir.path()).unwrap();
        assert_eq!(manifest.frames.len(), 1);
        let frame = manifest.load_frame(0).unwrap();
        assert!(frame.mask.is_some());
        assert!(frame.scan.point_count() > 0);
        assert_eq!(manifest.extrinsics, scene.extrinsics);
    }

    #[test]
    fn straight_poses_step_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut scene = SceneSpec::new(vec![], vec![], 1.75).unwrap();
        scene.camera = crate::scene_io::CameraModel::new(100.0, 100.0, 31.5, 23.5, 64, 48).unwrap();
        scene.trajectory = straight_trajectory(10, 1.0, 1.75);
        let manifest = simulate_sequence(&scene, dir.path()).unwrap();
        assert_eq!(manifest.frames.len(), 10);
        for w in manifest.frames.windows(2) {
            assert_eq!((w[1].pose.translation - w[0].pose.translation).norm(), 1.0);
        }
    }

    #[test]
    fn camera_pose_matches_mount() {
        let (_, xi) = SceneSpec::default_camera();
        let lidar = straight_trajectory(1, 1.0, 1.75)[0];
        let cam = camera_pose(&lidar, &xi);
        assert!((cam.translation - Vector3::new(0.0, 0.2, 1.65)).norm() < 1e-12);
        // Optical axis is world +y, image down is world -z.
        assert!((cam.rotation * Vector3::z() - Vector3::y()).norm() < 1e-12);
        assert!((cam.rotation * Vector3::y() + Vector3::z()).norm() < 1e-12);
    }
}
