use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use smallobs_core::calibration::{
    points_in_view, refine_extrinsics, CalibrationFrame, RefineParams,
};
use smallobs_core::metrics::{evaluate, EvaluationParams, MetricsReport};
use smallobs_core::projection::{project_segments, render_confidence_map, PixelPoint};
use smallobs_core::ring_geometry::{
    detect_scan, write_segment_report, CurbParams, DetectionParams, RoadRegion, ScanDetections,
};
use smallobs_core::scene_io::{
    label, load_calibration, load_mask, load_scan, load_sequence, mask_name, save_calibration,
    save_confidence_map, save_mask, Frame,
};
use smallobs_core::simulator::{load_scene, simulate_sequence};
use smallobs_core::temporal::{propagate_and_aggregate, DetectionMemory, TemporalParams};
use smallobs_core::{CameraModel, ConfidenceMap, Error, ExtrinsicsSE3, Result, SegmentationMask};

use crate::args::*;

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Detect(a) => detect(a),
        Command::Confmap(a) => confmap(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Evaluate(a) => evaluate_dirs(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

/// Reproducibility header: tool version, subcommand and every effective
/// parameter. Output paths and the job count are left out so that reruns
/// into other directories or with other thread counts stay byte-identical.
struct Header(Vec<String>);

impl Header {
    fn new(command: &str) -> Self {
        Header(vec![format!(
            "smallobs {} {command}",
            env!("CARGO_PKG_VERSION")
        )])
    }

    fn field(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.0.push(format!("{key} {value}"));
        self
    }

    fn path(&mut self, key: &str, value: Option<&Path>) -> &mut Self {
        match value {
            Some(p) => self.field(key, p.display()),
            None => self.field(key, "none"),
        }
    }

    fn detection(&mut self, d: &DetectionOpts) -> &mut Self {
        self.field("d_th", d.d_th)
            .field("max_spread_deg", d.max_spread)
    }

    fn render(&self) -> String {
        self.0.iter().map(|l| format!("# {l}\n")).collect()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn detection_params(d: &DetectionOpts) -> DetectionParams {
    DetectionParams {
        d_th: d.d_th,
        max_spread_deg: d.max_spread,
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "--sigma must be positive, got {sigma}"
        )))
    }
}

fn road_name(mode: RoadMode) -> &'static str {
    match mode {
        RoadMode::All => "all",
        RoadMode::Curbs => "curbs",
        RoadMode::Mask => "mask",
    }
}

/// Road filter for single-scan commands; `mask` needs both a mask and a
/// calibration to project through.
fn road_region(mode: RoadMode, mask: Option<&Path>, calibrated: bool) -> Result<RoadRegion> {
    match mode {
        RoadMode::All => Ok(RoadRegion::Unrestricted),
        RoadMode::Curbs => Ok(RoadRegion::Curbs(CurbParams::default())),
        RoadMode::Mask => match mask {
            Some(path) if calibrated => Ok(RoadRegion::Mask(load_mask(path)?)),
            _ => Err(Error::Config("--road mask needs --mask and --calib".into())),
        },
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let manifest = simulate_sequence(&scene, &a.out)?;
    info!(
        "simulated {} frames into {}",
        manifest.frames.len(),
        a.out.display()
    );
    Ok(())
}

fn detect(a: &DetectArgs) -> Result<()> {
    let scan = load_scan(&a.scan)?;
    let calib = a.calib.as_deref().map(load_calibration).transpose()?;
    let road = road_region(a.road, a.mask.as_deref(), calib.is_some())?;
    let found = detect_scan(
        &scan,
        &detection_params(&a.detection),
        &road,
        calib.as_ref().map(|c| &c.0),
        calib.as_ref().map(|c| &c.1),
    )?;
    let mut h = Header::new("detect");
    h.path("scan", Some(&a.scan))
        .path("calib", a.calib.as_deref())
        .path("mask", a.mask.as_deref())
        .field("road", road_name(a.road))
        .detection(&a.detection)
        .field("breakpoints", found.breakpoints)
        .field("degenerate_triplets", found.degenerate_triplets)
        .field("segments", found.segments.len())
        .field(
            "columns",
            "ring azimuth_start azimuth_end points spread_deg min_range",
        );
    info!(
        "{} segments from {} breakpoints",
        found.segments.len(),
        found.breakpoints
    );
    write_segment_report(&a.out, &h.0, &found.segments)
}

/// `confmap.png` gets the sidecar `confmap.run.txt`.
fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("run.txt")
}

fn confmap(a: &ConfmapArgs) -> Result<()> {
    check_sigma(a.sigma)?;
    let scan = load_scan(&a.scan)?;
    let (camera, xi) = load_calibration(&a.calib)?;
    let road = road_region(a.road, a.mask.as_deref(), true)?;
    let found = detect_scan(
        &scan,
        &detection_params(&a.detection),
        &road,
        Some(&camera),
        Some(&xi),
    )?;
    let projection = project_segments(&found.segments, &camera, &xi);
    let map = render_confidence_map(&projection.pixels, a.sigma, &camera);
    save_confidence_map(&map, &a.out)?;
    let mut h = Header::new("confmap");
    h.path("scan", Some(&a.scan))
        .path("calib", Some(&a.calib))
        .path("mask", a.mask.as_deref())
        .field("road", road_name(a.road))
        .detection(&a.detection)
        .field("sigma", a.sigma)
        .field("segments", found.segments.len())
        .field("anchors", projection.pixels.len())
        .field("culled", projection.culled)
        .field("max_confidence", map.max_value());
    write_text(&sidecar(&a.out), &h.render())
}

fn calibrate(a: &CalibrateArgs) -> Result<()> {
    let seq = load_sequence(&a.seq)?;
    let (camera, xi0) = (seq.camera, seq.extrinsics);
    let params = detection_params(&a.detection);
    let indices = a
        .frames
        .iter()
        .map(|&id| {
            seq.position(id)
                .ok_or_else(|| Error::Config(format!("frame {id} is not in {}", a.seq.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let frames = indices
        .par_iter()
        .map(|&i| -> Result<CalibrationFrame> {
            let frame = seq.load_frame(i)?;
            let mask = frame.mask.ok_or_else(|| {
                Error::Invalid(format!("frame {} has no annotation mask", frame.id))
            })?;
            let found = detect_scan(&frame.scan, &params, &RoadRegion::Unrestricted, None, None)?;
            let points = points_in_view(
                found
                    .segments
                    .iter()
                    .flat_map(|s| s.obstacle_points().iter().map(|p| p.position)),
                &camera,
                &xi0,
                a.view_margin,
            );
            info!(
                "frame {}: {} obstacle points in view",
                frame.id,
                points.len()
            );
            Ok(CalibrationFrame::new(frame.id, points, &mask)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let refine = RefineParams {
        learning_rate: a.lr,
        max_iters: a.max_iters,
        tol: a.tol,
        ..RefineParams::default()
    };
    let mut h = Header::new("calibrate");
    h.path("seq", Some(&a.seq))
        .field(
            "frames",
            a.frames
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(","),
        )
        .detection(&a.detection)
        .field("view_margin_px", a.view_margin)
        .field("lr", a.lr)
        .field("max_iters", a.max_iters)
        .field("tol", a.tol)
        .field("stall_window", refine.stall_window)
        .field("stall_tolerance", refine.stall_tolerance);
    let log_path = a.log.clone().unwrap_or_else(|| a.out.with_extension("log"));
    match refine_extrinsics(&xi0, &frames, &camera, &refine) {
        Ok(report) => {
            info!(
                "loss {} -> {} after {} iterations ({:?})",
                report.initial_loss(),
                report.final_loss(),
                report.iterations,
                report.stop_reason
            );
            save_calibration(&camera, &report.final_xi, &a.out)?;
            write_text(&log_path, &(h.render() + &report.to_log()))
        }
        Err(failure) => {
            if let Some(partial) = &failure.partial {
                write_text(&log_path, &(h.render() + &partial.to_log()))?;
            }
            Err(failure.into())
        }
    }
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let io = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

fn evaluation_params(min_area: usize, overlap: f64) -> Result<EvaluationParams> {
    if !(overlap > 0.0 && overlap < 1.0) {
        return Err(Error::Config(format!(
            "--overlap must lie in (0, 1), got {overlap}"
        )));
    }
    Ok(EvaluationParams {
        min_area,
        overlap_threshold: overlap,
    })
}

fn evaluate_dirs(a: &EvaluateArgs) -> Result<()> {
    let params = evaluation_params(a.min_area, a.overlap)?;
    let names = png_names(&a.pred)?;
    if names.is_empty() {
        return Err(Error::Invalid(format!(
            "no PNG masks in {}",
            a.pred.display()
        )));
    }
    let pairs = names
        .par_iter()
        .map(|n| Ok((load_mask(&a.pred.join(n))?, load_mask(&a.gt.join(n))?)))
        .collect::<Result<Vec<_>>>()?;
    let (pred, gt): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let report = evaluate(&pred, &gt, &params)?;
    let mut h = Header::new("evaluate");
    h.path("pred", Some(&a.pred))
        .path("gt", Some(&a.gt))
        .field("min_area", a.min_area)
        .field("overlap", a.overlap)
        .field("masks", names.join(","));
    write_text(&a.report, &(h.render() + &report.to_table()))
}

struct FrameWork {
    frame: Frame,
    found: ScanDetections,
    anchors: Vec<PixelPoint>,
    culled: usize,
    map: ConfidenceMap,
}

#[derive(Default)]
struct TemporalStats {
    matches: usize,
    accepted: usize,
    redetected: usize,
    degenerate: usize,
    skipped: usize,
}

fn temporal_params(t: &TemporalOpts) -> Result<TemporalParams> {
    if t.k == 0 || t.template_size == 0 {
        return Err(Error::Config(
            "--temporal-k and --template-size must be positive".into(),
        ));
    }
    Ok(TemporalParams {
        k: t.k,
        template_size: t.template_size,
        search_radius: t.search_radius,
        ncc_threshold: t.ncc_threshold,
        merge_radius: t.merge_radius,
    })
}

/// Ground-truth road and off-road labels (obstacles folded into road) with
/// every pixel at or above `threshold` confidence marked as obstacle. Without
/// ground truth the whole image counts as road.
fn predicted_mask(
    map: &ConfidenceMap,
    gt: Option<&SegmentationMask>,
    threshold: f32,
) -> Result<SegmentationMask> {
    let labels = map
        .values()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c >= threshold {
                label::OBSTACLE
            } else {
                match gt.map(|m| m.labels()[i]) {
                    Some(label::OFF_ROAD) => label::OFF_ROAD,
                    _ => label::ROAD,
                }
            }
        })
        .collect();
    SegmentationMask::new(map.width(), map.height(), labels)
}

fn pipeline(a: &PipelineArgs) -> Result<()> {
    check_sigma(a.sigma)?;
    let temporal = temporal_params(&a.temporal)?;
    let eval_params = evaluation_params(a.min_area, a.overlap)?;
    let seq = load_sequence(&a.seq)?;
    let (camera, xi): (CameraModel, ExtrinsicsSE3) = (seq.camera, seq.extrinsics);
    let params = detection_params(&a.detection);
    if a.road == RoadMode::Mask && !seq.has_masks() {
        warn!("sequence lacks masks; frames without one use the curb road filter");
    }
    create_dir(&a.out)?;

    let work = (0..seq.frames.len())
        .into_par_iter()
        .map(|i| -> Result<FrameWork> {
            let frame = seq.load_frame(i)?;
            let road = match (a.road, &frame.mask) {
                (RoadMode::All, _) => RoadRegion::Unrestricted,
                (RoadMode::Mask, Some(mask)) => RoadRegion::Mask(mask.clone()),
                _ => RoadRegion::Curbs(CurbParams::default()),
            };
            let found = detect_scan(&frame.scan, &params, &road, Some(&camera), Some(&xi))?;
            let projection = project_segments(&found.segments, &camera, &xi);
            let map = render_confidence_map(&projection.pixels, a.sigma, &camera);
            Ok(FrameWork {
                frame,
                found,
                anchors: projection.pixels,
                culled: projection.culled,
                map,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Memory must see frames in order, so aggregation is sequential.
    let mut memory = DetectionMemory::new(temporal.k);
    let mut maps = Vec::with_capacity(work.len());
    let mut stats = Vec::with_capacity(work.len());
    for w in &work {
        let mut s = TemporalStats::default();
        if a.temporal.no_temporal {
            maps.push(w.map.clone());
        } else {
            let agg = propagate_and_aggregate(
                &w.map,
                &memory,
                &w.frame.image,
                &w.frame.pose,
                &w.anchors,
                &camera,
                &xi,
                a.sigma,
                &temporal,
            );
            s.matches = agg.matches.len();
            s.accepted = agg.matches.iter().filter(|m| m.accepted).count();
            s.redetected = agg.redetected;
            s.degenerate = agg.degenerate;
            s.skipped = agg.skipped;
            memory.update(
                &w.found.segments,
                &w.frame.image,
                Some(w.frame.pose),
                w.frame.id,
                &camera,
                &xi,
                temporal.template_size,
            )?;
            maps.push(agg.map);
        }
        stats.push(s);
    }

    let pred_dir = a.out.join("pred");
    if seq.has_masks() {
        create_dir(&pred_dir)?;
    }
    let predictions = work
        .par_iter()
        .zip(maps.par_iter())
        .map(|(w, map)| -> Result<Option<SegmentationMask>> {
            let id = w.frame.id;
            save_confidence_map(map, &a.out.join(format!("confmap_{id:06}.png")))?;
            write_segment_report(
                &a.out.join(format!("segments_{id:06}.txt")),
                &[format!("frame {id}")],
                &w.found.segments,
            )?;
            match &w.frame.mask {
                Some(gt) => {
                    let pred = predicted_mask(map, Some(gt), a.obstacle_threshold)?;
                    save_mask(&pred, &pred_dir.join(mask_name(id)))?;
                    Ok(Some(pred))
                }
                None => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut h = Header::new("pipeline");
    h.path("seq", Some(&a.seq))
        .field("frames", work.len())
        .field("road", road_name(a.road))
        .detection(&a.detection)
        .field("sigma", a.sigma)
        .field("temporal", !a.temporal.no_temporal)
        .field("temporal_k", temporal.k)
        .field("template_size", temporal.template_size)
        .field("search_radius", temporal.search_radius)
        .field("ncc_threshold", temporal.ncc_threshold)
        .field("merge_radius", temporal.merge_radius)
        .field("obstacle_threshold", a.obstacle_threshold)
        .field("min_area", a.min_area)
        .field("overlap", a.overlap);

    let mut run = h.render();
    run.push_str("frame segments breakpoints degenerate_triplets anchors culled matches accepted redetected match_degenerate memory_skipped max_confidence\n");
    for ((w, s), map) in work.iter().zip(&stats).zip(&maps) {
        let _ = writeln!(
            run,
            "{} {} {} {} {} {} {} {} {} {} {} {:.6}",
            w.frame.id,
            w.found.segments.len(),
            w.found.breakpoints,
            w.found.degenerate_triplets,
            w.anchors.len(),
            w.culled,
            s.matches,
            s.accepted,
            s.redetected,
            s.degenerate,
            s.skipped,
            map.max_value()
        );
    }
    write_text(&a.out.join("run.txt"), &run)?;

    if seq.has_masks() {
        let pred: Vec<SegmentationMask> = predictions.into_iter().flatten().collect();
        let gt: Vec<SegmentationMask> = work.into_iter().filter_map(|w| w.frame.mask).collect();
        let report: MetricsReport = evaluate(&pred, &gt, &eval_params)?;
        info!(
            "idr {:.4} ifdr {:.4} pdr {:.4} miou {:.4}",
            report.idr, report.ifdr, report.pdr, report.miou
        );
        write_text(
            &a.out.join("report.txt"),
            &(h.render() + &report.to_table()),
        )?;
    } else {
        warn!("no ground-truth masks; skipping evaluation");
    }
    Ok(())
}
