//! Stage building blocks shared by the subcommands and the full pipeline.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use clothground::csf::{self, CsfResult};
use clothground::denoise;
use clothground::io::{self, CloudFormat, LoadedCloud};
use clothground::terrain::NormalField;
use clothground::{CsfParams, Label, LabelMask, PointCloud, SorParams};
use log::info;

use crate::error::CliError;

/// Logs the one-line stage summary.
pub fn log_stage(stage: &str, points_in: usize, points_out: usize, started: Instant) {
    info!(
        "{stage}: in={points_in} out={points_out} time={}ms",
        started.elapsed().as_millis()
    );
}

pub fn load(path: &Path) -> Result<LoadedCloud, CliError> {
    let t = Instant::now();
    let loaded = io::read_cloud(path).map_err(CliError::stage("load"))?;
    log_stage("load", loaded.cloud.len(), loaded.cloud.len(), t);
    Ok(loaded)
}

/// Loads every scan of a pose list and merges them into one frame.
pub fn merge(poses: &Path) -> Result<PointCloud, CliError> {
    let t = Instant::now();
    let text = fs::read_to_string(poses).map_err(|e| CliError::write("merge", poses, e))?;
    let base = poses.parent().unwrap_or(Path::new("."));
    let list = io::parse_pose_list(&text, base).map_err(CliError::stage("merge"))?;
    let mut scans = Vec::with_capacity(list.len());
    for (path, pose) in list {
        scans.push((
            io::load_cloud(&path).map_err(CliError::stage("merge"))?,
            pose,
        ));
    }
    let points_in = scans.iter().map(|(c, _)| c.len()).sum();
    let merged = io::merge_scans(&scans).map_err(CliError::stage("merge"))?;
    log_stage("merge", points_in, merged.len(), t);
    Ok(merged)
}

/// Writes a cloud in the binary flavour of the format named by the extension.
pub fn save(
    stage: &'static str,
    cloud: &PointCloud,
    labels: Option<&LabelMask>,
    path: &Path,
) -> Result<(), CliError> {
    let format = CloudFormat::from_path(path).ok_or_else(|| {
        CliError::stage(stage)(clothground::Error::UnsupportedFormat(format!(
            "{}: expected a .ply or .pcd file name",
            path.display()
        )))
    })?;
    io::save_cloud(cloud, labels, path, format).map_err(CliError::stage(stage))
}

pub fn write_text(stage: &'static str, path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::write(stage, path, e))
}

pub fn denoise(cloud: &PointCloud, sor: &SorParams) -> Result<LabelMask, CliError> {
    let t = Instant::now();
    let mask =
        denoise::statistical_outlier_removal(cloud, sor).map_err(CliError::stage("denoise"))?;
    log_stage(
        "denoise",
        cloud.len(),
        cloud.len() - mask.counts().outlier,
        t,
    );
    Ok(mask)
}

/// Cloth filtering of every point not already marked as an outlier. Returns
/// labels for the whole cloud.
pub fn filter(
    cloud: &PointCloud,
    prior: &LabelMask,
    params: &CsfParams,
) -> Result<(LabelMask, CsfResult), CliError> {
    let t = Instant::now();
    let keep = [Label::Unlabeled, Label::Ground, Label::NonGround];
    let (kept, index_map) =
        denoise::apply_mask(cloud, prior, &keep).map_err(CliError::stage("filter"))?;
    let result = csf::filter(&kept, params).map_err(CliError::stage("filter"))?;
    let mut labels = LabelMask::new(
        prior
            .iter()
            .map(|l| {
                if l == Label::Outlier {
                    l
                } else {
                    Label::Unlabeled
                }
            })
            .collect(),
    );
    labels
        .refine(&index_map, &result.labels)
        .map_err(CliError::stage("filter"))?;
    log_stage("filter", kept.len(), result.labels.counts().ground, t);
    info!(
        "filter: iterations={} last_displacement={:e}",
        result.iterations_used, result.max_last_displacement
    );
    Ok((labels, result))
}

/// `x y z nx ny nz` per line.
pub fn normals_text(cloud: &PointCloud, field: &NormalField) -> String {
    let mut s = String::from("# x y z nx ny nz\n");
    for (p, n) in cloud.iter().zip(&field.normals) {
        let _ = writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, n[0], n[1], n[2]);
    }
    s
}

/// Ground points of a labelled cloud, or the whole cloud when it has no labels.
pub fn ground_of(loaded: &LoadedCloud) -> PointCloud {
    match &loaded.labels {
        Some(l) => loaded.cloud.select(&l.indices_of(Label::Ground)),
        None => loaded.cloud.clone(),
    }
}
