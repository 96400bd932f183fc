//! The full chain: load or merge, denoise, filter, normals, DTM and mesh,
//! profile, report.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clothground::terrain::{self, ClassificationReport, DtmParams};
use clothground::{Label, LabelMask};
use log::info;

use crate::config::{ConfigError, PipelineConfig};
use crate::error::CliError;
use crate::stages::{self, log_stage};

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub labels: LabelMask,
    pub report: Option<ClassificationReport>,
    pub artifacts: Vec<PathBuf>,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, CliError> {
    for line in cfg.to_text().lines() {
        info!("config: {line}");
    }
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| CliError::write("setup", out, e))?;
    let mut artifacts = Vec::new();
    let mut emit = |name: &str| {
        let p = out.join(name);
        artifacts.push(p.clone());
        p
    };
    stages::write_text("setup", &emit("config.txt"), &cfg.to_text())?;

    let cloud = match (&cfg.poses, &cfg.input) {
        (Some(poses), _) => {
            let merged = stages::merge(poses)?;
            stages::save("merge", &merged, None, &emit("merged.ply"))?;
            merged
        }
        (None, Some(input)) => stages::load(input)?.cloud,
        (None, None) => return Err(ConfigError::MissingInput.into()),
    };

    let prior = if cfg.stages.skip_denoise {
        LabelMask::filled(cloud.len(), Label::Unlabeled)
    } else {
        let mask = stages::denoise(&cloud, &cfg.sor)?;
        let kept = cloud.select(&mask.indices_of(Label::Unlabeled));
        stages::save("denoise", &kept, None, &emit("denoised.ply"))?;
        mask
    };

    let (labels, csf) = stages::filter(&cloud, &prior, &cfg.csf)?;
    stages::save("filter", &cloud, Some(&labels), &emit("classified.ply"))?;
    let ground = cloud.select(&labels.indices_of(Label::Ground));
    stages::save("filter", &ground, None, &emit("ground.ply"))?;
    if cfg.debug_cloth {
        stages::save(
            "filter",
            &csf.cloth.particles_cloud(),
            None,
            &emit("cloth.ply"),
        )?;
    }

    if !cfg.stages.skip_normals {
        let t = Instant::now();
        let field = terrain::estimate_normals(&ground, cfg.normals_k)
            .map_err(CliError::stage("normals"))?;
        stages::write_text(
            "normals",
            &emit("normals.xyz"),
            &stages::normals_text(&ground, &field),
        )?;
        log_stage("normals", ground.len(), field.normals.len(), t);
    }

    if !cfg.stages.skip_dtm {
        let t = Instant::now();
        let params = DtmParams {
            idw_power: cfg.dtm_power,
            ..DtmParams::with_cell_size(cfg.dtm_cell)
        };
        let dtm = terrain::build_dtm(&ground, &params).map_err(CliError::stage("dtm"))?;
        stages::write_text("dtm", &emit("dtm.asc"), &dtm.to_esri_ascii())?;
        log_stage("dtm", ground.len(), dtm.valid_cells(), t);
        if !cfg.stages.skip_mesh {
            let t = Instant::now();
            let mesh = terrain::dtm_to_mesh(&dtm).map_err(CliError::stage("mesh"))?;
            stages::write_text("mesh", &emit("dtm_mesh.ply"), &mesh.to_ply())?;
            log_stage("mesh", dtm.valid_cells(), mesh.faces.len(), t);
        }
    }

    if let (Some(cut), false) = (cfg.profile_cut, cfg.stages.skip_profile) {
        let t = Instant::now();
        let profile =
            terrain::extract_profile(&ground, cut, cfg.profile_halfwidth, cfg.profile_bin)
                .map_err(CliError::stage("profile"))?;
        stages::write_text("profile", &emit("profile.txt"), &profile.to_text())?;
        log_stage("profile", ground.len(), profile.samples.len(), t);
        info!("profile: delta={:.3}m", profile.delta);
    }

    let report = if cfg.stages.skip_report {
        None
    } else {
        let t = Instant::now();
        let r = terrain::report(cloud.len(), &labels).map_err(CliError::stage("report"))?;
        stages::write_text("report", &emit("report.txt"), &r.to_table())?;
        stages::write_text("report", &emit("report.kv"), &r.to_key_values())?;
        log_stage("report", cloud.len(), r.kept(), t);
        Some(r)
    };

    Ok(PipelineOutcome {
        labels,
        report,
        artifacts,
    })
}
