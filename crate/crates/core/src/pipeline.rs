//! Denoising followed by ground filtering, entirely in memory.

use log::info;
use std::time::Instant;

use crate::csf::{self, ClothState, CsfParams};
use crate::denoise::{self, SorParams};
use crate::terrain::{report, ClassificationReport};
use crate::{Label, LabelMask, PointCloud, Result};

/// Labels for every input point plus what the stages produced along the way.
#[derive(Debug, Clone)]
pub struct Classification {
    pub labels: LabelMask,
    pub report: ClassificationReport,
    pub cloth: ClothState,
    pub iterations_used: usize,
}

impl Classification {
    /// Points labelled ground, in input order.
    pub fn ground(&self, cloud: &PointCloud) -> PointCloud {
        cloud.select(&self.labels.indices_of(Label::Ground))
    }
}

/// Runs outlier removal (when `sor` is given) and cloth filtering on the
/// survivors. Outliers never reach the cloth.
pub fn classify_cloud(
    cloud: &PointCloud,
    sor: Option<&SorParams>,
    csf_params: &CsfParams,
) -> Result<Classification> {
    let mut labels = match sor {
        Some(p) => {
            let t = Instant::now();
            let mask = denoise::statistical_outlier_removal(cloud, p)?;
            info!(
                "denoise: {} points, {} outliers, {} ms",
                cloud.len(),
                mask.counts().outlier,
                t.elapsed().as_millis()
            );
            mask
        }
        None => LabelMask::filled(cloud.len(), Label::Unlabeled),
    };

    let (kept, index_map) = denoise::apply_mask(cloud, &labels, &[Label::Unlabeled])?;
    let t = Instant::now();
    let result = csf::filter(&kept, csf_params)?;
    let counts = result.labels.counts();
    info!(
        "filter: {} ground, {} non-ground, {} iterations, {} ms",
        counts.ground,
        counts.non_ground,
        result.iterations_used,
        t.elapsed().as_millis()
    );
    labels.refine(&index_map, &result.labels)?;
    let report = report(cloud.len(), &labels)?;
    Ok(Classification {
        labels,
        report,
        cloth: result.cloth,
        iterations_used: result.iterations_used,
    })
}
