//! End-to-end processing built from the library stages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::fusion::{expand_regions, extract_seeds, filter_fine, InstanceMap};
use crate::graindist::{
    characteristic_diameters, count_summary, pool_overall, psd, section_report, segregation_report,
    CharacteristicDiameters, CountSummary, DistributionMode, SectionReport, SegregationReport, SizeDistribution,
};
use crate::io::SectionAssignment;
use crate::raster::{morphological_open, ClassMask};
use crate::shape::{measure, Fragment};

#[derive(Debug, Clone)]
pub struct Postprocessed {
    pub instances: InstanceMap,
    pub fragments: Vec<Fragment>,
}

/// Opening, seed extraction, region expansion, measurement and fine-particle
/// removal on one stitched mask.
pub fn postprocess(mask: &ClassMask, cfg: &PipelineConfig) -> Result<Postprocessed> {
    cfg.validate()?;
    let cal = cfg.calibration()?;
    let expansion = cfg.expansion()?;
    let opened = morphological_open(mask, cfg.se_half);
    let seeds = extract_seeds(&opened, expansion.seed_connectivity);
    let instances = expand_regions(&opened, &seeds, &expansion)?;
    let fragments = measure(&instances, &cal);
    let (instances, fragments) = filter_fine(&instances, &fragments, cfg.min_diameter_px, &cal)?;
    Ok(Postprocessed { instances, fragments })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageStatistics {
    pub image_id: String,
    pub count_distribution: SizeDistribution,
    pub volume_distribution: SizeDistribution,
    pub count_summary: CountSummary,
    pub characteristic: CharacteristicDiameters,
}

pub fn image_statistics(image_id: &str, fragments: &[Fragment], cfg: &PipelineConfig) -> Result<ImageStatistics> {
    let volume_distribution = psd(fragments, DistributionMode::Volume, cfg.volume_bin_cm)?;
    Ok(ImageStatistics {
        image_id: image_id.to_string(),
        count_distribution: psd(fragments, DistributionMode::Count, cfg.count_bin_cm)?,
        characteristic: characteristic_diameters(&volume_distribution)?,
        volume_distribution,
        count_summary: count_summary(fragments, cfg.fine_cm, cfg.coarse_cm)?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionsAnalysis {
    pub images: Vec<ImageStatistics>,
    pub sections: Vec<SectionReport>,
    pub overall_distribution: SizeDistribution,
    pub segregation: SegregationReport,
}

fn select_fragments(fragments: &[Fragment], cfg: &PipelineConfig) -> Vec<Fragment> {
    fragments
        .iter()
        .filter(|f| cfg.include_border_fragments || !f.touches_border)
        .cloned()
        .collect()
}

/// Groups images by section (ordered by depth), reports per-section means
/// and intervals, pools every fragment into the whole-slope distribution and
/// derives the relative diameters.
pub fn analyze_sections(
    images: &BTreeMap<String, Vec<Fragment>>,
    section_map: &[SectionAssignment],
    cfg: &PipelineConfig,
) -> Result<SectionsAnalysis> {
    cfg.validate()?;
    let mut order: Vec<(String, (f64, f64))> = Vec::new();
    for a in section_map {
        if !order.iter().any(|(id, _)| *id == a.section_id) {
            order.push((a.section_id.clone(), a.depth_range));
        }
    }
    order.sort_by(|x, y| x.1 .0.total_cmp(&y.1 .0));
    if order.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: order.len(),
        });
    }
    for id in images.keys() {
        if !section_map.iter().any(|a| &a.image_id == id) {
            return Err(Error::invalid(format!("image {id} has no section assignment")));
        }
    }

    let mut stats = Vec::new();
    let mut pooled = Vec::new();
    let mut sections = Vec::new();
    for (section_id, depth) in &order {
        let mut per_image = Vec::new();
        for a in section_map.iter().filter(|a| &a.section_id == section_id) {
            let Some(frags) = images.get(&a.image_id) else {
                continue;
            };
            let frags = select_fragments(frags, cfg);
            let st = image_statistics(&a.image_id, &frags, cfg)?;
            per_image.push(st.characteristic);
            pooled.extend(frags);
            stats.push(st);
        }
        sections.push(section_report(&per_image, section_id, *depth)?);
    }
    let (overall_distribution, overall) = pool_overall(&pooled, cfg.volume_bin_cm)?;
    let means: Vec<(String, CharacteristicDiameters)> =
        sections.iter().map(|s| (s.section_id.clone(), s.mean)).collect();
    let segregation = segregation_report(&means, &overall)?;
    Ok(SectionsAnalysis {
        images: stats,
        sections,
        overall_distribution,
        segregation,
    })
}

/// Tabulated section means and whole-slope diameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSection {
    pub section_id: String,
    pub depth_range: (f64, f64),
    pub mean: CharacteristicDiameters,
    #[serde(default)]
    pub ci95: Option<[(f64, f64); 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceData {
    pub sections: Vec<ReferenceSection>,
    pub overall: CharacteristicDiameters,
}

/// Bundled table of reference section means and whole-slope diameters.
pub const BUNDLED_REFERENCE: &str = include_str!("../data/slope_reference.json");

impl ReferenceData {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_REFERENCE).expect("bundled reference parses")
    }

    pub fn segregation(&self) -> Result<SegregationReport> {
        let mut secs = self.sections.clone();
        secs.sort_by(|a, b| a.depth_range.0.total_cmp(&b.depth_range.0));
        let means: Vec<_> = secs.iter().map(|s| (s.section_id.clone(), s.mean)).collect();
        segregation_report(&means, &self.overall)
    }
}
