//! Size distributions, characteristic diameters and segregation indices.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::shape::Fragment;

pub const DEFAULT_COUNT_BIN_CM: f64 = 0.2;
pub const DEFAULT_VOLUME_BIN_CM: f64 = 0.8;
pub const DEFAULT_FINE_CM: f64 = 5.0;
pub const DEFAULT_COARSE_CM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionMode {
    Count,
    Volume,
}

impl DistributionMode {
    pub fn default_bin_width(self) -> f64 {
        match self {
            DistributionMode::Count => DEFAULT_COUNT_BIN_CM,
            DistributionMode::Volume => DEFAULT_VOLUME_BIN_CM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDistribution {
    pub mode: DistributionMode,
    pub bin_width: f64,
    /// `bin_shares.len() + 1` edges starting at 0.
    pub bin_edges: Vec<f64>,
    pub bin_shares: Vec<f64>,
    /// `(d, F)` for every fragment in ascending `d`, F being the passing fraction.
    pub cumulative: Vec<(f64, f64)>,
    pub n_fragments: usize,
    pub total_volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicDiameters {
    pub d10: f64,
    pub d50: f64,
    pub d90: f64,
}

impl CharacteristicDiameters {
    pub fn as_array(&self) -> [f64; 3] {
        [self.d10, self.d50, self.d90]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            d10: v[0],
            d50: v[1],
            d90: v[2],
        }
    }
}

/// Computes the size distribution of `fragments` by count or by volume.
///
/// Bins start at 0 and cover the largest diameter; the largest fragment lands
/// in the last bin even when it sits exactly on an edge. The cumulative curve
/// uses the exact per-fragment weights, not the bins.
pub fn psd(fragments: &[Fragment], mode: DistributionMode, bin_width: f64) -> Result<SizeDistribution> {
    if fragments.is_empty() {
        return Err(Error::EmptyInput("no fragments for size distribution"));
    }
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
    }
    let mut items: Vec<(f64, f64)> = fragments
        .iter()
        .map(|f| {
            let w = match mode {
                DistributionMode::Count => 1.0,
                DistributionMode::Volume => f.volume,
            };
            (f.d, w)
        })
        .collect();
    if items.iter().any(|&(d, w)| !(d.is_finite() && d >= 0.0 && w.is_finite() && w >= 0.0)) {
        return Err(Error::invalid("fragment diameters and volumes must be finite and nonnegative"));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_weight: f64 = items.iter().map(|&(_, w)| w).sum();
    if total_weight <= 0.0 {
        return Err(Error::invalid("fragments carry zero total volume"));
    }

    let max_d = items.last().map(|&(d, _)| d).unwrap_or(0.0);
    let n_bins = ((max_d / bin_width).ceil() as usize).max(1);
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| i as f64 * bin_width).collect();
    let mut bin_weight = vec![0.0; n_bins];
    for &(d, w) in &items {
        let k = ((d / bin_width).floor() as usize).min(n_bins - 1);
        bin_weight[k] += w;
    }
    let bin_shares = bin_weight.iter().map(|w| w / total_weight).collect();

    let mut acc = 0.0;
    let mut cumulative: Vec<(f64, f64)> = Vec::with_capacity(items.len());
    for &(d, w) in &items {
        acc += w;
        let point = (d, acc / total_weight);
        // equal diameters collapse to one step
        match cumulative.last_mut() {
            Some(last) if last.0 == d => *last = point,
            _ => cumulative.push(point),
        }
    }
    if let Some(last) = cumulative.last_mut() {
        last.1 = 1.0;
    }

    Ok(SizeDistribution {
        mode,
        bin_width,
        bin_edges,
        bin_shares,
        cumulative,
        n_fragments: fragments.len(),
        total_volume: fragments.iter().map(|f| f.volume).sum(),
    })
}

/// Diameter at passing fraction `p`, linearly interpolated on the cumulative
/// curve with an implicit `(d_1, 0)` start point.
pub fn passing_diameter(cumulative: &[(f64, f64)], p: f64) -> Result<f64> {
    let (&(d_first, f_first), _) = cumulative
        .split_first()
        .ok_or(Error::EmptyInput("empty cumulative curve"))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("passing fraction {p} outside [0, 1]")));
    }
    if p <= f_first {
        return Ok(d_first);
    }
    for pair in cumulative.windows(2) {
        let (d0, f0) = pair[0];
        let (d1, f1) = pair[1];
        if f1 >= p {
            return Ok(d0 + (d1 - d0) * (p - f0) / (f1 - f0));
        }
    }
    Ok(cumulative[cumulative.len() - 1].0)
}

pub fn characteristic_diameters(dist: &SizeDistribution) -> Result<CharacteristicDiameters> {
    if dist.mode != DistributionMode::Volume {
        return Err(Error::invalid("characteristic diameters need a volume distribution"));
    }
    Ok(CharacteristicDiameters {
        d10: passing_diameter(&dist.cumulative, 0.1)?,
        d50: passing_diameter(&dist.cumulative, 0.5)?,
        d90: passing_diameter(&dist.cumulative, 0.9)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub share_below: f64,
    pub share_above: f64,
    pub mean_d: f64,
    pub below_cm: f64,
    pub above_cm: f64,
}

/// Count fractions strictly below `below_cm` and strictly above `above_cm`,
/// plus the arithmetic mean diameter.
pub fn count_summary(fragments: &[Fragment], below_cm: f64, above_cm: f64) -> Result<CountSummary> {
    if fragments.is_empty() {
        return Err(Error::EmptyInput("no fragments for count summary"));
    }
    let n = fragments.len() as f64;
    let below = fragments.iter().filter(|f| f.d < below_cm).count() as f64;
    let above = fragments.iter().filter(|f| f.d > above_cm).count() as f64;
    Ok(CountSummary {
        share_below: below / n,
        share_above: above / n,
        mean_d: fragments.iter().map(|f| f.d).sum::<f64>() / n,
        below_cm,
        above_cm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub section_id: String,
    /// Depth along the slope, meters.
    pub depth_range: (f64, f64),
    pub per_image: Vec<CharacteristicDiameters>,
    pub mean: CharacteristicDiameters,
    /// CIs for d10, d50, d90 in that order.
    pub ci95: [ConfidenceInterval; 3],
}

/// Two-sided Student-t interval `mean +- t(1 - alpha/2, n-1) * s / sqrt(n)`.
pub fn mean_ci(values: &[f64], level: f64) -> Result<(f64, ConfidenceInterval)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .map_err(|e| Error::invalid(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    let half = t * var.sqrt() / nf.sqrt();
    Ok((
        mean,
        ConfidenceInterval {
            low: mean - half,
            high: mean + half,
        },
    ))
}

pub fn section_report(
    per_image: &[CharacteristicDiameters],
    section_id: &str,
    depth_range: (f64, f64),
) -> Result<SectionReport> {
    if per_image.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: per_image.len(),
        });
    }
    let mut mean = [0.0; 3];
    let mut ci95 = [ConfidenceInterval { low: 0.0, high: 0.0 }; 3];
    for k in 0..3 {
        let col: Vec<f64> = per_image.iter().map(|c| c.as_array()[k]).collect();
        let (m, ci) = mean_ci(&col, 0.95)?;
        mean[k] = m;
        ci95[k] = ci;
    }
    Ok(SectionReport {
        section_id: section_id.to_string(),
        depth_range,
        per_image: per_image.to_vec(),
        mean: CharacteristicDiameters::from_array(mean),
        ci95,
    })
}

/// Volume distribution and characteristic diameters of all fragments pooled.
pub fn pool_overall(all_fragments: &[Fragment], bin_width: f64) -> Result<(SizeDistribution, CharacteristicDiameters)> {
    let dist = psd(all_fragments, DistributionMode::Volume, bin_width)?;
    let cd = characteristic_diameters(&dist)?;
    Ok((dist, cd))
}

pub fn relative_diameters(section_mean: &CharacteristicDiameters, overall: &CharacteristicDiameters) -> Result<[f64; 3]> {
    let s = section_mean.as_array();
    let o = overall.as_array();
    let mut out = [0.0; 3];
    for k in 0..3 {
        if !(o[k] > 0.0) {
            return Err(Error::invalid(format!(
                "overall characteristic diameter must be positive, got {}",
                o[k]
            )));
        }
        out[k] = s[k] / o[k];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all x values are equal"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionRatios {
    pub section_id: String,
    /// 1-based position along the slope.
    pub index: usize,
    /// d10/d'10, d50/d'50, d90/d'90.
    pub ratios: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegregationReport {
    /// Whole-slope d'10, d'50, d'90.
    pub overall: CharacteristicDiameters,
    pub sections: Vec<SectionRatios>,
    /// Ratio-vs-section-index fits for d10, d50, d90.
    pub fits: [LineFit; 3],
}

/// Relative diameters of each section (taken in slope order, indexed from 1)
/// and their straight-line trends.
pub fn segregation_report(
    section_means: &[(String, CharacteristicDiameters)],
    overall: &CharacteristicDiameters,
) -> Result<SegregationReport> {
    if section_means.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: section_means.len(),
        });
    }
    let sections = section_means
        .iter()
        .enumerate()
        .map(|(i, (id, mean))| {
            Ok(SectionRatios {
                section_id: id.clone(),
                index: i + 1,
                ratios: relative_diameters(mean, overall)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = |k: usize| {
        let pts: Vec<(f64, f64)> = sections.iter().map(|s| (s.index as f64, s.ratios[k])).collect();
        fit_line(&pts)
    };
    Ok(SegregationReport {
        overall: *overall,
        fits: [fit(0)?, fit(1)?, fit(2)?],
        sections,
    })
}
