//! Pixel-level evaluation of segmentation output against ground truth.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ClassMask, Label};

/// Probabilities are clamped to at least this before taking logs.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// One-vs-rest counts for every class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub total: u64,
    pub classes: Vec<ClassCounts>,
}

impl ConfusionMatrix {
    /// Counts from parallel slices of class indices in `0..num_classes`.
    pub fn from_indices(pred: &[u8], truth: &[u8], num_classes: usize) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::invalid(format!(
                "prediction has {} pixels, ground truth {}",
                pred.len(),
                truth.len()
            )));
        }
        // joint[t * k + p]
        let mut joint = vec![0u64; num_classes * num_classes];
        for (&p, &t) in pred.iter().zip(truth) {
            let (p, t) = (p as usize, t as usize);
            if p >= num_classes || t >= num_classes {
                return Err(Error::invalid(format!(
                    "class index {} outside 0..{num_classes}",
                    p.max(t)
                )));
            }
            joint[t * num_classes + p] += 1;
        }
        let total = pred.len() as u64;
        let classes = (0..num_classes)
            .map(|k| {
                let tp = joint[k * num_classes + k];
                let pred_k: u64 = (0..num_classes).map(|t| joint[t * num_classes + k]).sum();
                let truth_k: u64 = (0..num_classes).map(|p| joint[k * num_classes + p]).sum();
                let fp = pred_k - tp;
                let fn_ = truth_k - tp;
                ClassCounts {
                    tp,
                    fp,
                    fn_,
                    tn: total - tp - fp - fn_,
                }
            })
            .collect();
        Ok(Self { total, classes })
    }
}

pub fn confusion(pred: &ClassMask, truth: &ClassMask) -> Result<ConfusionMatrix> {
    if pred.dims() != truth.dims() {
        return Err(Error::invalid(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    ConfusionMatrix::from_indices(&pred.to_raw(), &truth.to_raw(), Label::ALL.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `(TP + TN) / total` for this class.
    pub pixel_accuracy: f64,
    /// Names of metrics whose denominator was zero (reported as 0).
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub miou: f64,
    /// Mean over classes of `(TP + TN) / total`.
    pub mpa: f64,
    /// Mean over classes of `TP / (TP + FN)`.
    pub mpa_conventional: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    /// Averages over every class.
    pub all_classes: Summary,
    /// Averages over classes other than index 0 (background).
    pub foreground: Summary,
}

fn ratio(num: u64, den: u64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(name: &str, c: &ClassCounts) -> ClassMetrics {
    let mut undefined = Vec::new();
    let precision = ratio(c.tp, c.tp + c.fp, "precision", &mut undefined);
    let recall = ratio(c.tp, c.tp + c.fn_, "recall", &mut undefined);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        undefined.push("f1".to_string());
        0.0
    };
    let iou = ratio(c.tp, c.tp + c.fp + c.fn_, "iou", &mut undefined);
    let pixel_accuracy = ratio(c.tp + c.tn, c.total(), "pixel_accuracy", &mut undefined);
    ClassMetrics {
        class: name.to_string(),
        iou,
        precision,
        recall,
        f1,
        pixel_accuracy,
        undefined,
    }
}

fn summarize(classes: &[ClassMetrics]) -> Summary {
    let n = classes.len().max(1) as f64;
    Summary {
        miou: classes.iter().map(|c| c.iou).sum::<f64>() / n,
        mpa: classes.iter().map(|c| c.pixel_accuracy).sum::<f64>() / n,
        mpa_conventional: classes.iter().map(|c| c.recall).sum::<f64>() / n,
    }
}

/// Precision, recall, F1, IoU and per-class pixel accuracy, with class
/// names taken from [`Label`] when the matrix has three classes.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let classes: Vec<ClassMetrics> = cm
        .classes
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let name = if cm.classes.len() == Label::ALL.len() {
                Label::ALL[k].name().to_string()
            } else {
                format!("class{k}")
            };
            class_metrics(&name, c)
        })
        .collect();
    MetricsReport {
        all_classes: summarize(&classes),
        foreground: summarize(classes.get(1..).unwrap_or(&[])),
        classes,
    }
}

impl MetricsReport {
    /// Aligned text table: mIoU, mPA, then IoU/Precision/Recall/F1 for each
    /// foreground class, all in percent.
    pub fn to_table(&self) -> String {
        let fg = self.classes.get(1..).unwrap_or(&[]);
        let mut header = format!("{:<14}{:>9}{:>9}", "", "mIoU", "mPA");
        let mut group = format!("{:<32}", "");
        for c in fg {
            let _ = write!(group, "{:<40}", c.class);
            for m in ["IoU", "Precision", "Recall", "F1"] {
                let _ = write!(header, "{m:>10}");
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "{}", group.trim_end());
        let _ = writeln!(out, "{header}");
        for (label, s) in [("all classes", &self.all_classes), ("foreground", &self.foreground)] {
            let mut line = format!("{label:<14}{:>9.2}{:>9.2}", 100.0 * s.miou, 100.0 * s.mpa);
            for c in fg {
                for v in [c.iou, c.precision, c.recall, c.f1] {
                    let _ = write!(line, "{:>10.2}", 100.0 * v);
                }
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// Per-pixel class probabilities `p` and one-hot targets `y`, both `n x k`
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    n: usize,
    k: usize,
    p: Vec<f64>,
    y: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(n: usize, k: usize, p: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || k == 0 || p.len() != n * k || y.len() != n * k {
            return Err(Error::invalid(format!(
                "probability map {n}x{k} needs {} values, got p={} y={}",
                n * k,
                p.len(),
                y.len()
            )));
        }
        for i in 0..n {
            let row = &p[i * k..(i + 1) * k];
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid(format!("pixel {i}: probability outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!("pixel {i}: probabilities sum to {s}")));
            }
            let t = &y[i * k..(i + 1) * k];
            let ones = t.iter().filter(|&&v| v == 1.0).count();
            let zeros = t.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || zeros != k - 1 {
                return Err(Error::invalid(format!("pixel {i}: target is not one-hot")));
            }
        }
        Ok(Self { n, k, p, y })
    }

    /// Builds one-hot targets from class indices.
    pub fn from_labels(k: usize, p: Vec<f64>, labels: &[usize]) -> Result<Self> {
        let mut y = vec![0.0; labels.len() * k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::invalid(format!("label {l} outside 0..{k}")));
            }
            y[i * k + l] = 1.0;
        }
        Self::new(labels.len(), k, p, y)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }
}

/// Mean negative log-likelihood of the target class.
pub fn cross_entropy(pm: &ProbabilityMap) -> f64 {
    let s: f64 = pm
        .p
        .iter()
        .zip(&pm.y)
        .map(|(&p, &y)| if y == 0.0 { 0.0 } else { y * p.max(LOG_EPS).ln() })
        .sum();
    -s / pm.n as f64
}

/// `1 - 2 sum(g s) / (sum g + sum s)` over all pixels and classes.
pub fn dice_loss(pm: &ProbabilityMap) -> f64 {
    let inter: f64 = pm.p.iter().zip(&pm.y).map(|(s, g)| s * g).sum();
    let denom: f64 = pm.y.iter().sum::<f64>() + pm.p.iter().sum::<f64>();
    1.0 - 2.0 * inter / denom
}

pub fn total_loss(pm: &ProbabilityMap) -> f64 {
    cross_entropy(pm) + dice_loss(pm)
}
