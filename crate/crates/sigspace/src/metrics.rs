//! Detection metrics over the labeled IP space: confusion counts, ROC points,
//! f1 scores, classifier inversion, cost sweeps, and frontier areas.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::traffic::{IpLabel, LabeledIpSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn num_malicious(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    pub fn num_benign(&self) -> u64 {
        self.false_pos + self.true_neg
    }

    /// Counts of the negated classifier: every decision flipped.
    pub fn complement(&self) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: self.false_neg,
            false_pos: self.true_neg,
            true_neg: self.false_pos,
            false_neg: self.true_pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    #[serde(default)]
    pub variant_label: String,
    #[serde(default)]
    pub inverted: bool,
}

impl RocPoint {
    pub fn new(fpr: f64, tpr: f64) -> RocPoint {
        RocPoint {
            fpr,
            tpr,
            variant_label: String::new(),
            inverted: false,
        }
    }

    pub fn labeled(fpr: f64, tpr: f64, label: impl Into<String>) -> RocPoint {
        RocPoint {
            fpr,
            tpr,
            variant_label: label.into(),
            inverted: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostSample {
    pub theta: f64,
    pub min_cost: f64,
    pub argmin_label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostCurve {
    pub samples: Vec<CostSample>,
}

impl CostCurve {
    /// Trapezoidal area under the sampled curve.
    pub fn area(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].theta - w[0].theta) * (w[0].min_cost + w[1].min_cost) / 2.0)
            .sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("flagged ip {0} has no label")]
    UnlabeledIp(Ipv4Addr),
    #[error("no {0} IPs in the labeled space; ROC rates are undefined")]
    EmptyClass(&'static str),
    #[error("cost sweep requires the (0,0) and (1,1) anchor points")]
    MissingAnchors,
    #[error("invalid frontier: {0}")]
    BadFrontier(String),
}

pub fn confusion(
    flagged: &BTreeSet<Ipv4Addr>,
    labels: &LabeledIpSpace,
) -> Result<ConfusionCounts, MetricsError> {
    let mut c = ConfusionCounts::default();
    for &ip in flagged {
        match labels.label_of(ip) {
            Some(IpLabel::Malicious) => c.true_pos += 1,
            Some(IpLabel::Benign) => c.false_pos += 1,
            None => return Err(MetricsError::UnlabeledIp(ip)),
        }
    }
    let (malicious, benign) = labels.counts();
    c.false_neg = malicious as u64 - c.true_pos;
    c.true_neg = benign as u64 - c.false_pos;
    Ok(c)
}

pub fn roc_point(c: &ConfusionCounts) -> Result<RocPoint, MetricsError> {
    if c.num_malicious() == 0 {
        return Err(MetricsError::EmptyClass("malicious"));
    }
    if c.num_benign() == 0 {
        return Err(MetricsError::EmptyClass("benign"));
    }
    Ok(RocPoint::new(
        c.false_pos as f64 / c.num_benign() as f64,
        c.true_pos as f64 / c.num_malicious() as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveClass {
    Malicious,
    Benign,
}

/// Precision, recall, f1 with the chosen positive class. Zero denominators
/// yield 0 by convention so degenerate classifiers still tabulate.
pub fn prf1(c: &ConfusionCounts, positive: PositiveClass) -> Prf1 {
    // with benign as positive class the confusion matrix is the complement's
    let c = match positive {
        PositiveClass::Malicious => *c,
        PositiveClass::Benign => ConfusionCounts {
            true_pos: c.true_neg,
            false_pos: c.false_neg,
            true_neg: c.true_pos,
            false_neg: c.false_pos,
        },
    };
    let precision = ratio(c.true_pos, c.true_pos + c.false_pos);
    let recall = ratio(c.true_pos, c.true_pos + c.false_neg);
    Prf1 {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn macro_f1(f1_malicious: f64, f1_benign: f64) -> f64 {
    (f1_malicious + f1_benign) / 2.0
}

/// Mirrors a point through (0.5, 0.5), i.e. negates the classifier's
/// decisions. An involution: applying it twice gives the point back.
pub fn invert(p: &RocPoint) -> RocPoint {
    RocPoint {
        fpr: 1.0 - p.fpr,
        tpr: 1.0 - p.tpr,
        variant_label: p.variant_label.clone(),
        inverted: !p.inverted,
    }
}

/// C = theta * fpr + (1 - theta) * fnr.
pub fn cost(theta: f64, p: &RocPoint) -> f64 {
    theta * p.fpr + (1.0 - theta) * (1.0 - p.tpr)
}

pub fn uniform_thetas(samples: usize) -> Vec<f64> {
    assert!(samples >= 2);
    let n = (samples - 1) as f64;
    (0..samples).map(|i| i as f64 / n).collect()
}

pub const DEFAULT_THETA_SAMPLES: usize = 1001;

/// Per-theta minimum of the linear cost over the given points. The minimum of
/// a linear objective over a point set equals its minimum over the set's
/// convex-hull vertices, so no hull is built here. Ties keep the earliest
/// point in input order.
pub fn min_cost_curve(points: &[RocPoint], thetas: &[f64]) -> Result<CostCurve, MetricsError> {
    let has = |fpr: f64, tpr: f64| points.iter().any(|p| p.fpr == fpr && p.tpr == tpr);
    if !has(0.0, 0.0) || !has(1.0, 1.0) {
        return Err(MetricsError::MissingAnchors);
    }
    let samples = thetas
        .iter()
        .map(|&theta| {
            let mut best = f64::INFINITY;
            let mut label = "";
            for p in points {
                let c = cost(theta, p);
                if c < best {
                    best = c;
                    label = &p.variant_label;
                }
            }
            CostSample {
                theta,
                min_cost: best,
                argmin_label: label.to_string(),
            }
        })
        .collect();
    Ok(CostCurve { samples })
}

/// Trapezoidal area under an fpr-sorted chain from (0,0) to (1,1).
pub fn frontier_area(frontier: &[RocPoint]) -> Result<f64, MetricsError> {
    if frontier.len() < 2 {
        return Err(MetricsError::BadFrontier("fewer than two points".into()));
    }
    for p in frontier {
        if !(0.0..=1.0).contains(&p.fpr) || !(0.0..=1.0).contains(&p.tpr) {
            return Err(MetricsError::BadFrontier(format!(
                "point ({}, {}) outside the unit square",
                p.fpr, p.tpr
            )));
        }
    }
    let first = &frontier[0];
    let last = &frontier[frontier.len() - 1];
    if (first.fpr, first.tpr) != (0.0, 0.0) || (last.fpr, last.tpr) != (1.0, 1.0) {
        return Err(MetricsError::BadFrontier(
            "chain must run from (0,0) to (1,1)".into(),
        ));
    }
    let mut area = 0.0;
    for w in frontier.windows(2) {
        if w[1].fpr < w[0].fpr {
            return Err(MetricsError::BadFrontier("fpr not ascending".into()));
        }
        area += (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0;
    }
    Ok(area)
}
