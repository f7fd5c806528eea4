use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scores::*;
use crate::cohort::{Attribute, GroupAssignment};
use crate::error::{Error, Result};

/// One scored example with its group memberships.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredExample {
    pub score: f64,
    pub label: u8,
    pub groups: GroupAssignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

impl From<ConfusionAtThreshold> for Confusion {
    fn from(c: ConfusionAtThreshold) -> Self {
        Confusion {
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            fpr: c.fpr,
            fnr: c.fnr,
        }
    }
}

/// Metrics for one population (a group or everyone). `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMetrics {
    pub n: usize,
    pub positives: usize,
    pub incidence: Option<f64>,
    pub auc_roc: Option<f64>,
    pub auc_prc: Option<f64>,
    pub brier: Option<f64>,
    pub confusion: Confusion,
}

impl PopulationMetrics {
    pub fn compute(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Self> {
        let positives = labels.iter().filter(|&&y| y == 1).count();
        let n = labels.len();
        Ok(PopulationMetrics {
            n,
            positives,
            incidence: (n > 0).then(|| positives as f64 / n as f64),
            auc_roc: defined(auc_roc(scores, labels))?,
            auc_prc: defined(auc_prc(scores, labels))?,
            brier: defined(brier(scores, labels))?,
            confusion: confusion_at(scores, labels, threshold)?.into(),
        })
    }
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub attribute: Attribute,
    pub group: usize,
    pub name: String,
    pub metrics: PopulationMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMetrics {
    pub attribute: Attribute,
    pub cv_fpr: Option<f64>,
    pub cv_fnr: Option<f64>,
    pub mean_emd_y0: Option<f64>,
    pub mean_emd_y1: Option<f64>,
    pub demographic_parity_gap: Option<f64>,
    /// Groups with no members in the evaluated population.
    pub absent_groups: Vec<usize>,
}

impl AttributeMetrics {
    pub fn alignment(&self) -> Option<f64> {
        Some(0.5 * (self.mean_emd_y0? + self.mean_emd_y1?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub attribute: Attribute,
    pub group: usize,
    pub y: u8,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub threshold: f64,
    pub overall: PopulationMetrics,
    pub groups: Vec<GroupMetrics>,
    pub attributes: Vec<AttributeMetrics>,
    pub histograms: Vec<Histogram>,
}

pub fn fairness_report(
    examples: &[ScoredExample],
    attributes: &[Attribute],
    threshold: f64,
) -> Result<FairnessReport> {
    for (i, e) in examples.iter().enumerate() {
        if !(0.0..=1.0).contains(&e.score) || e.label > 1 {
            return Err(Error::Contract(format!(
                "example {i}: score {} label {} out of range",
                e.score, e.label
            )));
        }
    }
    let scores: Vec<f64> = examples.iter().map(|e| e.score).collect();
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let overall = PopulationMetrics::compute(&scores, &labels, threshold)?;

    let mut groups = Vec::new();
    let mut attrs = Vec::new();
    let mut histograms = Vec::new();
    for &attribute in attributes {
        let k = attribute.group_count();
        let ids: Vec<usize> = examples.iter().map(|e| e.groups.get(attribute)).collect();
        if let Some(bad) = ids.iter().find(|&&g| g >= k) {
            return Err(Error::Contract(format!(
                "{} group id {bad} out of range 0..{k}",
                attribute.name()
            )));
        }
        let mut fprs = Vec::new();
        let mut fnrs = Vec::new();
        let mut absent = Vec::new();
        for g in 0..k {
            let rows: Vec<usize> = (0..examples.len()).filter(|&i| ids[i] == g).collect();
            if rows.is_empty() {
                absent.push(g);
            }
            let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
            let l: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
            let metrics = PopulationMetrics::compute(&s, &l, threshold)?;
            if !rows.is_empty() {
                fprs.push(metrics.confusion.fpr);
                fnrs.push(metrics.confusion.fnr);
            }
            for y in [0u8, 1] {
                histograms.push(Histogram {
                    attribute,
                    group: g,
                    y,
                    counts: histogram(
                        s.iter().zip(&l).filter(|(_, &ly)| ly == y).map(|(&v, _)| v),
                        HISTOGRAM_BINS,
                    ),
                });
            }
            groups.push(GroupMetrics {
                attribute,
                group: g,
                name: attribute.group_names()[g].to_string(),
                metrics,
            });
        }
        let label = attribute.name();
        attrs.push(AttributeMetrics {
            attribute,
            cv_fpr: defined(cv_of_rates(&format!("{label} FPR CV"), &fprs))?,
            cv_fnr: defined(cv_of_rates(&format!("{label} FNR CV"), &fnrs))?,
            mean_emd_y0: mean_pairwise_emd(&scores, &labels, &ids, k, 0),
            mean_emd_y1: mean_pairwise_emd(&scores, &labels, &ids, k, 1),
            demographic_parity_gap: demographic_parity_gap(&scores, &ids, k, threshold),
            absent_groups: absent,
        });
    }
    Ok(FairnessReport {
        threshold,
        overall,
        groups,
        attributes: attrs,
        histograms,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.10}"),
        None => "undefined".to_string(),
    }
}

fn write_population(out: &mut String, prefix: &str, m: &PopulationMetrics) {
    let c = &m.confusion;
    let _ = writeln!(out, "{prefix}.n = {}", m.n);
    let _ = writeln!(out, "{prefix}.positives = {}", m.positives);
    let _ = writeln!(out, "{prefix}.incidence = {}", fmt_opt(m.incidence));
    let _ = writeln!(out, "{prefix}.auc_roc = {}", fmt_opt(m.auc_roc));
    let _ = writeln!(out, "{prefix}.auc_prc = {}", fmt_opt(m.auc_prc));
    let _ = writeln!(out, "{prefix}.brier = {}", fmt_opt(m.brier));
    let _ = writeln!(out, "{prefix}.tp = {}", c.tp);
    let _ = writeln!(out, "{prefix}.fp = {}", c.fp);
    let _ = writeln!(out, "{prefix}.tn = {}", c.tn);
    let _ = writeln!(out, "{prefix}.fn = {}", c.fn_);
    let _ = writeln!(out, "{prefix}.fpr = {}", fmt_opt(c.fpr));
    let _ = writeln!(out, "{prefix}.fnr = {}", fmt_opt(c.fnr));
}

impl FairnessReport {
    pub fn attribute(&self, attribute: Attribute) -> Option<&AttributeMetrics> {
        self.attributes.iter().find(|a| a.attribute == attribute)
    }

    pub fn group(&self, attribute: Attribute, group: usize) -> Option<&GroupMetrics> {
        self.groups
            .iter()
            .find(|g| g.attribute == attribute && g.group == group)
    }

    /// Key-value document with a fixed key order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "threshold = {}", self.threshold);
        write_population(&mut out, "overall", &self.overall);
        for a in &self.attributes {
            let p = format!("attribute.{}", a.attribute.name());
            let _ = writeln!(out, "{p}.cv_fpr = {}", fmt_opt(a.cv_fpr));
            let _ = writeln!(out, "{p}.cv_fnr = {}", fmt_opt(a.cv_fnr));
            let _ = writeln!(out, "{p}.mean_emd_y0 = {}", fmt_opt(a.mean_emd_y0));
            let _ = writeln!(out, "{p}.mean_emd_y1 = {}", fmt_opt(a.mean_emd_y1));
            let _ = writeln!(out, "{p}.demographic_parity_gap = {}", fmt_opt(a.demographic_parity_gap));
            let absent: Vec<String> = a.absent_groups.iter().map(|g| a.attribute.group_names()[*g].to_string()).collect();
            let _ = writeln!(out, "{p}.absent_groups = [{}]", absent.join(","));
        }
        for g in &self.groups {
            let p = format!("group.{}.{}", g.attribute.name(), g.name);
            write_population(&mut out, &p, &g.metrics);
        }
        out
    }

    /// Histogram rows `group,y,bin_left,bin_right,count`; group is `attribute:name`.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("group,y,bin_left,bin_right,count\n");
        for h in &self.histograms {
            let name = h.attribute.group_names()[h.group];
            let bins = h.counts.len();
            for (b, c) in h.counts.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}:{},{},{},{},{}",
                    h.attribute.name(),
                    name,
                    h.y,
                    b as f64 / bins as f64,
                    (b + 1) as f64 / bins as f64,
                    c
                );
            }
        }
        out
    }
}

fn header(first: &[&str], models: &[(&str, &FairnessReport)]) -> String {
    let mut cols: Vec<&str> = first.to_vec();
    cols.extend(models.iter().map(|(m, _)| *m));
    cols.join(",") + "\n"
}

/// Cross-group summary: one row per (attribute, metric), one column per model.
pub fn table2_csv(models: &[(&str, &FairnessReport)]) -> String {
    let mut out = header(&["attribute", "metric"], models);
    let rows: [(&str, fn(&AttributeMetrics) -> Option<f64>); 4] = [
        ("FNR CV", |a| a.cv_fnr),
        ("FPR CV", |a| a.cv_fpr),
        ("Mean EMD | y=0", |a| a.mean_emd_y0),
        ("Mean EMD | y=1", |a| a.mean_emd_y1),
    ];
    let Some((_, first)) = models.first() else { return out };
    for a in &first.attributes {
        for (label, get) in rows {
            let vals: Vec<String> = models
                .iter()
                .map(|(_, r)| fmt_opt(r.attribute(a.attribute).and_then(get)))
                .collect();
            let _ = writeln!(out, "{},{},{}", a.attribute.name(), label, vals.join(","));
        }
    }
    out
}

/// Whole-population metrics, one row per model.
pub fn table3_csv(models: &[(&str, &FairnessReport)]) -> String {
    let mut out = String::from("model,auc_roc,auc_prc,brier\n");
    for (m, r) in models {
        let o = &r.overall;
        let _ = writeln!(out, "{m},{},{},{}", fmt_opt(o.auc_roc), fmt_opt(o.auc_prc), fmt_opt(o.brier));
    }
    out
}

/// Per-group metrics: one row per (attribute, group, metric), one column per model.
pub fn table4_csv(models: &[(&str, &FairnessReport)]) -> String {
    let mut out = header(&["attribute", "group", "metric"], models);
    let rows: [(&str, fn(&PopulationMetrics) -> Option<f64>); 5] = [
        ("AUC-ROC", |m| m.auc_roc),
        ("AUC-PRC", |m| m.auc_prc),
        ("Brier", |m| m.brier),
        ("FPR", |m| m.confusion.fpr),
        ("FNR", |m| m.confusion.fnr),
    ];
    let Some((_, first)) = models.first() else { return out };
    for g in &first.groups {
        for (label, get) in rows {
            let vals: Vec<String> = models
                .iter()
                .map(|(_, r)| fmt_opt(r.group(g.attribute, g.group).and_then(|x| get(&x.metrics))))
                .collect();
            let _ = writeln!(out, "{},{},{},{}", g.attribute.name(), g.name, label, vals.join(","));
        }
    }
    out
}
