//! Dice overlap and per-label report aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{LabelSchema, Structure};
use crate::volume::{LabelVolume, Volume};

/// `2|A ∩ B| / (|A| + |B|)` for the voxels labelled `label_id`; 1.0 when
/// the label is absent from both.
pub fn dice(pred: &LabelVolume, reference: &LabelVolume, label_id: u8) -> Result<f64> {
    if pred.dims() != reference.dims() {
        return Err(Error::GeometryMismatch(format!(
            "{:?} vs {:?}",
            pred.dims(),
            reference.dims()
        )));
    }
    let (mut a, mut b, mut both) = (0usize, 0usize, 0usize);
    for (&p, &r) in pred.data().iter().zip(reference.data()) {
        let (ip, ir) = (p == label_id, r == label_id);
        a += ip as usize;
        b += ir as usize;
        both += (ip && ir) as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (a + b) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseScores {
    pub case_id: String,
    /// One score per report label; `None` when the label is absent from the
    /// reference (such cases stay out of the aggregates).
    pub scores: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub label: Structure,
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiceReport {
    pub labels: Vec<Structure>,
    pub cases: Vec<CaseScores>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Scores every case on every label of `schema`.
pub fn dice_report(
    cases: &[(String, &LabelVolume, &LabelVolume)],
    schema: LabelSchema,
) -> Result<DiceReport> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument(
            "dice report needs at least one case".into(),
        ));
    }
    let mut out = Vec::with_capacity(cases.len());
    for (case_id, pred, reference) in cases {
        pred.ensure_schema(schema)?;
        reference.ensure_schema(schema)?;
        let mut scores = Vec::with_capacity(schema.num_labels());
        for (id, _) in schema.entries() {
            let present = reference.data().contains(&id);
            let d = dice(pred, reference, id)?;
            scores.push(present.then_some(d));
        }
        out.push(CaseScores {
            case_id: case_id.clone(),
            scores,
        });
    }
    Ok(DiceReport {
        labels: schema.structures().to_vec(),
        cases: out,
    })
}

impl DiceReport {
    /// Builds a report from precomputed scores, e.g. to render published
    /// values.
    pub fn from_scores(labels: Vec<Structure>, cases: Vec<CaseScores>) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::InvalidArgument(
                "dice report needs at least one case".into(),
            ));
        }
        for c in &cases {
            if c.scores.len() != labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "case {} has {} scores for {} labels",
                    c.case_id,
                    c.scores.len(),
                    labels.len()
                )));
            }
            if c.scores.iter().flatten().any(|s| !(0.0..=1.0).contains(s)) {
                return Err(Error::InvalidArgument(format!(
                    "case {} has a score outside [0, 1]",
                    c.case_id
                )));
            }
        }
        Ok(DiceReport { labels, cases })
    }

    pub fn summary(&self) -> Vec<LabelSummary> {
        self.labels
            .iter()
            .enumerate()
            .map(|(k, &label)| {
                let mut v: Vec<f64> = self.cases.iter().filter_map(|c| c.scores[k]).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = v.len();
                if n == 0 {
                    return LabelSummary {
                        label,
                        n,
                        median: f64::NAN,
                        mean: f64::NAN,
                        std: f64::NAN,
                    };
                }
                let mean = v.iter().sum::<f64>() / n as f64;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
                LabelSummary {
                    label,
                    n,
                    median: median(&v),
                    mean,
                    std: var.sqrt(),
                }
            })
            .collect()
    }

    /// Mean foreground Dice over labels that have at least one scored case.
    pub fn mean_foreground(&self) -> f64 {
        let means: Vec<f64> = self
            .summary()
            .iter()
            .filter(|s| s.n > 0)
            .map(|s| s.mean)
            .collect();
        means.iter().sum::<f64>() / means.len().max(1) as f64
    }

    pub fn summary_for(&self, label: Structure) -> Option<LabelSummary> {
        self.summary().into_iter().find(|s| s.label == label)
    }

    /// `case_id,label,dice` rows; labels absent from the reference are
    /// omitted.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("case_id,label,dice\n");
        for c in &self.cases {
            for (label, score) in self.labels.iter().zip(&c.scores) {
                if let Some(d) = score {
                    let _ = writeln!(s, "{},{},{:.6}", c.case_id, label, d);
                }
            }
        }
        s
    }

    /// One tab-separated row of per-label means in percent with one decimal,
    /// for the given columns.
    pub fn mean_row(&self, name: &str, columns: &[Structure]) -> String {
        let summary = self.summary();
        let mut row = name.to_string();
        for col in columns {
            let cell = summary
                .iter()
                .find(|s| s.label == *col && s.n > 0)
                .map(|s| format!("{:.1}", s.mean * 100.0))
                .unwrap_or_else(|| "-".into());
            row.push('\t');
            row.push_str(&cell);
        }
        row
    }

    /// Percent table: one column per label, rows n / median / mean / std.
    pub fn to_table(&self) -> String {
        let summary = self.summary();
        let mut out = String::new();
        for s in &summary {
            out.push('\t');
            out.push_str(s.label.name());
        }
        out.push('\n');
        type Cell = fn(&LabelSummary) -> String;
        let rows: [(&str, Cell); 4] = [
            ("n", |s| s.n.to_string()),
            ("median", |s| pct(s.median)),
            ("mean", |s| pct(s.mean)),
            ("std", |s| pct(s.std)),
        ];
        for (name, cell) in rows {
            out.push_str(name);
            for s in &summary {
                out.push('\t');
                out.push_str(&cell(s));
            }
            out.push('\n');
        }
        out
    }
}

fn pct(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{:.1}", v * 100.0)
    }
}
