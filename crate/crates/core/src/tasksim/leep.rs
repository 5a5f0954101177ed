use crate::error::{Error, Result};
use crate::gradcore::{log_softmax_parts, Tensor};
use crate::maskednet::{chunk_indices, MaskState, MaskedNetwork};
use crate::poolstore::PrunedRecord;

/// LEEP of one pool record's masked model on a target task.
///
/// `value` is `-inf` when some target sample gets zero expected likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct LeepScore {
    pub value: f64,
    pub source_record_id: u64,
    pub target_task_id: String,
    pub sample_count: usize,
}

/// LEEP from source-class probabilities `theta` (one row per target sample)
/// and target labels in `0..num_target`:
///
/// ```text
/// P(y, z) = 1/n Σ_i θ_iz·[y_i = y]      P(y | z) = P(y, z) / Σ_y' P(y', z)
/// LEEP    = 1/n Σ_i log Σ_z P(y_i | z)·θ_iz
/// ```
pub fn leep_from_probabilities(theta: &[Vec<f64>], labels: &[usize], num_target: usize) -> Result<f64> {
    if theta.is_empty() || labels.is_empty() {
        return Err(Error::EmptyInput("leep samples"));
    }
    if theta.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "leep",
            expected: vec![labels.len()],
            actual: vec![theta.len()],
        });
    }
    let z_count = theta[0].len();
    if z_count == 0 || theta.iter().any(|row| row.len() != z_count) {
        return Err(Error::ShapeMismatch {
            op: "leep",
            expected: vec![theta.len(), z_count.max(1)],
            actual: vec![theta.len(), 0],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_target) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            num_classes: num_target,
        });
    }
    let n = labels.len() as f64;
    let mut joint = vec![vec![0.0; z_count]; num_target];
    for (row, &y) in theta.iter().zip(labels) {
        for (j, p) in joint[y].iter_mut().zip(row) {
            *j += p / n;
        }
    }
    let marginal: Vec<f64> = (0..z_count).map(|z| joint.iter().map(|r| r[z]).sum()).collect();
    let conditional: Vec<Vec<f64>> = joint
        .iter()
        .map(|r| {
            r.iter()
                .zip(&marginal)
                .map(|(&j, &m)| if m > 0.0 { j / m } else { 0.0 })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for (row, &y) in theta.iter().zip(labels) {
        let eep: f64 = conditional[y].iter().zip(row).map(|(c, p)| c * p).sum();
        if eep <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += eep.ln();
    }
    // The expected likelihood never exceeds 1; rounding may push it a hair over.
    Ok((total / n).min(0.0))
}

/// Softmax over the pre-trained classifier rows `record.class_labels`, with
/// the backbone masked by the record's scores.
pub fn source_probabilities(pretrained: &MaskedNetwork, record: &PrunedRecord, x: &Tensor) -> Result<Vec<Vec<f64>>> {
    if record.arch_id != pretrained.arch_id() {
        return Err(Error::ArchMismatch(format!(
            "record for `{}` scored against `{}`",
            record.arch_id,
            pretrained.arch_id()
        )));
    }
    let scores = record.scores_f64();
    let mask = MaskState::from_parts(pretrained.arch(), &scores, &record.retained())?;
    let mut source = pretrained.with_head_rows(&record.class_labels)?;
    source.set_mask(Some(mask))?;
    let mut theta = Vec::with_capacity(x.rows());
    for chunk in chunk_indices(x.rows(), 256) {
        let logits = source.masked_forward(&x.select_rows(&chunk))?;
        theta.extend((0..logits.rows()).map(|r| log_softmax_parts(logits.row(r)).1));
    }
    Ok(theta)
}

/// LEEP of `record` on the target's `(x, labels)`, one forward pass.
pub fn leep_score(
    pretrained: &MaskedNetwork,
    record: &PrunedRecord,
    target_task_id: &str,
    x: &Tensor,
    labels: &[usize],
) -> Result<LeepScore> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("leep target data"));
    }
    let num_target = labels.iter().max().map_or(0, |m| m + 1);
    let theta = source_probabilities(pretrained, record, x)?;
    Ok(LeepScore {
        value: leep_from_probabilities(&theta, labels, num_target)?,
        source_record_id: record.record_id,
        target_task_id: target_task_id.to_string(),
        sample_count: labels.len(),
    })
}
