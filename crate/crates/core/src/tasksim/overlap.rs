use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::poolstore::PrunedRecord;

/// The `k` units with the highest scores, best first; ties go to the lower
/// unit index. `k` must lie in `1..=` the number of positive scores.
pub fn top_k_units(record: &PrunedRecord, k: usize) -> Result<Vec<usize>> {
    let positive = record.scores.iter().filter(|&&s| s > 0.0).count();
    if k == 0 || k > positive {
        return Err(Error::KOutOfRange { k, max: positive });
    }
    let mut order: Vec<usize> = (0..record.scores.len()).collect();
    order.sort_by(|&a, &b| record.scores[b].total_cmp(&record.scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// `|top_k(m) ∩ top_k(n)| / k`.
pub fn overlap_ratio(m: &PrunedRecord, n: &PrunedRecord, k: usize) -> Result<f64> {
    if m.arch_id != n.arch_id || m.scores.len() != n.scores.len() {
        return Err(Error::ArchMismatch(format!(
            "cannot compare `{}` ({} units) with `{}` ({} units)",
            m.arch_id,
            m.scores.len(),
            n.arch_id,
            n.scores.len()
        )));
    }
    let a: HashSet<usize> = top_k_units(m, k)?.into_iter().collect();
    let shared = top_k_units(n, k)?.into_iter().filter(|u| a.contains(u)).count();
    Ok(shared as f64 / k as f64)
}
