//! Nearest-neighbor timestamp pairing between predictions and ground truth.
//!
//! The two streams run on independent clocks (pipeline ticks vs. the
//! ground-truth sampling grid), so exact matches are the exception. Each
//! prediction pairs with the closest ground-truth entry within a tolerance;
//! predictions with no partner are skipped and counted.

use evpose_core::pose::{GroundTruthPose, PoseEstimate};

/// Index into `ts` (sorted ascending) of the value closest to `t`, if it is
/// within `tolerance_us`. Ties resolve to the earlier entry.
fn nearest_within(ts: &[u64], t: u64, tolerance_us: u64) -> Option<usize> {
    if ts.is_empty() {
        return None;
    }
    let ix = ts.partition_point(|&v| v < t);
    let mut best: Option<(u64, usize)> = None;
    for cand in [ix.checked_sub(1), Some(ix)].into_iter().flatten() {
        if let Some(&v) = ts.get(cand) {
            let d = v.abs_diff(t);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, cand));
            }
        }
    }
    best.filter(|&(d, _)| d <= tolerance_us).map(|(_, ix)| ix)
}

/// Closest ground-truth pose to `t` within `tolerance_us`; `gts` must be
/// sorted by timestamp.
pub fn nearest_gt<'a>(
    gts: &'a [GroundTruthPose],
    gt_ts: &[u64],
    t: u64,
    tolerance_us: u64,
) -> Option<&'a GroundTruthPose> {
    nearest_within(gt_ts, t, tolerance_us).map(|ix| &gts[ix])
}

/// Pair every prediction with its nearest ground truth. Returns the aligned
/// pair vectors plus the number of predictions left unmatched.
pub fn pair_by_time(
    preds: &[PoseEstimate],
    gts: &[GroundTruthPose],
    tolerance_us: u64,
) -> (Vec<PoseEstimate>, Vec<GroundTruthPose>, usize) {
    let mut order: Vec<usize> = (0..gts.len()).collect();
    order.sort_by_key(|&ix| gts[ix].t);
    let sorted: Vec<GroundTruthPose> = order.iter().map(|&ix| gts[ix].clone()).collect();
    let ts: Vec<u64> = sorted.iter().map(|g| g.t).collect();

    let mut out_p = Vec::new();
    let mut out_g = Vec::new();
    let mut skipped = 0;
    for p in preds {
        match nearest_within(&ts, p.t, tolerance_us) {
            Some(ix) => {
                out_p.push(p.clone());
                out_g.push(sorted[ix].clone());
            }
            None => skipped += 1,
        }
    }
    (out_p, out_g, skipped)
}
