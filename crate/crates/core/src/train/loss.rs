//! Training losses on normalized joint coordinates.
//!
//! Both losses operate in the unit square (pixel coordinates divided by
//! image width/height) and only over joints marked visible in the ground
//! truth. A sample with no visible joints cannot be scored and is an error;
//! callers filter such samples out when building datasets.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::joints::JOINT_COUNT;

/// Squared-error target loss over visible joints, averaged as
/// `sum(dx^2 + dy^2) / (2 n_vis)`, with its gradient w.r.t. the prediction.
pub fn target_loss(
    pred: &ArrayView2<f64>,
    target: &ArrayView2<f64>,
    visible: &[bool; JOINT_COUNT],
) -> Result<(f64, Array2<f64>)> {
    check_joint_matrix("target loss prediction", pred)?;
    check_joint_matrix("target loss ground truth", target)?;
    let n_vis = visible.iter().filter(|v| **v).count();
    if n_vis == 0 {
        return Err(Error::NoVisibleJoints);
    }
    let mut loss = 0.0;
    let mut grad = Array2::<f64>::zeros((JOINT_COUNT, 2));
    for j in 0..JOINT_COUNT {
        if !visible[j] {
            continue;
        }
        for a in 0..2 {
            let d = pred[[j, a]] - target[[j, a]];
            loss += d * d;
            grad[[j, a]] = d / n_vis as f64;
        }
    }
    Ok((loss / (2.0 * n_vis as f64), grad))
}

/// Per-node candidate loss: every node's candidate for every visible joint
/// is pulled toward that joint, `sum_i sum_j (dx^2 + dy^2) / 2`. With
/// `mean_over_nodes` the sum (and gradient) is divided by the node count.
/// Returns the loss and its gradient w.r.t. the `[n, 2 * JOINT_COUNT]`
/// candidate matrix.
pub fn node_loss(
    candidates: &ArrayView2<f64>,
    target: &ArrayView2<f64>,
    visible: &[bool; JOINT_COUNT],
    mean_over_nodes: bool,
) -> Result<(f64, Array2<f64>)> {
    check_joint_matrix("node loss ground truth", target)?;
    if candidates.ncols() != 2 * JOINT_COUNT {
        return Err(Error::DimensionMismatch {
            context: "node loss candidate columns",
            expected: 2 * JOINT_COUNT,
            found: candidates.ncols(),
        });
    }
    let n_vis = visible.iter().filter(|v| **v).count();
    if n_vis == 0 {
        return Err(Error::NoVisibleJoints);
    }
    let n = candidates.nrows();
    let scale = if mean_over_nodes && n > 0 {
        1.0 / n as f64
    } else {
        1.0
    };
    let mut loss = 0.0;
    let mut grad = Array2::<f64>::zeros((n, 2 * JOINT_COUNT));
    for i in 0..n {
        for j in 0..JOINT_COUNT {
            if !visible[j] {
                continue;
            }
            for a in 0..2 {
                let d = candidates[[i, 2 * j + a]] - target[[j, a]];
                loss += d * d;
                grad[[i, 2 * j + a]] = scale * d;
            }
        }
    }
    Ok((scale * loss / 2.0, grad))
}

fn check_joint_matrix(context: &'static str, m: &ArrayView2<f64>) -> Result<()> {
    if m.nrows() == JOINT_COUNT && m.ncols() == 2 {
        return Ok(());
    }
    Err(Error::DimensionMismatch {
        context,
        expected: JOINT_COUNT * 2,
        found: m.nrows() * m.ncols(),
    })
}
