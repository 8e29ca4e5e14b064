use crate::error::{Error, Result};
use crate::network::Targets;
use crate::numerics::DenseMatrix;

/// Mean loss over the batch and its gradient with respect to `output`.
///
/// Class targets use softmax cross-entropy. Real targets use
/// `1/(2B) sum |output - target|^2`.
pub fn loss_and_grad(output: &DenseMatrix, targets: &Targets) -> Result<(f64, DenseMatrix)> {
    check(output, targets)?;
    let b = output.rows();
    let scale = 1.0 / b as f64;
    let mut grad = DenseMatrix::zeros(b, output.cols());
    let mut total = 0.0;
    match targets {
        Targets::Classes { labels, .. } => {
            for (i, &label) in labels.iter().enumerate() {
                let row = output.row(i);
                let g = grad.row_mut(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for (gj, &o) in g.iter_mut().zip(row) {
                    *gj = (o - max).exp();
                    z += *gj;
                }
                total += z.ln() + max - row[label];
                for gj in g.iter_mut() {
                    *gj *= scale / z;
                }
                g[label] -= scale;
            }
        }
        Targets::Real(y) => {
            for (g, (&o, &t)) in grad
                .as_mut_slice()
                .iter_mut()
                .zip(output.as_slice().iter().zip(y.as_slice()))
            {
                let r = o - t;
                total += 0.5 * r * r;
                *g = r * scale;
            }
        }
    }
    let loss = total * scale;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { value: loss });
    }
    Ok((loss, grad))
}

/// Same as [`loss_and_grad`] without the gradient; non-finite values are
/// returned rather than reported as errors.
pub fn loss_value(output: &DenseMatrix, targets: &Targets) -> Result<f64> {
    check(output, targets)?;
    let b = output.rows() as f64;
    let total: f64 = match targets {
        Targets::Classes { labels, .. } => labels
            .iter()
            .enumerate()
            .map(|(i, &label)| {
                let row = output.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = row.iter().map(|&o| (o - max).exp()).sum();
                z.ln() + max - row[label]
            })
            .sum(),
        Targets::Real(y) => output
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(o, t)| 0.5 * (o - t) * (o - t))
            .sum(),
    };
    Ok(total / b)
}

/// Index of the largest entry in each row; ties go to the lower index.
pub fn argmax_rows(output: &DenseMatrix) -> Vec<usize> {
    (0..output.rows())
        .map(|i| {
            let row = output.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn check(output: &DenseMatrix, targets: &Targets) -> Result<()> {
    if output.rows() != targets.len() || output.cols() != targets.output_width() {
        return Err(Error::shape(format!(
            "output {:?} vs {} targets of width {}",
            output.shape(),
            targets.len(),
            targets.output_width()
        )));
    }
    if output.rows() == 0 {
        return Err(Error::shape("empty batch"));
    }
    Ok(())
}
