//! Central finite-difference check of the backward pass.

use super::{CnnError, Model};

/// ReLU masks and pool winners. Inside a region where this is constant the
/// network is affine in any single parameter.
type Pattern = (Vec<bool>, Vec<usize>, Vec<bool>);

fn pattern(m: &Model<f64>, x: &[f64]) -> Result<Pattern, CnnError> {
    let a = m.forward(x)?;
    Ok((
        a.conv.iter().map(|&v| v > 0.0).collect(),
        a.pool_arg,
        a.hidden.iter().map(|&v| v > 0.0).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|a - n| / max(|a|, |n|, 1e-8)` over compared coordinates.
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates whose `+-eps` window crosses a ReLU or pool switch.
    pub kinks: usize,
}

/// Compare every analytic gradient coordinate of the single-example loss
/// with `(L(w + eps) - L(w - eps)) / 2 eps`.
pub fn gradient_check(m: &Model<f64>, x: &[f64], label: usize, eps: f64) -> Result<GradCheck, CnnError> {
    let (_, grad) = m.loss_and_grad(&[x], &[label])?;
    let base = pattern(m, x)?;
    let mut out = GradCheck {
        max_rel_err: 0.0,
        checked: 0,
        kinks: 0,
    };
    let mut probe = m.clone();
    for (p, g) in (0..6).zip(grad.params()) {
        for (i, &a) in g.iter().enumerate() {
            let w = m.params()[p][i];
            probe.params_mut()[p][i] = w + eps;
            let plus_same = pattern(&probe, x)? == base;
            let plus = probe.loss_and_grad(&[x], &[label])?.0;
            probe.params_mut()[p][i] = w - eps;
            let minus_same = pattern(&probe, x)? == base;
            let minus = probe.loss_and_grad(&[x], &[label])?.0;
            probe.params_mut()[p][i] = w;
            if !(plus_same && minus_same) {
                out.kinks += 1;
                continue;
            }
            let n = (plus - minus) / (2.0 * eps);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            out.max_rel_err = out.max_rel_err.max(rel);
            out.checked += 1;
        }
    }
    Ok(out)
}
