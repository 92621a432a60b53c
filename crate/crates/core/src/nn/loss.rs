use super::NnError;
use faer::Mat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(1/N) Σ_i ‖y_i − t_i‖²`
    L2,
    /// Mean over labelled nodes of `−log softmax(y_i)[c_i]`.
    CrossEntropy,
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "l2" | "mse" => Ok(LossKind::L2),
            "cross_entropy" | "ce" => Ok(LossKind::CrossEntropy),
            other => Err(format!(
                "unknown loss `{other}` (expected l2 or cross_entropy)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// N × F_L real targets.
    Regression(Mat<f64>),
    /// One class per node; `None` nodes are left out of the loss.
    Classes(Vec<Option<usize>>),
}

impl Targets {
    pub fn classes(labels: &[usize]) -> Self {
        Targets::Classes(labels.iter().map(|&c| Some(c)).collect())
    }
}

/// Loss value and its gradient with respect to the model output.
pub(crate) fn loss_and_grad(
    kind: LossKind,
    y: &Mat<f64>,
    targets: &Targets,
) -> Result<(f64, Mat<f64>), NnError> {
    let (n, f) = (y.nrows(), y.ncols());
    match (kind, targets) {
        (LossKind::L2, Targets::Regression(t)) => {
            if (t.nrows(), t.ncols()) != (n, f) {
                return Err(NnError::TargetShape {
                    expected: (n, f),
                    got: (t.nrows(), t.ncols()),
                });
            }
            let mut grad = Mat::<f64>::zeros(n, f);
            let mut total = 0.0;
            let scale = 1.0 / n as f64;
            for p in 0..f {
                for i in 0..n {
                    let r = y[(i, p)] - t[(i, p)];
                    total += r * r;
                    grad[(i, p)] = 2.0 * r * scale;
                }
            }
            Ok((total * scale, grad))
        }
        (LossKind::CrossEntropy, Targets::Classes(labels)) => {
            if labels.len() != n {
                return Err(NnError::TargetShape {
                    expected: (n, f),
                    got: (labels.len(), 1),
                });
            }
            let count = labels.iter().filter(|l| l.is_some()).count();
            if count == 0 {
                return Err(NnError::NoLabels);
            }
            let scale = 1.0 / count as f64;
            let mut grad = Mat::<f64>::zeros(n, f);
            let mut total = 0.0;
            let mut probs = vec![0.0; f];
            for (i, label) in labels.iter().enumerate() {
                let Some(c) = *label else { continue };
                if c >= f {
                    return Err(NnError::LabelOutOfRange {
                        label: c,
                        classes: f,
                    });
                }
                let lse = log_softmax_into(y, i, &mut probs);
                total += lse - y[(i, c)];
                for p in 0..f {
                    grad[(i, p)] = (probs[p] - if p == c { 1.0 } else { 0.0 }) * scale;
                }
            }
            Ok((total * scale, grad))
        }
        (LossKind::L2, _) => Err(NnError::LossTargetMismatch {
            loss: kind,
            needs: "regression",
        }),
        (LossKind::CrossEntropy, _) => Err(NnError::LossTargetMismatch {
            loss: kind,
            needs: "class",
        }),
    }
}

/// Fills `probs` with softmax of row `i` and returns its log-sum-exp.
fn log_softmax_into(y: &Mat<f64>, i: usize, probs: &mut [f64]) -> f64 {
    let f = y.ncols();
    let max = (0..f).map(|p| y[(i, p)]).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, pr) in probs.iter_mut().enumerate() {
        *pr = (y[(i, p)] - max).exp();
        sum += *pr;
    }
    probs.iter_mut().for_each(|p| *p /= sum);
    max + sum.ln()
}

pub fn loss_value(kind: LossKind, y: &Mat<f64>, targets: &Targets) -> Result<f64, NnError> {
    loss_and_grad(kind, y, targets).map(|(l, _)| l)
}
