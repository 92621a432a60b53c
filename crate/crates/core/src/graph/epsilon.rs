use super::{assemble, Graph, GraphError};
use crate::manifold::PointSample;
use faer::sparse::Triplet;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Normalization of the ε-graph kernel.
///
/// `AsPrinted` is `α_d / ((d+2) N ε^{d+2})`. Its Laplacian converges to
/// `ρ α_d² / (2 (d+2)²) Δ` rather than to the weighted Laplacian `(ρ/2) Δ`.
/// `LimitMatched` uses `(d+2) / (α_d N ε^{d+2})`, which converges to the
/// weighted Laplacian and therefore to the analytic spectrum of the manifold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelScale {
    #[default]
    AsPrinted,
    LimitMatched,
}

impl KernelScale {
    /// Weight of every edge (the kernel is an indicator).
    pub fn weight(self, d: usize, n: usize, epsilon: f64) -> f64 {
        let alpha = unit_ball_volume(d);
        let dd = d as f64 + 2.0;
        let denom = n as f64 * epsilon.powi(d as i32 + 2);
        match self {
            KernelScale::AsPrinted => alpha / (dd * denom),
            KernelScale::LimitMatched => dd / (alpha * denom),
        }
    }

    /// Factor κ with `L_N → κ · L_ρ` for this kernel.
    pub fn limit_factor(self, d: usize) -> f64 {
        match self {
            KernelScale::AsPrinted => {
                let a = unit_ball_volume(d) / (d as f64 + 2.0);
                a * a
            }
            KernelScale::LimitMatched => 1.0,
        }
    }
}

impl std::str::FromStr for KernelScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "as_printed" | "printed" => Ok(KernelScale::AsPrinted),
            "limit_matched" | "matched" => Ok(KernelScale::LimitMatched),
            other => Err(format!(
                "unknown kernel scale `{other}` (expected as_printed or limit_matched)"
            )),
        }
    }
}

/// Volume of the unit ball in ℝ^d (α_1 = 2, α_2 = π).
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// `ε = c (ln N / N)^{1/(d+4)}`.
pub fn epsilon_schedule(n: usize, d: usize, c: f64) -> Result<f64, GraphError> {
    if n < 2 || !(c > 0.0 && c.is_finite()) {
        return Err(GraphError::BadSchedule { n, c });
    }
    let nf = n as f64;
    Ok(c * (nf.ln() / nf).powf(1.0 / (d as f64 + 4.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphWarning {
    IsolatedNodes { count: usize, first: Vec<usize> },
    Disconnected { components: usize },
}

impl std::fmt::Display for GraphWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphWarning::IsolatedNodes { count, first } => {
                write!(f, "{count} isolated nodes (first: {first:?})")
            }
            GraphWarning::Disconnected { components } => {
                write!(f, "graph has {components} connected components")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpsilonGraph {
    graph: Graph,
    epsilon: f64,
    d: usize,
    scale: KernelScale,
    warnings: Vec<GraphWarning>,
}

impl EpsilonGraph {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn into_graph(self) -> Graph {
        self.graph
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn scale(&self) -> KernelScale {
        self.scale
    }

    pub fn warnings(&self) -> &[GraphWarning] {
        &self.warnings
    }

    pub fn is_connected(&self) -> bool {
        self.warnings.is_empty()
    }
}

impl std::ops::Deref for EpsilonGraph {
    type Target = Graph;

    fn deref(&self) -> &Graph {
        &self.graph
    }
}

/// ε-graph with the kernel as printed: weight `α_d/((d+2) N ε^{d+2})` for
/// `0 < ‖x_i − x_j‖ ≤ ε`.
pub fn build_epsilon_graph(
    points: &PointSample,
    d: usize,
    epsilon: f64,
) -> Result<EpsilonGraph, GraphError> {
    build_epsilon_graph_with(points, d, epsilon, KernelScale::AsPrinted)
}

pub fn build_epsilon_graph_with(
    points: &PointSample,
    d: usize,
    epsilon: f64,
    scale: KernelScale,
) -> Result<EpsilonGraph, GraphError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(GraphError::BadEpsilon(epsilon));
    }
    if d == 0 {
        return Err(GraphError::BadDimension);
    }
    let n = points.len();
    let w = scale.weight(d, n, epsilon);
    let mut triplets = Vec::new();
    for i in 0..n {
        let xi = points.point(i);
        for j in (i + 1)..n {
            let dist = xi
                .iter()
                .zip(points.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > 0.0 && dist <= epsilon {
                triplets.push(Triplet::new(i, j, w));
                triplets.push(Triplet::new(j, i, w));
            }
        }
    }
    let graph = Graph::from_weights(assemble(n, &triplets)?)?;
    let mut warnings = Vec::new();
    let isolated = graph.isolated_nodes();
    if !isolated.is_empty() {
        log::warn!(
            "ε-graph with ε = {epsilon:.4} has {} isolated nodes",
            isolated.len()
        );
        warnings.push(GraphWarning::IsolatedNodes {
            count: isolated.len(),
            first: isolated.iter().take(10).copied().collect(),
        });
    }
    let components = graph.component_count();
    if components > 1 {
        log::warn!("ε-graph with ε = {epsilon:.4} has {components} components");
        warnings.push(GraphWarning::Disconnected { components });
    }
    Ok(EpsilonGraph {
        graph,
        epsilon,
        d,
        scale,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_manifold, sample_points, ManifoldKind};
    use approx::assert_relative_eq;

    fn two_points(dist: f64) -> PointSample {
        // Chord length 2 sin(θ/2) = dist.
        let theta = 2.0 * (dist / 2.0).asin();
        PointSample::from_intrinsic(ManifoldKind::Circle, vec![0.0, theta]).unwrap()
    }

    #[test]
    fn single_edge_weight() {
        let g = build_epsilon_graph(&two_points(0.5), 1, 1.0).unwrap();
        assert_relative_eq!(g.weight(0, 1), 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(g.weight(0, 1), g.weight(1, 0));
    }

    #[test]
    fn beyond_radius_no_edge() {
        let g = build_epsilon_graph(&two_points(1.2), 1, 1.0).unwrap();
        assert_eq!(g.weight(0, 1), 0.0);
        assert_eq!(g.isolated_nodes(), vec![0, 1]);
        assert!(!g.warnings().is_empty());
    }

    #[test]
    fn schedule_values() {
        assert!((epsilon_schedule(1000, 2, 1.0).unwrap() - 0.4364).abs() < 5e-5);
        assert!((epsilon_schedule(250, 1, 1.0).unwrap() - 0.4665).abs() < 5e-5);
        assert!((epsilon_schedule(2000, 1, 1.0).unwrap() - 0.3281).abs() < 5e-5);
        let mut prev = f64::INFINITY;
        for n in 3..5000 {
            let e = epsilon_schedule(n, 1, 1.5).unwrap();
            assert!(e < prev);
            prev = e;
        }
        assert!(epsilon_schedule(1, 1, 1.0).is_err());
        assert!(epsilon_schedule(10, 1, 0.0).is_err());
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert_relative_eq!(unit_ball_volume(2), PI);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0);
    }

    #[test]
    fn matches_double_loop() {
        let m = make_manifold(ManifoldKind::Circle, 3).unwrap();
        let pts = sample_points(&m, 50, 11).unwrap();
        let eps = 0.4;
        let g = build_epsilon_graph(&pts, 1, eps).unwrap();
        let w = 2.0 / (3.0 * 50.0 * eps.powi(3));
        for i in 0..50 {
            for j in 0..50 {
                let (a, b) = (pts.point(i), pts.point(j));
                let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                let want = if i != j && dist > 0.0 && dist <= eps {
                    w
                } else {
                    0.0
                };
                assert_eq!(g.weight(i, j), want, "({i},{j})");
            }
        }
    }

    #[test]
    fn limit_matched_scale() {
        assert_relative_eq!(KernelScale::LimitMatched.weight(1, 2, 1.0), 3.0 / 4.0);
        assert_relative_eq!(KernelScale::AsPrinted.limit_factor(1), 4.0 / 9.0);
    }
}
