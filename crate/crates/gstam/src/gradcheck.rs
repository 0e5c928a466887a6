//! Central finite-difference verification of graph gradients.
//!
//! The checker rebuilds the graph from scratch for every probe, so it
//! exercises the same forward code the analytic backward pass claims to
//! differentiate. A coordinate passes when the analytic/numeric difference is
//! below an absolute floor or the relative error is below tolerance.

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct CheckSettings {
    /// Central-difference step.
    pub step: f64,
    /// Relative error bound for coordinates above the absolute floor.
    pub rel_tol: f64,
    /// Differences below this are accepted outright.
    pub abs_floor: f64,
    /// Coordinates probed per leaf; 0 probes every coordinate.
    pub coords_per_leaf: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_floor: 1e-8,
            coords_per_leaf: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub coords_checked: usize,
    pub failures: usize,
    /// Largest relative error among coordinates above the absolute floor.
    pub max_rel_err: f64,
    /// (leaf index, coordinate, analytic, numeric) of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Verifies d(root)/d(leaf) for every leaf against central differences.
///
/// `build` receives a fresh graph plus one leaf node per input tensor and
/// returns the scalar root. It is invoked once for the analytic pass and
/// twice per probed coordinate.
pub fn check_gradients<F>(
    inputs: &[Tensor],
    build: F,
    settings: &CheckSettings,
    rng: &mut impl Rng,
) -> Result<CheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    // analytic pass
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let root = build(&mut g, &ids)?;
    g.backward(root)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| g.grad(id).clone()).collect();

    let value_at = |tensors: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| g.leaf(t.clone())).collect();
        let root = build(&mut g, &ids)?;
        Ok(g.item(root))
    };

    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut report = CheckReport {
        coords_checked: 0,
        failures: 0,
        max_rel_err: 0.0,
        worst: None,
    };

    for (li, input) in inputs.iter().enumerate() {
        let n = input.numel();
        let coords: Vec<usize> = if settings.coords_per_leaf == 0 || n <= settings.coords_per_leaf
        {
            (0..n).collect()
        } else {
            rand::seq::index::sample(rng, n, settings.coords_per_leaf).into_vec()
        };
        for ci in coords {
            let orig = input.data()[ci];
            work[li].data_mut()[ci] = orig + settings.step;
            let plus = value_at(&work)?;
            work[li].data_mut()[ci] = orig - settings.step;
            let minus = value_at(&work)?;
            work[li].data_mut()[ci] = orig;

            let numeric = (plus - minus) / (2.0 * settings.step);
            let a = analytic[li].data()[ci];
            let diff = (a - numeric).abs();
            report.coords_checked += 1;
            if diff > settings.abs_floor {
                let rel = diff / a.abs().max(numeric.abs());
                if rel > report.max_rel_err {
                    report.max_rel_err = rel;
                    report.worst = Some((li, ci, a, numeric));
                }
                if rel > settings.rel_tol {
                    report.failures += 1;
                }
            }
        }
    }
    Ok(report)
}
