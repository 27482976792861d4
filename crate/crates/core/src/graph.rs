//! Road network adjacency and its symmetric normalization.

use std::path::Path;
use std::sync::Arc;

use crate::csvio::read_matrix;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Road network with its cached propagation matrix `D̃^-½ (A + I) D̃^-½`.
///
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct RoadGraph {
    adjacency: Tensor,
    a_hat: Arc<Tensor>,
    weighted: bool,
}

impl RoadGraph {
    /// Validates `adjacency` (square, finite, non-negative, zero diagonal) and
    /// precomputes the normalized matrix.
    pub fn new(adjacency: Tensor) -> Result<Self> {
        check_adjacency(&adjacency)?;
        let n = adjacency.rows();
        for i in 0..n {
            if adjacency.get(i, i) != 0.0 {
                return Err(Error::Domain(format!(
                    "adjacency has nonzero diagonal entry {} at node {i}; self-loops are added internally",
                    adjacency.get(i, i)
                )));
            }
        }
        let a_hat = normalize_adjacency(&adjacency)?;
        let weighted = adjacency.as_slice().iter().any(|&v| v != 0.0 && v != 1.0);
        Ok(Self {
            adjacency,
            a_hat: Arc::new(a_hat),
            weighted,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Tensor {
        &self.adjacency
    }

    pub fn a_hat(&self) -> &Arc<Tensor> {
        &self.a_hat
    }

    /// True when some edge weight differs from 0/1.
    pub fn is_weighted(&self) -> bool {
        self.weighted
    }
}

fn check_adjacency(adjacency: &Tensor) -> Result<()> {
    let (r, c) = adjacency.shape();
    if r != c || r == 0 {
        return Err(Error::shape("normalize_adjacency", (r, c), (r, r)));
    }
    for i in 0..r {
        for j in 0..c {
            let v = adjacency.get(i, j);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "adjacency entry ({i}, {j}) = {v} must be finite and non-negative"
                )));
            }
        }
    }
    Ok(())
}

/// `D̃^-½ (A + I) D̃^-½` with `D̃ᵢᵢ = Σⱼ (A + I)ᵢⱼ`.
pub fn normalize_adjacency(adjacency: &Tensor) -> Result<Tensor> {
    check_adjacency(adjacency)?;
    let n = adjacency.rows();
    let mut tilde = adjacency.clone();
    for i in 0..n {
        tilde.set(i, i, tilde.get(i, i) + 1.0);
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| 1.0 / tilde.row(i).iter().sum::<f64>().sqrt())
        .collect();
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, inv_sqrt_deg[i] * tilde.get(i, j) * inv_sqrt_deg[j]);
        }
    }
    Ok(out)
}

/// Reads an `N x N` adjacency CSV (no header) and builds the graph.
pub fn load_adjacency(path: impl AsRef<Path>) -> Result<RoadGraph> {
    let path = path.as_ref();
    let m = read_matrix(path)?;
    if m.rows() != m.cols() {
        return Err(Error::shape(
            "load_adjacency",
            m.shape(),
            (m.rows(), m.rows()),
        ));
    }
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if m.get(i, j) < 0.0 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    col: j + 1,
                    msg: format!("negative edge weight {}", m.get(i, j)),
                });
            }
        }
    }
    RoadGraph::new(m)
}
