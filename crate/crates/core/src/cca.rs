//! Canonical correlation analysis between two omics blocks and the sample
//! distance matrix built from the resulting canonical variates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{row_distances, DistanceMatrix};
use crate::error::{OmicsError, Result};
use crate::numkernel::{svd_thin, RealMatrix, SvdFactors};
use crate::preprocess::{check_sample_alignment, OmicsKind, OmicsMatrix};

/// Relative cutoff for whitening directions and retained correlations.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CcaResult {
    /// `n × r` predictor-side variates, each column with unit sample variance.
    pub wx: RealMatrix,
    /// `n × r` response-side variates, each column with unit sample variance.
    pub wy: RealMatrix,
    /// Canonical correlations, descending, in `[0, 1]`.
    pub correlations: Vec<f64>,
    pub rank: usize,
}

/// An ordered (predictor, response) pair of omics kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectedPair {
    pub predictor: OmicsKind,
    pub response: OmicsKind,
}

impl DirectedPair {
    /// The six pairs over gene expression, miRNA and methylation, in
    /// evaluation order.
    pub const ALL: [DirectedPair; 6] = {
        use OmicsKind::{GeneExpression as Ge, Methylation as Meth, Mirna as Mir};
        [
            DirectedPair { predictor: Mir, response: Ge },
            DirectedPair { predictor: Ge, response: Mir },
            DirectedPair { predictor: Mir, response: Meth },
            DirectedPair { predictor: Meth, response: Mir },
            DirectedPair { predictor: Ge, response: Meth },
            DirectedPair { predictor: Meth, response: Ge },
        ]
    };

    /// File-name friendly label such as `mirna_to_gene_expression`.
    pub fn label(&self) -> String {
        format!("{}_to_{}", self.predictor.as_str(), self.response.as_str())
    }
}

impl std::fmt::Display for DirectedPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {}", self.predictor, self.response)
    }
}

/// Centers a block and returns its truncated left singular vectors.
fn whiten(block: &RealMatrix, name: &str) -> Result<RealMatrix> {
    let mut centered = block.clone();
    centered.center_columns();
    let svd: SvdFactors = svd_thin(&centered)?;
    let keep = svd.numerical_rank(RANK_TOL);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    // compare against the block's own magnitude so a constant block reads as
    // zero rank instead of round-off noise
    if keep == 0 || smax <= 1e-12 * block.max_abs().max(f64::MIN_POSITIVE) {
        return Err(OmicsError::DegenerateInput(format!(
            "{name} block has zero variance"
        )));
    }
    Ok(svd.u.select_cols(&(0..keep).collect::<Vec<_>>()))
}

/// CCA of `x` (predictor) against `y` (response). Both are centered here.
pub fn cca_fit(x: &RealMatrix, y: &RealMatrix) -> Result<CcaResult> {
    let n = x.rows();
    if n < 3 {
        return Err(OmicsError::Argument(format!("CCA needs at least 3 samples, got {n}")));
    }
    if y.rows() != n {
        return Err(OmicsError::Argument(format!(
            "CCA blocks have {n} and {} samples",
            y.rows()
        )));
    }
    let ux = whiten(x, "predictor")?;
    let uy = whiten(y, "response")?;
    let core = ux.t_matmul(&uy)?;
    let svd = svd_thin(&core)?;
    let rank = svd.numerical_rank(RANK_TOL);
    if rank == 0 {
        return Err(OmicsError::DegenerateInput(
            "blocks share no correlated direction".into(),
        ));
    }
    let idx: Vec<usize> = (0..rank).collect();
    let scale = ((n - 1) as f64).sqrt();
    let wx = ux.matmul(&svd.u.select_cols(&idx))?.scale(scale);
    let wy = uy.matmul(&svd.vt.transpose().select_cols(&idx))?.scale(scale);
    let correlations = svd.singular_values[..rank]
        .iter()
        .map(|&s| s.clamp(0.0, 1.0))
        .collect();
    Ok(CcaResult {
        wx,
        wy,
        correlations,
        rank,
    })
}

/// Euclidean distances between samples over the concatenated `[wx, wy]`
/// variates.
pub fn canonical_distance_matrix(result: &CcaResult) -> DistanceMatrix {
    let (n, r) = result.wx.shape();
    let joined = RealMatrix::from_fn(n, 2 * r, |i, j| {
        if j < r {
            result.wx[(i, j)]
        } else {
            result.wy[(i, j - r)]
        }
    });
    row_distances(&joined)
}

/// Runs CCA for every [`DirectedPair`] over the three blocks given as
/// `[gene expression, miRNA, methylation]`.
pub fn all_directed_pair_distances(
    omics: [&OmicsMatrix; 3],
) -> Result<Vec<(DirectedPair, DistanceMatrix)>> {
    let reference = omics[0].sample_ids();
    for m in &omics[1..] {
        check_sample_alignment(reference, m.sample_ids())?;
    }
    for m in &omics {
        m.require_complete("CCA")?;
    }
    let block = |kind: OmicsKind| -> &RealMatrix {
        match kind {
            OmicsKind::GeneExpression => omics[0].values(),
            OmicsKind::Mirna => omics[1].values(),
            _ => omics[2].values(),
        }
    };
    DirectedPair::ALL
        .par_iter()
        .map(|&pair| {
            let fit = cca_fit(block(pair.predictor), block(pair.response))
                .map_err(|e| e.in_stage(format!("cca {pair}")))?;
            Ok((pair, canonical_distance_matrix(&fit)))
        })
        .collect()
}
