use crate::error::Result;
use crate::linalg::Matrix;
use crate::modes::MdlNetwork;

/// The first layer's mapping split into its three factors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionStages {
    /// `x ξ̂`, coordinates along the upstream patterns (`B × p`).
    pub projected: Matrix,
    /// Projections scaled by `Σ` (`B × p`).
    pub weighted: Matrix,
    /// Mapped into the next layer, `z` (`B × N_2`).
    pub mapped: Matrix,
}

pub fn projection_stages(net: &MdlNetwork, x: &Matrix) -> Result<ProjectionStages> {
    let layer = net.layer(0);
    let projected = x.matmul(layer.xi_hat)?;
    let weighted = projected.scale_columns(layer.sigma)?;
    let mapped = weighted.matmul_t(layer.xi)?;
    Ok(ProjectionStages {
        projected,
        weighted,
        mapped,
    })
}
