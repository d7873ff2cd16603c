//! Multi-view treelet transform and companion tooling.
//!
//! The crate computes hierarchical orthonormal bases for one covariance
//! ([`treelet`]) or for a collection of views of the same phenomenon
//! ([`mvtt`]), generates noisy Kronecker graphs to test them on
//! ([`synthgraph`]), denoises matrices by FDR thresholding of basis
//! coefficients ([`denoise`]), fits a non-probabilistic shared response
//! model as a low-rank baseline ([`srm`]), and runs the convergence,
//! stability and denoising studies built from these pieces
//! ([`experiments`]).
//!
//! ```
//! use mvtreelet::{generate_views, mvtt_transform, KroneckerSpec};
//!
//! let spec = KroneckerSpec::default_with(0.1, 7).unwrap();
//! let views = generate_views(&spec, 4).unwrap();
//! let basis = mvtt_transform(&views, 40).unwrap();
//! assert!(basis.orthogonality_error() < 1e-10);
//! ```

pub mod denoise;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mvtt;
pub mod seed;
pub mod srm;
pub mod synthgraph;
pub mod treelet;

pub use denoise::{
    coefficient_p_values, denoise, denoise_detailed, denoise_error, expand, fdr_threshold, hard_threshold,
    CoefficientSet, DenoiseOutcome, FdrResult,
};
pub use error::{Error, Result};
pub use linalg::{
    apply_rotation_symmetric, compute_correlation, compute_covariance, off_diagonal_norm,
    orthogonal_procrustes, pearson_correlation, JacobiRotation, Matrix, RotationPair,
};
pub use mvtt::{find_max_correlation_triple, joint_rotation, mvtt_transform, JointSelection, ViewSet};
pub use srm::{srm_fit, srm_reconstruct, SrmModel};
pub use synthgraph::{
    add_noise, box_filter_coarsen, connected_components, connection_density, generate_views,
    kronecker_power, KroneckerSpec, NoisyGraph,
};
pub use treelet::{
    default_levels, find_max_correlation_pair, single_view_rotation, treelet_transform, TreeletBasis,
    TreeletState,
};
