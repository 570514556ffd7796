//! Differentiable alignment kernels and their brute-force references.

pub mod emd;
pub mod gradcheck;
pub mod soft_dtw;

pub use emd::{emd_1d, emd_oracle, EmdResult};
pub use gradcheck::{cdf_gap, grad_check_emd, grad_check_soft_dtw, relative_error};
pub use soft_dtw::{
    alignment_path_costs, hard_dtw_by_enumeration, hard_dtw_oracle, soft_dtw, AlignmentResult, SoftDtwConfig,
};
