//! Regularized linear regression, random forests and their diagnostics.

pub mod cv;
pub mod forest;
pub mod importance;
pub mod lasso;
pub mod linalg;
pub mod metrics;

pub use cv::{cross_validate_alpha, kfold_indices, CvResult};
pub use forest::{forest_fit, ForestConfig, ForestModel};
pub use importance::{permutation_importance, ImportanceConfig, ImportanceReport};
pub use lasso::{
    alpha_grid, alpha_max, kkt_violation, lasso_fit, lasso_fit_with, lasso_path, lasso_path_on, ols_fit,
    shrinkage_factor, LassoConfig, LassoFit, LassoPath,
};
pub use metrics::explained_variance;
