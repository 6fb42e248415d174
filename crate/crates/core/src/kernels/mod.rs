//! Kernel evaluators: hitting densities, bridge kernels, projections onto the
//! eigenbasis, the constant K, the A-functionals and the martingale density.

pub mod afunc;
pub mod density;
pub mod kernel;
pub mod params;
pub mod projection;

pub use density::{cdf_d1, density_d1, density_dm};
pub use kernel::{
    airy_ratio_bound, airy_truncation, alpha_density, besq0_weighted, chi, kbar_rho, kernel_integral, kernel_k,
    TwoRoute,
};
pub use params::ModelParams;
pub use projection::{j_t, j_t_split, j_uv, j_uv_mc_levels, k_constant, k_constant_with, JtSplit, JuvRoutes, KConstant, ProjectionBank};
pub use afunc::{a_plus, a_plus_levels, a_total, density_ds, martingale_levels, mean_density_ds, mean_density_events, MeanDensity, PathEvent};
