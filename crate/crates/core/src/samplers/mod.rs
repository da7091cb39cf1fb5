//! Seeded samplers for the primitive random objects.

pub mod continuous;
pub mod sibuya;
pub mod stable;
pub mod zeta;

pub use continuous::{
    frechet_from_uniform, frechet_sample, pareto_from_uniform, pareto_sample, poisson_arrivals,
    ParetoParam, TailDistribution, TailLaw,
};
pub use sibuya::{sibuya_from_uniform, sibuya_pmf, sibuya_sample, SibuyaParam};
pub use stable::{ppp_threshold_for_sd, stable_ppp_sum, stable_sample, StableParam};
pub use zeta::{zeta_label_sample, ZetaLabelLaw};
