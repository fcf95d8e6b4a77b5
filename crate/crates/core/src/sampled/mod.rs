//! Sample-based WIND on parameterized softmax policies.

pub mod batch;
pub mod inner;
pub mod judge;
pub mod param;
pub mod proxy;
pub mod risk;
pub mod solver;

pub use batch::{sample_batch, Sample, SampleBatch};
pub use inner::{inner_minimize, InnerResult};
pub use judge::{Judge, JudgeMode};
pub use param::ParamPolicy;
pub use proxy::{conditional_mean_oracle, population_sq_risk, proxy_target, ProxyParams};
pub use risk::{evaluate, risk_kl, risk_nce, risk_sq, Risk, RiskEval, ZETA_EPS};
pub use solver::wind_sampled;
