//! Tabular preference games and the solvers that compare iterative
//! best-of-n sampling with win-rate-game mirror descent.

pub mod bon;
pub mod config;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod game;
pub mod iterative;
pub mod metrics;
pub mod numeric;
pub mod policy;
pub mod sampled;
pub mod trace;

pub use bon::{
    bon_closed_form_operator, bon_exact_operator, bon_monte_carlo, bon_operator, BonMode,
};
pub use config::{LossKind, SolverConfig};
pub use error::{Error, Result};
pub use exact::{
    argmax_response, best_response, c_beta, duality_gap, equilibrium_gap_bound,
    fixed_point_residual, wind_exact_solve, wind_exact_step, EquilibriumReport,
};
pub use game::PreferenceGame;
pub use iterative::{iterative_bon, iterative_step};
pub use metrics::{avg_l1, kl_policies, win_rate};
pub use policy::TabularPolicy;
pub use trace::Trace;
