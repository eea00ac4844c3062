//! Full maximum-likelihood fit of the spatial error model
//! `y = beta x + u`, `u = rho W u + eps`, `eps ~ N(0, sigma2 I)`.

mod sem;
mod weights;

pub use sem::{fit_sem_ml, profile_at, sem_loglik, SemFit, SemProfile};
pub use weights::{build_knn_weights, WeightsMatrix};
