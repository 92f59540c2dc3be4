//! Topology identification for autonomous quantum networks.
//!
//! Given samples of `ρ_t` evolving under an unknown Hamiltonian, recover the
//! interaction Hamiltonian (and so the network topology) by solving the
//! commutator equation `[M, P] = Q` over Hermitian zero-diagonal `M`, where
//! `P` is the time integral of the trajectory. A second route recovers the
//! Liouvillian from diagonal outputs when the output pair is observable.
//!
//! ```
//! use qnet_core::{dynamics, identify, netmodel, linalg::Admissible};
//!
//! let h = netmodel::AdjacencyMatrix::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
//! let rho0 = netmodel::basis_density(3, 0).unwrap();
//! let traj = dynamics::sample_trajectory(&h.to_hamiltonian(), &rho0, 3.0, 0.01, 1.0).unwrap();
//! let cfg = identify::IdentifyConfig::default();
//! let report = identify::identify_topology(&traj, &cfg, None, Some(&h.to_admissible())).unwrap();
//! println!("{} eps={:?}", report.outcome, report.epsilon);
//! ```

pub mod dynamics;
pub mod error;
pub mod identify;
pub mod io;
pub mod linalg;
pub mod netmodel;
pub mod partialinfo;

pub use dynamics::{DensityOperator, Liouvillian, Propagator, Trajectory};
pub use error::{Error, Result};
pub use identify::{IdentificationReport, IdentifyConfig, Outcome, SolveOptions};
pub use linalg::{Admissible, CMatrix, Hermitian, C64};
pub use netmodel::{AdjacencyMatrix, SeededRng};
