//! Elections under the k-approval veto rule: possible winners, veto-core
//! certificates, minority protection guarantees, and exact metric distortion.

pub mod distortion;
pub mod election;
pub mod flow_verify;
pub mod generators;
pub mod lp;
mod maxflow;
pub mod metric;
pub mod minority;
pub mod veto;
pub mod veto_core;

pub use distortion::{DistortionConfig, DistortionResult, DistortionValue};
pub use election::{CandidateId, Election, ElectionError, Ranking, VoterId};
pub use flow_verify::{Circulation, FlowCostReport, FlowNetwork, MatchingDecomposition};
pub use generators::{Expectation, NamedInstance};
pub use metric::{DistanceAssignment, Objective, Rational};
pub use veto::{VetoOrder, VetoTrace, WinnerBudget, DEFAULT_BUDGET};
pub use veto_core::{CoreCertificate, PqCertificate, WeightVectors};
