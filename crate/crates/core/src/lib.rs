//! Trajectory-based connectivity networks: pointwise and integrated
//! connectivity of trajectory corpora over a spatial partition, windowed
//! adjacency matrices, network indices and clustering, plus a synthetic
//! flow simulator for ground truth.

pub mod cli;
pub mod connectivity;
pub mod flowsim;
pub mod geometry;
pub mod metrics;
pub mod network;
pub mod numeric;
pub mod trajectory;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Trajectory(#[from] trajectory::TrajectoryError),
    #[error(transparent)]
    Flow(#[from] flowsim::FlowError),
    #[error(transparent)]
    Connectivity(#[from] connectivity::ConnectivityError),
    #[error(transparent)]
    Network(#[from] network::NetworkError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}
