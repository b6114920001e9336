//! Three-qubit states: construction, partial transposes, negativities,
//! trace distance and the Pauli feature map.

pub mod bloch;
pub mod density;
pub mod generators;

pub use bloch::{bloch_features, features, from_bloch, BlochVector, FeatureLayout, FEATURE_DIM};
pub use density::{
    fiducial, fiducial_by_name, min_negativity, negativity, partial_transpose, partial_transpose_matrix,
    pure_gmn_oracle, trace_distance, Bipartition, DensityMatrix, Fiducial, DIM,
};
pub use generators::{random_density, random_local_unitary, random_pure_state, sample_rng, GeneratorSpec};
