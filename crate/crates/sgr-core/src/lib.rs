//! Self-supervised spectral graph representations.
//!
//! The pipeline implemented here turns an undirected graph into a fixed-length
//! vector in four steps:
//!
//! 1. build the normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}` ([`graph`]),
//! 2. compute its eigenvalue spectrum, either in full or as the `k` smallest
//!    and largest eigenvalues for large graphs ([`spectrum`]),
//! 3. resample the spline-interpolated spectrum on a fixed `M`-point grid,
//!    giving a size- and permutation-invariant vector `λ̃` ([`spectrum`]),
//! 4. map `λ̃` through a single-layer SeLU perceptron `σ = ψ(Wλ̃ + b)`
//!    ([`model`]).
//!
//! The perceptron is trained without labeled data: it is co-trained with a
//! throwaway linear classifier that separates Erdős–Rényi random graphs from
//! stochastic-block-model graphs ([`synthetic`], [`model::train`]). Heat-trace
//! signatures and a spectral lower bound on the Gromov–Wasserstein graph
//! distance are provided as closed-form alternatives ([`heat`]), and [`eval`]
//! scores any of these representations on labeled graph collections with
//! logistic regression over repeated random splits.

pub mod eval;
pub mod graph;
pub mod heat;
pub mod model;
pub mod rng;
pub mod spectrum;
pub mod spline;
pub mod synthetic;
pub mod tu;

pub use graph::{Graph, GraphCollection, Laplacian};
pub use spectrum::{InterpolatedSpectrum, Spectrum};
