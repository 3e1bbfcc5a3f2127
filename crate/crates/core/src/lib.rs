//! Community detection in heterogeneous networks by maximizing block
//! modularity.
//!
//! A heterogeneous network has several node types, with edges inside a type
//! and between types. Each block of the adjacency (one per type, one per type
//! pair) is compared with a degree-preserving null model, normalized by its
//! own edge count, and the blocks are averaged. A unit-based Louvain method
//! maximizes the result.
//!
//! Modules:
//! * [`graph`] and [`edgelist`]: storage and TSV ingestion
//! * [`modularity`]: partitions, null expectations, `Q` and move gains
//! * [`louvain`]: the maximizer, with restarts and a fixed-`K` mode
//! * [`sbm`]: heterogeneous stochastic blockmodel and its consistency check
//! * [`metrics`]: NMI and misclassification rate
//! * [`baselines`]: flattened and per-type homogeneous comparisons
//! * [`oracle`]: exhaustive references for tiny instances

pub mod baselines;
pub mod edgelist;
pub mod graph;
pub mod louvain;
pub mod metrics;
pub mod modularity;
pub mod oracle;
pub mod sbm;

pub use graph::{BuildMode, HetGraph, NodeRef};
pub use louvain::{LouvainConfig, LouvainResult};
pub use modularity::{modularity, Partition};
