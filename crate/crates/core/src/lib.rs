pub mod dataset;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod initial;
pub mod io;
pub mod instance_gen;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod policy;
pub mod schedule;
pub mod search;
pub mod validate;
