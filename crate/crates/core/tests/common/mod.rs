#![allow(dead_code)]

pub mod determinism;
pub mod gnn_oracle;
pub mod oracles;
pub mod policy_check;
pub mod validator_oracle;
