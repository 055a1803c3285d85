pub mod error;
pub mod strings;
pub mod tree;
pub mod functional;
pub mod bushy;
pub mod code;
pub mod cupping;
pub mod traceable;
pub mod corpus;
pub mod thin;
pub mod smc;
pub mod scenario;
pub mod report;
pub mod suite;
pub mod commands;
