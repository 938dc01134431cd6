pub mod elliptic;
pub mod error;
pub mod exec;
pub mod field;
pub mod geometry;
pub mod nonlinearity;
pub mod variational;
pub mod oracle;
pub mod kernel;
pub mod asymptotics;
