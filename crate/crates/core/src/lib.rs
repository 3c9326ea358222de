pub mod agent;
pub mod commitment;
pub mod conformance;
pub mod env;
pub mod lang;
pub mod logic;
pub mod norms;
pub mod oracle;
pub mod repl;
pub mod runtime;
pub mod scenario;
pub mod trace;
