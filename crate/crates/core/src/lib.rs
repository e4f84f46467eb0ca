pub mod avs;
pub mod bundled;
pub mod cfg;
pub mod cluster;
pub mod frontend;
pub mod learn;
pub mod lcs;
pub mod matcher;
pub mod normalize;
pub mod rdr;
pub mod report;
pub mod store;
pub mod ted;
pub mod tree;
pub mod vuln;

pub use vuln::{DmId, RuleId, VulnType};
