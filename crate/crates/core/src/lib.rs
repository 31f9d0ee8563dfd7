//! Static analysis for downward XPath write-access policies: containment,
//! overlap, static enforcement and fairness, with a brute-force oracle.

pub mod analysis;
pub mod nodeset;
pub mod oracle;
pub mod pattern;
pub mod policy;
pub mod tree;
pub mod xpath;
