//! Vulnerability classes, base rules and defense mechanisms.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VulnType {
    Reentrancy,
    TxOriginAbuse,
    UncheckedLowLevelCall,
    UnexpectedRevert,
    SelfdestructAbuse,
}

impl VulnType {
    pub const ALL: [VulnType; 5] = [
        VulnType::Reentrancy,
        VulnType::TxOriginAbuse,
        VulnType::UncheckedLowLevelCall,
        VulnType::UnexpectedRevert,
        VulnType::SelfdestructAbuse,
    ];

    /// Short kebab-case name used in ids, file names and the CLI.
    pub fn slug(self) -> &'static str {
        match self {
            VulnType::Reentrancy => "reentrancy",
            VulnType::TxOriginAbuse => "tx-origin",
            VulnType::UncheckedLowLevelCall => "unchecked-llc",
            VulnType::UnexpectedRevert => "unexpected-revert",
            VulnType::SelfdestructAbuse => "selfdestruct",
        }
    }

    /// Defense mechanisms that can suppress findings of this type.
    pub fn wired_dms(self) -> &'static [DmId] {
        use DmId::*;
        match self {
            VulnType::Reentrancy => &[Dm1, Dm2, Dm3, Dm4, Dm5],
            VulnType::UnexpectedRevert => &[Dm6, Dm7],
            VulnType::TxOriginAbuse => &[Dm8],
            VulnType::UncheckedLowLevelCall => &[Dm9],
            VulnType::SelfdestructAbuse => &[Dm10],
        }
    }
}

impl fmt::Display for VulnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {what} `{text}`")]
pub struct ParseNameError {
    pub what: &'static str,
    pub text: String,
}

impl FromStr for VulnType {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.to_ascii_lowercase().replace(['_', ' '], "-");
        let t = match k.as_str() {
            "reentrancy" => VulnType::Reentrancy,
            "tx-origin" | "txorigin" | "txoriginabuse" | "tx-origin-abuse" => VulnType::TxOriginAbuse,
            "unchecked-llc" | "uncheckedlowlevelcall" | "unchecked-low-level-call" | "llc" => {
                VulnType::UncheckedLowLevelCall
            }
            "unexpected-revert" | "unexpectedrevert" | "revert" => VulnType::UnexpectedRevert,
            "selfdestruct" | "selfdestructabuse" | "selfdestruct-abuse" => VulnType::SelfdestructAbuse,
            _ => return Err(ParseNameError { what: "vulnerability type", text: s.to_string() }),
        };
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "R_UnexpectedRevert")]
    UnexpectedRevert,
    #[serde(rename = "R_ReentrancySlither")]
    ReentrancySlither,
    #[serde(rename = "R_TxOriginSlither")]
    TxOriginSlither,
    #[serde(rename = "R_TxOriginSmartCheck")]
    TxOriginSmartCheck,
    #[serde(rename = "R_UncheckedLLC")]
    UncheckedLlc,
    #[serde(rename = "R_Selfdestruct")]
    Selfdestruct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DmId {
    #[serde(rename = "DM1")]
    Dm1,
    #[serde(rename = "DM2")]
    Dm2,
    #[serde(rename = "DM3")]
    Dm3,
    #[serde(rename = "DM4")]
    Dm4,
    #[serde(rename = "DM5")]
    Dm5,
    #[serde(rename = "DM6")]
    Dm6,
    #[serde(rename = "DM7")]
    Dm7,
    #[serde(rename = "DM8")]
    Dm8,
    #[serde(rename = "DM9")]
    Dm9,
    #[serde(rename = "DM10")]
    Dm10,
}

impl DmId {
    pub const ALL: [DmId; 10] = [
        DmId::Dm1,
        DmId::Dm2,
        DmId::Dm3,
        DmId::Dm4,
        DmId::Dm5,
        DmId::Dm6,
        DmId::Dm7,
        DmId::Dm8,
        DmId::Dm9,
        DmId::Dm10,
    ];

    pub fn number(self) -> usize {
        DmId::ALL.iter().position(|&d| d == self).unwrap() + 1
    }
}

impl fmt::Display for DmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DM{}", self.number())
    }
}

impl FromStr for DmId {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let n = t
            .strip_prefix("DM")
            .or_else(|| t.strip_prefix("dm"))
            .unwrap_or(t)
            .parse::<usize>()
            .ok()
            .filter(|n| (1..=10).contains(n))
            .ok_or_else(|| ParseNameError { what: "defense mechanism", text: s.to_string() })?;
        Ok(DmId::ALL[n - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in VulnType::ALL {
            assert_eq!(v.slug().parse::<VulnType>().unwrap(), v);
        }
        for d in DmId::ALL {
            assert_eq!(d.to_string().parse::<DmId>().unwrap(), d);
        }
        assert_eq!(serde_json::to_string(&DmId::Dm10).unwrap(), "\"DM10\"");
        assert!("DM11".parse::<DmId>().is_err());
    }

    #[test]
    fn every_dm_wired_once() {
        let mut all: Vec<DmId> = VulnType::ALL.iter().flat_map(|v| v.wired_dms().iter().copied()).collect();
        all.sort();
        assert_eq!(all, DmId::ALL.to_vec());
    }
}
