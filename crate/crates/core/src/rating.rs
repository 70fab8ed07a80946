//! Firm attributes: internal risk rating and customer status.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Ordered three-level risk rating, `L < M < H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Risk {
    L,
    M,
    H,
}

impl Risk {
    pub const ALL: [Risk; 3] = [Risk::L, Risk::M, Risk::H];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Risk> {
        Risk::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Risk::L => "L",
            Risk::M => "M",
            Risk::H => "H",
        }
    }
}

impl fmt::Display for Risk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rating that may be unknown (`NA`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Rating {
    Known(Risk),
    #[default]
    NA,
}

impl Rating {
    pub const L: Rating = Rating::Known(Risk::L);
    pub const M: Rating = Rating::Known(Risk::M);
    pub const H: Rating = Rating::Known(Risk::H);

    pub fn risk(self) -> Option<Risk> {
        match self {
            Rating::Known(r) => Some(r),
            Rating::NA => None,
        }
    }

    pub fn is_known(self) -> bool {
        matches!(self, Rating::Known(_))
    }

    /// Category index with `NA` last: L=0, M=1, H=2, NA=3.
    pub fn category(self) -> usize {
        match self {
            Rating::Known(r) => r.index(),
            Rating::NA => 3,
        }
    }

    pub fn from_category(c: usize) -> Rating {
        Risk::from_index(c).map_or(Rating::NA, Rating::Known)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rating::Known(r) => r.as_str(),
            Rating::NA => "NA",
        }
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rating {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "L" => Ok(Rating::L),
            "M" => Ok(Rating::M),
            "H" => Ok(Rating::H),
            "NA" | "" | "ND" => Ok(Rating::NA),
            other => Err(Error::invalid(format!("unknown rating `{other}`"))),
        }
    }
}

/// Relationship of a firm with the bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Customer,
    Former,
    NonCustomer,
    #[default]
    Unknown,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Customer => "customer",
            Status::Former => "former",
            Status::NonCustomer => "non",
            Status::Unknown => "NA",
        }
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "customer" | "yes" => Ok(Status::Customer),
            "former" | "ex" => Ok(Status::Former),
            "non" | "non-customer" | "no" => Ok(Status::NonCustomer),
            "NA" | "" | "unknown" => Ok(Status::Unknown),
            other => Err(Error::invalid(format!("unknown status `{other}`"))),
        }
    }
}

/// Per-firm metadata attached to graph nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FirmMeta {
    pub id: String,
    pub status: Status,
    pub rating: Rating,
    pub sector: Option<String>,
}

impl FirmMeta {
    /// Metadata for a firm seen in transactions but absent from the firm table.
    pub fn unknown(id: impl Into<String>) -> Self {
        FirmMeta { id: id.into(), ..Default::default() }
    }
}
