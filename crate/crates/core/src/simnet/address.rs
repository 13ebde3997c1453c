use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ids::Pseudonym;

/// Network address. Nodes are reachable only under their current pseudonym.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Address {
    Customer(u32),
    Manager,
    Directory,
    Bank,
    Node(Pseudonym),
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Address::Customer(i) => write!(f, "c{i}"),
            Address::Manager => f.write_str("manager"),
            Address::Directory => f.write_str("ds"),
            Address::Bank => f.write_str("bank"),
            Address::Node(p) => f.write_str(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not an address: {0:?}")]
pub struct BadAddress(pub String);

impl FromStr for Address {
    type Err = BadAddress;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manager" => return Ok(Address::Manager),
            "ds" => return Ok(Address::Directory),
            "bank" => return Ok(Address::Bank),
            _ => {}
        }
        if let Some(n) = s.strip_prefix('c') {
            if let Ok(i) = n.parse() {
                return Ok(Address::Customer(i));
            }
        }
        if s.starts_with("ps-") {
            return Ok(Address::Node(Pseudonym::new(s)));
        }
        Err(BadAddress(s.to_owned()))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}
