use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ManagerError;
use crate::ids::ServiceNumber;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub service_number: ServiceNumber,
    pub service_type: String,
    pub unit_price: u64,
}

/// Services on offer, keyed by service number.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServiceCatalog {
    entries: BTreeMap<ServiceNumber, CatalogEntry>,
}

impl ServiceCatalog {
    pub fn new(entries: impl IntoIterator<Item = CatalogEntry>) -> Result<Self, ManagerError> {
        let mut map = BTreeMap::new();
        for e in entries {
            let s = e.service_number;
            if map.insert(s, e).is_some() {
                return Err(ManagerError::DuplicateService(s));
            }
        }
        Ok(ServiceCatalog { entries: map })
    }

    pub fn get(&self, s: ServiceNumber) -> Result<&CatalogEntry, ManagerError> {
        self.entries.get(&s).ok_or(ManagerError::UnknownService(s))
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
