use serde::{Deserialize, Serialize};

use super::{ManagerError, ServiceCatalog};
use crate::ids::{PaymentRef, ServiceNumber, SessionId, TokenId};
use crate::simnet::Tick;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineItem {
    pub service_number: ServiceNumber,
    pub quantity: u64,
    pub unit_price: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bill {
    pub session_id: SessionId,
    pub items: Vec<LineItem>,
    pub total: u64,
}

/// The only thing the manager keeps once a session is over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BillingRecord {
    pub token_id: TokenId,
    pub amount: u64,
    pub payment_reference: PaymentRef,
    pub timestamp: Tick,
}

pub fn compute_bill(
    catalog: &ServiceCatalog,
    session_id: &SessionId,
    completed: &[(ServiceNumber, u64)],
) -> Result<Bill, ManagerError> {
    let mut items = Vec::with_capacity(completed.len());
    let mut total = 0u64;
    for &(service_number, quantity) in completed {
        let unit_price = catalog.get(service_number)?.unit_price;
        let line = quantity
            .checked_mul(unit_price)
            .ok_or(ManagerError::BillOverflow)?;
        total = total.checked_add(line).ok_or(ManagerError::BillOverflow)?;
        items.push(LineItem {
            service_number,
            quantity,
            unit_price,
        });
    }
    Ok(Bill {
        session_id: session_id.clone(),
        items,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manager::CatalogEntry;

    fn catalog() -> ServiceCatalog {
        ServiceCatalog::new([
            CatalogEntry {
                service_number: ServiceNumber(1),
                service_type: "web".into(),
                unit_price: 5,
            },
            CatalogEntry {
                service_number: ServiceNumber(2),
                service_type: "compute".into(),
                unit_price: 7,
            },
        ])
        .unwrap()
    }

    #[test]
    fn empty_bill_is_zero() {
        let b = compute_bill(&catalog(), &SessionId::new("ses-1"), &[]).unwrap();
        assert_eq!(b.total, 0);
        assert!(b.items.is_empty());
    }

    #[test]
    fn five_plus_seven() {
        let b = compute_bill(
            &catalog(),
            &SessionId::new("ses-1"),
            &[(ServiceNumber(1), 1), (ServiceNumber(2), 1)],
        )
        .unwrap();
        assert_eq!(b.total, 12);
    }

    #[test]
    fn unknown_service_rejected() {
        assert_eq!(
            compute_bill(
                &catalog(),
                &SessionId::new("ses-1"),
                &[(ServiceNumber(9), 1)]
            ),
            Err(ManagerError::UnknownService(ServiceNumber(9)))
        );
    }

    #[test]
    fn overflow_is_an_error() {
        assert_eq!(
            compute_bill(
                &catalog(),
                &SessionId::new("ses-1"),
                &[(ServiceNumber(2), u64::MAX)]
            ),
            Err(ManagerError::BillOverflow)
        );
    }

    #[test]
    fn record_field_set_is_closed() {
        let r = BillingRecord {
            token_id: TokenId::new("tok-1"),
            amount: 12,
            payment_reference: PaymentRef::new("pay-1"),
            timestamp: 40,
        };
        let v = serde_json::to_value(&r).unwrap();
        let mut fields: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        fields.sort();
        assert_eq!(
            fields,
            ["amount", "payment_reference", "timestamp", "token_id"]
        );
        let extra =
            r#"{"token_id":"t","amount":1,"payment_reference":"p","timestamp":1,"job":"x"}"#;
        assert!(serde_json::from_str::<BillingRecord>(extra).is_err());
    }
}
