use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use super::{ExpPolySum, ExpTerm, Numerics, RateValue};
use crate::error::{Error, Result};

/// One term in the JSON form of an [`ExpPolySum`]. The coefficient is a
/// decimal string carrying the full working precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTermRecord {
    pub coeff: String,
    pub power: u32,
    pub rate_num: i64,
    pub rate_den: i64,
}

fn to_i64(value: &Integer, what: &str) -> Result<i64> {
    value
        .to_i64()
        .ok_or_else(|| Error::validation(format!("{what} {value} does not fit in a 64-bit JSON integer")))
}

impl ExpPolySum {
    pub fn to_records(&self) -> Result<Vec<ExpTermRecord>> {
        self.terms
            .iter()
            .map(|term| {
                Ok(ExpTermRecord {
                    coeff: term.coeff.to_string_radix(10, None),
                    power: term.power,
                    rate_num: to_i64(term.rate.numerator(), "rate numerator")?,
                    rate_den: to_i64(term.rate.denominator(), "rate denominator")?,
                })
            })
            .collect()
    }

    pub fn from_records(records: &[ExpTermRecord], numerics: Numerics) -> Result<Self> {
        let prec = numerics.precision_bits;
        let terms = records
            .iter()
            .map(|r| {
                let parsed = Float::parse(&r.coeff)
                    .map_err(|e| Error::validation(format!("bad coefficient `{}`: {e}", r.coeff)))?;
                let rate = RateValue::new(r.rate_num, r.rate_den)?;
                Ok(ExpTerm::new(Float::with_val(prec, parsed), r.power, rate))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpPolySum::from_terms(terms, numerics))
    }

    /// JSON array of `{coeff, power, rate_num, rate_den}` objects.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_records()?)?)
    }

    pub fn from_json(text: &str, numerics: Numerics) -> Result<Self> {
        let records: Vec<ExpTermRecord> = serde_json::from_str(text)?;
        Self::from_records(&records, numerics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn json_round_trip_preserves_terms(
            coeffs in proptest::collection::vec(-1e6f64..1e6, 1..6),
            rates in proptest::collection::vec((0i64..50, 1i64..7), 1..6),
            powers in proptest::collection::vec(0u32..4, 1..6),
        ) {
            let numerics = Numerics::new(192, 1e-14);
            let terms: Vec<ExpTerm> = coeffs
                .iter()
                .zip(&rates)
                .zip(&powers)
                .map(|((c, (n, d)), p)| {
                    let mut coeff = Float::with_val(192, *c);
                    coeff /= 3; // force digits beyond f64
                    ExpTerm::new(coeff, *p, RateValue::new(*n, *d).unwrap())
                })
                .collect();
            let sum = ExpPolySum::from_terms(terms, numerics);
            let back = ExpPolySum::from_json(&sum.to_json().unwrap(), numerics).unwrap();
            prop_assert_eq!(back.len(), sum.len());
            for (a, b) in sum.terms().iter().zip(back.terms()) {
                prop_assert_eq!(a.coeff(), b.coeff());
                prop_assert_eq!(a.power(), b.power());
                prop_assert_eq!(a.rate(), b.rate());
            }
        }
    }
}
