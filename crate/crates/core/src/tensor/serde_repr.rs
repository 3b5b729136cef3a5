//! JSON form of a tensor series:
//! `{d, has_time_letter, m, levels: [[...coefficients...]]}` with words in
//! lexicographic order per level (letters `0..d`), levels listed by word
//! length, coefficients of words beyond the graded cap stored as 0.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Alphabet, TensorSeries};

#[derive(Serialize, Deserialize)]
struct Repr {
    d: usize,
    has_time_letter: bool,
    m: usize,
    levels: Vec<Vec<f64>>,
}

impl Serialize for TensorSeries {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = Repr {
            d: self.alphabet().d(),
            has_time_letter: self.alphabet().has_time_letter(),
            m: self.level_cap(),
            levels: (0..=self.level_cap()).map(|k| self.level(k).to_vec()).collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TensorSeries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = Repr::deserialize(deserializer)?;
        let alphabet = Alphabet::new(repr.d, repr.has_time_letter)
            .map_err(|e| D::Error::custom(e.to_string()))?;
        let mut series = TensorSeries::zero(alphabet, repr.m)
            .map_err(|e| D::Error::custom(e.to_string()))?;
        if repr.levels.len() != repr.m + 1 {
            return Err(D::Error::custom(format!(
                "expected {} levels, got {}",
                repr.m + 1,
                repr.levels.len()
            )));
        }
        for (k, coeffs) in repr.levels.iter().enumerate() {
            let expect = series.level(k).len();
            if coeffs.len() != expect {
                return Err(D::Error::custom(format!(
                    "level {k} has {} coefficients, expected {expect}",
                    coeffs.len()
                )));
            }
            for (idx, &c) in coeffs.iter().enumerate() {
                if !c.is_finite() {
                    return Err(D::Error::custom("non-finite coefficient"));
                }
                if !series.word_allowed(k, idx) && c != 0.0 {
                    return Err(D::Error::custom(format!(
                        "nonzero coefficient on word beyond the graded cap at level {k}, index {idx}"
                    )));
                }
            }
            series.level_mut(k).copy_from_slice(coeffs);
        }
        Ok(series)
    }
}
