//! The WMO visibility reporting scale.
//!
//! Observed visibility is reported on 84 discrete values: 0 to 5000 m in
//! 100 m steps, 6 to 30 km in 1 km steps and 35 to 70 km in 5 km steps.
//! Raw values (forecasts come in metres) are matched to the scale by rounding
//! down to the closest reported value.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of reportable visibility values.
pub const N_CLASSES: usize = 84;

/// Largest reportable visibility in metres.
pub const MAX_VISIBILITY: f64 = 70_000.0;

/// 1-based index into the visibility scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ClassIndex(usize);

impl ClassIndex {
    pub fn new(k: usize) -> Result<Self> {
        if (1..=N_CLASSES).contains(&k) {
            Ok(ClassIndex(k))
        } else {
            Err(Error::Domain(format!("class index {k} outside 1..={N_CLASSES}")))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Zero-based position, for indexing probability vectors.
    pub fn offset(self) -> usize {
        self.0 - 1
    }

    pub fn value(self) -> f64 {
        scale_values().values()[self.0 - 1]
    }
}

impl TryFrom<usize> for ClassIndex {
    type Error = Error;

    fn try_from(k: usize) -> Result<Self> {
        ClassIndex::new(k)
    }
}

impl From<ClassIndex> for usize {
    fn from(k: ClassIndex) -> usize {
        k.0
    }
}

impl std::fmt::Display for ClassIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The ordered set of reportable visibility values in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityScale {
    values: [f64; N_CLASSES],
}

impl VisibilityScale {
    fn build() -> Self {
        let mut values = [0.0; N_CLASSES];
        let steps = (0..=50)
            .map(|i| i * 100)
            .chain((6..=30).map(|i| i * 1000))
            .chain((7..=14).map(|i| i * 5000));
        for (slot, v) in values.iter_mut().zip(steps) {
            *slot = v as f64;
        }
        VisibilityScale { values }
    }

    pub fn values(&self) -> &[f64; N_CLASSES] {
        &self.values
    }

    pub fn len(&self) -> usize {
        N_CLASSES
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value_of(&self, k: ClassIndex) -> f64 {
        self.values[k.offset()]
    }

    /// Inverse of [`value_of`](Self::value_of); `y` must lie exactly on the scale.
    pub fn class_of(&self, y: f64) -> Result<ClassIndex> {
        self.values
            .iter()
            .position(|&v| v == y)
            .map(|i| ClassIndex(i + 1))
            .ok_or_else(|| Error::Domain(format!("{y} m is not a reportable visibility value")))
    }

    /// Largest class whose value does not exceed `v`. Values above the top of
    /// the scale clamp to the last class.
    pub fn round_down(&self, v: f64) -> Result<ClassIndex> {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("visibility must be non-negative, got {v}")));
        }
        // values[0] = 0 <= v, so the partition point is at least 1
        let n_le = self.values.partition_point(|&y| y <= v);
        Ok(ClassIndex(n_le))
    }
}

/// The canonical 84-value scale.
pub fn scale_values() -> &'static VisibilityScale {
    static SCALE: OnceLock<VisibilityScale> = OnceLock::new();
    SCALE.get_or_init(VisibilityScale::build)
}

pub fn round_down(v: f64) -> Result<ClassIndex> {
    scale_values().round_down(v)
}

pub fn value_of(k: ClassIndex) -> f64 {
    scale_values().value_of(k)
}

pub fn class_of(y: f64) -> Result<ClassIndex> {
    scale_values().class_of(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(i: usize) -> ClassIndex {
        ClassIndex::new(i).unwrap()
    }

    #[test]
    fn scale_shape() {
        let s = scale_values();
        assert_eq!(s.values().len(), 84);
        assert_eq!(s.values()[0], 0.0);
        assert_eq!(s.values()[83], 70_000.0);
        assert!(s.values().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.values().iter().filter(|&&v| v <= 5000.0).count(), 51);
        assert_eq!(s.values().iter().filter(|&&v| v > 5000.0 && v <= 30_000.0).count(), 25);
        assert_eq!(s.values().iter().filter(|&&v| v > 30_000.0).count(), 8);
    }

    #[test]
    fn scale_is_idempotent() {
        assert_eq!(scale_values(), &VisibilityScale::build());
    }

    #[test]
    fn rounding_examples() {
        assert_eq!(round_down(5500.0).unwrap(), class_of(5000.0).unwrap());
        assert_eq!(round_down(0.0).unwrap(), k(1));
        assert_eq!(round_down(32_000.0).unwrap(), class_of(30_000.0).unwrap());
        assert_eq!(round_down(99.999).unwrap(), k(1));
        assert_eq!(round_down(1e9).unwrap(), k(84));
        assert!(round_down(-1.0).is_err());
        assert!(round_down(f64::NAN).is_err());
    }

    #[test]
    fn value_class_inverse() {
        assert_eq!(value_of(k(1)), 0.0);
        assert_eq!(value_of(k(84)), 70_000.0);
        assert_eq!(class_of(value_of(k(42))).unwrap(), k(42));
        assert!(class_of(150.0).is_err());
        assert!(ClassIndex::new(0).is_err());
        assert!(ClassIndex::new(85).is_err());
    }

    #[test]
    fn round_trip_on_scale_points() {
        for i in 1..=84 {
            assert_eq!(round_down(value_of(k(i))).unwrap(), k(i));
        }
    }

    proptest! {
        #[test]
        fn round_down_brackets(v in 0.0f64..69_999.0) {
            let c = round_down(v).unwrap();
            prop_assert!(value_of(c) <= v);
            prop_assert!(v < value_of(k(c.get() + 1)));
        }

        #[test]
        fn round_down_monotone(a in 0.0f64..80_000.0, b in 0.0f64..80_000.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(round_down(lo).unwrap() <= round_down(hi).unwrap());
        }
    }
}
