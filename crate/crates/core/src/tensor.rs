use crate::error::{Error, Result};

/// A flat sequence of activation values.
///
/// Values are held as `f64`; file boundaries narrow them to `f32`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FloatTensor {
    values: Vec<f64>,
}

impl FloatTensor {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn from_f32(values: &[f32]) -> Self {
        Self {
            values: values.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Returns the index of the first NaN or infinite element as an error.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFiniteValue { index }),
            None => Ok(()),
        }
    }

    /// Narrows every element to binary32, failing if any element is not
    /// finite before or after narrowing.
    pub fn to_f32(&self) -> Result<Vec<f32>> {
        self.values
            .iter()
            .enumerate()
            .map(|(index, &v)| {
                let narrowed = v as f32;
                if v.is_finite() && narrowed.is_finite() {
                    Ok(narrowed)
                } else {
                    Err(Error::NonFiniteValue { index })
                }
            })
            .collect()
    }

    /// Rounds every element through binary32, as the file format would.
    pub fn round_to_f32(&self) -> Self {
        self.values.iter().map(|&v| f64::from(v as f32)).collect()
    }
}

impl From<Vec<f64>> for FloatTensor {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

impl FromIterator<f64> for FloatTensor {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl AsRef<[f64]> for FloatTensor {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
