use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Log-normal load model of one class.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadClass<T: Real> {
    pub mu: DVector<T>,
    pub sigma_t: DMatrix<T>,
    pub theta_deg: T,
    pub p_min: T,
    pub p_max: T,
    pub members: Vec<String>,
    /// Margins were derived from the observed data rather than supplied.
    pub margins_from_data: bool,
}

impl<T: Real> LoadClass<T> {
    pub fn horizon(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self, eig_floor: T) -> Result<()> {
        let t = self.mu.len();
        if t == 0 {
            return Err(invalid("load class has an empty mean profile"));
        }
        if self.sigma_t.shape() != (t, t) {
            return Err(Error::DimensionMismatch {
                expected: t,
                found: self.sigma_t.nrows(),
            });
        }
        if self.members.is_empty() {
            return Err(invalid("load class has no member buses"));
        }
        if !(self.p_min > T::zero() && self.p_min < self.p_max) {
            return Err(invalid("load margins must satisfy 0 < p_min < p_max"));
        }
        let scale = self.sigma_t.iter().fold(T::zero(), |a, b| a.max(b.abs()));
        let tol = T::lit(1e-9) * (T::one() + scale);
        for i in 0..t {
            for j in 0..i {
                if (self.sigma_t[(i, j)] - self.sigma_t[(j, i)]).abs() > tol {
                    return Err(invalid("class covariance is not symmetric"));
                }
            }
        }
        let min_eig = self.sigma_t.clone().symmetric_eigenvalues().min();
        if min_eig < eig_floor * (T::one() - T::lit(1e-6)) - tol {
            return Err(invalid(format!("class covariance eigenvalue {min_eig} is below the floor")));
        }
        Ok(())
    }
}

/// Every class of a feeder, sharing one horizon `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadClassModel<T: Real> {
    pub classes: Vec<LoadClass<T>>,
}

impl<T: Real> LoadClassModel<T> {
    pub fn horizon(&self) -> usize {
        self.classes.first().map_or(0, LoadClass::horizon)
    }

    pub fn class_of(&self, bus_id: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.members.iter().any(|m| m == bus_id))
    }

    pub fn validate(&self, eig_floor: T) -> Result<()> {
        if self.classes.is_empty() {
            return Err(invalid("load model has no classes"));
        }
        let t = self.horizon();
        for c in &self.classes {
            if c.horizon() != t {
                return Err(Error::DimensionMismatch {
                    expected: t,
                    found: c.horizon(),
                });
            }
            c.validate(eig_floor)?;
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ModelFile<T> = serde_json::from_str(s)?;
        let model = file.into_model()?;
        model.validate(T::zero())?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct ClassFile<T> {
    members: Vec<String>,
    theta_deg: T,
    p_min: T,
    p_max: T,
    #[serde(default)]
    margins_from_data: bool,
    mu: Vec<T>,
    /// Row-major `T × T`.
    sigma: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct ModelFile<T> {
    horizon: usize,
    classes: Vec<ClassFile<T>>,
}

impl<T: Real> From<&LoadClassModel<T>> for ModelFile<T> {
    fn from(m: &LoadClassModel<T>) -> Self {
        Self {
            horizon: m.horizon(),
            classes: m
                .classes
                .iter()
                .map(|c| ClassFile {
                    members: c.members.clone(),
                    theta_deg: c.theta_deg,
                    p_min: c.p_min,
                    p_max: c.p_max,
                    margins_from_data: c.margins_from_data,
                    mu: c.mu.iter().copied().collect(),
                    sigma: c.sigma_t.transpose().iter().copied().collect(),
                })
                .collect(),
        }
    }
}

impl<T: Real> ModelFile<T> {
    fn into_model(self) -> Result<LoadClassModel<T>> {
        let t = self.horizon;
        let classes = self
            .classes
            .into_iter()
            .map(|c| {
                if c.mu.len() != t || c.sigma.len() != t * t {
                    return Err(Error::DimensionMismatch {
                        expected: t,
                        found: c.mu.len(),
                    });
                }
                Ok(LoadClass {
                    mu: DVector::from_vec(c.mu),
                    sigma_t: DMatrix::from_row_slice(t, t, &c.sigma),
                    theta_deg: c.theta_deg,
                    p_min: c.p_min,
                    p_max: c.p_max,
                    members: c.members,
                    margins_from_data: c.margins_from_data,
                })
            })
            .collect::<Result<_>>()?;
        Ok(LoadClassModel { classes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_row_major_sigma() {
        let class = LoadClass {
            mu: DVector::from_vec(vec![0.1, -0.2]),
            sigma_t: DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]),
            theta_deg: 15.0,
            p_min: 0.2,
            p_max: 2.0,
            members: vec!["a".into(), "b".into()],
            margins_from_data: true,
        };
        let m = LoadClassModel { classes: vec![class] };
        let s = m.to_json_string().unwrap();
        assert!(s.contains("\"horizon\": 2"));
        assert_eq!(LoadClassModel::<f64>::from_json_str(&s).unwrap(), m);
        assert_eq!(m.class_of("b"), Some(0));
        assert_eq!(m.class_of("z"), None);
    }

    #[test]
    fn rejects_inverted_margins() {
        let class = LoadClass {
            mu: DVector::from_vec(vec![0.0]),
            sigma_t: DMatrix::from_element(1, 1, 1.0),
            theta_deg: 0.0,
            p_min: 2.0,
            p_max: 1.0,
            members: vec!["a".into()],
            margins_from_data: false,
        };
        assert!(class.validate(1e-6).is_err());
    }
}
