//! Feeder description: buses, lines, slack reference and regulation band.
//!
//! The on-disk form is JSON with complex numbers written as `{"re": .., "im": ..}`
//! pairs in per-unit:
//!
//! ```json
//! {
//!   "buses": [
//!     {"id": "1", "kind": "slack"},
//!     {"id": "2", "kind": "zero-injection"},
//!     {"id": "3", "kind": "load", "class_id": 0, "power_factor_deg": 0.0}
//!   ],
//!   "lines": [
//!     {"from": "1", "to": "2", "series_admittance": {"re": 1.0, "im": 0.0}},
//!     {"from": "2", "to": "3", "series_admittance": {"re": 1.0, "im": 0.0}}
//!   ],
//!   "slack_voltage": {"re": 1.0, "im": 0.0},
//!   "v_min": 0.95,
//!   "v_max": 1.05
//! }
//! ```

use std::collections::HashSet;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::powerflow::VoltVarCurve;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusKind {
    #[serde(rename = "slack")]
    Slack,
    #[serde(rename = "load")]
    Load,
    #[serde(rename = "pv")]
    Pv,
    #[serde(rename = "zero-injection", alias = "zero_injection")]
    ZeroInjection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Bus<T> {
    pub id: String,
    pub kind: BusKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<usize>,
    /// Installed PV capacity (p.u.), only meaningful for `pv` buses.
    #[serde(default)]
    pub gamma: T,
    /// Fixed power-factor angle (degrees), only meaningful for `load` buses.
    #[serde(default)]
    pub power_factor_deg: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltvar: Option<VoltVarCurve<T>>,
}

impl<T: Real> Bus<T> {
    pub fn new(id: impl Into<String>, kind: BusKind) -> Self {
        Self {
            id: id.into(),
            kind,
            class_id: None,
            gamma: T::zero(),
            power_factor_deg: T::zero(),
            voltvar: None,
        }
    }

    pub fn load(id: impl Into<String>, class_id: usize, power_factor_deg: T) -> Self {
        Self {
            class_id: Some(class_id),
            power_factor_deg,
            ..Self::new(id, BusKind::Load)
        }
    }

    pub fn pv(id: impl Into<String>, gamma: T, voltvar: Option<VoltVarCurve<T>>) -> Self {
        Self {
            gamma,
            voltvar,
            ..Self::new(id, BusKind::Pv)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Line<T> {
    pub from: String,
    pub to: String,
    #[serde(with = "reim")]
    pub series_admittance: Complex<T>,
    /// Shunt admittance added at each terminal of the line.
    #[serde(with = "reim", default = "reim::zero")]
    pub shunt_admittance: Complex<T>,
    #[serde(default = "default_closed")]
    pub closed: bool,
}

fn default_closed() -> bool {
    true
}

impl<T: Real> Line<T> {
    pub fn new(from: impl Into<String>, to: impl Into<String>, series_admittance: Complex<T>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            series_admittance,
            shunt_admittance: Complex::new(T::zero(), T::zero()),
            closed: true,
        }
    }

    /// Line from a series impedance `r + jx`.
    pub fn from_impedance(from: impl Into<String>, to: impl Into<String>, r: T, x: T) -> Self {
        let z = Complex::new(r, x);
        Self::new(from, to, Complex::new(T::one(), T::zero()) / z)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NetworkModel<T> {
    pub buses: Vec<Bus<T>>,
    pub lines: Vec<Line<T>>,
    #[serde(with = "reim")]
    pub slack_voltage: Complex<T>,
    pub v_min: T,
    pub v_max: T,
}

impl<T: Real> NetworkModel<T> {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn slack_index(&self) -> Result<usize> {
        let mut it = self
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Slack)
            .map(|(i, _)| i);
        match (it.next(), it.next()) {
            (Some(i), None) => Ok(i),
            (None, _) => Err(invalid("network has no slack bus")),
            (Some(_), Some(_)) => Err(invalid("network has more than one slack bus")),
        }
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Checks every structural invariant except connectivity, which is
    /// reported by [`crate::grid::build_admittance`] together with the
    /// component listing.
    pub fn validate(&self) -> Result<()> {
        self.slack_index()?;
        let mut seen = HashSet::new();
        for b in &self.buses {
            if !seen.insert(b.id.as_str()) {
                return Err(invalid(format!("duplicate bus id `{}`", b.id)));
            }
            match b.kind {
                BusKind::Load => {
                    let lim = T::lit(90.0);
                    if !(b.power_factor_deg > -lim && b.power_factor_deg < lim) {
                        return Err(invalid(format!(
                            "bus `{}`: power factor angle must lie in (-90, 90) degrees",
                            b.id
                        )));
                    }
                }
                BusKind::Pv => {
                    if b.gamma < T::zero() || !b.gamma.is_finite() {
                        return Err(invalid(format!("bus `{}`: pv capacity must be nonnegative", b.id)));
                    }
                    if let Some(vv) = &b.voltvar {
                        vv.validate()?;
                    }
                }
                BusKind::Slack | BusKind::ZeroInjection => {}
            }
        }
        if !(self.v_min > T::zero() && self.v_min < self.v_max && self.v_max.is_finite()) {
            return Err(invalid("voltage band must satisfy 0 < v_min < v_max"));
        }
        for l in &self.lines {
            for end in [&l.from, &l.to] {
                if !seen.contains(end.as_str()) {
                    return Err(invalid(format!("line references unknown bus `{end}`")));
                }
            }
            if l.closed && l.series_admittance.re == T::zero() && l.series_admittance.im == T::zero() {
                return Err(invalid(format!(
                    "closed line `{}`-`{}` has zero series admittance",
                    l.from, l.to
                )));
            }
        }
        Ok(())
    }
}

/// Serde adapter writing complex numbers as `{"re": .., "im": ..}`.
pub mod reim {
    use num_complex::Complex;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scalar::Real;

    #[derive(Serialize, Deserialize)]
    #[serde(bound = "T: Real")]
    struct ReIm<T> {
        re: T,
        im: T,
    }

    pub fn serialize<S: Serializer, T: Real>(z: &Complex<T>, s: S) -> Result<S::Ok, S::Error> {
        ReIm { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Real>(d: D) -> Result<Complex<T>, D::Error> {
        let v = ReIm::<T>::deserialize(d)?;
        Ok(Complex::new(v.re, v.im))
    }

    pub fn zero<T: Real>() -> Complex<T> {
        Complex::new(T::zero(), T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_BUS: &str = r#"{
      "buses": [
        {"id": "1", "kind": "slack"},
        {"id": "2", "kind": "zero-injection"},
        {"id": "3", "kind": "load", "class_id": 0, "power_factor_deg": 0.0}
      ],
      "lines": [
        {"from": "1", "to": "2", "series_admittance": {"re": 1.0, "im": 0.0}},
        {"from": "2", "to": "3", "series_admittance": {"re": 1.0, "im": 0.0}}
      ],
      "slack_voltage": {"re": 1.0, "im": 0.0},
      "v_min": 0.95,
      "v_max": 1.05
    }"#;

    #[test]
    fn parses_documented_example() {
        let m = NetworkModel::<f64>::from_json_str(THREE_BUS).unwrap();
        assert_eq!(m.buses.len(), 3);
        assert_eq!(m.buses[1].kind, BusKind::ZeroInjection);
        assert!(m.lines[0].closed);
        assert_eq!(m.lines[1].shunt_admittance, Complex::new(0.0, 0.0));
        assert_eq!(m.slack_index().unwrap(), 0);
        let back = NetworkModel::<f64>::from_json_str(&m.to_json_string().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_two_slacks_and_bad_band() {
        let mut m = NetworkModel::<f64>::from_json_str(THREE_BUS).unwrap();
        m.buses[2].kind = BusKind::Slack;
        assert!(m.validate().is_err());
        let mut m = NetworkModel::<f64>::from_json_str(THREE_BUS).unwrap();
        m.v_min = 1.1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn rejects_zero_series_on_closed_line() {
        let mut m = NetworkModel::<f64>::from_json_str(THREE_BUS).unwrap();
        m.lines[0].series_admittance = Complex::new(0.0, 0.0);
        assert!(m.validate().is_err());
        m.lines[0].closed = false;
        assert!(m.validate().is_ok());
    }
}
