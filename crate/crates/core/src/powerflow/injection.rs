use nalgebra::DVector;
use num_complex::Complex;

use super::VoltVarCurve;
use crate::error::{invalid, Error, Result};
use crate::grid::{BusKind, KronReduction, NetworkModel};
use crate::linalg::CVector;
use crate::scalar::{cabs, cis, czero, Real};

/// Per-bus attributes of the non-slack retained buses, in `KronReduction::bus_ids` order.
#[derive(Clone, Debug)]
pub struct BusLayout<T: Real> {
    pub ids: Vec<String>,
    pub kinds: Vec<BusKind>,
    pub class_ids: Vec<Option<usize>>,
    /// `tan θ_k` at load buses, zero elsewhere.
    pub tan_theta: DVector<T>,
    pub gamma: DVector<T>,
    pub voltvar: Vec<Option<VoltVarCurve<T>>>,
}

impl<T: Real> BusLayout<T> {
    pub fn new(network: &NetworkModel<T>, red: &KronReduction<T>) -> Result<Self> {
        let n = red.n();
        let mut out = Self {
            ids: red.bus_ids.clone(),
            kinds: Vec::with_capacity(n),
            class_ids: Vec::with_capacity(n),
            tan_theta: DVector::zeros(n),
            gamma: DVector::zeros(n),
            voltvar: Vec::with_capacity(n),
        };
        for (k, id) in red.bus_ids.iter().enumerate() {
            let bus = network
                .bus_index(id)
                .map(|i| &network.buses[i])
                .ok_or_else(|| invalid(format!("reduction references unknown bus `{id}`")))?;
            out.kinds.push(bus.kind);
            match bus.kind {
                BusKind::Load => {
                    out.tan_theta[k] = crate::scalar::deg_to_rad(bus.power_factor_deg).tan();
                    out.class_ids.push(Some(bus.class_id.unwrap_or(0)));
                    out.voltvar.push(None);
                }
                BusKind::Pv => {
                    out.gamma[k] = bus.gamma;
                    out.class_ids.push(None);
                    out.voltvar.push(bus.voltvar.clone());
                }
                _ => {
                    out.class_ids.push(None);
                    out.voltvar.push(None);
                }
            }
        }
        Ok(out)
    }

    /// All buses are loads with the given power factor tangents.
    pub fn loads_only(tan_theta: DVector<T>) -> Self {
        let n = tan_theta.len();
        Self {
            ids: (1..=n).map(|k| k.to_string()).collect(),
            kinds: vec![BusKind::Load; n],
            class_ids: vec![Some(0); n],
            tan_theta,
            gamma: DVector::zeros(n),
            voltvar: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn load_buses(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.kinds[k] == BusKind::Load).collect()
    }

    pub fn pv_buses(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.kinds[k] == BusKind::Pv).collect()
    }

    /// Scatters per-load-bus values into an n-vector.
    pub fn scatter_loads(&self, values: &[T]) -> Result<DVector<T>> {
        let loads = self.load_buses();
        if values.len() != loads.len() {
            return Err(Error::DimensionMismatch {
                expected: loads.len(),
                found: values.len(),
            });
        }
        let mut p = DVector::zeros(self.len());
        for (&k, &x) in loads.iter().zip(values) {
            p[k] = x;
        }
        Ok(p)
    }

    pub fn injection(&self, p: DVector<T>, h: T) -> Result<InjectionSpec<T>> {
        InjectionSpec::new(self, p, h)
    }
}

/// Injections at one time step.
#[derive(Clone, Debug)]
pub struct InjectionSpec<T: Real> {
    pub p: DVector<T>,
    pub tan_theta: DVector<T>,
    pub gamma: DVector<T>,
    pub h: T,
    pub voltvar: Vec<Option<VoltVarCurve<T>>>,
}

impl<T: Real> InjectionSpec<T> {
    pub fn new(layout: &BusLayout<T>, p: DVector<T>, h: T) -> Result<Self> {
        if p.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                found: p.len(),
            });
        }
        for k in 0..p.len() {
            if !(p[k] >= T::zero()) || !p[k].is_finite() {
                return Err(invalid(format!("active load at bus `{}` must be nonnegative", layout.ids[k])));
            }
            if layout.kinds[k] != BusKind::Load && p[k] != T::zero() {
                return Err(invalid(format!("bus `{}` is not a load bus but has load", layout.ids[k])));
            }
        }
        if !(h >= T::zero()) {
            return Err(invalid("irradiance must be nonnegative"));
        }
        Ok(Self {
            p,
            tan_theta: layout.tan_theta.clone(),
            gamma: layout.gamma.clone(),
            h,
            voltvar: layout.voltvar.clone(),
        })
    }

    /// Pure loads, no generation.
    pub fn loads(p: DVector<T>, tan_theta: DVector<T>) -> Self {
        let n = p.len();
        Self {
            p,
            tan_theta,
            gamma: DVector::zeros(n),
            h: T::zero(),
            voltvar: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Consumed power `p + j tanθ p`.
    pub fn consumption(&self) -> CVector<T> {
        CVector::from_iterator(self.len(), (0..self.len()).map(|k| Complex::new(self.p[k], self.tan_theta[k] * self.p[k])))
    }

    /// `φ_k(|v_k|)`, zero where no curve is attached.
    pub fn angle(&self, k: usize, vk: Complex<T>) -> T {
        self.voltvar[k].as_ref().map_or(T::zero(), |c| c.angle(cabs(vk)))
    }

    /// Generation `γ_k h e^{jφ_k(|v_k|)}`.
    pub fn generation(&self, v: &CVector<T>) -> CVector<T> {
        CVector::from_iterator(
            self.len(),
            (0..self.len()).map(|k| pv_injection(self.gamma[k], self.h, self.angle(k, v[k]))),
        )
    }

    /// Wirtinger derivatives of the generation term, `(∂s_g/∂v, ∂s_g/∂v̄)` diagonals.
    pub fn generation_derivatives(&self, v: &CVector<T>) -> (CVector<T>, CVector<T>) {
        let n = self.len();
        let mut a = CVector::from_element(n, czero());
        let mut b = CVector::from_element(n, czero());
        let two = T::lit(2.0);
        for k in 0..n {
            let Some(curve) = &self.voltvar[k] else { continue };
            let mag = cabs(v[k]);
            let slope = curve.slope(mag);
            let scale = self.gamma[k] * self.h;
            if slope == T::zero() || scale == T::zero() || mag == T::zero() {
                continue;
            }
            // γh · j e^{jφ} · φ' / (2|v|)
            let c = cis(curve.angle(mag)) * Complex::new(T::zero(), scale * slope / (two * mag));
            a[k] = c * v[k].conj();
            b[k] = c * v[k];
        }
        (a, b)
    }

    /// True when any bus has a voltage-dependent injection.
    pub fn has_voltvar(&self) -> bool {
        (0..self.len()).any(|k| self.voltvar[k].is_some() && self.gamma[k] * self.h != T::zero())
    }

    /// Largest `γ_k h ‖φ'_k‖` over the band.
    pub fn voltvar_gain(&self, lo: T, hi: T) -> T {
        (0..self.len())
            .filter_map(|k| self.voltvar[k].as_ref().map(|c| self.gamma[k] * self.h * c.max_abs_slope(lo, hi)))
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// `γ h e^{jφ}`.
pub fn pv_injection<T: Real>(gamma: T, h: T, phi: T) -> Complex<T> {
    cis(phi) * (gamma * h)
}

/// `q = tan(θ) p`.
pub fn reactive_from_active<T: Real>(p: T, theta_deg: T) -> T {
    crate::scalar::deg_to_rad(theta_deg).tan() * p
}
