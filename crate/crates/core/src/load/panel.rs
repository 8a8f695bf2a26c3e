use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Historical active-power panel, one row per load bus and one column per
/// time step. Several days are stored back to back.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadPanel<T: Real> {
    pub values: DMatrix<T>,
    pub bus_ids: Vec<String>,
    pub resolution_minutes: u32,
}

impl<T: Real> LoadPanel<T> {
    pub fn new(values: DMatrix<T>, bus_ids: Vec<String>, resolution_minutes: u32) -> Result<Self> {
        let panel = Self {
            values,
            bus_ids,
            resolution_minutes,
        };
        panel.validate()?;
        Ok(panel)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.nrows() != self.bus_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bus_ids.len(),
                found: self.values.nrows(),
            });
        }
        if self.values.ncols() == 0 {
            return Err(invalid("load panel has no time steps"));
        }
        if self.resolution_minutes == 0 {
            return Err(invalid("resolution must be positive"));
        }
        for (i, id) in self.bus_ids.iter().enumerate() {
            if self.values.row(i).iter().any(|x| !(*x > T::zero()) || !x.is_finite()) {
                return Err(invalid(format!("load panel column `{id}` has a non-positive value")));
            }
        }
        Ok(())
    }

    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn n_steps(&self) -> usize {
        self.values.ncols()
    }

    pub fn steps_per_day(&self) -> usize {
        (24 * 60 / self.resolution_minutes as usize).max(1)
    }

    /// Whole days contained in the panel for a given horizon.
    pub fn days(&self, horizon: usize) -> usize {
        self.n_steps() / horizon
    }

    /// Daily profiles of one bus, each of length `horizon`; trailing partial days are dropped.
    pub fn profiles(&self, bus: usize, horizon: usize) -> Vec<DVector<T>> {
        (0..self.days(horizon))
            .map(|d| DVector::from_fn(horizon, |t, _| self.values[(bus, d * horizon + t)]))
            .collect()
    }

    /// Mean over days of the log profile of every bus, as rows.
    pub fn mean_log_profiles(&self, horizon: usize) -> Vec<DVector<T>> {
        (0..self.n_buses())
            .map(|b| {
                let ps = self.profiles(b, horizon);
                let m = T::from_usize_lossy(ps.len().max(1));
                ps.iter().fold(DVector::zeros(horizon), |acc, p| acc + p.map(|x| x.ln())) / m
            })
            .collect()
    }

    /// Reads a panel from CSV: first column is a timestamp or index, every
    /// other column is one bus, rows are time steps.
    pub fn from_csv_reader<R: Read>(reader: R, resolution_minutes: u32) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(invalid("load panel needs a time column and at least one bus column"));
        }
        let bus_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut cols: Vec<Vec<T>> = vec![Vec::new(); bus_ids.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(invalid(format!("load panel row {} has {} fields", line + 2, rec.len())));
            }
            for (j, field) in rec.iter().skip(1).enumerate() {
                let x: f64 = field
                    .parse()
                    .map_err(|_| invalid(format!("load panel row {}: cannot parse `{field}`", line + 2)))?;
                cols[j].push(T::lit(x));
            }
        }
        let steps = cols.first().map_or(0, Vec::len);
        let values = DMatrix::from_fn(bus_ids.len(), steps, |i, t| cols[i][t]);
        Self::new(values, bus_ids, resolution_minutes)
    }

    pub fn from_csv(path: impl AsRef<Path>, resolution_minutes: u32) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, resolution_minutes)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["time_index".to_string()];
        header.extend(self.bus_ids.iter().cloned());
        w.write_record(&header)?;
        for t in 0..self.n_steps() {
            let mut row = vec![t.to_string()];
            row.extend((0..self.n_buses()).map(|b| crate::eval::fmt17(self.values[(b, t)].as_f64())));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Sub-panel restricted to the listed buses.
    pub fn select(&self, ids: &[String]) -> Result<Self> {
        let idx: Vec<usize> = ids
            .iter()
            .map(|id| {
                self.bus_ids
                    .iter()
                    .position(|b| b == id)
                    .ok_or_else(|| invalid(format!("bus `{id}` missing from load panel")))
            })
            .collect::<Result<_>>()?;
        let values = DMatrix::from_fn(idx.len(), self.n_steps(), |i, t| self.values[(idx[i], t)]);
        Self::new(values, ids.to_vec(), self.resolution_minutes)
    }
}
