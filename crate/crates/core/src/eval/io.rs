use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::fmt17;
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::mechanism::{Budget, MechanismKind, MechanismRelease, ReleaseWarnings};

/// JSON sidecar describing a release written by [`write_release`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReleaseMeta {
    pub kind: MechanismKind,
    pub bus_ids: Vec<String>,
    pub horizon: usize,
    pub budget: Budget,
    pub seed: u64,
    pub warnings: ReleaseWarnings,
    pub notes: Vec<String>,
    /// Day files, relative to the sidecar.
    pub files: Vec<String>,
}

/// Writes one CSV per day (`time_index,bus_id,v_re,v_im`) plus `<stem>.json`
/// into `dir`. Returns the sidecar path.
pub fn write_release(release: &MechanismRelease<f64>, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(release.days.len());
    for (d, day) in release.days.iter().enumerate() {
        let name = format!("{stem}_day{d:03}.csv");
        let mut w = csv::Writer::from_path(dir.join(&name))?;
        w.write_record(["time_index", "bus_id", "v_re", "v_im"])?;
        for t in 0..day.nrows() {
            for (k, id) in release.bus_ids.iter().enumerate() {
                let z = day[(t, k)];
                w.write_record([t.to_string(), id.clone(), fmt17(z.re), fmt17(z.im)])?;
            }
        }
        w.flush()?;
        files.push(name);
    }
    let meta = ReleaseMeta {
        kind: release.kind,
        bus_ids: release.bus_ids.clone(),
        horizon: release.horizon(),
        budget: release.budget,
        seed: release.seed,
        warnings: release.warnings.clone(),
        notes: release.notes.clone(),
        files,
    };
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(path)
}

/// Reads a release back from its sidecar.
pub fn read_release(sidecar: impl AsRef<Path>) -> Result<MechanismRelease<f64>> {
    let sidecar = sidecar.as_ref();
    let meta: ReleaseMeta = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    let base = sidecar.parent().unwrap_or(Path::new("."));
    let n = meta.bus_ids.len();
    let mut days = Vec::with_capacity(meta.files.len());
    for f in &meta.files {
        let mut day = CMatrix::zeros(meta.horizon, n);
        let mut seen = vec![false; meta.horizon * n];
        let mut r = csv::Reader::from_path(base.join(f))?;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(invalid(format!("{f}: expected 4 columns")));
            }
            let t: usize = rec[0].trim().parse().map_err(|_| invalid(format!("{f}: bad time index `{}`", &rec[0])))?;
            let k = meta
                .bus_ids
                .iter()
                .position(|id| id == rec[1].trim())
                .ok_or_else(|| invalid(format!("{f}: unknown bus `{}`", &rec[1])))?;
            if t >= meta.horizon {
                return Err(invalid(format!("{f}: time index {t} beyond horizon")));
            }
            let re = parse_f64(&rec[2], f)?;
            let im = parse_f64(&rec[3], f)?;
            day[(t, k)] = Complex::new(re, im);
            seen[t * n + k] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid(format!("{f}: missing (time, bus) entries")));
        }
        days.push(day);
    }
    Ok(MechanismRelease {
        kind: meta.kind,
        bus_ids: meta.bus_ids,
        days,
        budget: meta.budget,
        seed: meta.seed,
        warnings: meta.warnings,
        notes: meta.notes,
    })
}

fn parse_f64(s: &str, file: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| invalid(format!("{file}: bad number `{s}`")))
}

/// Irradiance series from a `time_index,h_g` CSV, in time order.
pub fn read_irradiance(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(invalid("irradiance CSV needs time_index and h_g columns"));
        }
        let t = rec[0].trim().parse().map_err(|_| invalid(format!("bad time index `{}`", &rec[0])))?;
        let h = parse_f64(&rec[1], "irradiance")?;
        if !(h >= 0.0) {
            return Err(invalid(format!("irradiance must be nonnegative, got {h}")));
        }
        rows.push((t, h));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(invalid("irradiance time indices must be 0..T without gaps"));
    }
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

pub fn write_irradiance(path: impl AsRef<Path>, h: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time_index", "h_g"])?;
    for (t, x) in h.iter().enumerate() {
        w.write_record([t.to_string(), fmt17(*x)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn release_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let day = CMatrix::from_fn(3, 2, |t, k| Complex::new(1.0 / (t + k + 3) as f64, -0.1 / 7.0 * t as f64));
        let rel = MechanismRelease {
            kind: MechanismKind::JointVoltageNoise,
            bus_ids: vec!["a".into(), "b".into()],
            days: vec![day.clone(), day * Complex::new(0.5, 0.0)],
            budget: Budget::new(25.0, 1e-5, 2),
            seed: 9,
            warnings: ReleaseWarnings::default(),
            notes: vec!["x".into()],
        };
        let path = write_release(&rel, dir.path(), "joint").unwrap();
        assert_eq!(read_release(&path).unwrap(), rel);
    }

    #[test]
    fn irradiance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let h = vec![0.0, 0.25, 1.0 / 3.0];
        write_irradiance(&p, &h).unwrap();
        assert_eq!(read_irradiance(&p).unwrap(), h);
        fs::write(&p, "time_index,h_g\n0,0.1\n2,0.3\n").unwrap();
        assert!(read_irradiance(&p).is_err());
    }
}
