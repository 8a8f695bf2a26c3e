use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LoadPanel;
use crate::error::{invalid, Result};
use crate::scalar::Real;

const RESTARTS: usize = 100;
const MAX_LLOYD: usize = 200;

/// k-means on per-bus mean log-profiles with k-means++ seeding and
/// [`RESTARTS`] restarts; the lowest-inertia run wins. Labels are renumbered
/// in order of first appearance so the output does not depend on which
/// restart found the optimum.
pub fn partition_classes<T: Real>(panel: &LoadPanel<T>, horizon: usize, classes: usize, seed: u64) -> Result<Vec<usize>> {
    let points = panel.mean_log_profiles(horizon);
    kmeans(&points, classes, seed)
}

pub fn kmeans<T: Real>(points: &[DVector<T>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(invalid(format!("cannot form {k} classes from {n} load buses")));
    }
    if k == n {
        return Ok((0..n).collect());
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(T, Vec<usize>)> = None;
    for _ in 0..RESTARTS {
        let (inertia, labels) = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    Ok(relabel(&best.expect("at least one restart").1))
}

fn lloyd<T: Real, R: Rng>(points: &[DVector<T>], k: usize, rng: &mut R) -> (T, Vec<usize>) {
    let mut centers = plus_plus(points, k, rng);
    let mut labels = vec![0; points.len()];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let l = nearest(p, &centers).0;
            if l != labels[i] {
                labels[i] = l;
                changed = true;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&DVector<T>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if !members.is_empty() {
                let m = T::from_usize_lossy(members.len());
                *center = members.iter().fold(DVector::zeros(center.len()), |a, p| a + *p) / m;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points.iter().map(|p| nearest(p, &centers).1).fold(T::zero(), |a, b| a + b);
    (inertia, labels)
}

fn plus_plus<T: Real, R: Rng>(points: &[DVector<T>], k: usize, rng: &mut R) -> Vec<DVector<T>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1.as_f64()).collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    idx = i;
                    break;
                }
                u -= di;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[pick].clone());
    }
    centers
}

fn nearest<T: Real>(p: &DVector<T>, centers: &[DVector<T>]) -> (usize, T) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (p - c).norm_squared()))
        .fold((0, T::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = Vec::new();
    labels
        .iter()
        .map(|l| match map.iter().position(|m| m == l) {
            Some(i) => i,
            None => {
                map.push(*l);
                map.len() - 1
            }
        })
        .collect()
}
