use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex;

use super::model::NetworkModel;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{czero, Real};

/// Nodal admittance matrix over every bus of a feeder.
#[derive(Clone, Debug)]
pub struct FullAdmittance<T: Real> {
    pub matrix: CMatrix<T>,
    pub ids: Vec<String>,
    pub index: HashMap<String, usize>,
}

impl<T: Real> FullAdmittance<T> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// Standard nodal assembly. Each line's shunt admittance is added at both
/// terminals; open lines are skipped.
pub fn build_admittance<T: Real>(network: &NetworkModel<T>) -> Result<FullAdmittance<T>> {
    network.validate()?;
    let n = network.buses.len();
    let ids: Vec<String> = network.buses.iter().map(|b| b.id.clone()).collect();
    let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

    let mut y = DMatrix::from_element(n, n, czero::<T>());
    let mut seen = BTreeSet::new();
    let mut adj = vec![Vec::new(); n];
    for line in network.lines.iter().filter(|l| l.closed) {
        let (i, j) = (index[&line.from], index[&line.to]);
        if i == j {
            return Err(Error::InvalidInput(format!("line `{}` connects a bus to itself", line.from)));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::DuplicateLine {
                from: line.from.clone(),
                to: line.to.clone(),
            });
        }
        let ys = line.series_admittance;
        let sh = line.shunt_admittance;
        y[(i, i)] += ys + sh;
        y[(j, j)] += ys + sh;
        y[(i, j)] -= ys;
        y[(j, i)] -= ys;
        adj[i].push(j);
        adj[j].push(i);
    }

    let comps = components(&adj);
    if comps.len() > 1 {
        let components = comps
            .into_iter()
            .map(|c| c.into_iter().map(|k| ids[k].clone()).collect())
            .collect();
        return Err(Error::Disconnected { components });
    }
    Ok(FullAdmittance { matrix: y, ids, index })
}

/// Connected components of an undirected graph, each sorted, in order of
/// smallest member.
pub(crate) fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; adj.len()];
    let mut out = Vec::new();
    for start in 0..adj.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let c = out.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        label[start] = c;
        while let Some(k) = stack.pop() {
            members.push(k);
            for &j in &adj[k] {
                if label[j] == usize::MAX {
                    label[j] = c;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Row sums of the nodal matrix; equal to the total shunt at each bus.
pub fn row_sums<T: Real>(y: &CMatrix<T>) -> Vec<Complex<T>> {
    (0..y.nrows())
        .map(|i| y.row(i).iter().fold(czero(), |a, b| a + *b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::model::{Bus, BusKind, Line};

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn chain3() -> NetworkModel<f64> {
        NetworkModel {
            buses: vec![
                Bus::new("1", BusKind::Slack),
                Bus::new("2", BusKind::ZeroInjection),
                Bus::load("3", 0, 0.0),
            ],
            lines: vec![Line::new("1", "2", c(1.0)), Line::new("2", "3", c(1.0))],
            slack_voltage: c(1.0),
            v_min: 0.95,
            v_max: 1.05,
        }
    }

    #[test]
    fn two_bus_single_line() {
        let net = NetworkModel {
            buses: vec![Bus::new("a", BusKind::Slack), Bus::load("b", 0, 0.0)],
            lines: vec![Line::new("a", "b", c(1.0))],
            slack_voltage: c(1.0),
            v_min: 0.9,
            v_max: 1.1,
        };
        let y = build_admittance(&net).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[c(1.0), c(-1.0), c(-1.0), c(1.0)]);
        assert_eq!(y.matrix, expect);

        let mut open = net.clone();
        open.lines[0].closed = false;
        match build_admittance(&open) {
            Err(Error::Disconnected { components }) => {
                assert_eq!(components, vec![vec!["a".to_string()], vec!["b".to_string()]]);
            }
            other => panic!("expected disconnection, got {other:?}"),
        }
    }

    #[test]
    fn three_bus_chain() {
        let y = build_admittance(&chain3()).unwrap();
        let expect = CMatrix::from_row_slice(
            3,
            3,
            &[c(1.0), c(-1.0), c(0.0), c(-1.0), c(2.0), c(-1.0), c(0.0), c(-1.0), c(1.0)],
        );
        assert_eq!(y.matrix, expect);
        assert!(row_sums(&y.matrix).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn duplicate_line_rejected() {
        let mut net = chain3();
        net.lines.push(Line::new("3", "2", c(2.0)));
        assert!(matches!(build_admittance(&net), Err(Error::DuplicateLine { .. })));
    }

    #[test]
    fn shunts_show_up_in_row_sums() {
        let mut net = chain3();
        net.lines[0].shunt_admittance = Complex::new(0.0, 0.01);
        let y = build_admittance(&net).unwrap();
        let rs = row_sums(&y.matrix);
        assert!((rs[0] - Complex::new(0.0, 0.01)).norm() < 1e-15);
        assert!((rs[1] - Complex::new(0.0, 0.01)).norm() < 1e-15);
        assert_eq!(rs[2], c(0.0));
    }
}
