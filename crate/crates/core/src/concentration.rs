//! Mass of eigenfunctions away from the singularity and the density-one subset built from it.

use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{MeshPolicy, TridiagonalForm};
use crate::eig::{eigenvector, Eigenvector};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::weyl::{counting_function, level_forms};

/// `Σ_{x_i ≥ ε} M_ii v_i²` for an M-normalized eigenvector of `form`.
pub fn eigenfunction_mass(form: &TridiagonalForm, vector: &Eigenvector, eps: f64) -> Result<f64> {
    if eps < form.floor * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("eps = {eps} is below the mesh floor {}", form.floor)));
    }
    let start = form.nodes.partition_point(|x| *x < eps);
    Ok((start..form.len()).map(|i| form.mass[i] * vector.values[i] * vector.values[i]).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassRow {
    pub lambda: f64,
    pub mode: u64,
    /// Which copy of a multiple fiber level.
    pub copy: u64,
    /// `a_i(U_m)` for each exhaustion level.
    pub masses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassTable {
    /// `U_m = {x ≥ ε_m}` with ε strictly decreasing.
    pub eps: Vec<f64>,
    pub rows: Vec<MassRow>,
    pub lambda_cut: f64,
}

impl MassTable {
    /// Prefix means `(1/ℓ) Σ_{i<ℓ} a_i(U_level)` for ℓ = 1..len.
    pub fn cesaro(&self, level: usize) -> Vec<f64> {
        let mut sum = 0.0;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                sum += r.masses[level];
                sum / (i + 1) as f64
            })
            .collect()
    }
}

/// The first `count` eigenpairs (with multiplicity) and their masses on each `{x ≥ ε_m}`.
pub fn mass_table(model: &Model, count: usize, eps: &[f64], seed: u64) -> Result<MassTable> {
    if count == 0 || eps.is_empty() {
        return Err(Error::Config("need at least one eigenfunction and one exhaustion level".into()));
    }
    if eps.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Config("exhaustion levels must be strictly decreasing in eps".into()));
    }
    let mut lambda_cut = 16.0;
    loop {
        let r = counting_function(model, &[lambda_cut], &MeshPolicy::for_lambda_max(lambda_cut), false)?;
        if r.spectrum.total[0] as usize >= count {
            break;
        }
        lambda_cut *= 1.5;
        if lambda_cut > 1e9 {
            return Err(Error::InsufficientSpectrum(format!("fewer than {count} eigenvalues below 1e9")));
        }
    }
    let policy = MeshPolicy::for_lambda_max(lambda_cut);
    let (sep, levels) = level_forms(model, lambda_cut, &policy)?;
    let tol = 1e-12 * lambda_cut;
    let pairs: Vec<(u64, u64, f64, Vec<f64>)> = levels
        .par_iter()
        .flat_map_iter(|(m, form, vals)| {
            vals.iter().enumerate().map(move |(j, l)| {
                let v = eigenvector(form, *l, tol, seed ^ (m.index << 20) ^ j as u64)?;
                let masses = eps.iter().map(|e| eigenfunction_mass(form, &v, *e)).collect::<Result<Vec<f64>>>()?;
                Ok((m.index, m.multiplicity * sep.sheets, *l, masses))
            })
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<MassRow> = pairs
        .into_iter()
        .flat_map(|(mode, mult, lambda, masses)| {
            (0..mult).map(move |copy| MassRow { lambda, mode, copy, masses: masses.clone() })
        })
        .collect();
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.mode.cmp(&b.mode)).then(a.copy.cmp(&b.copy)));
    rows.truncate(count);
    Ok(MassTable { eps: eps.to_vec(), rows, lambda_cut })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityOneSubset {
    pub members: Vec<bool>,
    /// `i_m` per level (0-based), non-decreasing.
    pub thresholds: Vec<usize>,
    /// `|S ∩ [0, ℓ]| / (ℓ + 1)`.
    pub prefix_density: Vec<f64>,
    /// Running mean of `a_i(U_1)` over the members of S seen so far.
    pub restricted_mass: Vec<f64>,
    /// Some level never reaches density `1 − 1/m` within the table.
    pub partial: bool,
}

/// `S = ⋃_m S_m ∩ [i_m, i_{m+1})` with `S_m = {i : a_i(U_j) < η_j, j ≤ m}` and `i_m` the first index
/// beyond which every prefix density of `S_m` is at least `1 − 1/m`.
pub fn density_one_subset(table: &MassTable, eta: &[f64]) -> Result<DensityOneSubset> {
    let levels = table.eps.len();
    if eta.len() != levels {
        return Err(Error::Config(format!("{} thresholds for {levels} exhaustion levels", eta.len())));
    }
    let len = table.rows.len();
    let mut in_level = vec![vec![false; len]; levels];
    for (i, r) in table.rows.iter().enumerate() {
        let mut ok = true;
        for m in 0..levels {
            ok = ok && r.masses[m] < eta[m];
            in_level[m][i] = ok;
        }
    }
    let mut thresholds = Vec::with_capacity(levels);
    let mut partial = false;
    for (m, level) in in_level.iter().enumerate() {
        let target = 1.0 - 1.0 / (m + 1) as f64;
        let mut hits = 0usize;
        let mut first_good = None;
        for (i, keep) in level.iter().enumerate() {
            hits += *keep as usize;
            if (hits as f64) / ((i + 1) as f64) >= target {
                first_good.get_or_insert(i);
            } else {
                first_good = None;
            }
        }
        let floor = thresholds.last().copied().unwrap_or(0);
        let i_m = match first_good {
            Some(i) => i.max(floor),
            None => {
                partial = true;
                len
            }
        };
        thresholds.push(i_m);
    }
    let mut members = vec![false; len];
    for m in 0..levels {
        let end = thresholds.get(m + 1).copied().unwrap_or(len);
        let range = thresholds[m]..end.max(thresholds[m]).min(len);
        members[range.clone()].copy_from_slice(&in_level[m][range]);
    }
    let (mut hits, mut sum) = (0usize, 0.0);
    let mut prefix_density = Vec::with_capacity(len);
    let mut restricted_mass = Vec::with_capacity(len);
    for (i, keep) in members.iter().enumerate() {
        if *keep {
            hits += 1;
            sum += table.rows[i].masses[0];
        }
        prefix_density.push(hits as f64 / (i + 1) as f64);
        restricted_mass.push(if hits > 0 { sum / hits as f64 } else { 0.0 });
    }
    Ok(DensityOneSubset { members, thresholds, prefix_density, restricted_mass, partial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, EdgeCondition, ModelSpec};

    fn table(values: &[f64], levels: usize) -> MassTable {
        MassTable {
            eps: (0..levels).map(|m| 0.5 / (m + 1) as f64).collect(),
            rows: values
                .iter()
                .enumerate()
                .map(|(i, v)| MassRow { lambda: i as f64, mode: 0, copy: 0, masses: vec![*v; levels] })
                .collect(),
            lambda_cut: values.len() as f64,
        }
    }

    #[test]
    fn all_zero_masses_keep_everything() {
        let s = density_one_subset(&table(&[0.0; 50], 3), &[0.1, 0.1, 0.1]).unwrap();
        assert!(s.members.iter().all(|m| *m));
        assert!(!s.partial);
        assert_eq!(*s.prefix_density.last().unwrap(), 1.0);
    }

    #[test]
    fn full_masses_are_partial() {
        let s = density_one_subset(&table(&[1.0; 50], 3), &[0.5, 0.5, 0.5]).unwrap();
        assert!(s.partial);
    }

    #[test]
    fn interval_masses() {
        let m = build_model(ModelSpec::Interval {
            length: 1.0,
            left: EdgeCondition::Dirichlet,
            right: EdgeCondition::Dirichlet,
        })
        .unwrap();
        let t = mass_table(&m, 20, &[0.5, 0.0], 7).unwrap();
        assert_eq!(t.rows.len(), 20);
        for (j, r) in t.rows.iter().enumerate() {
            assert!((r.masses[1] - 1.0).abs() < 1e-10);
            // odd modes put half the mass plus a node share on [1/2, 1]
            assert!((r.masses[0] - 0.5).abs() < 2.0 / (j + 1) as f64, "{j} {}", r.masses[0]);
        }
    }
}
