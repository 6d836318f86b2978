//! Register layout: which qubit index plays which role.

use crate::error::{Result, SimError};

/// Maps logical roles (system site, per-site ancilla, extra ancilla) to qubit
/// indices. The role lists are disjoint and together cover the register
/// 0..total exactly; every site carries the same number of ancillas.
#[derive(Clone, Debug)]
pub struct RegisterLayout {
    system_sites: Vec<usize>,
    site_ancillas: Vec<Vec<usize>>,
    extra_ancillas: Vec<usize>,
}

impl RegisterLayout {
    pub fn new(
        system_sites: Vec<usize>,
        site_ancillas: Vec<Vec<usize>>,
        extra_ancillas: Vec<usize>,
    ) -> Result<Self> {
        if system_sites.is_empty() {
            return Err(SimError::BadLayout("no system sites".into()));
        }
        if site_ancillas.len() != system_sites.len() {
            return Err(SimError::BadLayout(format!(
                "{} ancilla lists for {} sites",
                site_ancillas.len(),
                system_sites.len()
            )));
        }
        let per_site = site_ancillas[0].len();
        if site_ancillas.iter().any(|a| a.len() != per_site) {
            return Err(SimError::BadLayout(
                "site ancilla counts are not uniform".into(),
            ));
        }
        let total = system_sites.len()
            + site_ancillas.iter().map(Vec::len).sum::<usize>()
            + extra_ancillas.len();
        let mut seen = vec![false; total];
        let mut mark = |q: usize| -> Result<()> {
            if q >= total {
                return Err(SimError::BadLayout(format!(
                    "index {q} outside register of {total} qubits"
                )));
            }
            if seen[q] {
                return Err(SimError::BadLayout(format!("index {q} assigned twice")));
            }
            seen[q] = true;
            Ok(())
        };
        for &q in &system_sites {
            mark(q)?;
        }
        for list in &site_ancillas {
            for &q in list {
                mark(q)?;
            }
        }
        for &q in &extra_ancillas {
            mark(q)?;
        }
        Ok(Self {
            system_sites,
            site_ancillas,
            extra_ancillas,
        })
    }

    /// Canonical layout: sites first, then per-site ancillas grouped by site,
    /// then extra ancillas at the top.
    pub fn contiguous(n_sites: usize, ancillas_per_site: usize, extra: usize) -> Self {
        let system_sites: Vec<usize> = (0..n_sites).collect();
        let site_ancillas: Vec<Vec<usize>> = (0..n_sites)
            .map(|s| {
                (0..ancillas_per_site)
                    .map(|k| n_sites + s * ancillas_per_site + k)
                    .collect()
            })
            .collect();
        let base = n_sites * (1 + ancillas_per_site);
        let extra_ancillas: Vec<usize> = (base..base + extra).collect();
        Self {
            system_sites,
            site_ancillas,
            extra_ancillas,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.system_sites.len()
    }

    pub fn ancillas_per_site(&self) -> usize {
        self.site_ancillas[0].len()
    }

    pub fn total_qubits(&self) -> usize {
        self.system_sites.len()
            + self.site_ancillas.iter().map(Vec::len).sum::<usize>()
            + self.extra_ancillas.len()
    }

    pub fn system_sites(&self) -> &[usize] {
        &self.system_sites
    }

    pub fn site(&self, j: usize) -> usize {
        self.system_sites[j]
    }

    pub fn site_ancilla(&self, site: usize, k: usize) -> usize {
        self.site_ancillas[site][k]
    }

    pub fn extra_ancillas(&self) -> &[usize] {
        &self.extra_ancillas
    }
}
