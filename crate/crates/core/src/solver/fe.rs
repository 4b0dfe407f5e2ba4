use crate::error::{Error, Result};
use crate::solver::demean::group_means;
use crate::solver::factor::FactorColumn;

/// Recovered fixed effects for the absorbed factors.
#[derive(Debug, Clone)]
pub struct FeRecovery {
    /// Per factor, one estimate per level.
    pub values: Vec<Vec<f64>>,
    /// Per factor, the connected-component id of each level (two-factor case;
    /// all zeros with one factor).
    pub component_of_level: Vec<Vec<u32>>,
    pub n_components: usize,
    pub backfit_iterations: usize,
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Connected components of the bipartite levels graph linked by observations.
/// Component ids are assigned by first appearance over factor-0 levels, then
/// factor-1 levels, so numbering is deterministic.
pub fn bipartite_components(f0: &FactorColumn, f1: &FactorColumn) -> (Vec<u32>, Vec<u32>, usize) {
    let n0 = f0.n_levels;
    let n1 = f1.n_levels;
    let mut uf = UnionFind::new(n0 + n1);
    for (l0, l1) in f0.level_of_row.iter().zip(&f1.level_of_row) {
        uf.union(*l0, n0 as u32 + l1);
    }
    let mut component_id = vec![u32::MAX; n0 + n1];
    let mut next = 0u32;
    let mut of = |uf: &mut UnionFind, node: u32, component_id: &mut Vec<u32>| -> u32 {
        let root = uf.find(node) as usize;
        if component_id[root] == u32::MAX {
            component_id[root] = next;
            next += 1;
        }
        component_id[root]
    };
    let comp0: Vec<u32> = (0..n0 as u32)
        .map(|l| of(&mut uf, l, &mut component_id))
        .collect();
    let comp1: Vec<u32> = (0..n1 as u32)
        .map(|l| of(&mut uf, n0 as u32 + l, &mut component_id))
        .collect();
    (comp0, comp1, next as usize)
}

/// Recovers fixed-effect values from the partial residual u = y - X*beta.
///
/// One factor: level means of u; fully identified. Two factors: backfitting,
/// then the level indeterminacy is resolved per connected component by
/// setting the observation-weighted mean of the second factor's effects to
/// zero, loading levels onto the first factor.
pub fn recover_fixed_effects(
    partial_residual: &[f64],
    factors: &[FactorColumn],
    tol: f64,
    max_iterations: usize,
) -> Result<FeRecovery> {
    match factors {
        [f] => {
            let values = group_means(partial_residual, f);
            Ok(FeRecovery {
                component_of_level: vec![vec![0; values.len()]],
                values: vec![values],
                n_components: 1,
                backfit_iterations: 0,
            })
        }
        [f0, f1] => {
            let (mut e0, mut e1, iterations) =
                crate::solver::demean::two_factor_solve(partial_residual, f0, f1, tol, max_iterations)?;

            let (comp0, comp1, n_components) = bipartite_components(f0, f1);
            // Observation-weighted mean of factor-1 effects, per component.
            let mut sums = vec![0.0f64; n_components];
            let mut counts = vec![0u64; n_components];
            for (&l0, &l1) in f0.level_of_row.iter().zip(&f1.level_of_row) {
                let c = comp0[l0 as usize] as usize;
                sums[c] += e1[l1 as usize];
                counts[c] += 1;
            }
            let shifts: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect();
            for (v, &c) in e1.iter_mut().zip(&comp1) {
                *v -= shifts[c as usize];
            }
            for (v, &c) in e0.iter_mut().zip(&comp0) {
                *v += shifts[c as usize];
            }
            Ok(FeRecovery {
                values: vec![e0, e1],
                component_of_level: vec![comp0, comp1],
                n_components,
                backfit_iterations: iterations,
            })
        }
        _ => Err(Error::Data(format!(
            "fixed-effect recovery supports 1 or 2 factors, got {}",
            factors.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factor(keys: &[u32]) -> FactorColumn {
        FactorColumn::from_keys("f", keys).0
    }

    #[test]
    fn one_factor_recovery_is_group_means() {
        let f = factor(&[1, 1, 2, 2]);
        let u = vec![1.0, 3.0, 10.0, 14.0];
        let rec = recover_fixed_effects(&u, &[f], 1e-10, 100).unwrap();
        assert_eq!(rec.values[0], vec![2.0, 12.0]);
        assert_eq!(rec.n_components, 1);
    }

    #[test]
    fn two_factor_recovery_matches_planted_effects() {
        // Connected design: czs {0,1}, firms {0,1,2}; firm effects have
        // observation-weighted mean zero by construction.
        let cz_keys = vec![0u32, 0, 0, 1, 1, 1];
        let firm_keys = vec![0u32, 1, 2, 0, 1, 2];
        let psi = [2.0, -1.0];
        let mu = [0.5, -0.25, -0.25];
        let u: Vec<f64> = cz_keys
            .iter()
            .zip(&firm_keys)
            .map(|(&c, &j)| psi[c as usize] + mu[j as usize])
            .collect();
        let rec = recover_fixed_effects(
            &u,
            &[factor(&cz_keys), factor(&firm_keys)],
            1e-12,
            10_000,
        )
        .unwrap();
        assert_eq!(rec.n_components, 1);
        for (got, want) in rec.values[0].iter().zip(&psi) {
            assert!((got - want).abs() < 1e-9, "psi {got} vs {want}");
        }
        for (got, want) in rec.values[1].iter().zip(&mu) {
            assert!((got - want).abs() < 1e-9, "mu {got} vs {want}");
        }
    }

    #[test]
    fn disconnected_graph_reports_two_components_and_normalizes_within_each() {
        let cz_keys = vec![0u32, 0, 1, 1];
        let firm_keys = vec![0u32, 0, 1, 1];
        let u = vec![3.0, 3.0, -5.0, -5.0];
        let rec = recover_fixed_effects(
            &u,
            &[factor(&cz_keys), factor(&firm_keys)],
            1e-12,
            10_000,
        )
        .unwrap();
        assert_eq!(rec.n_components, 2);
        // Firm effects are weighted-mean zero within each component.
        assert!(rec.values[1][0].abs() < 1e-12);
        assert!(rec.values[1][1].abs() < 1e-12);
        assert!((rec.values[0][0] - 3.0).abs() < 1e-10);
        assert!((rec.values[0][1] + 5.0).abs() < 1e-10);
        assert_eq!(rec.component_of_level[0], vec![0, 1]);
        assert_eq!(rec.component_of_level[1], vec![0, 1]);
    }
}
