use std::collections::BTreeMap;
use std::fmt::Display;

/// A categorical column encoded as dense level ids, with a CSR layout
/// (rows grouped by level, ascending within each level) so group sums are
/// deterministic regardless of how groups are scheduled.
#[derive(Debug, Clone)]
pub struct FactorColumn {
    pub name: String,
    pub n_levels: usize,
    pub level_of_row: Vec<u32>,
    pub labels: Vec<String>,
    pub level_offsets: Vec<u32>,
    pub rows_by_level: Vec<u32>,
}

impl FactorColumn {
    /// Builds the factor from per-row keys. Levels are numbered in sorted key
    /// order; the sorted keys are returned so callers can map level ids back
    /// to domain values.
    pub fn from_keys<K: Ord + Clone + Display>(name: &str, keys: &[K]) -> (Self, Vec<K>) {
        let mut level_ids: BTreeMap<&K, u32> = BTreeMap::new();
        for key in keys {
            let next = level_ids.len() as u32;
            level_ids.entry(key).or_insert(next);
        }
        // BTreeMap insertion order is not sorted-key order; renumber.
        let sorted_keys: Vec<K> = level_ids.keys().map(|&k| k.clone()).collect();
        let remap: BTreeMap<&K, u32> = sorted_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k, i as u32))
            .collect();
        let level_of_row: Vec<u32> = keys.iter().map(|k| remap[k]).collect();
        let n_levels = sorted_keys.len();

        let mut counts = vec![0u32; n_levels];
        for &l in &level_of_row {
            counts[l as usize] += 1;
        }
        let mut level_offsets = vec![0u32; n_levels + 1];
        for l in 0..n_levels {
            level_offsets[l + 1] = level_offsets[l] + counts[l];
        }
        let mut cursor = level_offsets.clone();
        let mut rows_by_level = vec![0u32; keys.len()];
        for (row, &l) in level_of_row.iter().enumerate() {
            rows_by_level[cursor[l as usize] as usize] = row as u32;
            cursor[l as usize] += 1;
        }

        let labels = sorted_keys.iter().map(|k| k.to_string()).collect();
        (
            FactorColumn {
                name: name.to_string(),
                n_levels,
                level_of_row,
                labels,
                level_offsets,
                rows_by_level,
            },
            sorted_keys,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.level_of_row.len()
    }

    pub fn rows_of_level(&self, level: usize) -> &[u32] {
        let lo = self.level_offsets[level] as usize;
        let hi = self.level_offsets[level + 1] as usize;
        &self.rows_by_level[lo..hi]
    }

    pub fn level_size(&self, level: usize) -> usize {
        (self.level_offsets[level + 1] - self.level_offsets[level]) as usize
    }

    pub fn singleton_count(&self) -> usize {
        (0..self.n_levels).filter(|&l| self.level_size(l) == 1).count()
    }
}
