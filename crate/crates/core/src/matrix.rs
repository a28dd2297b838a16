use serde::{Deserialize, Serialize};

/// Sparse set of `(user, item)` selections stored as sorted per-user rows.
///
/// Used both for the input selection matrix and for recommendation output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMatrix {
    n_items: usize,
    rows: Vec<Vec<u32>>,
}

impl BinaryMatrix {
    pub fn new(n_users: usize, n_items: usize) -> Self {
        BinaryMatrix {
            n_items,
            rows: vec![Vec::new(); n_users],
        }
    }

    /// Builds a matrix from arbitrary `(user, item)` pairs; duplicates collapse.
    pub fn from_pairs<I>(n_users: usize, n_items: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut m = BinaryMatrix::new(n_users, n_items);
        for (u, i) in pairs {
            assert!(u < n_users && i < n_items, "entry ({u}, {i}) out of bounds");
            m.rows[u].push(i as u32);
        }
        for row in &mut m.rows {
            row.sort_unstable();
            row.dedup();
        }
        m
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// Items selected by `user`, ascending.
    pub fn row(&self, user: usize) -> &[u32] {
        &self.rows[user]
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.rows[user].binary_search(&(item as u32)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&i| (u, i as usize)))
    }

    /// Number of users selecting each item.
    pub fn item_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_items];
        for row in &self.rows {
            for &i in row {
                counts[i as usize] += 1;
            }
        }
        counts
    }

    /// Per-item lists of selecting users, ascending.
    pub fn transpose_rows(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n_items];
        for (u, row) in self.rows.iter().enumerate() {
            for &i in row {
                cols[i as usize].push(u as u32);
            }
        }
        cols
    }
}
