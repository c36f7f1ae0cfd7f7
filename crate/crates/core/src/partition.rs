use crate::error::{Error, Result};

/// Partition of feature indices `0..p` into `m` disjoint, covering, nonempty
/// groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    p: usize,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupPartition {
    pub fn new(p: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidPartition("no groups".into()));
        }
        let mut group_of = vec![usize::MAX; p];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("group {g} is empty")));
            }
            for &i in members {
                if i >= p {
                    return Err(Error::InvalidPartition(format!(
                        "feature index {i} in group {g} is out of range for p = {p}"
                    )));
                }
                if group_of[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "feature {i} appears in groups {} and {g}",
                        group_of[i]
                    )));
                }
                group_of[i] = g;
            }
        }
        if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "feature {i} belongs to no group"
            )));
        }
        Ok(Self {
            p,
            groups,
            group_of,
        })
    }

    /// `m` consecutive groups of `size` features each.
    pub fn contiguous(m: usize, size: usize) -> Result<Self> {
        let groups = (0..m)
            .map(|g| (g * size..(g + 1) * size).collect())
            .collect();
        Self::new(m * size, groups)
    }

    /// Builds groups from one label per feature. Groups are ordered by first
    /// appearance of their label.
    pub fn from_labels<L: PartialEq>(labels: &[L]) -> Result<Self> {
        let mut seen: Vec<&L> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            match seen.iter().position(|l| *l == label) {
                Some(g) => groups[g].push(i),
                None => {
                    seen.push(label);
                    groups.push(vec![i]);
                }
            }
        }
        Self::new(labels.len(), groups)
    }

    pub fn singletons(p: usize) -> Result<Self> {
        Self::contiguous(p, 1)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn group_of(&self, feature: usize) -> usize {
        self.group_of[feature]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_layout() {
        let part = GroupPartition::contiguous(3, 2).unwrap();
        assert_eq!(part.p(), 6);
        assert_eq!(part.group(1), &[2, 3]);
        assert_eq!(part.group_of(5), 2);
    }

    #[test]
    fn rejects_overlap_gap_and_range() {
        assert!(GroupPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(GroupPartition::new(3, vec![vec![0, 1]]).is_err());
        assert!(GroupPartition::new(2, vec![vec![0, 1, 2]]).is_err());
        assert!(GroupPartition::new(2, vec![vec![0, 1], vec![]]).is_err());
    }

    #[test]
    fn labels_in_first_appearance_order() {
        let part = GroupPartition::from_labels(&["b", "a", "b", "c"]).unwrap();
        assert_eq!(part.groups(), &[vec![0, 2], vec![1], vec![3]]);
    }
}
