use crate::error::{Error, Result};

/// Disjoint cover of the question indices `0..s` by nonempty blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    block_ids: Vec<String>,
}

impl BlockPartition {
    /// Blocks are named `1..=b` in the given order.
    pub fn new(n_questions: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let ids = (1..=blocks.len()).map(|i| i.to_string()).collect();
        Self::with_ids(n_questions, blocks, ids)
    }

    pub fn with_ids(
        n_questions: usize,
        blocks: Vec<Vec<usize>>,
        block_ids: Vec<String>,
    ) -> Result<Self> {
        if block_ids.len() != blocks.len() {
            return Err(Error::Dimension {
                what: "block ids",
                expected: blocks.len(),
                found: block_ids.len(),
            });
        }
        let mut block_of = vec![usize::MAX; n_questions];
        for (l, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::Partition(format!(
                    "block {} (`{}`) is empty",
                    l, block_ids[l]
                )));
            }
            for &k in block {
                if k >= n_questions {
                    return Err(Error::Partition(format!(
                        "block {l} contains question index {k}, but there are only {n_questions} questions"
                    )));
                }
                if block_of[k] != usize::MAX {
                    return Err(Error::Partition(format!(
                        "question index {k} appears in blocks {} and {l}",
                        block_of[k]
                    )));
                }
                block_of[k] = l;
            }
        }
        if let Some(k) = block_of.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Partition(format!(
                "question index {k} is not covered by any block"
            )));
        }
        Ok(Self {
            blocks,
            block_of,
            block_ids,
        })
    }

    /// Builds from a per-question block assignment; blocks are numbered by first appearance.
    pub fn from_assignment(assign: &[usize]) -> Result<Self> {
        let mut remap: Vec<Option<usize>> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (k, &a) in assign.iter().enumerate() {
            if a >= remap.len() {
                remap.resize(a + 1, None);
            }
            let l = *remap[a].get_or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[l].push(k);
        }
        Self::new(assign.len(), blocks)
    }

    pub fn singletons(n_questions: usize) -> Self {
        Self::new(n_questions, (0..n_questions).map(|k| vec![k]).collect())
            .expect("singletons are valid")
    }

    /// Consecutive blocks of (nearly) equal size.
    pub fn contiguous(n_questions: usize, n_blocks: usize) -> Result<Self> {
        if n_blocks == 0 || n_blocks > n_questions {
            return Err(Error::Parameter(format!(
                "cannot split {n_questions} questions into {n_blocks} blocks"
            )));
        }
        let assign: Vec<usize> = (0..n_questions)
            .map(|k| k * n_blocks / n_questions)
            .collect();
        Self::from_assignment(&assign)
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    #[inline]
    pub fn n_questions(&self) -> usize {
        self.block_of.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> Result<&[usize]> {
        self.blocks.get(l).map(Vec::as_slice).ok_or(Error::Index {
            what: "blocks",
            index: l,
            len: self.blocks.len(),
        })
    }

    #[inline]
    pub fn block_of(&self, k: usize) -> usize {
        self.block_of[k]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.block_of
    }

    pub fn block_ids(&self) -> &[String] {
        &self.block_ids
    }

    /// Canonical form: blocks sorted internally and ordered by smallest member.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut b: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|v| {
                let mut v = v.clone();
                v.sort_unstable();
                v
            })
            .collect();
        b.sort();
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_index_is_coverage_error() {
        let e = BlockPartition::new(4, vec![vec![0, 1], vec![2]]).unwrap_err();
        assert!(e.to_string().contains("index 3"), "{e}");
    }

    #[test]
    fn overlap_rejected() {
        assert!(BlockPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn empty_block_rejected() {
        assert!(BlockPartition::new(2, vec![vec![0, 1], vec![]]).is_err());
    }

    #[test]
    fn assignment_roundtrip() {
        let p = BlockPartition::from_assignment(&[2, 0, 2, 1]).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 2], vec![1], vec![3]]);
        assert_eq!(p.block_of(2), 0);
        assert_eq!(p.block_of(3), 2);
    }

    #[test]
    fn contiguous_split() {
        let p = BlockPartition::contiguous(60, 12).unwrap();
        assert_eq!(p.n_blocks(), 12);
        assert!(p.blocks().iter().all(|b| b.len() == 5));
    }
}
