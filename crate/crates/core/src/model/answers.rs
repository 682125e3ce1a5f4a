use std::fmt;

use crate::error::{Error, Result};

use super::BlockPartition;

/// One questionnaire cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Answer {
    No,
    Yes,
    Missing,
}

impl Answer {
    #[inline]
    pub fn is_observed(self) -> bool {
        !matches!(self, Answer::Missing)
    }

    #[inline]
    pub fn is_yes(self) -> bool {
        matches!(self, Answer::Yes)
    }

    /// Parses a file cell: `1`, `0`, `NA` (any case) or the empty string.
    pub fn parse(cell: &str) -> Option<Answer> {
        let t = cell.trim();
        match t {
            "1" => Some(Answer::Yes),
            "0" => Some(Answer::No),
            "" => Some(Answer::Missing),
            _ if t.eq_ignore_ascii_case("na") => Some(Answer::Missing),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "1",
            Answer::No => "0",
            Answer::Missing => "NA",
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `n x s` table of interview answers, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerMatrix {
    values: Vec<Answer>,
    n_rows: usize,
    question_labels: Vec<String>,
}

impl AnswerMatrix {
    pub fn new(question_labels: Vec<String>, rows: Vec<Vec<Answer>>) -> Result<Self> {
        let s = question_labels.len();
        if s == 0 {
            return Err(Error::Dimension {
                what: "answer columns",
                expected: 1,
                found: 0,
            });
        }
        if rows.is_empty() {
            return Err(Error::Dimension {
                what: "answer rows",
                expected: 1,
                found: 0,
            });
        }
        let mut values = Vec::with_capacity(rows.len() * s);
        for row in &rows {
            if row.len() != s {
                return Err(Error::Dimension {
                    what: "answer row length",
                    expected: s,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            values,
            n_rows: rows.len(),
            question_labels,
        })
    }

    /// Builds from a flat row-major buffer.
    pub fn from_flat(question_labels: Vec<String>, values: Vec<Answer>) -> Result<Self> {
        let s = question_labels.len();
        if s == 0 || values.is_empty() || !values.len().is_multiple_of(s) {
            return Err(Error::Dimension {
                what: "answer cells",
                expected: s.max(1),
                found: values.len(),
            });
        }
        Ok(Self {
            n_rows: values.len() / s,
            values,
            question_labels,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_questions(&self) -> usize {
        self.question_labels.len()
    }

    pub fn question_labels(&self) -> &[String] {
        &self.question_labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Answer] {
        let s = self.n_questions();
        &self.values[i * s..(i + 1) * s]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> Answer {
        self.values[i * self.n_questions() + k]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[Answer]> + '_ {
        self.values.chunks_exact(self.n_questions())
    }

    pub fn as_flat(&self) -> &[Answer] {
        &self.values
    }

    /// Keeps only the listed rows, in the given order (duplicates allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.n_questions());
        for &i in idx {
            if i >= self.n_rows {
                return Err(Error::Index {
                    what: "answer rows",
                    index: i,
                    len: self.n_rows,
                });
            }
            values.extend_from_slice(self.row(i));
        }
        Self::from_flat(self.question_labels.clone(), values)
    }

    pub fn count_observed(&self) -> usize {
        self.values.iter().filter(|a| a.is_observed()).count()
    }
}

/// Returns a copy of `answers` with every column of block `block` set to missing.
pub fn mask_block(
    answers: &AnswerMatrix,
    part: &BlockPartition,
    block: usize,
) -> Result<AnswerMatrix> {
    let cols = part.block(block)?;
    if part.n_questions() != answers.n_questions() {
        return Err(Error::Dimension {
            what: "partition questions",
            expected: answers.n_questions(),
            found: part.n_questions(),
        });
    }
    let mut out = answers.clone();
    let s = out.n_questions();
    for row in out.values.chunks_exact_mut(s) {
        for &k in cols {
            row[k] = Answer::Missing;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Answer::*;

    fn labels(s: usize) -> Vec<String> {
        (0..s).map(|k| format!("q{k}")).collect()
    }

    #[test]
    fn parse_cells() {
        assert_eq!(Answer::parse("1"), Some(Yes));
        assert_eq!(Answer::parse("0"), Some(No));
        assert_eq!(Answer::parse(""), Some(Missing));
        assert_eq!(Answer::parse("na"), Some(Missing));
        assert_eq!(Answer::parse(" NA "), Some(Missing));
        assert_eq!(Answer::parse("Na"), Some(Missing));
        assert_eq!(Answer::parse("2"), None);
        assert_eq!(Answer::parse("yes"), None);
    }

    #[test]
    fn mask_first_block() {
        let a = AnswerMatrix::new(labels(4), vec![vec![Yes, No, Yes, Missing]]).unwrap();
        let part = BlockPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let m = mask_block(&a, &part, 0).unwrap();
        assert_eq!(m.row(0), &[Missing, Missing, Yes, Missing]);
    }

    #[test]
    fn mask_already_missing_block_is_noop() {
        let a = AnswerMatrix::new(labels(4), vec![vec![Missing, Missing, Yes, No]]).unwrap();
        let part = BlockPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(mask_block(&a, &part, 0).unwrap(), a);
    }

    #[test]
    fn masking_every_block_gives_all_missing() {
        let a =
            AnswerMatrix::new(labels(5), vec![vec![Yes, No, Yes, No, Yes], vec![No; 5]]).unwrap();
        let part = BlockPartition::new(5, vec![vec![0, 3], vec![1], vec![2, 4]]).unwrap();
        let mut m = a.clone();
        for l in 0..part.n_blocks() {
            m = mask_block(&m, &part, l).unwrap();
        }
        assert!(m.as_flat().iter().all(|&x| x == Missing));
    }

    #[test]
    fn mask_out_of_range_block() {
        let a = AnswerMatrix::new(labels(2), vec![vec![Yes, No]]).unwrap();
        let part = BlockPartition::singletons(2);
        assert!(matches!(mask_block(&a, &part, 2), Err(Error::Index { .. })));
    }

    #[test]
    fn ragged_rows_rejected() {
        let e = AnswerMatrix::new(labels(3), vec![vec![Yes, No, No], vec![Yes]]).unwrap_err();
        assert!(matches!(e, Error::Dimension { .. }));
    }
}
