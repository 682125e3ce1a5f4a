use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Probbase;

/// Lookup from qualitative probbase codes (`A+`, `A`, ... ) to probabilities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LetterCodeTable {
    codes: BTreeMap<String, f64>,
}

impl LetterCodeTable {
    pub fn new(pairs: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut codes = BTreeMap::new();
        for (code, v) in pairs {
            let code = code.trim().to_string();
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Parameter(format!(
                    "letter code `{code}` maps to {v}, outside (0, 1)"
                )));
            }
            if codes.insert(code.clone(), v).is_some() {
                return Err(Error::Parameter(format!(
                    "letter code `{code}` defined twice"
                )));
            }
        }
        Ok(Self { codes })
    }

    pub fn get(&self, code: &str) -> Option<f64> {
        self.codes.get(code.trim()).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.codes.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// Substitutes every code of an `r x s` table through `table`.
pub fn decode_letter_probbase<T: Scalar>(
    cause_labels: Vec<String>,
    question_labels: Vec<String>,
    codes: &[Vec<String>],
    table: &LetterCodeTable,
) -> Result<Probbase<T>> {
    let s = question_labels.len();
    if codes.len() != cause_labels.len() {
        return Err(Error::Dimension {
            what: "letter-code rows",
            expected: cause_labels.len(),
            found: codes.len(),
        });
    }
    let mut values = Vec::with_capacity(codes.len() * s);
    for (j, row) in codes.iter().enumerate() {
        if row.len() != s {
            return Err(Error::Dimension {
                what: "letter-code row length",
                expected: s,
                found: row.len(),
            });
        }
        for (k, code) in row.iter().enumerate() {
            let v = table.get(code).ok_or_else(|| Error::UnknownCode {
                code: code.clone(),
                row: j,
                col: k,
            })?;
            values.push(T::lit(v));
        }
    }
    Probbase::new(cause_labels, question_labels, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> LetterCodeTable {
        LetterCodeTable::new([
            ("A".to_string(), 0.8),
            ("B".to_string(), 0.1),
            ("C+".to_string(), 0.01),
        ])
        .unwrap()
    }

    #[test]
    fn single_lookup() {
        let pb: Probbase<f64> = decode_letter_probbase(
            vec!["c".into()],
            vec!["q".into()],
            &[vec!["A".into()]],
            &table(),
        )
        .unwrap();
        assert_eq!(pb.get(0, 0), 0.8);
    }

    #[test]
    fn unknown_code_names_cell() {
        let codes = vec![
            vec!["A".to_string(), "B".to_string()],
            vec!["Z".to_string(), "A".to_string()],
        ];
        let e = decode_letter_probbase::<f64>(
            vec!["c1".into(), "c2".into()],
            vec!["q1".into(), "q2".into()],
            &codes,
            &table(),
        )
        .unwrap_err();
        assert!(
            matches!(e, Error::UnknownCode { row: 1, col: 0, .. }),
            "{e}"
        );
    }

    #[test]
    fn full_table_matches_elementwise_lookup() {
        let t = table();
        let codes = vec![
            vec!["A".to_string(), "C+".to_string()],
            vec!["B".to_string(), "A".to_string()],
        ];
        let pb: Probbase<f64> = decode_letter_probbase(
            vec!["c1".into(), "c2".into()],
            vec!["q1".into(), "q2".into()],
            &codes,
            &t,
        )
        .unwrap();
        // Oracle: look each cell up independently.
        for j in 0..2 {
            for k in 0..2 {
                let expected = t.iter().find(|(c, _)| *c == codes[j][k]).unwrap().1;
                assert_eq!(pb.get(j, k), expected);
            }
        }
        assert_eq!(pb.cause_labels(), &["c1", "c2"]);
    }

    #[test]
    fn table_rejects_boundary_and_duplicates() {
        assert!(LetterCodeTable::new([("I".to_string(), 1.0)]).is_err());
        assert!(LetterCodeTable::new([("A".to_string(), 0.5), ("A".to_string(), 0.4)]).is_err());
    }
}
