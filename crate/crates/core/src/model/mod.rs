//! Domain types: probbase, prior, answers, block partition, letter codes.

mod answers;
mod distribution;
mod letter;
mod partition;
mod probbase;

pub use answers::{mask_block, Answer, AnswerMatrix};
pub use distribution::{CauseDistribution, Prior};
pub use letter::{decode_letter_probbase, LetterCodeTable};
pub use partition::BlockPartition;
pub(crate) use probbase::default_labels;
pub use probbase::{clamp_probbase, Probbase, DEFAULT_CLAMP};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cross-checks dimensions and labels of a full scoring input set.
pub fn validate_inputs<T: Scalar>(
    pb: &Probbase<T>,
    prior: &Prior<T>,
    answers: &AnswerMatrix,
    part: &BlockPartition,
) -> Result<()> {
    let s = pb.n_questions();
    if answers.n_questions() != s {
        return Err(Error::Dimension {
            what: "answer columns vs probbase columns",
            expected: s,
            found: answers.n_questions(),
        });
    }
    if part.n_questions() != s {
        return Err(Error::Dimension {
            what: "partition questions vs probbase columns",
            expected: s,
            found: part.n_questions(),
        });
    }
    if prior.len() != pb.n_causes() {
        return Err(Error::Dimension {
            what: "prior length vs probbase rows",
            expected: pb.n_causes(),
            found: prior.len(),
        });
    }
    for (k, (a, b)) in pb
        .question_labels()
        .iter()
        .zip(answers.question_labels())
        .enumerate()
    {
        if a != b {
            return Err(Error::Label {
                what: "answer question labels",
                index: k,
                expected: a.clone(),
                found: b.clone(),
            });
        }
    }
    for (j, (a, b)) in pb
        .cause_labels()
        .iter()
        .zip(prior.cause_labels())
        .enumerate()
    {
        if a != b {
            return Err(Error::Label {
                what: "prior cause labels",
                index: j,
                expected: a.clone(),
                found: b.clone(),
            });
        }
    }
    Ok(())
}
