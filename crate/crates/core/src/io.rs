//! CSV readers and writers for every file schema the tools exchange.
//!
//! Numbers are written in the shortest form that parses back to the same
//! value. Readers never clamp; callers decide when to.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{AuditReport, Difference, RocPoint, Sign};
use crate::error::{Error, Result};
use crate::model::{Answer, AnswerMatrix, BlockPartition, LetterCodeTable, Prior, Probbase};
use crate::optimize::TraceStep;
use crate::scalar::Scalar;
use crate::simulate::{CovarianceModel, Demographic};

/// Shortest round-trip text for `v`, switching to exponent form for very
/// small or large magnitudes.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    /// `(line, cells)` for every data row.
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(file);
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let cells: Vec<String> = rec.iter().map(|c| c.trim().to_string()).collect();
            if cells.len() == 1 && cells[0].is_empty() {
                continue;
            }
            records.push((line, cells));
        }
        let mut it = records.into_iter();
        let (_, header) = it.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "empty file".into(),
        })?;
        let rows: Vec<(usize, Vec<String>)> = it.collect();
        let t = Self {
            path: path.to_path_buf(),
            header,
            rows,
        };
        for (line, cells) in &t.rows {
            if cells.len() != t.header.len() {
                return Err(t.err(
                    *line,
                    format!("expected {} fields, found {}", t.header.len(), cells.len()),
                ));
            }
        }
        Ok(t)
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn expect_header(&self, names: &[&str]) -> Result<()> {
        if self.header.len() != names.len()
            || self
                .header
                .iter()
                .zip(names)
                .any(|(a, b)| !a.eq_ignore_ascii_case(b))
        {
            return Err(self.err(1, format!("expected header `{}`", names.join(","))));
        }
        Ok(())
    }

    fn number<T: Scalar>(&self, line: usize, cell: &str) -> Result<T> {
        cell.parse::<T>()
            .map_err(|_| self.err(line, format!("`{cell}` is not a number")))
    }

    fn unique(&self, labels: &[String], what: &str, lines: impl Fn(usize) -> usize) -> Result<()> {
        let mut seen = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(self.err(lines(i), format!("empty {what} label")));
            }
            if let Some(first) = seen.insert(l.as_str(), i) {
                return Err(self.err(
                    lines(i),
                    format!("duplicate {what} label `{l}` (first at position {first})"),
                ));
            }
        }
        Ok(())
    }
}

struct Out {
    path: PathBuf,
    w: csv::Writer<File>,
}

impl Out {
    fn create(path: &Path) -> Result<Self> {
        let w = csv::Writer::from_path(path).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            w,
        })
    }

    fn row<I, S>(&mut self, cells: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(cells).map_err(|source| Error::Csv {
            path: self.path.clone(),
            source,
        })
    }

    fn serialize<R: Serialize>(&mut self, rec: &R) -> Result<()> {
        self.w.serialize(rec).map_err(|source| Error::Csv {
            path: self.path.clone(),
            source,
        })
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }
}

/// Header of question labels after a leading label column, then one row per cause.
fn read_labelled_grid(path: &Path) -> Result<(Table, Vec<String>, Vec<String>)> {
    let t = Table::read(path)?;
    if t.header.len() < 2 {
        return Err(t.err(1, "header needs a label column and at least one question"));
    }
    let questions: Vec<String> = t.header[1..].to_vec();
    t.unique(&questions, "question", |_| 1)?;
    let causes: Vec<String> = t.rows.iter().map(|(_, c)| c[0].clone()).collect();
    t.unique(&causes, "cause", |i| t.rows[i].0)?;
    if causes.is_empty() {
        return Err(t.err(1, "no cause rows"));
    }
    Ok((t, causes, questions))
}

pub fn read_probbase<T: Scalar>(path: &Path) -> Result<Probbase<T>> {
    let (t, causes, questions) = read_labelled_grid(path)?;
    let mut values = Vec::with_capacity(causes.len() * questions.len());
    for (line, cells) in &t.rows {
        for cell in &cells[1..] {
            let v: T = t.number(*line, cell)?;
            if !(v >= T::zero() && v <= T::one()) {
                return Err(t.err(*line, format!("probability {cell} outside [0, 1]")));
            }
            values.push(v);
        }
    }
    Probbase::new(causes, questions, values)
}

pub fn write_probbase<T: Scalar>(path: &Path, pb: &Probbase<T>) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(std::iter::once("cause").chain(pb.question_labels().iter().map(String::as_str)))?;
    for (j, label) in pb.cause_labels().iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(pb.row(j).iter().map(|v| format_number(v.as_f64())));
        out.row(&row)?;
    }
    out.finish()
}

/// Two columns, `code,value`.
pub fn read_letter_table(path: &Path) -> Result<LetterCodeTable> {
    let t = Table::read(path)?;
    t.expect_header(&["code", "value"])?;
    let mut pairs = Vec::new();
    for (line, cells) in &t.rows {
        pairs.push((cells[0].clone(), t.number::<f64>(*line, &cells[1])?));
    }
    LetterCodeTable::new(pairs)
}

pub fn write_letter_table(path: &Path, table: &LetterCodeTable) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(["code", "value"])?;
    for (code, v) in table.iter() {
        out.row([code.to_string(), format_number(v)])?;
    }
    out.finish()
}

/// Probbase grid whose cells are letter codes.
pub fn read_letter_probbase<T: Scalar>(
    path: &Path,
    table: &LetterCodeTable,
) -> Result<Probbase<T>> {
    let (t, causes, questions) = read_labelled_grid(path)?;
    let codes: Vec<Vec<String>> = t.rows.iter().map(|(_, c)| c[1..].to_vec()).collect();
    crate::model::decode_letter_probbase(causes, questions, &codes, table)
}

pub fn read_answers(path: &Path) -> Result<AnswerMatrix> {
    let t = Table::read(path)?;
    t.unique(&t.header, "question", |_| 1)?;
    if t.rows.is_empty() {
        return Err(t.err(1, "no interview rows"));
    }
    let mut values = Vec::with_capacity(t.rows.len() * t.header.len());
    for (line, cells) in &t.rows {
        for (k, cell) in cells.iter().enumerate() {
            let a = Answer::parse(cell).ok_or_else(|| {
                t.err(
                    *line,
                    format!("answer `{cell}` for `{}` is not 1, 0 or NA", t.header[k]),
                )
            })?;
            values.push(a);
        }
    }
    AnswerMatrix::from_flat(t.header.clone(), values)
}

pub fn write_answers(path: &Path, answers: &AnswerMatrix) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(answers.question_labels())?;
    for row in answers.rows() {
        out.row(row.iter().map(|a| a.as_str()))?;
    }
    out.finish()
}

/// Two columns, `question,block`; blocks are numbered by first appearance.
pub fn read_partition(path: &Path, question_labels: &[String]) -> Result<BlockPartition> {
    let t = Table::read(path)?;
    t.expect_header(&["question", "block"])?;
    let index: HashMap<&str, usize> = question_labels
        .iter()
        .enumerate()
        .map(|(i, q)| (q.as_str(), i))
        .collect();
    let mut ids: Vec<String> = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![false; question_labels.len()];
    for (line, cells) in &t.rows {
        let k = *index
            .get(cells[0].as_str())
            .ok_or_else(|| t.err(*line, format!("unknown question `{}`", cells[0])))?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(t.err(*line, format!("question `{}` listed twice", cells[0])));
        }
        let l = match ids.iter().position(|b| b == &cells[1]) {
            Some(l) => l,
            None => {
                ids.push(cells[1].clone());
                blocks.push(Vec::new());
                ids.len() - 1
            }
        };
        blocks[l].push(k);
    }
    BlockPartition::with_ids(question_labels.len(), blocks, ids)
}

pub fn write_partition(
    path: &Path,
    part: &BlockPartition,
    question_labels: &[String],
) -> Result<()> {
    if question_labels.len() != part.n_questions() {
        return Err(Error::Dimension {
            what: "partition labels",
            expected: part.n_questions(),
            found: question_labels.len(),
        });
    }
    let mut out = Out::create(path)?;
    out.row(["question", "block"])?;
    for (l, block) in part.blocks().iter().enumerate() {
        for &k in block {
            out.row([question_labels[k].as_str(), part.block_ids()[l].as_str()])?;
        }
    }
    out.finish()
}

/// Two columns, `cause,prior`.
pub fn read_prior<T: Scalar>(path: &Path) -> Result<Prior<T>> {
    let t = Table::read(path)?;
    t.expect_header(&["cause", "prior"])?;
    let labels: Vec<String> = t.rows.iter().map(|(_, c)| c[0].clone()).collect();
    t.unique(&labels, "cause", |i| t.rows[i].0)?;
    let mut probs = Vec::with_capacity(labels.len());
    for (line, cells) in &t.rows {
        probs.push(t.number::<T>(*line, &cells[1])?);
    }
    Prior::new(labels, probs)
}

pub fn write_prior<T: Scalar>(path: &Path, prior: &Prior<T>) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(["cause", "prior"])?;
    for (label, p) in prior.cause_labels().iter().zip(prior.probs()) {
        out.row([label.clone(), format_number(p.as_f64())])?;
    }
    out.finish()
}

/// Long format `cause,block,row,col,value`, one line per matrix cell.
pub fn read_covariance(
    path: &Path,
    cause_labels: &[String],
    question_labels: &[String],
    part: &BlockPartition,
) -> Result<CovarianceModel> {
    let t = Table::read(path)?;
    t.expect_header(&["cause", "block", "row", "col", "value"])?;
    let nb = part.n_blocks();
    let cause_ix: HashMap<&str, usize> = cause_labels
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let block_ix: HashMap<&str, usize> = part
        .block_ids()
        .iter()
        .enumerate()
        .map(|(i, b)| (b.as_str(), i))
        .collect();
    let q_ix: HashMap<&str, usize> = question_labels
        .iter()
        .enumerate()
        .map(|(i, q)| (q.as_str(), i))
        .collect();
    let pos_in_block: Vec<usize> = {
        let mut p = vec![0; part.n_questions()];
        for block in part.blocks() {
            for (a, &k) in block.iter().enumerate() {
                p[k] = a;
            }
        }
        p
    };
    let mut mats: Vec<Vec<Option<f64>>> = (0..cause_labels.len() * nb)
        .map(|idx| vec![None; part.blocks()[idx % nb].len().pow(2)])
        .collect();
    for (line, c) in &t.rows {
        let lookup = |map: &HashMap<&str, usize>, key: &str, what: &str| {
            map.get(key)
                .copied()
                .ok_or_else(|| t.err(*line, format!("unknown {what} `{key}`")))
        };
        let j = lookup(&cause_ix, &c[0], "cause")?;
        let l = lookup(&block_ix, &c[1], "block")?;
        let (ka, kb) = (
            lookup(&q_ix, &c[2], "question")?,
            lookup(&q_ix, &c[3], "question")?,
        );
        if part.block_of(ka) != l || part.block_of(kb) != l {
            return Err(t.err(
                *line,
                format!(
                    "questions `{}`, `{}` are not both in block `{}`",
                    c[2], c[3], c[1]
                ),
            ));
        }
        let m = part.blocks()[l].len();
        let cell = &mut mats[j * nb + l][pos_in_block[ka] * m + pos_in_block[kb]];
        if cell.replace(t.number(*line, &c[4])?).is_some() {
            return Err(t.err(*line, "cell given twice"));
        }
    }
    let mut full = Vec::with_capacity(mats.len());
    for (idx, m) in mats.into_iter().enumerate() {
        let filled: Option<Vec<f64>> = m.into_iter().collect();
        full.push(filled.ok_or_else(|| {
            t.err(
                0,
                format!(
                    "incomplete matrix for cause `{}` block `{}`",
                    cause_labels[idx / nb],
                    part.block_ids()[idx % nb]
                ),
            )
        })?);
    }
    CovarianceModel::from_matrices(cause_labels.len(), part, full)
}

pub fn write_covariance(
    path: &Path,
    model: &CovarianceModel,
    cause_labels: &[String],
    question_labels: &[String],
    part: &BlockPartition,
) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(["cause", "block", "row", "col", "value"])?;
    for (j, cause) in cause_labels.iter().enumerate() {
        for (l, block) in part.blocks().iter().enumerate() {
            let m = block.len();
            let mat = model.matrix(j, l);
            for (a, &ka) in block.iter().enumerate() {
                for (b, &kb) in block.iter().enumerate() {
                    out.row([
                        cause.as_str(),
                        part.block_ids()[l].as_str(),
                        question_labels[ka].as_str(),
                        question_labels[kb].as_str(),
                        &format_number(mat[a * m + b]),
                    ])?;
                }
            }
        }
    }
    out.finish()
}

/// Hidden labels: `interview,cause`.
pub fn read_causes(path: &Path, cause_labels: &[String]) -> Result<Vec<usize>> {
    let t = Table::read(path)?;
    t.expect_header(&["interview", "cause"])?;
    let ix: HashMap<&str, usize> = cause_labels
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    t.rows
        .iter()
        .enumerate()
        .map(|(i, (line, c))| {
            if c[0] != i.to_string() {
                return Err(t.err(*line, format!("expected interview {i}, found `{}`", c[0])));
            }
            ix.get(c[1].as_str())
                .copied()
                .ok_or_else(|| t.err(*line, format!("unknown cause `{}`", c[1])))
        })
        .collect()
}

/// Hidden labels without a known label list; labels are numbered in order
/// of first appearance.
pub fn read_causes_unlabelled(path: &Path) -> Result<(Vec<String>, Vec<usize>)> {
    let t = Table::read(path)?;
    t.expect_header(&["interview", "cause"])?;
    let mut labels: Vec<String> = Vec::new();
    let mut ix: HashMap<String, usize> = HashMap::new();
    let mut causes = Vec::with_capacity(t.rows.len());
    for (i, (line, c)) in t.rows.iter().enumerate() {
        if c[0] != i.to_string() {
            return Err(t.err(*line, format!("expected interview {i}, found `{}`", c[0])));
        }
        let next = labels.len();
        let j = *ix.entry(c[1].clone()).or_insert(next);
        if j == next {
            labels.push(c[1].clone());
        }
        causes.push(j);
    }
    Ok((labels, causes))
}

pub fn write_causes(path: &Path, causes: &[usize], cause_labels: &[String]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(["interview", "cause"])?;
    for (i, &j) in causes.iter().enumerate() {
        out.row([i.to_string(), cause_labels[j].clone()])?;
    }
    out.finish()
}

pub fn write_demographics(path: &Path, demos: &[Demographic]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(["interview", "age", "sex"])?;
    for (i, d) in demos.iter().enumerate() {
        out.row([i.to_string(), d.age.to_string(), d.sex.as_str().to_string()])?;
    }
    out.finish()
}

/// Perturbation truth laid out like a probbase, cells in `{+, -, 0}`.
pub fn read_truth(path: &Path, pb: &Probbase<f64>) -> Result<Vec<Sign>> {
    let (t, causes, questions) = read_labelled_grid(path)?;
    if causes != pb.cause_labels() || questions != pb.question_labels() {
        return Err(t.err(1, "truth labels do not match the probbase"));
    }
    let mut out = Vec::with_capacity(causes.len() * questions.len());
    for (line, cells) in &t.rows {
        for cell in &cells[1..] {
            out.push(
                cell.parse::<Sign>()
                    .map_err(|e| t.err(*line, e.to_string()))?,
            );
        }
    }
    Ok(out)
}

pub fn write_truth(path: &Path, truth: &[Sign], pb: &Probbase<f64>) -> Result<()> {
    let s = pb.n_questions();
    let mut out = Out::create(path)?;
    out.row(std::iter::once("cause").chain(pb.question_labels().iter().map(String::as_str)))?;
    for (j, label) in pb.cause_labels().iter().enumerate() {
        out.row(
            std::iter::once(label.as_str())
                .chain(truth[j * s..(j + 1) * s].iter().map(|t| t.symbol())),
        )?;
    }
    out.finish()
}

/// One audited entry as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cause: String,
    pub question: String,
    pub value: f64,
    pub gamma: f64,
    pub atan_gamma: f64,
    pub class: Sign,
    pub scheme: Difference,
    pub truth: Option<Sign>,
}

pub fn report_rows(report: &AuditReport) -> Vec<ReportRow> {
    report
        .entries
        .iter()
        .map(|e| ReportRow {
            cause: report.cause_labels[e.cause].clone(),
            question: report.question_labels[e.question].clone(),
            value: e.value,
            gamma: e.gamma,
            atan_gamma: e.transformed,
            class: e.class,
            scheme: e.scheme,
            truth: e.truth,
        })
        .collect()
}

pub fn write_report_rows(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row([
        "cause",
        "question",
        "value",
        "gamma",
        "atan_gamma",
        "class",
        "scheme",
        "truth",
    ])?;
    for r in rows {
        out.row([
            r.cause.clone(),
            r.question.clone(),
            format_number(r.value),
            format_number(r.gamma),
            format_number(r.atan_gamma),
            r.class.symbol().to_string(),
            r.scheme.as_str().to_string(),
            r.truth.map_or(String::new(), |t| t.symbol().to_string()),
        ])?;
    }
    out.finish()
}

pub fn write_report(path: &Path, report: &AuditReport) -> Result<()> {
    write_report_rows(path, &report_rows(report))
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let t = Table::read(path)?;
    t.expect_header(&[
        "cause",
        "question",
        "value",
        "gamma",
        "atan_gamma",
        "class",
        "scheme",
        "truth",
    ])?;
    let sign = |line: usize, s: &str| s.parse::<Sign>().map_err(|e| t.err(line, e.to_string()));
    t.rows
        .iter()
        .map(|(line, c)| {
            let scheme = match c[6].as_str() {
                "central" => Difference::Central,
                "forward" => Difference::Forward,
                "backward" => Difference::Backward,
                other => return Err(t.err(*line, format!("unknown difference scheme `{other}`"))),
            };
            Ok(ReportRow {
                cause: c[0].clone(),
                question: c[1].clone(),
                value: t.number(*line, &c[2])?,
                gamma: t.number(*line, &c[3])?,
                atan_gamma: t.number(*line, &c[4])?,
                class: sign(*line, &c[5])?,
                scheme,
                truth: if c[7].is_empty() {
                    None
                } else {
                    Some(sign(*line, &c[7])?)
                },
            })
        })
        .collect()
}

/// Entry subsets: `cause,question` label pairs.
pub fn read_entries(
    path: &Path,
    cause_labels: &[String],
    question_labels: &[String],
) -> Result<Vec<(usize, usize)>> {
    let t = Table::read(path)?;
    t.expect_header(&["cause", "question"])?;
    let c_ix: HashMap<&str, usize> = cause_labels
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let q_ix: HashMap<&str, usize> = question_labels
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (line, c) in &t.rows {
        let j = *c_ix
            .get(c[0].as_str())
            .ok_or_else(|| t.err(*line, format!("unknown cause `{}`", c[0])))?;
        let k = *q_ix
            .get(c[1].as_str())
            .ok_or_else(|| t.err(*line, format!("unknown question `{}`", c[1])))?;
        if seen.insert((j, k), *line).is_some() {
            return Err(t.err(*line, "entry listed twice"));
        }
        out.push((j, k));
    }
    Ok(out)
}

pub fn write_entries(
    path: &Path,
    entries: &[(usize, usize)],
    cause_labels: &[String],
    question_labels: &[String],
) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(["cause", "question"])?;
    for &(j, k) in entries {
        out.row([cause_labels[j].as_str(), question_labels[k].as_str()])?;
    }
    out.finish()
}

pub fn write_roc(path: &Path, points: &[RocPoint]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row(["threshold", "fpr", "tpr"])?;
    for p in points {
        out.row([
            format_number(p.threshold),
            format_number(p.fpr),
            format_number(p.tpr),
        ])?;
    }
    out.finish()
}

pub fn write_trace(
    path: &Path,
    initial: f64,
    trace: &[TraceStep],
    cause_labels: &[String],
    question_labels: &[String],
) -> Result<()> {
    let mut out = Out::create(path)?;
    out.row([
        "step",
        "sweep",
        "cause",
        "question",
        "gamma",
        "old_value",
        "new_value",
        "objective",
    ])?;
    out.row(["0", "", "", "", "", "", "", &format_number(initial)])?;
    for (i, s) in trace.iter().enumerate() {
        out.row([
            (i + 1).to_string(),
            s.sweep.to_string(),
            cause_labels[s.cause].clone(),
            question_labels[s.question].clone(),
            format_number(s.gamma),
            format_number(s.old_value),
            format_number(s.new_value),
            format_number(s.objective),
        ])?;
    }
    out.finish()
}

/// Writes any serializable records with a header derived from the fields.
pub fn write_records<R: Serialize>(path: &Path, records: &[R]) -> Result<()> {
    let mut out = Out::create(path)?;
    for r in records {
        out.serialize(r)?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn number_format_round_trips() {
        for v in [
            0.0,
            1.0,
            0.1,
            1e-6,
            1.0 - 1e-6,
            0.123_456_789_012_345_68,
            5e-324,
            1e300,
            -2.5e-7,
        ] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_number(1e-6), "1e-6");
        assert_eq!(format_number(0.25), "0.25");
    }

    #[test]
    fn probbase_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("pb.csv");
        let pb = Probbase::from_rows(
            vec!["flu".into(), "tb".into(), "hiv".into()],
            vec!["fever".into(), "cough".into(), "rash".into(), "wt".into()],
            &[
                vec![0.1, 0.2, 0.3, 1e-6],
                vec![0.5, 0.6, 0.7, 0.8],
                vec![0.0, 1.0, 1.0 / 3.0, 0.9],
            ],
        )
        .unwrap();
        write_probbase(&p, &pb).unwrap();
        assert_eq!(read_probbase::<f64>(&p).unwrap(), pb);
    }

    #[test]
    fn answers_accept_na_spellings() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "q1,q2,q3\n1,na,\n0,NA,1\n").unwrap();
        let a = read_answers(&p).unwrap();
        assert_eq!(a.row(0), &[Answer::Yes, Answer::Missing, Answer::Missing]);
        let q = dir.path().join("b.csv");
        write_answers(&q, &a).unwrap();
        assert_eq!(
            std::fs::read_to_string(&q).unwrap(),
            "q1,q2,q3\n1,NA,NA\n0,NA,1\n"
        );
    }

    #[test]
    fn ragged_row_names_line() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "q1,q2\n1,0\n1\n").unwrap();
        match read_answers(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("pb.csv");
        std::fs::write(&p, "cause,q1,q1\nc1,0.1,0.2\n").unwrap();
        assert!(matches!(read_probbase::<f64>(&p), Err(Error::Parse { .. })));
        std::fs::write(&p, "cause,q1\nc1,0.1\nc1,0.2\n").unwrap();
        assert!(matches!(
            read_probbase::<f64>(&p),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn non_numeric_cell() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("pb.csv");
        std::fs::write(&p, "cause,q1\nc1,abc\n").unwrap();
        let e = read_probbase::<f64>(&p).unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("abc"), "{e}");
    }

    #[test]
    fn missing_file_names_path() {
        let e = read_answers(Path::new("/nonexistent/answers.csv"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("/nonexistent/answers.csv"));
    }

    #[test]
    fn partition_prior_covariance_round_trip() {
        let dir = tempdir().unwrap();
        let qs: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let cs: Vec<String> = vec!["x".into(), "y".into()];
        let part = BlockPartition::with_ids(
            4,
            vec![vec![0, 2], vec![1], vec![3]],
            vec!["g1".into(), "g2".into(), "g3".into()],
        )
        .unwrap();
        let p = dir.path().join("part.csv");
        write_partition(&p, &part, &qs).unwrap();
        assert_eq!(read_partition(&p, &qs).unwrap(), part);

        let prior = Prior::new(cs.clone(), vec![0.3, 0.7]).unwrap();
        let p = dir.path().join("prior.csv");
        write_prior(&p, &prior).unwrap();
        assert_eq!(read_prior::<f64>(&p).unwrap(), prior);

        let cov = CovarianceModel::exchangeable(2, &part, 0.35).unwrap();
        let p = dir.path().join("cov.csv");
        write_covariance(&p, &cov, &cs, &qs, &part).unwrap();
        let back = read_covariance(&p, &cs, &qs, &part).unwrap();
        for j in 0..2 {
            for l in 0..3 {
                assert_eq!(back.matrix(j, l), cov.matrix(j, l));
            }
        }
    }

    #[test]
    fn letter_codes() {
        let dir = tempdir().unwrap();
        let t = dir.path().join("codes.csv");
        std::fs::write(&t, "code,value\nA,0.8\nB,0.05\n").unwrap();
        let table = read_letter_table(&t).unwrap();
        let p = dir.path().join("pb.csv");
        std::fs::write(&p, "cause,q1,q2\nc1,A,B\nc2,B,A\n").unwrap();
        let pb = read_letter_probbase::<f64>(&p, &table).unwrap();
        assert_eq!(pb.values(), &[0.8, 0.05, 0.05, 0.8]);
        std::fs::write(&p, "cause,q1,q2\nc1,A,Z\n").unwrap();
        assert!(matches!(
            read_letter_probbase::<f64>(&p, &table),
            Err(Error::UnknownCode { row: 0, col: 1, .. })
        ));
    }
}
