//! CSV layout for the three sample granularities.
//!
//! A full tree has header `n,Z,phi,Z0,...,Z<s_max>` with one row per
//! generation `0..n-1` and a last row carrying only `n` and `Z_n`. A
//! progenitor sample keeps the columns `n,Z,phi`, a sizes sample `n,Z`.
//! Lines starting with `#` before the header are metadata comments.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::model::{FullTreeSample, ProgenitorSample, SizesSample};

/// A sample read from CSV, at whatever granularity the file provides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sample {
    Full(FullTreeSample),
    Progenitors(ProgenitorSample),
    Sizes(SizesSample),
}

impl Sample {
    pub fn scheme(&self) -> &'static str {
        match self {
            Sample::Full(_) => "full tree",
            Sample::Progenitors(_) => "progenitors",
            Sample::Sizes(_) => "sizes",
        }
    }

    pub fn into_full(self) -> Result<FullTreeSample> {
        match self {
            Sample::Full(s) => Ok(s),
            other => Err(scheme_error("full tree", other.scheme())),
        }
    }

    /// Progenitor sample, projecting a full tree if needed.
    pub fn into_progenitors(self) -> Result<ProgenitorSample> {
        match self {
            Sample::Full(s) => Ok(s.project_progenitors()),
            Sample::Progenitors(s) => Ok(s),
            other => Err(scheme_error("progenitors", other.scheme())),
        }
    }

    /// Sizes sample, projecting any richer sample.
    pub fn into_sizes(self) -> SizesSample {
        match self {
            Sample::Full(s) => s.project_sizes(),
            Sample::Progenitors(s) => s.to_sizes(),
            Sample::Sizes(s) => s,
        }
    }
}

fn scheme_error(expected: &str, found: &str) -> Error {
    Error::Scheme {
        expected: expected.into(),
        found: found.into(),
    }
}

/// Splits leading `#` lines from the CSV body.
fn split_comments(text: &str) -> (Vec<String>, &str) {
    let mut comments = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.lines().next() {
        if !line.starts_with('#') {
            break;
        }
        comments.push(line.trim_start_matches('#').trim().to_string());
        rest = &rest[(line.len() + 1).min(rest.len())..];
    }
    (comments, rest)
}

fn parse_count(field: &str, row: usize, column: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("row {row}, column {column}: {field:?} is not a count")))
}

/// Reads a sample, detecting its granularity from the header. Returns the
/// metadata comments too.
pub fn read_sample<R: Read>(reader: R) -> Result<(Sample, Vec<String>)> {
    let mut text = String::new();
    BufReader::new(reader).read_to_string(&mut text)?;
    let (comments, body) = split_comments(&text);
    let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body.as_bytes());
    let header: Vec<String> = csv.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 || header[0] != "n" || header[1] != "Z" {
        return Err(Error::Format(format!("header must start with n,Z, got {}", header.join(","))));
    }
    let has_phi = header.get(2).is_some_and(|h| h == "phi");
    let n_counts = header.len().saturating_sub(3);
    if has_phi && n_counts > 0 {
        for (k, h) in header[3..].iter().enumerate() {
            if *h != format!("Z{k}") {
                return Err(Error::Format(format!("expected column Z{k}, got {h}")));
            }
        }
        if n_counts < 2 {
            return Err(Error::Format("a full tree needs columns Z0 and Z1 at least".into()));
        }
    } else if header.len() > 3 || (header.len() == 3 && !has_phi) {
        return Err(Error::Format(format!("unrecognized header {}", header.join(","))));
    }

    let records: Vec<csv::StringRecord> = csv.records().collect::<std::result::Result<_, _>>()?;
    if records.len() < 2 {
        return Err(Error::Format("need at least two generations".into()));
    }
    let last = records.len() - 1;
    let mut z = Vec::with_capacity(records.len());
    let mut phi = Vec::new();
    let mut counts = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        if parse_count(&rec[0], i, "n")? != i {
            return Err(Error::Format(format!("row {i}: generations must be numbered 0, 1, ...")));
        }
        z.push(parse_count(&rec[1], i, "Z")?);
        if i == last {
            if rec.iter().skip(2).any(|f| !f.trim().is_empty()) {
                return Err(Error::Format(format!("row {i}: the last generation carries only Z")));
            }
            continue;
        }
        if has_phi {
            phi.push(parse_count(&rec[2], i, "phi")?);
        }
        if n_counts > 0 {
            let row = (3..header.len())
                .map(|c| parse_count(&rec[c], i, &header[c]))
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
        }
    }

    let sample = if n_counts > 0 {
        let tree = FullTreeSample::new(z[0], counts)?;
        if tree.sizes() != z {
            let l = tree.sizes().iter().zip(&z).position(|(a, b)| a != b).unwrap_or(0);
            return Err(Error::inconsistent(l, "Z does not equal the offspring total of the previous row"));
        }
        if tree.progenitors() != phi {
            let l = tree.progenitors().iter().zip(&phi).position(|(a, b)| a != b).unwrap_or(0);
            return Err(Error::inconsistent(l, "phi does not equal the row sum of the counts"));
        }
        Sample::Full(tree)
    } else if has_phi {
        Sample::Progenitors(ProgenitorSample::new(z, phi)?)
    } else {
        Sample::Sizes(SizesSample::new(z)?)
    };
    Ok((sample, comments))
}

fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    Ok(())
}

pub fn write_full<W: Write>(mut out: W, sample: &FullTreeSample, comments: &[String]) -> Result<()> {
    write_comments(&mut out, comments)?;
    let s = sample.s_max();
    let z = sample.sizes();
    let phi = sample.progenitors();
    let header: Vec<String> = ["n", "Z", "phi"]
        .map(String::from)
        .into_iter()
        .chain((0..=s).map(|k| format!("Z{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (l, row) in sample.counts().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{l},{},{},{}", z[l], phi[l], cells.join(","))?;
    }
    let n = sample.n_generations();
    writeln!(out, "{n},{}{}", z[n], ",".repeat(s + 2))?;
    Ok(())
}

pub fn write_progenitors<W: Write>(mut out: W, sample: &ProgenitorSample, comments: &[String]) -> Result<()> {
    write_comments(&mut out, comments)?;
    writeln!(out, "n,Z,phi")?;
    for (l, phi) in sample.phi().iter().enumerate() {
        writeln!(out, "{l},{},{phi}", sample.z()[l])?;
    }
    let n = sample.n_generations();
    writeln!(out, "{n},{},", sample.z()[n])?;
    Ok(())
}

pub fn write_sizes<W: Write>(mut out: W, sample: &SizesSample, comments: &[String]) -> Result<()> {
    write_comments(&mut out, comments)?;
    writeln!(out, "n,Z")?;
    for (l, z) in sample.z().iter().enumerate() {
        writeln!(out, "{l},{z}")?;
    }
    Ok(())
}

pub fn write_sample<W: Write>(out: W, sample: &Sample, comments: &[String]) -> Result<()> {
    match sample {
        Sample::Full(s) => write_full(out, s, comments),
        Sample::Progenitors(s) => write_progenitors(out, s, comments),
        Sample::Sizes(s) => write_sizes(out, s, comments),
    }
}

/// Reads only the leading `#` comment lines of a file.
pub fn read_comments<R: Read>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if !line.starts_with('#') {
            break;
        }
        out.push(line.trim_start_matches('#').trim().to_string());
    }
    Ok(out)
}
