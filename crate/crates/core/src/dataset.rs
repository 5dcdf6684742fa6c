//! CSV formats: `arch,rank` label files, `arch` inference inputs, `arch,predicted_rank`
//! outputs and the `split,arch,latent` diagnostics file.

use std::io::Read;

use crate::encoding::{
    format_architecture, parse_architecture, RawArchitecture, SearchSpaceSchema,
};
use crate::error::{Error, Result};
use crate::synthetic::SyntheticTask;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchRecord {
    pub text: String,
    pub arch: RawArchitecture,
    pub rank: Option<usize>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

/// Reads an `arch,rank` or `arch` file. With `require_rank`, the rank column must exist.
pub fn read_arch_csv<R: Read>(
    reader: R,
    schema: &SearchSpaceSchema,
    require_rank: bool,
) -> Result<Vec<ArchRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    match cols.as_slice() {
        ["arch"] if !require_rank => {}
        ["arch", "rank"] => {}
        ["arch"] => return Err(Error::Data("missing column `rank`".into())),
        [] | [""] => return Err(Error::Data("empty file or missing header".into())),
        other => {
            let bad = other
                .iter()
                .enumerate()
                .find(|&(i, c)| *c != ["arch", "rank"].get(i).copied().unwrap_or(""))
                .map(|(_, c)| *c)
                .unwrap_or("");
            return Err(Error::Data(format!(
                "unexpected column `{bad}`; expected header `arch,rank` or `arch`"
            )));
        }
    }
    let has_rank = cols.len() == 2;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(csv_err)?;
        let text = rec.get(0).unwrap_or("").trim().to_string();
        let arch = parse_architecture(&text, schema)
            .map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        let rank = if has_rank {
            let raw = rec.get(1).unwrap_or("").trim();
            Some(
                raw.parse::<usize>()
                    .map_err(|_| Error::Data(format!("line {line}: bad rank `{raw}`")))?,
            )
        } else {
            None
        };
        out.push(ArchRecord { text, arch, rank });
    }
    Ok(out)
}

fn write_rows<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn labeled_csv<'a>(rows: impl IntoIterator<Item = (&'a RawArchitecture, usize)>) -> String {
    write_rows(
        &["arch", "rank"],
        rows.into_iter()
            .map(|(a, r)| [format_architecture(a), r.to_string()]),
    )
}

pub fn predictions_csv<'a>(rows: impl IntoIterator<Item = (&'a str, usize)>) -> String {
    write_rows(
        &["arch", "predicted_rank"],
        rows.into_iter()
            .map(|(a, r)| [a.to_string(), r.to_string()]),
    )
}

pub fn hidden_latent_csv(task: &SyntheticTask) -> String {
    let rows = task
        .train
        .iter()
        .zip(&task.hidden.train)
        .map(|(l, z)| ("train", l, z))
        .chain(
            task.test
                .iter()
                .zip(&task.hidden.test)
                .map(|(l, z)| ("test", l, z)),
        )
        .map(|(s, l, z)| {
            [
                s.to_string(),
                format_architecture(&l.arch),
                format!("{z:?}"),
            ]
        });
    write_rows(&["split", "arch", "latent"], rows)
}

/// Reads an `arch,predicted_rank` file.
pub fn read_predictions_csv<R: Read>(reader: R) -> Result<Vec<(String, usize)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols != ["arch", "predicted_rank"] {
        return Err(Error::Data(format!(
            "expected header `arch,predicted_rank`, found `{}`",
            cols.join(",")
        )));
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(csv_err)?;
            let raw = rec.get(1).unwrap_or("").trim();
            let r = raw
                .parse()
                .map_err(|_| Error::Data(format!("line {}: bad rank `{raw}`", i + 2)))?;
            Ok((rec.get(0).unwrap_or("").trim().to_string(), r))
        })
        .collect()
}
