//! Prepared-dataset cache.
//!
//! A directory holding `dataset.txt` and CSV payloads. `dataset.txt` is
//! line-oriented:
//!
//! ```text
//! embedlab-dataset 1
//! users 943
//! items 1600
//! tags 1128
//! catalog 10381
//! fold 1 train 79000 test 19700
//! ...
//! file users.csv <sha256>
//! ...
//! ```
//!
//! Payloads: `tags.csv` (tag), `users.csv` (user_id), `items.csv`
//! (item_id, ml20m_id, title), `catalog.csv` (ml20m_id, title, one column
//! per tag) and `fold<i>_train.csv` / `fold<i>_test.csv` (user_id, item_id,
//! rating). Floats are written in shortest round-trip form, so a load
//! reproduces every bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use embedlab_core::numerics::DenseMatrix;

use crate::dataio::{CatalogMovie, Dataset, Fold, LinkedItem, RatingRecord};
use crate::error::{csv_error, read_bytes, read_text, write_file, LabError, Result};

pub const FORMAT: &str = "embedlab-dataset 1";
pub const HEADER_FILE: &str = "dataset.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn csv_bytes<I, R>(path: &Path, header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(|e| csv_error(path, e))?;
    }
    w.into_inner().map_err(|e| LabError::io(path, e.into_error()))
}

fn fold_file(fold_id: u32, part: &str) -> String {
    format!("fold{fold_id}_{part}.csv")
}

fn rating_rows(records: &[RatingRecord]) -> impl Iterator<Item = [String; 3]> + '_ {
    records.iter().map(|r| [r.user_id.to_string(), r.item_id.to_string(), r.rating.to_string()])
}

/// Writes the cache; identical datasets give identical bytes.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    let mut payloads: Vec<(String, Vec<u8>)> = Vec::new();
    let p = |name: &str| dir.join(name);

    payloads
        .push(("tags.csv".into(), csv_bytes(&p("tags.csv"), &["tag"], dataset.tag_names.iter().map(|t| [t.clone()]))?));
    payloads.push((
        "users.csv".into(),
        csv_bytes(&p("users.csv"), &["user_id"], dataset.user_ids.iter().map(|u| [u.to_string()]))?,
    ));
    payloads.push((
        "items.csv".into(),
        csv_bytes(
            &p("items.csv"),
            &["item_id", "ml20m_id", "title"],
            dataset.items.iter().map(|m| [m.item_id.to_string(), m.ml20m_id.to_string(), m.title.clone()]),
        )?,
    ));
    let mut catalog_header = vec!["ml20m_id".to_string(), "title".to_string()];
    catalog_header.extend((0..dataset.n_tags()).map(|i| format!("t{i}")));
    let header_refs: Vec<&str> = catalog_header.iter().map(String::as_str).collect();
    payloads.push((
        "catalog.csv".into(),
        csv_bytes(
            &p("catalog.csv"),
            &header_refs,
            dataset.catalog.iter().zip(dataset.catalog_features.iter_rows()).map(|(m, row)| {
                let mut fields = vec![m.id.to_string(), m.title.clone()];
                fields.extend(row.iter().map(|v| v.to_string()));
                fields
            }),
        )?,
    ));
    for fold in &dataset.folds {
        for (part, records) in [("train", &fold.train), ("test", &fold.test)] {
            let name = fold_file(fold.fold_id, part);
            let bytes = csv_bytes(&p(&name), &["user_id", "item_id", "rating"], rating_rows(records))?;
            payloads.push((name, bytes));
        }
    }

    let mut header = String::new();
    let _ = writeln!(header, "{FORMAT}");
    let _ = writeln!(header, "users {}", dataset.user_ids.len());
    let _ = writeln!(header, "items {}", dataset.items.len());
    let _ = writeln!(header, "tags {}", dataset.n_tags());
    let _ = writeln!(header, "catalog {}", dataset.catalog.len());
    for fold in &dataset.folds {
        let _ = writeln!(header, "fold {} train {} test {}", fold.fold_id, fold.train.len(), fold.test.len());
    }
    for (name, bytes) in &payloads {
        let _ = writeln!(header, "file {name} {}", sha256_hex(bytes));
    }
    for (name, bytes) in &payloads {
        write_file(&dir.join(name), bytes)?;
    }
    write_file(&dir.join(HEADER_FILE), header)
}

/// Hash identifying a prepared dataset: the digest of its header, which
/// itself lists every payload digest.
pub fn dataset_hash(dir: &Path) -> Result<String> {
    Ok(sha256_hex(&read_bytes(&dir.join(HEADER_FILE))?))
}

struct Header {
    counts: BTreeMap<String, usize>,
    folds: Vec<(u32, usize, usize)>,
    files: Vec<(String, String)>,
}

fn parse_header(path: &Path, text: &str) -> Result<Header> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    if first != FORMAT {
        return Err(LabError::CacheVersion {
            path: path.to_path_buf(),
            found: first.to_string(),
            expected: FORMAT.to_string(),
        });
    }
    let mut header = Header { counts: BTreeMap::new(), folds: Vec::new(), files: Vec::new() };
    for (n, line) in lines.enumerate() {
        let bad = || LabError::parse(path, n as u64 + 2, format!("unrecognized header line `{line}`"));
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["fold", id, "train", a, "test", b] => header.folds.push((
                id.parse().map_err(|_| bad())?,
                a.parse().map_err(|_| bad())?,
                b.parse().map_err(|_| bad())?,
            )),
            ["file", name, digest] => header.files.push((name.to_string(), digest.to_string())),
            [key, value] => {
                header.counts.insert(key.to_string(), value.parse().map_err(|_| bad())?);
            }
            _ => return Err(bad()),
        }
    }
    Ok(header)
}

fn read_csv(dir: &Path, name: &str, files: &[(String, String)]) -> Result<Vec<csv::StringRecord>> {
    let path = dir.join(name);
    let expected = files
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, d)| d.as_str())
        .ok_or_else(|| LabError::data(&dir.join(HEADER_FILE), format!("no checksum for {name}")))?;
    let bytes = read_bytes(&path)?;
    if sha256_hex(&bytes) != expected {
        return Err(LabError::Corrupt { path });
    }
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    reader.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| csv_error(&path, e))
}

fn field<T: std::str::FromStr>(path: &Path, row: &csv::StringRecord, i: usize) -> Result<T> {
    let line = row.position().map_or(0, |p| p.line());
    row.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| LabError::parse(path, line, format!("bad value in column {i}")))
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let header_path = dir.join(HEADER_FILE);
    let header = parse_header(&header_path, &read_text(&header_path)?)?;
    let count = |key: &str| -> Result<usize> {
        header.counts.get(key).copied().ok_or_else(|| LabError::data(&header_path, format!("missing `{key}` count")))
    };
    let check = |name: &str, found: usize, expected: usize| -> Result<()> {
        if found == expected {
            Ok(())
        } else {
            Err(LabError::data(&dir.join(name), format!("{found} rows, header says {expected}")))
        }
    };

    let tag_names: Vec<String> =
        read_csv(dir, "tags.csv", &header.files)?.iter().map(|r| r.get(0).unwrap_or_default().to_string()).collect();
    check("tags.csv", tag_names.len(), count("tags")?)?;

    let users_path = dir.join("users.csv");
    let user_ids = read_csv(dir, "users.csv", &header.files)?
        .iter()
        .map(|r| field(&users_path, r, 0))
        .collect::<Result<Vec<u32>>>()?;
    check("users.csv", user_ids.len(), count("users")?)?;

    let items_path = dir.join("items.csv");
    let items = read_csv(dir, "items.csv", &header.files)?
        .iter()
        .map(|r| {
            Ok(LinkedItem {
                item_id: field(&items_path, r, 0)?,
                ml20m_id: field(&items_path, r, 1)?,
                title: r.get(2).unwrap_or_default().to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    check("items.csv", items.len(), count("items")?)?;

    let catalog_path = dir.join("catalog.csv");
    let n_tags = tag_names.len();
    let rows = read_csv(dir, "catalog.csv", &header.files)?;
    check("catalog.csv", rows.len(), count("catalog")?)?;
    let mut catalog = Vec::with_capacity(rows.len());
    let mut catalog_features = DenseMatrix::zeros(rows.len(), n_tags);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n_tags + 2 {
            let line = r.position().map_or(0, |p| p.line());
            return Err(LabError::parse(&catalog_path, line, format!("{} fields, expected {}", r.len(), n_tags + 2)));
        }
        catalog.push(CatalogMovie { id: field(&catalog_path, r, 0)?, title: r.get(1).unwrap_or_default().to_string() });
        for j in 0..n_tags {
            catalog_features.set(i, j, field(&catalog_path, r, j + 2)?);
        }
    }

    let mut folds = Vec::new();
    for &(fold_id, n_train, n_test) in &header.folds {
        let mut parts = Vec::new();
        for (part, n) in [("train", n_train), ("test", n_test)] {
            let name = fold_file(fold_id, part);
            let path = dir.join(&name);
            let records = read_csv(dir, &name, &header.files)?
                .iter()
                .map(|r| {
                    Ok(RatingRecord {
                        user_id: field(&path, r, 0)?,
                        item_id: field(&path, r, 1)?,
                        rating: field(&path, r, 2)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            check(&name, records.len(), n)?;
            parts.push(records);
        }
        let test = parts.pop().expect("two parts");
        let train = parts.pop().expect("two parts");
        folds.push(Fold { fold_id, train, test });
    }

    Ok(Dataset { tag_names, user_ids, items, catalog, catalog_features, folds })
}
