//! Text container for trained models.
//!
//! ```text
//! embedlab-model 1
//! kind tensor
//! z 4
//! activation relu
//! users 943
//! features 1128
//! seed 7
//! config <sha256>
//! dataset <sha256>
//! version 0.1.0
//! fingerprint 9a3c...
//! block w 1 1128
//! 0.0123 -0.5 ...
//! ```
//!
//! One `block` line per parameter block followed by its values on one line.

use std::fmt::Write as _;
use std::path::Path;

use embedlab_core::models::{Activation, Model, ModelKind, Shape};

use crate::error::{read_text, write_file, LabError, Result};

pub const FORMAT: &str = "embedlab-model 1";

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub version: String,
}

pub fn model_to_string(model: &Model, prov: &Provenance) -> String {
    let shape = model.shape();
    let mut s = String::new();
    let _ = writeln!(s, "{FORMAT}");
    let _ = writeln!(s, "kind {}", model.kind());
    let _ = writeln!(s, "z {}", model.z());
    let _ = writeln!(s, "activation {}", model.activation().as_str());
    let _ = writeln!(s, "users {}", shape.n_users);
    let _ = writeln!(s, "features {}", shape.n_features);
    let _ = writeln!(s, "seed {}", prov.seed);
    let _ = writeln!(s, "config {}", prov.config_hash);
    let _ = writeln!(s, "dataset {}", prov.dataset_hash);
    let _ = writeln!(s, "version {}", prov.version);
    let _ = writeln!(s, "fingerprint {:016x}", model.fingerprint());
    for block in model.blocks() {
        let _ = writeln!(s, "block {} {} {}", block.spec.name, block.spec.rows, block.spec.cols);
        let values: Vec<String> = block.values.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", values.join(" "));
    }
    s
}

pub fn save_model(path: &Path, model: &Model, prov: &Provenance) -> Result<()> {
    write_file(path, model_to_string(model, prov))
}

pub fn parse_model(path: &Path, text: &str) -> Result<(Model, Provenance)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    match lines.next() {
        Some((_, FORMAT)) => {}
        other => {
            return Err(LabError::CacheVersion {
                path: path.to_path_buf(),
                found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
                expected: FORMAT.into(),
            })
        }
    }
    let mut fields = std::collections::HashMap::new();
    for key in ["kind", "z", "activation", "users", "features", "seed", "config", "dataset", "version", "fingerprint"] {
        let (n, line) = lines.next().ok_or_else(|| LabError::parse(path, 0, "truncated header"))?;
        let value = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' ').or(Some(r).filter(|r| r.is_empty())))
            .ok_or_else(|| LabError::parse(path, n, format!("expected `{key}`")))?;
        fields.insert(key, (n, value.to_string()));
    }
    fn parse<T: std::str::FromStr>(path: &Path, (n, v): &(u64, String), key: &str) -> Result<T> {
        v.parse().map_err(|_| LabError::parse(path, *n, format!("bad {key} `{v}`")))
    }
    let kind: ModelKind = parse(path, &fields["kind"], "kind")?;
    let z: usize = parse(path, &fields["z"], "z")?;
    let activation: Activation = parse(path, &fields["activation"], "activation")?;
    let shape = Shape::new(parse(path, &fields["users"], "users")?, parse(path, &fields["features"], "features")?);
    let prov = Provenance {
        seed: parse(path, &fields["seed"], "seed")?,
        config_hash: fields["config"].1.clone(),
        dataset_hash: fields["dataset"].1.clone(),
        version: fields["version"].1.clone(),
    };

    let mut model = Model::zeros(kind, z, shape, activation);
    for block in model.blocks_mut() {
        let (n, line) =
            lines.next().ok_or_else(|| LabError::parse(path, 0, format!("missing block `{}`", block.spec.name)))?;
        let expected = format!("block {} {} {}", block.spec.name, block.spec.rows, block.spec.cols);
        if line != expected {
            return Err(LabError::parse(path, n, format!("expected `{expected}`, found `{line}`")));
        }
        let (n, line) = lines.next().ok_or_else(|| LabError::parse(path, n, "missing block values"))?;
        let mut count = 0;
        for (slot, tok) in block.values.iter_mut().zip(line.split_ascii_whitespace()) {
            *slot = tok.parse().map_err(|_| LabError::parse(path, n, format!("bad value `{tok}`")))?;
            count += 1;
        }
        if count != block.values.len() || line.split_ascii_whitespace().count() != count {
            return Err(LabError::parse(path, n, format!("expected {} values", block.values.len())));
        }
    }
    if let Some((n, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(LabError::parse(path, n, format!("unexpected trailing content `{line}`")));
    }
    let fingerprint = format!("{:016x}", model.fingerprint());
    if fingerprint != fields["fingerprint"].1 {
        return Err(LabError::Corrupt { path: path.to_path_buf() });
    }
    Ok((model, prov))
}

pub fn load_model(path: &Path) -> Result<(Model, Provenance)> {
    parse_model(path, &read_text(path)?)
}
