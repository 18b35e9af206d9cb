//! MovieLens-100k ratings and folds, MovieLens-20M genome tags, and the
//! title+year link between the two catalogs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use embedlab_core::numerics::DenseMatrix;
use embedlab_core::Rating;
use serde::{Deserialize, Serialize};

use crate::error::{csv_error, read_bytes, LabError, Result};

pub const FOLD_IDS: [u32; 5] = [1, 2, 3, 4, 5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RatingRecord {
    pub user_id: u32,
    pub item_id: u32,
    pub rating: u8,
}

/// Reads a tab-separated `user item rating timestamp` file.
pub fn read_rating_file(path: &Path) -> Result<Vec<RatingRecord>> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(LabError::parse(
                path,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let id = |s: &str, what: &str| -> Result<u32> {
            match s.trim().parse::<u32>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(LabError::parse(path, lineno, format!("{what} `{s}` is not a positive integer"))),
            }
        };
        let user_id = id(fields[0], "user id")?;
        let item_id = id(fields[1], "item id")?;
        let rating = match fields[2].trim().parse::<u8>() {
            Ok(r @ 1..=5) => r,
            Ok(r) => return Err(LabError::parse(path, lineno, format!("rating {r} outside 1..5"))),
            Err(_) => return Err(LabError::parse(path, lineno, format!("rating `{}` is not an integer", fields[2]))),
        };
        out.push(RatingRecord { user_id, item_id, rating });
    }
    Ok(out)
}

pub fn load_ratings(ml100k_dir: &Path) -> Result<Vec<RatingRecord>> {
    read_rating_file(&ml100k_dir.join("u.data"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawFold {
    pub fold_id: u32,
    pub train: Vec<RatingRecord>,
    pub test: Vec<RatingRecord>,
}

/// The official `u1.base`/`u1.test` … `u5.base`/`u5.test` split.
pub fn load_official_folds(ml100k_dir: &Path) -> Result<Vec<RawFold>> {
    FOLD_IDS
        .iter()
        .map(|&fold_id| {
            let base = ml100k_dir.join(format!("u{fold_id}.base"));
            let test_path = ml100k_dir.join(format!("u{fold_id}.test"));
            let train = read_rating_file(&base)?;
            let test = read_rating_file(&test_path)?;
            let seen: HashSet<(u32, u32)> = train.iter().map(|r| (r.user_id, r.item_id)).collect();
            if let Some(r) = test.iter().find(|r| seen.contains(&(r.user_id, r.item_id))) {
                return Err(LabError::data(
                    &test_path,
                    format!("user {} item {} also appears in {}", r.user_id, r.item_id, base.display()),
                ));
            }
            Ok(RawFold { fold_id, train, test })
        })
        .collect()
}

/// Genome relevance vectors keyed by MovieLens-20M movie id.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCatalog {
    pub tag_names: Vec<String>,
    pub features: BTreeMap<u32, Vec<f64>>,
    /// Movies with some but not all tag scores.
    pub incomplete: Vec<u32>,
}

impl FeatureCatalog {
    pub fn n_tags(&self) -> usize {
        self.tag_names.len()
    }
}

pub fn load_genome(scores_path: &Path, tags_path: &Path) -> Result<FeatureCatalog> {
    let mut tags: BTreeMap<u32, String> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(tags_path).map_err(|e| csv_error(tags_path, e))?;
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(tags_path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let id: u32 = row
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| LabError::parse(tags_path, line, "bad tagId"))?;
        let name = row.get(1).ok_or_else(|| LabError::parse(tags_path, line, "missing tag name"))?;
        if tags.insert(id, name.to_string()).is_some() {
            return Err(LabError::parse(tags_path, line, format!("duplicate tagId {id}")));
        }
    }
    let column: HashMap<u32, usize> = tags.keys().enumerate().map(|(i, id)| (*id, i)).collect();
    let n_tags = tags.len();

    let mut partial: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(scores_path).map_err(|e| csv_error(scores_path, e))?;
    let mut row = csv::ByteRecord::new();
    while reader.read_byte_record(&mut row).map_err(|e| csv_error(scores_path, e))? {
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| std::str::from_utf8(row.get(i).unwrap_or_default()).unwrap_or("").trim();
        let (Ok(movie), Ok(tag), Ok(rel)) = (field(0).parse::<u32>(), field(1).parse::<u32>(), field(2).parse::<f64>())
        else {
            return Err(LabError::parse(scores_path, line, "expected movieId,tagId,relevance"));
        };
        if !(0.0..=1.0).contains(&rel) {
            return Err(LabError::parse(scores_path, line, format!("relevance {rel} outside [0, 1]")));
        }
        let Some(&col) = column.get(&tag) else {
            return Err(LabError::parse(scores_path, line, format!("tagId {tag} is not in {}", tags_path.display())));
        };
        let entry = partial.entry(movie).or_insert_with(|| (vec![f64::NAN; n_tags], 0));
        if !entry.0[col].is_nan() {
            return Err(LabError::parse(scores_path, line, format!("duplicate score for movie {movie} tag {tag}")));
        }
        entry.0[col] = rel;
        entry.1 += 1;
    }

    let mut features = BTreeMap::new();
    let mut incomplete = Vec::new();
    for (movie, (values, filled)) in partial {
        if filled == n_tags {
            features.insert(movie, values);
        } else {
            incomplete.push(movie);
        }
    }
    Ok(FeatureCatalog { tag_names: tags.into_values().collect(), features, incomplete })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogMovie {
    pub id: u32,
    pub title: String,
}

/// `u.item`: pipe-separated, latin-1 encoded.
pub fn load_items(path: &Path) -> Result<Vec<CatalogMovie>> {
    let bytes = read_bytes(path)?;
    let text: String = bytes.iter().map(|&b| b as char).collect();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('|');
        let (Some(id), Some(title)) = (fields.next(), fields.next()) else {
            return Err(LabError::parse(path, n as u64 + 1, "expected id|title|..."));
        };
        let id = id
            .trim()
            .parse()
            .map_err(|_| LabError::parse(path, n as u64 + 1, format!("movie id `{id}` is not an integer")))?;
        out.push(CatalogMovie { id, title: title.to_string() });
    }
    Ok(out)
}

/// `movies.csv`: `movieId,title,genres` with a header.
pub fn load_movies(path: &Path) -> Result<Vec<CatalogMovie>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let id =
            row.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| LabError::parse(path, line, "bad movieId"))?;
        let title = row.get(1).ok_or_else(|| LabError::parse(path, line, "missing title"))?;
        out.push(CatalogMovie { id, title: title.to_string() });
    }
    Ok(out)
}

/// Lowercased title with alternate-title parentheses removed and a trailing
/// ", the"/", a"/", an" moved to the front, plus the year from the final
/// `(NNNN)` group. `None` when there is no year.
pub fn normalize_title(raw: &str) -> Option<(String, u16)> {
    let lower = raw.trim().to_lowercase();
    let body = lower.strip_suffix(')')?;
    let open = body.rfind('(')?;
    let year_text = body[open + 1..].trim();
    if year_text.len() != 4 || !year_text.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year = year_text.parse().ok()?;

    let mut stripped = String::new();
    let mut depth = 0usize;
    for ch in body[..open].chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ if depth == 0 => stripped.push(ch),
            _ => {}
        }
    }
    let mut title = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    for article in ["the", "a", "an"] {
        if let Some(head) = title.strip_suffix(&format!(", {article}")) {
            title = format!("{article} {head}");
            break;
        }
    }
    Some((title, year))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatus {
    Matched,
    NoYear,
    NoMatch,
    NoGenome,
}

impl LinkStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkStatus::Matched => "matched",
            LinkStatus::NoYear => "no_year",
            LinkStatus::NoMatch => "no_match",
            LinkStatus::NoGenome => "no_genome",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkEntry {
    pub ml100k_id: u32,
    pub title: String,
    pub status: LinkStatus,
    pub ml20m_id: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LinkReport {
    pub matched: usize,
    pub dropped: usize,
    pub dropped_titles: Vec<String>,
    pub entries: Vec<LinkEntry>,
}

/// ML-100k id to ML-20M id for every linked movie.
pub type LinkMap = BTreeMap<u32, u32>;

/// Joins the catalogs on normalized (title, year). Among several ML-20M
/// candidates the one with genome scores wins, then the lowest id. ML-100k
/// entries with identical raw titles are duplicate listings and share a
/// target; distinct titles reaching the same target are an error.
pub fn link_movies(
    items: &[CatalogMovie],
    movies: &[CatalogMovie],
    catalog: &FeatureCatalog,
) -> Result<(LinkMap, LinkReport)> {
    let mut by_key: HashMap<(String, u16), Vec<u32>> = HashMap::new();
    for m in movies {
        if let Some(key) = normalize_title(&m.title) {
            by_key.entry(key).or_default().push(m.id);
        }
    }
    let mut sorted: Vec<&CatalogMovie> = items.iter().collect();
    sorted.sort_by_key(|m| m.id);

    let mut map = LinkMap::new();
    let mut report = LinkReport::default();
    let mut owner: HashMap<u32, &CatalogMovie> = HashMap::new();
    let mut collisions = Vec::new();
    for item in sorted {
        let (status, target) = match normalize_title(&item.title) {
            None => (LinkStatus::NoYear, None),
            Some(key) => match by_key.get(&key) {
                None => (LinkStatus::NoMatch, None),
                Some(ids) => {
                    let best = ids
                        .iter()
                        .copied()
                        .min_by_key(|id| (!catalog.features.contains_key(id), *id))
                        .expect("candidate lists are nonempty");
                    if catalog.features.contains_key(&best) {
                        (LinkStatus::Matched, Some(best))
                    } else {
                        (LinkStatus::NoGenome, Some(best))
                    }
                }
            },
        };
        if status == LinkStatus::Matched {
            let target = target.expect("matched entries have a target");
            match owner.get(&target) {
                Some(prev) if prev.title != item.title => collisions.push(format!(
                    "ml100k {} `{}` and {} `{}` both map to ml20m {target}",
                    prev.id, prev.title, item.id, item.title
                )),
                Some(_) => {}
                None => {
                    owner.insert(target, item);
                }
            }
            map.insert(item.id, target);
            report.matched += 1;
        } else {
            report.dropped += 1;
            report.dropped_titles.push(item.title.clone());
        }
        report.entries.push(LinkEntry { ml100k_id: item.id, title: item.title.clone(), status, ml20m_id: target });
    }
    if !collisions.is_empty() {
        return Err(LabError::LinkCollision(collisions.join("; ")));
    }
    Ok((map, report))
}

pub fn write_link_report(path: &Path, report: &LinkReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| csv_error(path, e);
    w.write_record(["ml100k_id", "title", "status", "ml20m_id"]).map_err(io)?;
    for e in &report.entries {
        let target = e.ml20m_id.map(|id| id.to_string()).unwrap_or_default();
        w.write_record([e.ml100k_id.to_string().as_str(), &e.title, e.status.as_str(), &target]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::io(path, e.into_error()))?;
    crate::error::write_file(path, bytes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fold {
    pub fold_id: u32,
    pub train: Vec<RatingRecord>,
    pub test: Vec<RatingRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkedItem {
    pub item_id: u32,
    pub ml20m_id: u32,
    pub title: String,
}

/// Everything a run needs: index maps, item features, folds, and the full
/// genome catalog for analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub tag_names: Vec<String>,
    /// Original user id per user index.
    pub user_ids: Vec<u32>,
    /// Linked ML-100k movies in item-index order.
    pub items: Vec<LinkedItem>,
    /// Genome-covered ML-20M movies, ascending id.
    pub catalog: Vec<CatalogMovie>,
    /// Relevance vectors, one row per `catalog` entry.
    pub catalog_features: DenseMatrix,
    pub folds: Vec<Fold>,
}

impl Dataset {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tag_names.len()
    }

    /// Item features, one row per item index.
    pub fn item_features(&self) -> DenseMatrix {
        let row_of: HashMap<u32, usize> = self.catalog.iter().enumerate().map(|(i, m)| (m.id, i)).collect();
        let mut out = DenseMatrix::zeros(self.items.len(), self.n_tags());
        for (i, item) in self.items.iter().enumerate() {
            let src = self.catalog_features.row(row_of[&item.ml20m_id]);
            out.row_mut(i).copy_from_slice(src);
        }
        out
    }

    pub fn fold(&self, fold_id: u32) -> Option<&Fold> {
        self.folds.iter().find(|f| f.fold_id == fold_id)
    }

    /// Records translated to contiguous user and item indices.
    pub fn indexed(&self, records: &[RatingRecord]) -> Vec<Rating> {
        let users: HashMap<u32, usize> = self.user_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let items: HashMap<u32, usize> = self.items.iter().enumerate().map(|(i, m)| (m.item_id, i)).collect();
        records.iter().map(|r| Rating::new(users[&r.user_id], items[&r.item_id], r.rating as f64)).collect()
    }
}

/// Drops ratings of unlinked movies from every fold and assigns indices.
/// Users keep their index even when all of their ratings are dropped.
pub fn build_folds(
    raw: &[RawFold],
    link: &LinkMap,
    items: &[CatalogMovie],
    movies: &[CatalogMovie],
    catalog: &FeatureCatalog,
) -> Result<Dataset> {
    if link.is_empty() {
        return Err(LabError::Config("no movie could be linked to a genome vector".into()));
    }
    let mut users: Vec<u32> = raw.iter().flat_map(|f| f.train.iter().chain(&f.test)).map(|r| r.user_id).collect();
    users.sort_unstable();
    users.dedup();

    let titles: HashMap<u32, &str> = items.iter().map(|m| (m.id, m.title.as_str())).collect();
    let linked: Vec<LinkedItem> = link
        .iter()
        .map(|(&item_id, &ml20m_id)| LinkedItem {
            item_id,
            ml20m_id,
            title: titles.get(&item_id).copied().unwrap_or_default().to_string(),
        })
        .collect();

    let mut folds = Vec::new();
    for f in raw {
        let keep = |rs: &[RatingRecord]| -> Vec<RatingRecord> {
            rs.iter().filter(|r| link.contains_key(&r.item_id)).copied().collect()
        };
        let fold = Fold { fold_id: f.fold_id, train: keep(&f.train), test: keep(&f.test) };
        if fold.test.is_empty() {
            return Err(LabError::Config(format!("fold {} has no test ratings after linking", f.fold_id)));
        }
        folds.push(fold);
    }

    let movie_titles: HashMap<u32, &str> = movies.iter().map(|m| (m.id, m.title.as_str())).collect();
    let catalog_movies: Vec<CatalogMovie> = catalog
        .features
        .keys()
        .map(|&id| CatalogMovie { id, title: movie_titles.get(&id).copied().unwrap_or_default().to_string() })
        .collect();
    let rows: Vec<&Vec<f64>> = catalog.features.values().collect();
    let catalog_features =
        if rows.is_empty() { DenseMatrix::zeros(0, catalog.n_tags()) } else { DenseMatrix::from_rows(&rows)? };

    Ok(Dataset {
        tag_names: catalog.tag_names.clone(),
        user_ids: users,
        items: linked,
        catalog: catalog_movies,
        catalog_features,
        folds,
    })
}

/// Runs the whole ingestion pipeline over the two dataset directories.
pub fn prepare_dataset(ml100k_dir: &Path, ml20m_dir: &Path) -> Result<(Dataset, LinkReport)> {
    let raw = load_official_folds(ml100k_dir)?;
    let catalog = load_genome(&ml20m_dir.join("genome-scores.csv"), &ml20m_dir.join("genome-tags.csv"))?;
    let items = load_items(&ml100k_dir.join("u.item"))?;
    let movies = load_movies(&ml20m_dir.join("movies.csv"))?;
    let (link, report) = link_movies(&items, &movies, &catalog)?;
    let dataset = build_folds(&raw, &link, &items, &movies, &catalog)?;
    Ok((dataset, report))
}
