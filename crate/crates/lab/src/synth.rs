//! Small synthetic corpus in the on-disk MovieLens formats, for exercising
//! the pipeline without the real datasets.
//!
//! Ratings come from a planted structure: every movie belongs to one of a
//! few genres with elevated genome relevance on that genre's tags, and every
//! user has a bias plus a taste per genre. The catalog includes the awkward
//! cases the linker must handle: trailing articles, a latin-1 accented
//! title, duplicate listings, unmatched titles, a title without a year and
//! movies with incomplete genome coverage.

use std::fmt::Write as _;
use std::path::Path;

use embedlab_core::numerics::SeededRng;

use crate::error::{write_file, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub users: usize,
    pub items: usize,
    pub tags: usize,
    pub genres: usize,
    pub ratings_per_user: usize,
    /// Movies only present in the ML-20M side.
    pub extra_movies: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { users: 60, items: 80, tags: 24, genres: 4, ratings_per_user: 30, extra_movies: 12, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthSummary {
    pub ratings: usize,
    /// ML-100k ids the linker is expected to drop.
    pub expected_drops: Vec<u32>,
}

enum Listing {
    Plain,
    Article,
    Accented,
    Unmatched,
    NoYear,
    PartialGenome,
    Duplicate(u32),
}

fn listing(id: u32, items: u32) -> Listing {
    match id {
        _ if id == items => Listing::Duplicate(1),
        _ if id.is_multiple_of(17) => Listing::Unmatched,
        _ if id.is_multiple_of(19) => Listing::PartialGenome,
        _ if id.is_multiple_of(23) => Listing::NoYear,
        _ if id.is_multiple_of(7) => Listing::Article,
        _ if id.is_multiple_of(11) => Listing::Accented,
        _ => Listing::Plain,
    }
}

fn year_of(id: u32) -> u32 {
    1950 + id % 48
}

/// (ML-100k title as latin-1 bytes, ML-20M title) for a movie.
fn titles(id: u32, kind: &Listing) -> (Vec<u8>, Option<String>) {
    let year = year_of(id);
    match kind {
        Listing::Plain | Listing::PartialGenome | Listing::Duplicate(_) => {
            let t = format!("Picture {id} ({year})");
            (t.clone().into_bytes(), Some(t))
        }
        Listing::Article => {
            (format!("Story of {id}, The ({year})").into_bytes(), Some(format!("The Story of {id} ({year})")))
        }
        Listing::Accented => {
            let mut bytes = b"Caf\xe9 ".to_vec();
            bytes.extend(format!("{id} ({year})").bytes());
            (bytes, Some(format!("Café {id} ({year})")))
        }
        Listing::Unmatched => (format!("Lost Reel {id} ({year})").into_bytes(), None),
        Listing::NoYear => (b"unknown".to_vec(), None),
    }
}

pub fn write_synthetic(spec: &SynthSpec, ml100k_dir: &Path, ml20m_dir: &Path) -> Result<SynthSummary> {
    let mut rng = SeededRng::new(spec.seed);
    let n_items = spec.items as u32;

    let genre_of = |id: u32| (id as usize * 7 + 3) % spec.genres;
    let tag_genre = |t: usize| t % spec.genres;

    let mut tags = String::from("tagId,tag\n");
    for t in 0..spec.tags {
        let _ = writeln!(tags, "{},theme {t}", t + 1);
    }

    let mut item_lines = Vec::new();
    let mut movies = String::from("movieId,title,genres\n");
    let mut scores = String::from("movieId,tagId,relevance\n");
    let mut expected_drops = Vec::new();
    let genome_row = |movie: u32, genre: usize, skip_last: bool, rng: &mut SeededRng, out: &mut String| {
        let count = if skip_last { spec.tags - 1 } else { spec.tags };
        for t in 0..count {
            let base = if tag_genre(t) == genre { rng.uniform(0.6, 1.0) } else { rng.uniform(0.0, 0.3) };
            let _ = writeln!(out, "{movie},{},{:.5}", t + 1, base);
        }
    };
    for id in 1..=n_items {
        let kind = listing(id, n_items);
        let (raw, ml20m) = match kind {
            Listing::Duplicate(of) => titles(of, &Listing::Plain),
            _ => titles(id, &kind),
        };
        let mut line = id.to_string().into_bytes();
        line.push(b'|');
        line.extend(&raw);
        line.extend(format!("|01-Jan-{}||http://example.invalid/{id}|0|1|0\n", year_of(id)).bytes());
        item_lines.extend(line);
        match (&kind, ml20m) {
            (Listing::Duplicate(_), _) => {}
            (_, Some(title)) => {
                let movie = 1000 + id;
                let quoted = format!("\"{}\"", title.replace('"', "\"\""));
                let _ = writeln!(movies, "{movie},{quoted},Drama");
                genome_row(movie, genre_of(id), matches!(kind, Listing::PartialGenome), &mut rng, &mut scores);
            }
            (_, None) => {}
        }
        if matches!(kind, Listing::Unmatched | Listing::NoYear | Listing::PartialGenome) {
            expected_drops.push(id);
        }
    }
    for k in 0..spec.extra_movies as u32 {
        let movie = 5000 + k;
        let _ = writeln!(movies, "{movie},Sequel {k} (2015),Comedy");
        genome_row(movie, k as usize % spec.genres, false, &mut rng, &mut scores);
    }

    let mut ratings = Vec::new();
    for user in 1..=spec.users as u32 {
        let bias = rng.uniform(-0.5, 0.5);
        let taste: Vec<f64> = (0..spec.genres).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut order: Vec<u32> = (1..=n_items).collect();
        rng.shuffle(&mut order);
        for &item in order.iter().take(spec.ratings_per_user) {
            let genre = match listing(item, n_items) {
                Listing::Duplicate(of) => genre_of(of),
                _ => genre_of(item),
            };
            let raw = 3.5 + bias + 1.5 * taste[genre] + rng.uniform(-0.4, 0.4);
            ratings.push((user, item, raw.round().clamp(1.0, 5.0) as u8));
        }
    }

    let format_ratings = |rows: &[(u32, u32, u8)]| {
        let mut sorted = rows.to_vec();
        sorted.sort_unstable();
        let mut s = String::new();
        for (k, (u, i, r)) in sorted.iter().enumerate() {
            let _ = writeln!(s, "{u}\t{i}\t{r}\t{}", 880_000_000 + k);
        }
        s
    };
    write_file(&ml100k_dir.join("u.data"), format_ratings(&ratings))?;
    let mut shuffled = ratings.clone();
    rng.shuffle(&mut shuffled);
    for fold in 0..5usize {
        let (test, base): (Vec<_>, Vec<_>) = shuffled.iter().enumerate().partition(|(k, _)| k % 5 == fold);
        let strip = |v: Vec<(usize, &(u32, u32, u8))>| v.into_iter().map(|(_, r)| *r).collect::<Vec<_>>();
        write_file(&ml100k_dir.join(format!("u{}.base", fold + 1)), format_ratings(&strip(base)))?;
        write_file(&ml100k_dir.join(format!("u{}.test", fold + 1)), format_ratings(&strip(test)))?;
    }
    write_file(&ml100k_dir.join("u.item"), item_lines)?;
    write_file(&ml20m_dir.join("movies.csv"), movies)?;
    write_file(&ml20m_dir.join("genome-tags.csv"), tags)?;
    write_file(&ml20m_dir.join("genome-scores.csv"), scores)?;

    Ok(SynthSummary { ratings: ratings.len(), expected_drops })
}
