//! MovieLens ratings → per-movie attraction probabilities → item profile.
//!
//! A rating counts as a click when it is strictly above the threshold
//! (default 3 stars, so 3.5 counts and 3 does not).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamKind};
use crate::types::{AttractionProfile, ItemId};

pub const DEFAULT_THRESHOLD: f64 = 3.0;
pub const DEFAULT_MIN_COUNT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RatingsFormat {
    /// `user \t item \t rating \t timestamp`, no header (ml-100k `u.data`).
    Legacy,
    /// `userId,movieId,rating,timestamp` with a header row (ml-latest, ml-20m, ...).
    Csv,
    /// `UserID::MovieID::Rating::Timestamp`, no header (ml-1m `ratings.dat`).
    DoubleColon,
}

impl FromStr for RatingsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legacy" | "tsv" => Ok(RatingsFormat::Legacy),
            "csv" => Ok(RatingsFormat::Csv),
            "dat" | "double-colon" => Ok(RatingsFormat::DoubleColon),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rating {
    pub user: u64,
    pub movie: u64,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatingsTable {
    pub records: Vec<Rating>,
    /// Rows that failed to parse or fell outside the rating scale.
    pub skipped: usize,
}

fn parse_row(fields: &[&str]) -> Option<Rating> {
    if fields.len() != 4 {
        return None;
    }
    let rating: f64 = fields[2].trim().parse().ok()?;
    if !(0.5..=5.0).contains(&rating) {
        return None;
    }
    Some(Rating {
        user: fields[0].trim().parse().ok()?,
        movie: fields[1].trim().parse().ok()?,
        rating,
        timestamp: fields[3].trim().parse().ok()?,
    })
}

/// Parses ratings text. Malformed rows are counted and skipped.
pub fn parse_ratings(text: &str, format: RatingsFormat, origin: &str) -> Result<RatingsTable> {
    let mut table = RatingsTable::default();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if format == RatingsFormat::Csv {
        lines.next();
    }
    for line in lines {
        let fields: Vec<&str> = match format {
            RatingsFormat::Legacy => line.split('\t').collect(),
            RatingsFormat::Csv => line.split(',').collect(),
            RatingsFormat::DoubleColon => line.split("::").collect(),
        };
        match parse_row(&fields) {
            Some(r) => table.records.push(r),
            None => table.skipped += 1,
        }
    }
    if table.records.is_empty() {
        return Err(Error::ZeroValidRows(origin.to_string()));
    }
    Ok(table)
}

pub fn parse_movielens(path: impl AsRef<Path>, format: RatingsFormat) -> Result<RatingsTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // ml-1m ships latin-1 metadata; ratings are ASCII, so lossy decoding is harmless.
    let text = String::from_utf8_lossy(&bytes);
    parse_ratings(&text, format, &path.display().to_string())
}

/// Click statistics of one movie.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MovieStats {
    pub successes: u64,
    pub ratings: u64,
}

impl MovieStats {
    pub fn probability(&self) -> f64 {
        self.successes as f64 / self.ratings as f64
    }
}

/// Per movie with at least `min_count` ratings: the share of ratings strictly
/// above `threshold`.
pub fn attraction_stats(table: &RatingsTable, threshold: f64, min_count: usize) -> Result<BTreeMap<u64, MovieStats>> {
    if !(0.0..=5.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} outside the rating scale"
        )));
    }
    let mut stats: BTreeMap<u64, MovieStats> = BTreeMap::new();
    for r in &table.records {
        let s = stats.entry(r.movie).or_insert(MovieStats {
            successes: 0,
            ratings: 0,
        });
        s.ratings += 1;
        s.successes += (r.rating > threshold) as u64;
    }
    stats.retain(|_, s| s.ratings as usize >= min_count.max(1));
    Ok(stats)
}

pub fn attraction_probs(table: &RatingsTable, threshold: f64, min_count: usize) -> Result<BTreeMap<u64, f64>> {
    Ok(attraction_stats(table, threshold, min_count)?
        .into_iter()
        .map(|(m, s)| (m, s.probability()))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectionMode {
    /// Exactly these movie ids.
    GivenIds(Vec<u64>),
    /// The movies with the largest Bernoulli variance `w (1 - w)`.
    TopVariance,
    /// A seeded uniform sample.
    SeededArbitrary(u64),
}

/// Picks `l` movies and relabels them `1..=l` by descending probability
/// (ties to the smaller movie id). Source movie ids are kept on the profile.
pub fn select_profile(probs: &BTreeMap<u64, f64>, l: usize, mode: &SelectionMode) -> Result<AttractionProfile> {
    if probs.len() < l || l == 0 {
        return Err(Error::TooFewMovies {
            need: l.max(1),
            have: probs.len(),
        });
    }
    let chosen: Vec<(u64, f64)> = match mode {
        SelectionMode::GivenIds(ids) => {
            if ids.len() != l {
                return Err(Error::InvalidParameter(format!("{} ids given for L = {l}", ids.len())));
            }
            let mut seen = std::collections::HashSet::new();
            ids.iter()
                .map(|id| {
                    if !seen.insert(*id) {
                        return Err(Error::InvalidParameter(format!("movie {id} given twice")));
                    }
                    probs
                        .get(id)
                        .map(|&p| (*id, p))
                        .ok_or_else(|| Error::InvalidParameter(format!("movie {id} not in the mapping")))
                })
                .collect::<Result<_>>()?
        }
        SelectionMode::TopVariance => {
            let mut all: Vec<(u64, f64)> = probs.iter().map(|(&m, &p)| (m, p)).collect();
            all.sort_by(|a, b| (b.1 * (1.0 - b.1)).total_cmp(&(a.1 * (1.0 - a.1))).then(a.0.cmp(&b.0)));
            all.truncate(l);
            all
        }
        SelectionMode::SeededArbitrary(seed) => {
            let all: Vec<(u64, f64)> = probs.iter().map(|(&m, &p)| (m, p)).collect();
            let mut rng = RngStream::new(*seed, StreamKind::Environment);
            all.choose_multiple(rng.rng(), l).copied().collect()
        }
    };
    let mut chosen = chosen;
    chosen.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let w = chosen.iter().map(|&(_, p)| p).collect();
    AttractionProfile::new(w)?.with_source_ids(chosen.iter().map(|&(m, _)| m).collect())
}

/// Profile file: CSV with header `item,w,source_id` (`source_id` may be empty).
pub fn write_profile(profile: &AttractionProfile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("item,w,source_id\n");
    for item in profile.items() {
        let source = profile
            .source_ids()
            .map(|ids| ids[item.index()].to_string())
            .unwrap_or_default();
        out.push_str(&format!("{item},{},{source}\n", profile.w(item)));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_profile(path: impl AsRef<Path>) -> Result<AttractionProfile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("item,w,source_id") {
        return Err(Error::Config(format!(
            "{}: expected header item,w,source_id",
            path.display()
        )));
    }
    let mut pairs = Vec::new();
    let mut sources = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Config(format!("{}: malformed row {}", path.display(), n + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad());
        }
        let item: u32 = fields[0].trim().parse().map_err(|_| bad())?;
        let w: f64 = fields[1].trim().parse().map_err(|_| bad())?;
        pairs.push((ItemId(item), w));
        sources.push((item, fields[2].trim().parse::<u64>().ok()));
    }
    let profile = AttractionProfile::from_pairs(&pairs)?;
    sources.sort_by_key(|&(item, _)| item);
    match sources.iter().map(|&(_, s)| s).collect::<Option<Vec<u64>>>() {
        Some(ids) => profile.with_source_ids(ids),
        None => Ok(profile),
    }
}
