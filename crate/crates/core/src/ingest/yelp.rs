use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use log::{info, warn};
use serde_json::Value;

use super::{InteractionDataset, RawRating};
use crate::error::{Error, Result};

/// Region/cuisine labels kept by default.
pub const DEFAULT_REGION_LABELS: &str = include_str!("../../data/yelp_region_labels.txt");

#[derive(Debug, Clone)]
pub struct YelpOptions {
    /// A label survives if at least this many city restaurants carry it.
    pub min_label_count: usize,
    /// A user survives with at least this many (deduplicated) reviews.
    pub min_user_ratings: usize,
    /// Allow-list of region labels; `None` uses [`DEFAULT_REGION_LABELS`].
    pub region_labels: Option<Vec<String>>,
    /// Fail on any malformed JSON line instead of skipping it.
    pub strict: bool,
}

impl Default for YelpOptions {
    fn default() -> Self {
        YelpOptions {
            min_label_count: 50,
            min_user_ratings: 50,
            region_labels: None,
            strict: false,
        }
    }
}

/// Parses a label allow-list: one label per line, `#` comments.
pub fn parse_label_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn for_each_record(path: &Path, strict: bool, mut f: impl FnMut(&Value)) -> Result<()> {
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut bad = 0usize;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(&line) {
            Ok(v) if v.is_object() => f(&v),
            _ => {
                bad += 1;
                warn!("{}:{}: malformed JSON record skipped", path.display(), n + 1);
            }
        }
    }
    if bad > 0 && strict {
        return Err(Error::MalformedJson {
            file: path.display().to_string(),
            count: bad,
        });
    }
    Ok(())
}

fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

/// Categories come as `"A, B"` in recent dumps and as `["A", "B"]` in older ones.
fn categories(v: &Value) -> Vec<String> {
    match v.get("categories") {
        Some(Value::String(s)) => s
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect(),
        Some(Value::Array(a)) => a
            .iter()
            .filter_map(Value::as_str)
            .map(|c| c.trim().to_string())
            .collect(),
        _ => Vec::new(),
    }
}

fn parse_date(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .ok()
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
        .map(|dt| dt.and_utc().timestamp())
}

struct Business {
    city: String,
    categories: Vec<String>,
    takeout: bool,
}

/// Builds a restaurant-rating dataset for one city from the Yelp Open Dataset.
///
/// A business is a restaurant if its attributes contain `RestaurantsTakeOut`,
/// a photo of it is labelled `food`, or its categories contain `Restaurants`.
/// Labels are restricted to the region allow-list and to those carried by at
/// least `min_label_count` restaurants; repeated reviews of one business by
/// one user keep the most recent; users need `min_user_ratings` reviews.
pub fn load_yelp_restaurants(
    business_path: impl AsRef<Path>,
    review_path: impl AsRef<Path>,
    photo_path: impl AsRef<Path>,
    city: &str,
    options: &YelpOptions,
) -> Result<InteractionDataset> {
    let mut businesses: HashMap<String, Business> = HashMap::new();
    for_each_record(business_path.as_ref(), options.strict, |v| {
        let Some(id) = str_field(v, "business_id") else {
            return;
        };
        let takeout = v
            .get("attributes")
            .and_then(Value::as_object)
            .is_some_and(|a| a.contains_key("RestaurantsTakeOut"));
        businesses.insert(
            id.to_string(),
            Business {
                city: str_field(v, "city").unwrap_or_default().trim().to_string(),
                categories: categories(v),
                takeout,
            },
        );
    })?;

    let mut food_photo: HashSet<String> = HashSet::new();
    for_each_record(photo_path.as_ref(), options.strict, |v| {
        if let (Some(id), Some("food")) = (str_field(v, "business_id"), str_field(v, "label")) {
            food_photo.insert(id.to_string());
        }
    })?;

    let allow: HashSet<String> = match &options.region_labels {
        Some(l) => l.iter().cloned().collect(),
        None => parse_label_list(DEFAULT_REGION_LABELS).into_iter().collect(),
    };
    let city_lc = city.trim().to_lowercase();
    let restaurants: BTreeMap<&str, Vec<&String>> = businesses
        .iter()
        .filter(|(_, b)| b.city.to_lowercase() == city_lc)
        .filter(|(id, b)| {
            b.takeout
                || food_photo.contains(id.as_str())
                || b.categories.iter().any(|c| c == "Restaurants")
        })
        .map(|(id, b)| {
            let labels = b.categories.iter().filter(|c| allow.contains(*c)).collect();
            (id.as_str(), labels)
        })
        .collect();

    let mut label_counts: BTreeMap<&String, usize> = BTreeMap::new();
    for labels in restaurants.values() {
        for l in labels.iter().collect::<BTreeSet<_>>() {
            *label_counts.entry(l).or_default() += 1;
        }
    }
    let kept_labels: BTreeSet<&String> = label_counts
        .into_iter()
        .filter(|&(_, n)| n >= options.min_label_count)
        .map(|(l, _)| l)
        .collect();
    let kept: HashMap<&str, Vec<String>> = restaurants
        .into_iter()
        .filter_map(|(id, labels)| {
            let ls: Vec<String> = labels
                .into_iter()
                .filter(|l| kept_labels.contains(l))
                .cloned()
                .collect();
            (!ls.is_empty()).then_some((id, ls))
        })
        .collect();
    info!(
        "yelp {city}: {} labels, {} restaurants after label filter",
        kept_labels.len(),
        kept.len()
    );

    // (user, business) -> (timestamp, review_id, stars)
    let mut latest: HashMap<(String, String), (i64, String, f64)> = HashMap::new();
    for_each_record(review_path.as_ref(), options.strict, |v| {
        let (Some(user), Some(biz)) = (str_field(v, "user_id"), str_field(v, "business_id")) else {
            return;
        };
        if !kept.contains_key(biz) {
            return;
        }
        let Some(stars) = v.get("stars").and_then(Value::as_f64) else {
            return;
        };
        let ts = str_field(v, "date").and_then(parse_date).unwrap_or(0);
        let rid = str_field(v, "review_id").unwrap_or_default().to_string();
        let candidate = (ts, rid, stars);
        latest
            .entry((user.to_string(), biz.to_string()))
            .and_modify(|cur| {
                if (candidate.0, &candidate.1) > (cur.0, &cur.1) {
                    *cur = candidate.clone();
                }
            })
            .or_insert(candidate);
    })?;

    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for (user, _) in latest.keys() {
        *per_user.entry(user.as_str()).or_default() += 1;
    }
    let ratings: Vec<RawRating> = latest
        .iter()
        .filter(|((u, _), _)| per_user[u.as_str()] >= options.min_user_ratings)
        .map(|((u, b), (ts, _, stars))| RawRating {
            user: u.clone(),
            item: b.clone(),
            rating: *stars,
            timestamp: *ts,
        })
        .collect();
    if ratings.is_empty() {
        return Err(Error::EmptyCohort(format!(
            "no Yelp users in {city} with at least {} restaurant reviews",
            options.min_user_ratings
        )));
    }

    let dataset = InteractionDataset::assemble(
        ratings,
        |_| "unknown".to_string(),
        |b| kept[b].clone(),
        (1.0, 5.0),
        "yelp",
    );
    info!(
        "yelp {city}: {} users, {} restaurants, {} ratings",
        dataset.n_users(),
        dataset.n_items(),
        dataset.n_interactions()
    );
    Ok(dataset)
}
