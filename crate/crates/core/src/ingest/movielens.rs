use std::collections::{HashMap, HashSet};
use std::path::Path;

use log::info;

use super::{InteractionDataset, RawRating};
use crate::error::{Error, Result};

const SEP: &str = "::";

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    // movies.dat titles are Latin-1; only ids and genre names are used.
    let text = String::from_utf8_lossy(&bytes);
    Ok(text
        .split('\n')
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim_end_matches('\r').to_string()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn fields<'a>(line: &'a str, n: usize, file: &str, lineno: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split(SEP).collect();
    if parts.len() != n {
        return Err(Error::Malformed {
            file: file.to_string(),
            line: lineno,
            reason: format!("expected {n} '::'-separated fields, found {}", parts.len()),
        });
    }
    Ok(parts)
}

fn parse_id(s: &str, what: &str, file: &str, line: usize) -> Result<String> {
    s.trim()
        .parse::<u64>()
        .map(|v| v.to_string())
        .map_err(|_| Error::Malformed {
            file: file.to_string(),
            line,
            reason: format!("{what} {s:?} is not an integer"),
        })
}

/// Loads MovieLens 1M (`ratings.dat`, `movies.dat`, `users.dat`).
///
/// Genres become equal fractional weights per movie; gender becomes the user
/// group. Only movies with at least one rating enter the item index.
pub fn load_movielens(
    ratings_path: impl AsRef<Path>,
    movies_path: impl AsRef<Path>,
    users_path: impl AsRef<Path>,
) -> Result<InteractionDataset> {
    let (ratings_path, movies_path, users_path) =
        (ratings_path.as_ref(), movies_path.as_ref(), users_path.as_ref());

    let file = file_name(movies_path);
    let mut genres: HashMap<String, Vec<String>> = HashMap::new();
    for (lineno, line) in read_lines(movies_path)? {
        let f = fields(&line, 3, &file, lineno)?;
        let id = parse_id(f[0], "MovieID", &file, lineno)?;
        let gs = f[2]
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(str::to_string)
            .collect();
        if genres.insert(id.clone(), gs).is_some() {
            return Err(Error::Malformed {
                file,
                line: lineno,
                reason: format!("duplicate MovieID {id}"),
            });
        }
    }

    let file = file_name(users_path);
    let mut gender: HashMap<String, String> = HashMap::new();
    for (lineno, line) in read_lines(users_path)? {
        let f = fields(&line, 5, &file, lineno)?;
        let id = parse_id(f[0], "UserID", &file, lineno)?;
        let g = f[1].trim();
        if g != "M" && g != "F" {
            return Err(Error::Malformed {
                file,
                line: lineno,
                reason: format!("gender {g:?} is not M or F"),
            });
        }
        if gender.insert(id.clone(), g.to_string()).is_some() {
            return Err(Error::Malformed {
                file,
                line: lineno,
                reason: format!("duplicate UserID {id}"),
            });
        }
    }

    let file = file_name(ratings_path);
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut ratings = Vec::new();
    for (lineno, line) in read_lines(ratings_path)? {
        let f = fields(&line, 4, &file, lineno)?;
        let user = parse_id(f[0], "UserID", &file, lineno)?;
        let item = parse_id(f[1], "MovieID", &file, lineno)?;
        let rating: u8 = f[2].trim().parse().map_err(|_| Error::Malformed {
            file: file.clone(),
            line: lineno,
            reason: format!("rating {:?} is not an integer", f[2]),
        })?;
        if !(1..=5).contains(&rating) {
            return Err(Error::Malformed {
                file,
                line: lineno,
                reason: format!("rating {rating} outside 1..=5"),
            });
        }
        let timestamp: i64 = f[3].trim().parse().map_err(|_| Error::Malformed {
            file: file.clone(),
            line: lineno,
            reason: format!("timestamp {:?} is not an integer", f[3]),
        })?;
        if !genres.contains_key(&item) {
            return Err(Error::UnknownReference {
                file,
                line: lineno,
                kind: "movie",
                id: item,
            });
        }
        if !gender.contains_key(&user) {
            return Err(Error::UnknownReference {
                file,
                line: lineno,
                kind: "user",
                id: user,
            });
        }
        if !seen.insert((user.clone(), item.clone())) {
            return Err(Error::DuplicateRating {
                file,
                line: lineno,
                user,
                item,
            });
        }
        ratings.push(RawRating {
            user,
            item,
            rating: rating as f64,
            timestamp,
        });
    }

    let dataset = InteractionDataset::assemble(
        ratings,
        |u| gender[u].clone(),
        |i| genres[i].clone(),
        (1.0, 5.0),
        "movielens-1m",
    );
    info!(
        "movielens: {} users, {} rated movies ({} listed), {} ratings",
        dataset.n_users(),
        dataset.n_items(),
        genres.len(),
        dataset.n_interactions()
    );
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    struct Fixture {
        dir: tempfile::TempDir,
    }

    impl Fixture {
        fn new(ratings: &str, movies: &str, users: &str) -> Self {
            let dir = tempfile::tempdir().unwrap();
            fs::write(dir.path().join("ratings.dat"), ratings).unwrap();
            fs::write(dir.path().join("movies.dat"), movies).unwrap();
            fs::write(dir.path().join("users.dat"), users).unwrap();
            Fixture { dir }
        }

        fn load(&self) -> Result<InteractionDataset> {
            let p = self.dir.path();
            load_movielens(p.join("ratings.dat"), p.join("movies.dat"), p.join("users.dat"))
        }
    }

    const MOVIES: &str = "10::GoldenEye (1995)::Action|Adventure|Thriller\n\
                          20::Heat (1995)::Action|Thriller\n";
    const USERS: &str = "1::F::1::10::48067\n2::M::56::16::70072\n";

    #[test]
    fn single_record() {
        let fx = Fixture::new("1::10::5::978300760\n", MOVIES, USERS);
        let d = fx.load().unwrap();
        assert_eq!(d.n_interactions(), 1);
        assert_eq!(d.interactions[0].rating, 5.0);
        assert_eq!(d.interactions[0].timestamp, 978300760);
        assert_eq!(d.n_users(), 1);
        assert_eq!(d.n_items(), 1);
        assert_eq!(d.user_groups.group_of(0), "F");
        d.validate().unwrap();
    }

    #[test]
    fn genres_get_equal_weights() {
        let fx = Fixture::new("1::20::4::1\n2::10::3::2\n", MOVIES, USERS);
        let d = fx.load().unwrap();
        let w = &d.item_categories;
        let heat = d.items.get("20").unwrap();
        let action = w.label_index("Action").unwrap();
        let thriller = w.label_index("Thriller").unwrap();
        assert_eq!(w.weight(heat, action), 0.5);
        assert_eq!(w.weight(heat, thriller), 0.5);
        let goldeneye = d.items.get("10").unwrap();
        assert!((w.weight(goldeneye, action) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let fx = Fixture::new("1::10::5::1\n1::20::5\n", MOVIES, USERS);
        match fx.load() {
            Err(Error::Malformed { line, file, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(file, "ratings.dat");
            }
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_rating_rejected() {
        let fx = Fixture::new("1::10::5::1\n1::10::3::2\n", MOVIES, USERS);
        assert!(matches!(fx.load(), Err(Error::DuplicateRating { line: 2, .. })));
    }

    #[test]
    fn unknown_movie_rejected() {
        let fx = Fixture::new("1::99::5::1\n", MOVIES, USERS);
        assert!(matches!(
            fx.load(),
            Err(Error::UnknownReference { kind: "movie", .. })
        ));
    }

    #[test]
    fn rating_out_of_scale_rejected() {
        let fx = Fixture::new("1::10::6::1\n", MOVIES, USERS);
        assert!(matches!(fx.load(), Err(Error::Malformed { line: 1, .. })));
    }

    #[test]
    fn line_order_does_not_matter() {
        let a = Fixture::new("2::10::3::2\n1::20::4::1\n1::10::5::3\n", MOVIES, USERS);
        let b = Fixture::new("1::10::5::3\n2::10::3::2\n1::20::4::1\n", MOVIES, USERS);
        assert_eq!(a.load().unwrap(), b.load().unwrap());
    }
}
