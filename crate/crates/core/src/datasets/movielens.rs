//! MovieLens-1M loader.
//!
//! Reads `users.dat`, `movies.dat` and `ratings.dat` (fields separated by
//! `::`, Latin-1 text). Users whose occupation is on the removal list are
//! dropped; every rating of a kept user becomes a like-edge and the
//! occupation becomes the user's career.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use log::info;

use super::{Dataset, DatasetError};
use crate::hin::{build_graph, EdgeSpec, Group, NodeId, NodeSpec, ProtectedAttribute, Schema};

/// Occupation names by code, as documented with the dataset.
pub const OCCUPATIONS: [&str; 21] = [
    "other",
    "academic/educator",
    "artist",
    "clerical/admin",
    "college/grad student",
    "customer service",
    "doctor/health care",
    "executive/managerial",
    "farmer",
    "homemaker",
    "K-12 student",
    "lawyer",
    "programmer",
    "retired",
    "sales/marketing",
    "scientist",
    "self-employed",
    "technician/engineer",
    "tradesman/craftsman",
    "unemployed",
    "writer",
];

/// other, K-12 student, retired, unemployed.
pub const DEFAULT_REMOVED_OCCUPATIONS: [u8; 4] = [0, 10, 13, 19];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserRow {
    pub id: u32,
    pub gender: Group,
    pub occupation: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MovieRow {
    pub id: u32,
    pub title: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct RatingRow {
    pub user: u32,
    pub movie: u32,
}

/// The three raw tables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MovieLensRaw {
    pub users: Vec<UserRow>,
    pub movies: Vec<MovieRow>,
    pub ratings: Vec<RatingRow>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MovieLensOptions {
    pub removed_occupations: Vec<u8>,
}

impl Default for MovieLensOptions {
    fn default() -> Self {
        Self { removed_occupations: DEFAULT_REMOVED_OCCUPATIONS.to_vec() }
    }
}

fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

fn malformed(file: &str, line: usize, msg: impl Into<String>) -> DatasetError {
    DatasetError::Malformed { file: file.to_string(), line, msg: msg.into() }
}

fn fields<'a>(file: &str, lineno: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>, DatasetError> {
    let f: Vec<&str> = line.split("::").collect();
    if f.len() != n {
        return Err(malformed(file, lineno, format!("expected {n} '::'-separated fields, got {}", f.len())));
    }
    Ok(f)
}

fn num<T: std::str::FromStr>(file: &str, lineno: usize, s: &str, what: &str) -> Result<T, DatasetError> {
    s.trim().parse().map_err(|_| malformed(file, lineno, format!("bad {what} {s:?}")))
}

fn lines(bytes: &[u8]) -> impl Iterator<Item = (usize, String)> + '_ {
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, l)| (i + 1, latin1(l.strip_suffix(b"\r").unwrap_or(l))))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// `UserID::Gender::Age::Occupation::Zip-code`
pub fn parse_users(bytes: &[u8]) -> Result<Vec<UserRow>, DatasetError> {
    let mut out = Vec::new();
    for (lineno, line) in lines(bytes) {
        let f = fields("users.dat", lineno, &line, 5)?;
        let gender = match f[1] {
            "M" => Group::G0,
            "F" => Group::G1,
            other => return Err(malformed("users.dat", lineno, format!("gender must be M or F, got {other:?}"))),
        };
        let occupation: u8 = num("users.dat", lineno, f[3], "occupation")?;
        if occupation as usize >= OCCUPATIONS.len() {
            return Err(malformed("users.dat", lineno, format!("unknown occupation code {occupation}")));
        }
        out.push(UserRow { id: num("users.dat", lineno, f[0], "user id")?, gender, occupation });
    }
    Ok(out)
}

/// `MovieID::Title::Genres`
pub fn parse_movies(bytes: &[u8]) -> Result<Vec<MovieRow>, DatasetError> {
    let mut out = Vec::new();
    for (lineno, line) in lines(bytes) {
        let f = fields("movies.dat", lineno, &line, 3)?;
        out.push(MovieRow { id: num("movies.dat", lineno, f[0], "movie id")?, title: f[1].to_string() });
    }
    Ok(out)
}

/// `UserID::MovieID::Rating::Timestamp`; the rating value is ignored.
pub fn parse_ratings(bytes: &[u8]) -> Result<Vec<RatingRow>, DatasetError> {
    let mut out = Vec::new();
    for (lineno, line) in lines(bytes) {
        let f = fields("ratings.dat", lineno, &line, 4)?;
        let _: f64 = num("ratings.dat", lineno, f[2], "rating")?;
        out.push(RatingRow { user: num("ratings.dat", lineno, f[0], "user id")?, movie: num("ratings.dat", lineno, f[1], "movie id")? });
    }
    Ok(out)
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

fn career_name(code: u8) -> String {
    format!("career:{}", OCCUPATIONS[code as usize].replace(' ', "_"))
}

impl MovieLensRaw {
    pub fn read_dir(dir: &Path) -> Result<Self, DatasetError> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => DatasetError::MissingFile(p.display().to_string()),
                _ => DatasetError::Io(e),
            })
        };
        Ok(Self {
            users: parse_users(&read("users.dat")?)?,
            movies: parse_movies(&read("movies.dat")?)?,
            ratings: parse_ratings(&read("ratings.dat")?)?,
        })
    }

    /// Builds the user–movie–career graph.
    pub fn into_dataset(self, opts: &MovieLensOptions) -> Result<Dataset, DatasetError> {
        let removed: BTreeSet<u8> = opts.removed_occupations.iter().copied().collect();
        let mut users: BTreeMap<u32, &UserRow> = BTreeMap::new();
        for u in &self.users {
            if users.insert(u.id, u).is_some() {
                return Err(malformed("users.dat", 0, format!("duplicate user id {}", u.id)));
            }
        }
        let known: BTreeSet<u32> = users.keys().copied().collect();
        users.retain(|_, u| !removed.contains(&u.occupation));
        let mut titles: HashMap<u32, &str> = HashMap::new();
        for m in &self.movies {
            if titles.insert(m.id, &m.title).is_some() {
                return Err(malformed("movies.dat", 0, format!("duplicate movie id {}", m.id)));
            }
        }
        let mut rated: BTreeSet<(u32, u32)> = BTreeSet::new();
        for r in &self.ratings {
            if !users.contains_key(&r.user) {
                if !known.contains(&r.user) {
                    return Err(malformed("ratings.dat", 0, format!("rating references unknown user {}", r.user)));
                }
                continue;
            }
            if !titles.contains_key(&r.movie) {
                return Err(malformed("ratings.dat", 0, format!("rating references unknown movie {}", r.movie)));
            }
            rated.insert((r.user, r.movie));
        }
        let movies: BTreeSet<u32> = rated.iter().map(|&(_, m)| m).collect();
        let careers: BTreeSet<u8> = users.values().map(|u| u.occupation).collect();

        let mut schema = Schema::new();
        let user_t = schema.add_type("user");
        let item_t = schema.add_type("item");
        let career_t = schema.add_type("career");
        let like = schema.add_relation("like", user_t, item_t)?;
        let choose = schema.add_relation("choose", user_t, career_t)?;

        let mut nodes = Vec::with_capacity(users.len() + movies.len() + careers.len());
        let mut next = 0u32;
        let mut add = |t, name: String| {
            let id = NodeId(next);
            next += 1;
            nodes.push(NodeSpec { id, node_type: t, name });
            id
        };
        let user_ids: HashMap<u32, NodeId> = users.keys().map(|&u| (u, add(user_t, format!("user:{u}")))).collect();
        let movie_ids: HashMap<u32, NodeId> = movies.iter().map(|&m| (m, add(item_t, format!("movie:{m}")))).collect();
        let career_ids: HashMap<u8, NodeId> = careers.iter().map(|&c| (c, add(career_t, career_name(c)))).collect();

        let mut edges: Vec<EdgeSpec> =
            rated.iter().map(|(u, m)| EdgeSpec { src: user_ids[u], dst: movie_ids[m], relation: like }).collect();
        let mut labels = Vec::with_capacity(users.len());
        let mut groups = Vec::with_capacity(users.len());
        for (id, u) in &users {
            let (v, c) = (user_ids[id], career_ids[&u.occupation]);
            edges.push(EdgeSpec { src: v, dst: c, relation: choose });
            labels.push((v, c));
            groups.push((v, u.gender));
        }
        labels.sort_unstable();
        let item_texts = movies.iter().map(|m| (movie_ids[m], tokenize(titles[m]))).collect();
        let graph = build_graph(
            schema,
            nodes,
            edges,
            ProtectedAttribute { name: "gender".into(), node_type: user_t, group_names: ["M".into(), "F".into()], labels: groups },
        )?;
        info!(
            "movielens: {} users ({} M / {} F), {} movies, {} careers, {} ratings",
            users.len(),
            graph.group_size(Group::G0),
            graph.group_size(Group::G1),
            movies.len(),
            careers.len(),
            rated.len()
        );
        Ok(Dataset { graph, labels, item_texts })
    }
}

pub fn load_movielens(dir: &Path, opts: &MovieLensOptions) -> Result<Dataset, DatasetError> {
    MovieLensRaw::read_dir(dir)?.into_dataset(opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const USERS: &[u8] = b"1::F::1::10::48067\n2::M::56::16::70072\n3::M::25::13::55117\n4::M::45::16::02460\n";
    const MOVIES: &[u8] = b"1::Toy Story (1995)::Animation|Children's\n2::Jumanji (1995)::Adventure\n3::Caf\xe9 (1999)::Drama\n";
    const RATINGS: &[u8] = b"1::1::5::978300760\n2::1::1::978300761\n2::2::3::978300762\n3::3::4::978300763\n4::2::5::978300764\n";

    fn raw() -> MovieLensRaw {
        MovieLensRaw { users: parse_users(USERS).unwrap(), movies: parse_movies(MOVIES).unwrap(), ratings: parse_ratings(RATINGS).unwrap() }
    }

    #[test]
    fn removal_list_and_edges() {
        let ds = raw().into_dataset(&MovieLensOptions::default()).unwrap();
        let g = &ds.graph;
        // user 1 (K-12) and user 3 (retired) are dropped; movie 3 only rated by user 3
        assert!(g.node_by_name("user:1").is_none() && g.node_by_name("user:3").is_none());
        assert!(g.node_by_name("movie:3").is_none());
        assert_eq!(ds.labels.len(), 2);
        let item = g.schema().type_id("item").unwrap();
        let u2 = g.node_by_name("user:2").unwrap();
        // 1-star and 3-star ratings both give one edge each
        assert_eq!(g.neighbors_by_type(u2, item).unwrap().len(), 2);
        assert_eq!(g.nodes_of_type(g.schema().type_id("career").unwrap()).len(), 1);
        assert_eq!(g.group_size(Group::G0), 2);
    }

    #[test]
    fn keep_everything_when_nothing_removed() {
        let ds = raw().into_dataset(&MovieLensOptions { removed_occupations: vec![] }).unwrap();
        assert_eq!(ds.labels.len(), 4);
        let m3 = ds.graph.node_by_name("movie:3").unwrap();
        assert_eq!(ds.item_texts[&m3], vec!["café", "1999"]);
    }

    #[test]
    fn malformed_lines_are_reported() {
        match parse_users(b"1::F::1::10::48067\n2::X::56::16::70072\n") {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_ratings(b"1::1\n").is_err());
        assert!(parse_users(b"1::F::1::99::1\n").is_err());
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("Toy Story (1995)"), vec!["toy", "story", "1995"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
    }

    #[test]
    fn missing_dir() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(load_movielens(d.path(), &MovieLensOptions::default()), Err(DatasetError::MissingFile(_))));
    }
}
