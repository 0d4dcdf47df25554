#![no_main]
use fairhin::datasets::{parse_movies, parse_ratings, parse_users, MovieLensOptions, MovieLensRaw};
use libfuzzer_sys::fuzz_target;

mod common;

// users, movies and ratings separated by lines of three dashes
fuzz_target!(|data: &[u8]| {
    let Some((users, rest)) = common::split2(data, b"\n---\n") else { return };
    let Some((movies, ratings)) = common::split2(rest, b"\n---\n") else { return };
    let (Ok(users), Ok(movies), Ok(ratings)) = (parse_users(users), parse_movies(movies), parse_ratings(ratings)) else { return };
    let _ = MovieLensRaw { users, movies, ratings }.into_dataset(&MovieLensOptions::default());
});
