#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SOURCE_WORDS: [&str; 50] = [
    "casa", "perro", "gato", "agua", "fuego", "monte", "río", "pueblo", "camino", "noche", "día", "sol",
    "luna", "pan", "vino", "mesa", "puerta", "libro", "madre", "padre", "hermano", "niño", "mujer",
    "hombre", "árbol", "flor", "campo", "ciudad", "calle", "plaza", "iglesia", "escuela", "trabajo",
    "tiempo", "año", "mano", "ojo", "cabeza", "corazón", "voz", "nieve", "viento", "lluvia", "piedra",
    "puente", "barco", "mar", "tierra", "cielo", "amigo",
];

/// A made-up target-language rendering of a source word.
pub fn translate_word(word: &str, lang: &str) -> String {
    let stem: String = word.chars().rev().collect();
    match lang {
        "arg" => format!("{stem}o"),
        "arn" => format!("k{stem}"),
        "ast" => format!("{stem}u"),
        other => format!("{stem}{other}"),
    }
}

pub fn translate_sentence(sentence: &str, lang: &str) -> String {
    sentence
        .split_whitespace()
        .map(|w| translate_word(w, lang))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_sentence(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| *SOURCE_WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n` pairs for `lang`: mostly word-for-word translations plus a fixed
/// share of duplicates, over-long pairs, repetitive pairs, pairs with an
/// empty side and misaligned pairs.
pub fn synthetic_pairs(lang: &str, n: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(String, String)> = Vec::with_capacity(n);
    while out.len() < n {
        let roll = rng.random_range(0..100);
        let pair = match roll {
            0..=3 if !out.is_empty() => out[rng.random_range(0..out.len())].clone(),
            4..=5 => {
                let s = random_sentence(&mut rng, 82, 90);
                let t = translate_sentence(&s, lang);
                (s, t)
            }
            6..=7 => {
                let w = *SOURCE_WORDS.choose(&mut rng).unwrap();
                let s = format!("{w} {w} {w} {w}");
                (s.clone(), translate_sentence(&s, lang))
            }
            8 => (random_sentence(&mut rng, 3, 6), String::new()),
            9..=14 => {
                let s = random_sentence(&mut rng, 3, 8);
                let other = random_sentence(&mut rng, 3, 8);
                (s, translate_sentence(&other, lang))
            }
            15..=17 => {
                let s = random_sentence(&mut rng, 2, 3);
                let t = translate_sentence(&random_sentence(&mut rng, 9, 12), lang);
                (s, t)
            }
            _ => {
                let s = random_sentence(&mut rng, 3, 8);
                let t = translate_sentence(&s, lang);
                (s, t)
            }
        };
        out.push(pair);
    }
    out
}

pub fn write_tsv(path: &Path, pairs: &[(String, String)]) {
    let text: String = pairs.iter().map(|(s, t)| format!("{s}\t{t}\n")).collect();
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

pub fn write_lines(path: &Path, lines: &[String]) {
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

/// Data files referenced by `manifests/reference.toml`, relative to `dir`.
/// The three parallel corpora hold 500 pairs in total.
pub fn write_reference_data(dir: &Path) {
    let data = dir.join("data");
    for (lang, n, seed) in [("arg", 250, 11), ("arn", 150, 12), ("ast", 100, 13)] {
        write_tsv(&data.join(format!("es-{lang}.tsv")), &synthetic_pairs(lang, n, seed));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let es: Vec<String> = (0..120).map(|_| random_sentence(&mut rng, 3, 8)).collect();
    write_lines(&data.join("mono.es"), &es);
    let arg: Vec<String> = (0..80)
        .map(|_| translate_sentence(&random_sentence(&mut rng, 3, 8), "arg"))
        .collect();
    write_lines(&data.join("mono.arg"), &arg);
    let dev: Vec<String> = (0..30).map(|_| random_sentence(&mut rng, 3, 8)).collect();
    write_lines(&data.join("dev.es"), &dev);
}

pub fn workspace_root() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}
