//! Synthetic workloads shared by the benchmarks.

use lrmt_core::{Corpus, LangCode, SentencePair};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 24] = [
    "casa", "perro", "gato", "agua", "monte", "río", "pueblo", "camino", "noche", "sol", "pan", "vino",
    "mesa", "puerta", "libro", "madre", "padre", "niño", "campo", "calle", "plaza", "tiempo", "mano", "cielo",
];

fn sentence(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<&'static str> {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect()
}

/// `n` pairs whose target side is a word-by-word rewrite of the source.
pub fn parallel(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..n)
        .map(|_| {
            let s = sentence(&mut rng, 3, 20);
            let t: Vec<String> = s.iter().map(|w| w.chars().rev().collect::<String>() + "o").collect();
            SentencePair::new(s.join(" "), t.join(" "))
        })
        .collect();
    Corpus::from_pairs(LangCode::new("es").unwrap(), LangCode::new("arg").unwrap(), items)
}

/// Hypothesis and reference lines that overlap partially.
pub fn hyp_ref(n: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = sentence(&mut rng, 5, 30);
            let h: Vec<&str> = r
                .iter()
                .map(|w| if rng.random_bool(0.2) { *WORDS.choose(&mut rng).unwrap() } else { w })
                .collect();
            (format!("{}.", h.join(" ")), format!("{}.", r.join(" ")))
        })
        .unzip()
}
