//! Seeded synthetic corpora with known ground truth.
//!
//! Real-user corpora are private, so training and evaluation are exercised on
//! dialogs whose turn quality is planted by construction.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dialog::{Dialog, Source, Turn};

const GOOD_RESPONSES: &[&str] = &[
    "that sounds like a lot of fun what did you enjoy most about it",
    "i watched that movie too the soundtrack was beautiful",
    "good point i think the ocean is a fascinating place to explore",
    "tell me more about your favorite band i would love to hear",
    "cooking at home is a great way to relax after a long day",
    "i agree hiking in the mountains can be really refreshing",
    "did you know octopuses have three hearts and blue blood",
    "that is a clever idea what inspired you to try it",
];

const BAD_RESPONSES: &[&str] = &[
    "i do not know banana banana",
    "error the the request request",
    "cars cars are are vehicles",
    "please say that again i missed it",
    "let us talk about taxes instead",
    "i repeat i repeat i repeat",
    "unknown command unknown command",
    "sorry sorry sorry sorry",
];

const POSITIVE_REPLIES: &[&str] = &[
    "wow i love that",
    "that is great",
    "haha that is funny",
    "yeah cool",
    "awesome tell me more",
    "nice i enjoyed that",
];

const NEGATIVE_REPLIES: &[&str] = &[
    "that is stupid",
    "you are boring",
    "what nonsense",
    "ugh that is wrong",
    "this is terrible",
    "that makes no sense and it is annoying",
];

const NEUTRAL_REPLIES: &[&str] = &["okay", "hmm", "what about sports", "i see", "let us talk about music"];

const STOP_REPLIES: &[&str] = &["stop", "alexa stop", "goodbye"];

/// Spoken dialogs whose binary turn quality (stored as `turn_quality_3p`)
/// drives the sentiment of the next user utterance: good responses draw
/// positive replies, bad ones negative replies or a stop request. A stop ends
/// the dialog with an unlabeled closing turn.
pub fn planted_quality_corpus(n_dialogs: usize, max_turns: usize, seed: u64) -> Vec<Dialog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_dialogs)
        .map(|k| {
            let mut turns = Vec::new();
            let mut user = "hello there".to_string();
            for index in 1..=max_turns as u32 {
                let good = rng.random_bool(0.55);
                let response = if good { GOOD_RESPONSES } else { BAD_RESPONSES }
                    .choose(&mut rng)
                    .unwrap();
                turns.push(Turn::new(index, user.clone(), *response).with_quality(i64::from(good)));
                let roll: f64 = rng.random();
                let reply = if good {
                    if roll < 0.85 {
                        POSITIVE_REPLIES
                    } else {
                        NEUTRAL_REPLIES
                    }
                } else if roll < 0.65 {
                    NEGATIVE_REPLIES
                } else if roll < 0.85 {
                    STOP_REPLIES
                } else {
                    NEUTRAL_REPLIES
                };
                user = reply.choose(&mut rng).unwrap().to_string();
                if STOP_REPLIES.contains(&user.as_str()) {
                    break;
                }
            }
            let closing = turns.len() as u32 + 1;
            turns.push(Turn::new(closing, user, "goodbye it was nice talking to you"));
            let labeled: Vec<f64> = turns
                .iter()
                .filter_map(|t| t.turn_quality_3p)
                .map(|q| q as f64)
                .collect();
            let mut d = Dialog::new(format!("p{k:04}"), Source::Spoken, turns);
            if !labeled.is_empty() {
                let frac = labeled.iter().sum::<f64>() / labeled.len() as f64;
                d.rating_3p = Some(1.0 + 4.0 * frac);
            }
            d
        })
        .collect()
}

const FILLER: &[&str] = &[
    "the", "weather", "today", "river", "music", "train", "window", "garden", "paper", "story", "yellow", "walk",
    "table", "coffee", "morning", "city", "planet", "history", "game", "phone",
];

/// Written dialogs where a response is labeled 1 exactly when it contains the
/// keyword `splendid`; everything else is random filler.
pub fn keyword_corpus(n_dialogs: usize, turns_per_dialog: usize, seed: u64) -> Vec<Dialog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = |rng: &mut ChaCha8Rng, n: usize| -> Vec<&'static str> {
        (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect()
    };
    (0..n_dialogs)
        .map(|k| {
            let turns = (1..=turns_per_dialog as u32)
                .map(|index| {
                    let user = words(&mut rng, 4).join(" ");
                    let mut resp = words(&mut rng, 5);
                    let positive = rng.random_bool(0.5);
                    if positive {
                        let at = rng.random_range(0..=resp.len());
                        resp.insert(at, "splendid");
                    }
                    Turn::new(index, user, resp.join(" ")).with_quality(i64::from(positive))
                })
                .collect();
            Dialog::new(format!("k{k:04}"), Source::Written, turns)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialog::LabelScale;

    #[test]
    fn corpora_are_valid_and_seeded() {
        let a = planted_quality_corpus(20, 8, 3);
        assert_eq!(a, planted_quality_corpus(20, 8, 3));
        assert_ne!(a, planted_quality_corpus(20, 8, 4));
        for d in &a {
            d.validate(LabelScale::Binary01).unwrap();
            assert!(d.turns.last().unwrap().turn_quality_3p.is_none());
        }
        for d in keyword_corpus(5, 4, 1) {
            d.validate(LabelScale::Binary01).unwrap();
            for t in &d.turns {
                assert_eq!(t.system_response.contains("splendid"), t.turn_quality_3p == Some(1));
            }
        }
    }
}
