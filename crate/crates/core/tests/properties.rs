use proptest::prelude::*;
use turnqual::dialog::{read_dialogs, write_dialogs, Dialog, LabelScale, Source, Turn};
use turnqual::encoder::{serialize_context, EncoderSpec, HashBagEncoder};
use turnqual::model::{LinearHead, Mode, ModelConfig, QualityModel};

fn utterance() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z]{1,7}", 1..6).prop_map(|w| w.join(" "))
}

fn dialog() -> impl Strategy<Value = Dialog> {
    (
        prop::collection::vec((utterance(), utterance(), prop::option::of(0i64..3)), 1..8),
        any::<bool>(),
        prop::option::of(1.0f64..=5.0),
    )
        .prop_map(|(turns, spoken, rating)| {
            let turns = turns
                .into_iter()
                .enumerate()
                .map(|(i, (u, s, q))| {
                    let mut t = Turn::new(i as u32 + 1, u, s);
                    t.turn_quality_3p = q;
                    t
                })
                .collect();
            let source = if spoken { Source::Spoken } else { Source::Written };
            let mut d = Dialog::new("d", source, turns);
            d.rating_3p = rating;
            d
        })
}

fn model(dim: usize) -> QualityModel {
    let mut head = LinearHead::zeros(dim);
    for (k, w) in head.weights.iter_mut().enumerate() {
        *w = ((k * 37 % 11) as f32 - 5.0) / 3.0;
    }
    head.bias = 0.25;
    QualityModel {
        config: ModelConfig::new(Mode::Regression, EncoderSpec::hash_bag(dim)),
        head,
        best_epoch: 1,
        dev_score: None,
        metadata: Default::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jsonl_roundtrip(d in dialog()) {
        let mut buf = Vec::new();
        write_dialogs(&mut buf, std::slice::from_ref(&d)).unwrap();
        let back = read_dialogs(buf.as_slice(), LabelScale::Ordinal012).unwrap();
        prop_assert_eq!(back, vec![d]);
    }

    #[test]
    fn later_turns_never_change_a_score(d in dialog(), pick in any::<prop::sample::Index>(), junk in utterance()) {
        let enc = HashBagEncoder::new(EncoderSpec::hash_bag(64)).unwrap();
        let m = model(64);
        let i = d.turns[pick.index(d.turns.len())].index;
        let before_text = serialize_context(&d, i, 512).unwrap().text;
        let before = m.predict_turn(&enc, &d, i).unwrap();

        let mut edited = d.clone();
        for t in edited.turns.iter_mut().filter(|t| t.index > i) {
            t.user_utterance = junk.clone();
            t.system_response = junk.clone();
        }
        let last = edited.turns.last().unwrap().index;
        edited.turns.push(Turn::new(last + 1, junk.clone(), junk.clone()));

        prop_assert_eq!(serialize_context(&edited, i, 512).unwrap().text, before_text);
        prop_assert_eq!(m.predict_turn(&enc, &edited, i).unwrap().to_bits(), before.to_bits());
    }
}
