use checkworth_core::embedding::{EmbeddingTable, Provenance};
use checkworth_core::encoder::{EncodedSentence, TokenRef};
use checkworth_core::network::{check_gradients, AttentionKind, ModelParams, ModelShape};
use checkworth_core::rng::rng_for;
use rand::Rng;

const VOCAB: usize = 5;

/// A random sentence and model with `T <= 5`, `H <= 4`, `D <= 6`, and an
/// embedding block of width `1..=D` followed by a one-hot block.
fn case(
    seed: u64,
    attention: AttentionKind,
) -> (EncodedSentence, EmbeddingTable, ModelParams, f64) {
    let mut rng = rng_for(seed, "gradient-case", &[]);
    let steps = rng.gen_range(1..=5);
    let d = rng.gen_range(1..=6);
    let hidden = rng.gen_range(1..=4);
    let emb = rng.gen_range(1..=d);
    let tags = d - emb;
    let data = (0..VOCAB * emb).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let table = EmbeddingTable::new(emb, data, Provenance::Random).unwrap();
    let token_refs: Vec<TokenRef> = (0..steps)
        .map(|_| TokenRef {
            word: rng.gen_range(0..VOCAB),
            dep: if tags > 0 { rng.gen_range(0..tags) } else { 0 },
        })
        .collect();
    let mut rows = vec![0.0; steps * d];
    if tags > 0 {
        for (t, r) in token_refs.iter().enumerate() {
            rows[t * d + emb + r.dep] = 1.0;
        }
    }
    let encoded = EncodedSentence {
        width: d,
        embedding_width: emb,
        rows,
        token_refs,
    };
    let shape = ModelShape {
        input_size: d,
        hidden_size: hidden,
        dense_size: rng.gen_range(1..=3),
        attention,
    };
    let mut params = ModelParams::zeros(shape).unwrap();
    for t in params.tensors_mut() {
        t.data
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    (encoded, table, params, rng.gen_range(0.0..=1.0))
}

fn worst_over(seeds: std::ops::Range<u64>, attention: AttentionKind) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let (enc, table, params, label) = case(seed, attention);
        let check = check_gradients(&enc, Some(&table), &params, label, 1e-5).unwrap();
        assert!(check.checked > 0);
        assert!(
            check.max_rel_error < 1e-4,
            "seed {seed}: {} at {:?} {:?}",
            check.max_rel_error,
            check.worst,
            check.worst_values
        );
        worst = worst.max(check.max_rel_error);
    }
    worst
}

#[test]
fn affine_attention_gradients_match_finite_differences() {
    worst_over(0..100, AttentionKind::Affine);
}

#[test]
fn mlp_attention_gradients_match_finite_differences() {
    worst_over(1000..1100, AttentionKind::TanhMlp { size: 3 });
}

#[test]
fn repeated_words_accumulate_into_one_row() {
    let (mut enc, table, params, label) = case(7, AttentionKind::Affine);
    for r in &mut enc.token_refs {
        r.word = 2;
    }
    let check = check_gradients(&enc, Some(&table), &params, label, 1e-5).unwrap();
    assert!(check.max_rel_error < 1e-4);
}
