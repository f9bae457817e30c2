use std::sync::OnceLock;

use lmstego::baselines::{BlockKey, HuffmanTree};
use lmstego::bits::HEADER_BITS;
use lmstego::metrics::kl_divergence;
use lmstego::source_coding::{bits_to_text, text_to_bits, TextMessage};
use lmstego::{
    corpus, decode, encode, modulate, quantize, BitMessage, LanguageModel, Method,
    ModulationParams, NGramModel, TokenId,
};
use proptest::prelude::*;

fn small_model() -> &'static NGramModel {
    static MODEL: OnceLock<NGramModel> = OnceLock::new();
    MODEL.get_or_init(|| corpus::train(&corpus::generate(200, 3), 2, 0.05).unwrap())
}

fn bits(max: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), 0..=max)
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..40).prop_filter_map("all zero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-9).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn method() -> impl Strategy<Value = Method> {
    prop_oneof![
        (0.3f64..1.5, prop::option::of(1usize..50), 16u32..=40).prop_map(|(t, k, p)| {
            Method::Arithmetic(ModulationParams::new(t, k, p).unwrap())
        }),
        (1u32..8).prop_map(|e| Method::Huffman { truncation: 1 << e }),
        (1u32..=5, any::<u64>()).prop_map(|(b, seed)| Method::Block {
            block_bits: b,
            seed
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_method_round_trips(m in method(), payload in bits(96)) {
        let model = small_model();
        let message = BitMessage::new(payload);
        let ctx = model.empty_context();
        let cover = m.encode(&message, &ctx, model, None).unwrap();
        prop_assert_eq!(m.decode(&cover, model).unwrap(), message);
    }

    #[test]
    fn arithmetic_round_trip_survives_trailing_tokens(payload in bits(64), extra in 0usize..5) {
        let model = small_model();
        let params = ModulationParams::unmodulated();
        let message = BitMessage::new(payload);
        let mut cover = encode(&message, &model.empty_context(), model, &params, None).unwrap();
        for _ in 0..extra {
            let next = lmstego::next_distribution(
                model,
                &[cover.context.clone(), cover.tokens.clone()].concat(),
                &params,
            ).unwrap();
            cover.tokens.push(next.token(0));
        }
        prop_assert_eq!(decode(&cover, model, &params).unwrap(), message);
    }

    #[test]
    fn quantized_weights_fill_the_range(p in distribution(), precision in 12u32..=48) {
        let entries: Vec<(TokenId, f64)> =
            p.iter().enumerate().filter(|e| *e.1 > 0.0).map(|(i, &x)| (i as TokenId, x)).collect();
        let dist = quantize(&entries, precision).unwrap();
        prop_assert_eq!(dist.total(), 1u64 << precision);
        prop_assert!(dist.entries().iter().all(|e| e.1 >= 1));
        prop_assert!(dist.entries().windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
        let cum = dist.cumulative();
        prop_assert_eq!(cum[0], 0);
        prop_assert_eq!(*cum.last().unwrap(), 1u64 << precision);
        // Each weight is within one unit of its exact share plus any floor lift.
        for &(t, w) in dist.entries() {
            let exact = p[t as usize] * (1u64 << precision) as f64;
            prop_assert!((w as f64 - exact).abs() <= entries.len() as f64 + 1.0);
        }
    }

    #[test]
    fn modulation_is_a_distribution(p in distribution(), t in 0.2f64..2.0, k in prop::option::of(1usize..60)) {
        let params = ModulationParams::new(t, k, 32).unwrap();
        let q = modulate(&p, &params).unwrap();
        let sum: f64 = q.iter().map(|e| e.1).sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        let support = p.iter().filter(|&&x| x > 0.0).count();
        prop_assert_eq!(q.len(), k.unwrap_or(usize::MAX).min(support));
        prop_assert!(q.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn kl_is_nonnegative(p in distribution(), t in 0.3f64..1.5) {
        let q = modulate(&p, &ModulationParams::new(t, None, 32).unwrap()).unwrap();
        let kl = kl_divergence(q.iter().copied(), &p);
        prop_assert!(kl >= -1e-12, "{}", kl);
    }

    #[test]
    fn huffman_codes_are_prefix_free(p in distribution(), e in 1u32..7) {
        let tree = HuffmanTree::build(&p, 1 << e).unwrap();
        let codes = tree.codes();
        for (i, a) in codes.iter().enumerate() {
            for b in &codes[i + 1..] {
                prop_assert!(!a.1.starts_with(&b.1) && !b.1.starts_with(&a.1));
            }
        }
        let kraft: f64 = codes.iter().map(|c| 0.5f64.powi(c.1.len() as i32)).sum();
        prop_assert!((kraft - 1.0).abs() < 1e-12 || codes.len() == 1);
    }

    #[test]
    fn block_bins_partition_the_vocabulary(b in 1u32..=5, seed: u64, n in 40usize..400) {
        let key = BlockKey::new(b, seed).unwrap();
        let a = key.assignment(n);
        let mut seen = vec![false; n];
        for bin in 0..key.bins() as u32 {
            for &t in a.members(bin) {
                prop_assert!(!seen[t as usize]);
                seen[t as usize] = true;
                prop_assert_eq!(a.bin_of(t), Some(bin));
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        prop_assert_eq!(key.assignment(n).key(), a.key());
    }

    #[test]
    fn framing_round_trips(payload in bits(300)) {
        let m = BitMessage::new(payload);
        let framed = m.framed();
        prop_assert_eq!(framed.len(), HEADER_BITS + m.len());
        prop_assert_eq!(BitMessage::unframe(&framed).unwrap(), m.clone());
        let bytes = BitMessage::from_bytes(&m.to_bytes());
        prop_assert_eq!(&bytes.payload()[..m.len()], m.payload());
    }

    #[test]
    fn source_coding_round_trips(seed: u64, len in 0usize..30) {
        use rand::{Rng, SeedableRng};
        let model = small_model();
        let params = ModulationParams::unmodulated();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut ctx = model.empty_context();
        let eos = model.vocabulary().eos();
        let mut tokens = Vec::new();
        for _ in 0..len {
            let dist = lmstego::next_distribution(model, &ctx, &params).unwrap();
            let t = dist.token(dist.index_at(rng.gen()));
            if t == eos {
                break;
            }
            tokens.push(t);
            ctx.push(t);
        }
        tokens.push(eos);
        let msg = TextMessage::new(tokens, eos).unwrap();
        let bits = text_to_bits(&msg, model, &params).unwrap();
        prop_assert_eq!(bits_to_text(&bits, model, &params, None).unwrap(), msg);
    }
}
