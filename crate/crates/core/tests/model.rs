use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ompadvisor::corpus::{Sample, Split};
use ompadvisor::encode::{encode_all, AttentionMask, EncodeOptions, EncodedInput, Vocabulary};
use ompadvisor::model::{
    forward, predict_sample, train, AttentionScale, EncodeMeta, ModelBundle, ModelConfig,
    ModelParams, TrainOptions,
};
use ompadvisor::synth::{synth_corpus, SynthOptions};
use ompadvisor::{ModelParamsF32, ModelParamsF64};

// Straight-loop reference of the forward pass, written without ndarray.
fn reference_logits(p: &ModelParamsF64, cfg: &ModelConfig, input: &EncodedInput) -> [f64; 3] {
    let d = cfg.d_model;
    let n = input.ids.len();
    let ln = |v: &[f64], g: &[f64], b: &[f64]| -> Vec<f64> {
        let mean = v.iter().sum::<f64>() / d as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
        (0..d).map(|c| (v[c] - mean) / (var + 1e-5).sqrt() * g[c] + b[c]).collect()
    };
    let matvec = |v: &[f64], w: &ndarray::Array2<f64>, b: &[f64]| -> Vec<f64> {
        (0..w.ncols())
            .map(|o| b[o] + (0..w.nrows()).map(|i| v[i] * w[[i, o]]).sum::<f64>())
            .collect()
    };
    let gelu = |x: f64| 0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh());

    let mut x: Vec<Vec<f64>> = (0..n)
        .map(|t| {
            (0..d)
                .map(|c| p.tok_emb[[input.ids[t] as usize, c]] + p.pos_emb[[input.positions[t] as usize, c]])
                .collect()
        })
        .collect();
    let dh = d / cfg.n_heads;
    let scale = match cfg.scale {
        AttentionScale::SqrtDHead => 1.0 / (dh as f64).sqrt(),
        AttentionScale::DHead => 1.0 / dh as f64,
    };
    for layer in &p.body.layers {
        let g1 = layer.ln1_g.to_vec();
        let b1 = layer.ln1_b.to_vec();
        let h: Vec<Vec<f64>> = x.iter().map(|r| ln(r, &g1, &b1)).collect();
        let q: Vec<Vec<f64>> = h.iter().map(|r| matvec(r, &layer.wq, layer.bq.as_slice().unwrap())).collect();
        let k: Vec<Vec<f64>> = h.iter().map(|r| matvec(r, &layer.wk, layer.bk.as_slice().unwrap())).collect();
        let v: Vec<Vec<f64>> = h.iter().map(|r| matvec(r, &layer.wv, layer.bv.as_slice().unwrap())).collect();
        let mut o = vec![vec![0.0; d]; n];
        for head in 0..cfg.n_heads {
            let cols = head * dh..(head + 1) * dh;
            for i in 0..n {
                let allowed: Vec<usize> = (0..n).filter(|&j| input.mask.allowed(i, j)).collect();
                let s: Vec<f64> = allowed
                    .iter()
                    .map(|&j| cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() * scale)
                    .collect();
                let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = s.iter().map(|z| (z - m).exp()).collect();
                let total: f64 = e.iter().sum();
                for (w, &j) in e.iter().zip(&allowed) {
                    for c in cols.clone() {
                        o[i][c] += w / total * v[j][c];
                    }
                }
            }
        }
        for i in 0..n {
            let a = matvec(&o[i], &layer.wo, layer.bo.as_slice().unwrap());
            for c in 0..d {
                x[i][c] += a[c];
            }
            let h2 = ln(&x[i], layer.ln2_g.as_slice().unwrap(), layer.ln2_b.as_slice().unwrap());
            let f: Vec<f64> = matvec(&h2, &layer.w1, layer.b1.as_slice().unwrap()).into_iter().map(gelu).collect();
            let f = matvec(&f, &layer.w2, layer.b2.as_slice().unwrap());
            for c in 0..d {
                x[i][c] += f[c];
            }
        }
    }
    let cls = ln(&x[0], p.body.lnf_g.as_slice().unwrap(), p.body.lnf_b.as_slice().unwrap());
    let z = matvec(&cls, &p.body.head_w, p.body.head_b.as_slice().unwrap());
    [z[0], z[1], z[2]]
}

fn tiny_input(mask: AttentionMask) -> EncodedInput {
    EncodedInput {
        ids: vec![1, 4, 2, 5],
        positions: vec![0, 1, 2, 0],
        mask,
        n_code: 1,
        dfg_alignment: vec![0],
        edges: vec![],
        labels: [true, false, true],
    }
}

#[test]
fn forward_matches_reference_implementation() {
    let cfg = ModelConfig {
        d_model: 8,
        n_heads: 1,
        n_layers: 1,
        d_ff: 16,
        ..ModelConfig::small(6, 4, 0)
    };
    let mut p = ModelParamsF64::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    p.randomize(0.5, &mut ChaCha8Rng::seed_from_u64(2));
    let mut masked = AttentionMask::open(4);
    for (i, j) in [(0, 3), (1, 3)] {
        masked.set(i, j, false);
        masked.set(j, i, false);
    }
    for mask in [AttentionMask::open(4), masked, AttentionMask::diagonal(4)] {
        let input = tiny_input(mask);
        let got = forward(&p, &cfg, &input, None).unwrap().logits;
        let want = reference_logits(&p, &cfg, &input);
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }
    let cfg_d = ModelConfig {
        scale: AttentionScale::DHead,
        n_heads: 2,
        ..cfg
    };
    let input = tiny_input(AttentionMask::open(4));
    let got = forward(&p, &cfg_d, &input, None).unwrap().logits;
    let want = reference_logits(&p, &cfg_d, &input);
    for k in 0..3 {
        assert!((got[k] - want[k]).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

#[test]
fn f32_and_f64_agree() {
    let cfg = ModelConfig::small(6, 4, 0);
    let p64 = ModelParamsF64::init(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let p32: ModelParamsF32 = p64.cast();
    let input = tiny_input(AttentionMask::open(4));
    let a = forward(&p64, &cfg, &input, None).unwrap().probs;
    let b = forward(&p32, &cfg, &input, None).unwrap().probs;
    for k in 0..3 {
        assert!((a[k] - b[k] as f64).abs() < 1e-5);
    }
}

#[test]
fn shape_errors_are_reported() {
    let cfg = ModelConfig::small(6, 4, 0);
    let p = ModelParamsF64::init(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let mut input = tiny_input(AttentionMask::open(4));
    input.ids[2] = 6;
    assert!(forward(&p, &cfg, &input, None).is_err());
    let long = EncodedInput {
        ids: vec![0; 5],
        positions: vec![0; 5],
        mask: AttentionMask::open(5),
        ..tiny_input(AttentionMask::open(4))
    };
    assert!(forward(&p, &cfg, &long, None).is_err());
}

fn small_run(threads: usize) -> (ModelParams<f32>, Vec<ompadvisor::model::EpochRecord>) {
    let corpus = synth_corpus(&SynthOptions {
        n: 60,
        seed: 5,
        ..SynthOptions::default()
    });
    let train_set: Vec<Sample> = corpus.iter().filter(|s| s.split == Split::Train).cloned().collect();
    let valid_set: Vec<Sample> = corpus.iter().filter(|s| s.split == Split::Valid).cloned().collect();
    let vocab = Vocabulary::build(&train_set, 1).unwrap();
    let opts = TrainOptions {
        epochs: 2,
        batch_size: 8,
        threads,
        encode: EncodeOptions {
            max_code: 64,
            max_dfg: 16,
        },
        ..TrainOptions::default()
    };
    let cfg = ModelConfig {
        dropout_rate: 0.1,
        ..ModelConfig::small(vocab.len(), opts.encode.max_len(), 5)
    };
    train::<f32>(&train_set, &valid_set, &vocab, &cfg, &opts, |_| {}).unwrap()
}

#[test]
fn training_is_deterministic_across_runs_and_threads() {
    let (a, ha) = small_run(1);
    let (b, hb) = small_run(1);
    let (c, hc) = small_run(2);
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(a, c);
    assert_eq!(ha, hc);
    assert_eq!(ha.len(), 2);
    assert_eq!(ha[1].rename_fraction, 0.1);
}

#[test]
fn bundle_round_trip_preserves_predictions() {
    let corpus = synth_corpus(&SynthOptions {
        n: 20,
        seed: 6,
        ..SynthOptions::default()
    });
    let vocab = Vocabulary::build(&corpus, 1).unwrap();
    let opts = EncodeOptions::default();
    let config = ModelConfig::small(vocab.len(), opts.max_len(), 6);
    let params = ModelParamsF32::init(&config, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let bundle = ModelBundle {
        config,
        params,
        vocab,
        encode: EncodeMeta {
            max_code: opts.max_code,
            max_dfg: opts.max_dfg,
            with_scope: false,
        },
    };
    let dir = tempfile::tempdir().unwrap();
    bundle.save(dir.path()).unwrap();
    let loaded = ModelBundle::load(dir.path()).unwrap();
    assert_eq!(loaded.params, bundle.params);
    assert_eq!(loaded.config, bundle.config);
    assert_eq!(loaded.encode, bundle.encode);
    let (inputs, _) = encode_all(&corpus, &loaded.vocab, &opts).unwrap();
    for (s, e) in corpus.iter().zip(&inputs) {
        let a = predict_sample(&bundle.params, &bundle.config, &bundle.vocab, &opts, s, false).unwrap();
        let b = predict_sample(&loaded.params, &loaded.config, &loaded.vocab, &opts, s, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(e.len(), e.mask.len());
    }

    std::fs::write(dir.path().join("vocab.json"), "{\"min_freq\": 1, \"tokens\": {}}").unwrap();
    assert!(ModelBundle::load(dir.path()).is_err());
}
