//! Acceptance suite A1..A10. Runs without the libtest harness so each
//! criterion's PASS/FAIL line is always printed; exits non-zero if any
//! criterion fails.

// `ensure!` negates its condition on purpose: a NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geovlm_core::cvlang::{
    jaccard, mock_embedding, render_description, stability_report, validate_sheet, AnswerSheet, Description,
    QuestionBank,
};
use geovlm_core::digest::sha256_hex;
use geovlm_core::evaluator::{
    average_precision, compare_rankings, haversine, recall_at_k, threshold_recall, write_report, GroundTruth,
    EARTH_RADIUS_KM, REPORT_JSON,
};
use geovlm_core::geostore::{
    generate_synthetic, read_embedding_matrix, write_embedding_matrix, EmbeddingMatrix, MatrixError,
};
use geovlm_core::reranker::{init_params, rerank, CheckpointError, CheckpointFile, NamedTensor};
use geovlm_core::retriever::{brute_force_rank, retrieve_all, top_k};
use geovlm_core::trainer::{
    build_training_samples, gradcheck, margin_loss, margin_loss_gradient, train, SamplePolicy, GRADCHECK_TOLERANCE,
};
use geovlm_core::{
    Accumulation, Embedding, EvalConfig, GeoCoord, GeoStore, QueryRecord, RankEntry, Ranking, ReferenceRecord,
    RerankerConfig, SynthConfig, TrainConfig,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn unit(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

/// A1: top_k agrees with the brute-force oracle, ties included.
fn a1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let dim = 64;
    let mut images: Vec<Vec<f32>> = (0..10_000).map(|_| unit(&mut rng, dim)).collect();
    // Engineered ties: exact duplicates under different ids, and scaled
    // copies that have the same cosine to every query.
    for i in 0..200 {
        images[5000 + i] = images[i].clone();
        images[7000 + i] = images[i].iter().map(|x| x * 2.0).collect();
    }
    let references: Vec<ReferenceRecord> = images
        .iter()
        .enumerate()
        .map(|(i, v)| ReferenceRecord {
            id: format!("r{i:05}"),
            image: Embedding::new(v.clone()).unwrap(),
            text: None,
            caption: None,
            coord: None,
        })
        .collect();
    let queries: Vec<QueryRecord> = (0..200)
        .map(|i| {
            // Half the queries sit exactly on a duplicated reference.
            let v = if i % 2 == 0 { images[i].clone() } else { unit(&mut rng, dim) };
            QueryRecord {
                id: format!("q{i:03}"),
                image: Embedding::new(v).unwrap(),
                text: None,
                caption: None,
                coord: None,
                ground_truth: BTreeSet::from(["r00000".to_string()]),
                semi_positives: BTreeSet::new(),
            }
        })
        .collect();
    let store = GeoStore::new(dim, 1, references, queries).map_err(|e| e.to_string())?;
    let mut tied = 0usize;
    for q in store.queries() {
        let oracle = brute_force_rank(&q.id, &q.image, &store, Accumulation::F64).map_err(|e| e.to_string())?;
        tied += oracle.entries.windows(2).take(10).filter(|w| w[0].score == w[1].score).count();
        for k in [1, 5, 10] {
            let got = top_k(&q.id, &q.image, &store, k, Accumulation::F64).map_err(|e| e.to_string())?;
            ensure!(got.entries == oracle.entries[..k], "query {} k={k} differs from oracle", q.id);
        }
    }
    let elapsed = start.elapsed();
    ensure!(tied > 0, "fixture produced no ties");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("200 queries x k in {{1,5,10}}, {tied} tied adjacent pairs, {elapsed:.1?}"))
}

/// A2: finite-difference gradient check over ten seeds.
fn a2() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let report = gradcheck(seed).map_err(|e| e.to_string())?;
        for (name, err) in &report.per_tensor {
            ensure!(*err <= GRADCHECK_TOLERANCE, "seed {seed} tensor {name}: relative error {err:e}");
        }
        worst = worst.max(report.max_relative_error);
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("max relative error {worst:.2e}, {elapsed:.1?}"))
}

fn a3_configs(store: &GeoStore) -> (RerankerConfig, TrainConfig) {
    let rc = RerankerConfig {
        image_dim: store.image_dim(),
        text_dim: store.text_dim(),
        latent_dim: 64,
        aligner_hidden: 64,
        aligner_layers: 1,
        init_seed: 1,
        ..RerankerConfig::default()
    };
    let tc = TrainConfig {
        lr: 3e-3,
        epochs: 20,
        batch_size: 16,
        val_split: 0.2,
        ..TrainConfig::default()
    };
    (rc, tc)
}

/// A3: text reranking lifts held-out R@1 without changing R@10.
fn a3() -> Outcome {
    let start = Instant::now();
    let synth = SynthConfig::default();
    ensure!(synth.n_locations == 1000 && synth.group_size == 4, "unexpected synthetic defaults");
    let store = generate_synthetic(&synth, 7).map_err(|e| e.to_string())?;
    let rankings = retrieve_all(&store, 10, Accumulation::F64).map_err(|e| e.to_string())?;
    let gt = store.ground_truth();
    let base_r1 = recall_at_k(&rankings, &gt, 1).map_err(|e| e.to_string())?;
    ensure!((0.25..=0.40).contains(&base_r1), "baseline R@1 {base_r1:.3} outside 0.25..0.40");

    let set = build_training_samples(&store, &rankings, SamplePolicy::default()).map_err(|e| e.to_string())?;
    let (rc, tc) = a3_configs(&store);
    ensure!(tc.epochs <= 20, "too many epochs");
    let init = init_params(&rc).map_err(|e| e.to_string())?;
    let (params, report) = train(&set.samples, &store, init, &tc).map_err(|e| e.to_string())?;
    let params = params.cast::<f64>();

    let held: BTreeSet<&str> = report.val_query_ids.iter().map(String::as_str).collect();
    ensure!(!held.is_empty(), "no held-out queries");
    let held_base: Vec<Ranking> = rankings
        .iter()
        .filter(|r| held.contains(r.query_id.as_str()))
        .cloned()
        .collect();
    let mut held_reranked = Vec::with_capacity(held_base.len());
    for r in &held_base {
        let q = store.query(&r.query_id).ok_or("unknown query")?;
        held_reranked.push(rerank(q, r, &store, &params).map_err(|e| e.to_string())?);
    }
    let held_gt: GroundTruth = held.iter().map(|id| (id.to_string(), gt[*id].clone())).collect();
    let r1_before = recall_at_k(&held_base, &held_gt, 1).map_err(|e| e.to_string())?;
    let r1_after = recall_at_k(&held_reranked, &held_gt, 1).map_err(|e| e.to_string())?;
    let r10_before = recall_at_k(&held_base, &held_gt, 10).map_err(|e| e.to_string())?;
    let r10_after = recall_at_k(&held_reranked, &held_gt, 10).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(r1_after >= 0.90, "held-out R@1 {r1_after:.3} < 0.90 (baseline {r1_before:.3})");
    ensure!(
        r10_before.to_bits() == r10_after.to_bits(),
        "R@10 changed: {r10_before} -> {r10_after}"
    );
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "{} held-out queries, R@1 {r1_before:.3} -> {r1_after:.3}, R@10 {r10_before:.3} unchanged, {elapsed:.1?}",
        held_base.len()
    ))
}

/// A4: hinge loss properties and gradient gating.
fn a4() -> Outcome {
    ensure!(margin_loss(0.9, &[0.5, 0.2], 1.0).map_err(|e| e.to_string())? == 0.45, "hand case is not 0.45");
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for case in 0..100 {
        let m = rng.random_range(0.01..2.0);
        let pos = rng.random_range(-3.0..3.0);
        let negs: Vec<f64> = (0..rng.random_range(1..12)).map(|_| rng.random_range(-3.0..3.0)).collect();
        let loss = margin_loss(pos, &negs, m).map_err(|e| e.to_string())?;
        ensure!(loss >= 0.0, "case {case}: negative loss");
        let separated = negs.iter().all(|n| pos - n >= m);
        ensure!((loss == 0.0) == separated, "case {case}: zero-loss does not match separation");
        let (_, d_negs) = margin_loss_gradient(pos, &negs, m).map_err(|e| e.to_string())?;
        for (i, &n) in negs.iter().enumerate() {
            let gap = pos - n - m;
            if gap > 0.0 {
                ensure!(d_negs[i] == 0.0, "case {case}: gated negative {i} has gradient");
                for frac in [-0.99, -0.5, 0.5, 0.99, 10.0] {
                    // Pushing further away is always safe; moving closer by
                    // less than the slack keeps the hinge inactive.
                    let delta = if frac > 1.0 { -gap * frac } else { gap * frac };
                    let mut moved = negs.clone();
                    moved[i] = n + delta;
                    if pos - moved[i] > m {
                        let l2 = margin_loss(pos, &moved, m).map_err(|e| e.to_string())?;
                        ensure!(l2 == loss, "case {case}: perturbing gated negative {i} changed loss");
                    }
                }
            }
        }
    }
    Ok("0.45 exact; 100 random configurations".into())
}

/// A5: haversine closed forms, symmetry, identity and triangle inequality.
fn a5() -> Outcome {
    let c = |lat, lon| GeoCoord::new(lat, lon).unwrap();
    let r = EARTH_RADIUS_KM;
    let quarter = std::f64::consts::PI * r / 2.0;
    let half = std::f64::consts::PI * r;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    for (p, q, want) in [
        (c(0.0, 0.0), c(0.0, 90.0), quarter),
        (c(0.0, 0.0), c(90.0, 0.0), quarter),
        (c(0.0, 0.0), c(0.0, 180.0), half),
        (c(90.0, 0.0), c(-90.0, 0.0), half),
        (c(37.5, -122.0), c(-37.5, 58.0), half),
    ] {
        let got = haversine(p, q, r);
        ensure!(rel(got, want) <= 1e-6, "{p:?} -> {q:?}: {got} vs {want}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let random = |rng: &mut ChaCha8Rng| c(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0));
    for _ in 0..1000 {
        let (p, q) = (random(&mut rng), random(&mut rng));
        ensure!(haversine(p, p, r) == 0.0, "identity fails at {p:?}");
        let (d1, d2) = (haversine(p, q, r), haversine(q, p, r));
        ensure!((d1 - d2).abs() <= 1e-9 * d1.max(1.0), "asymmetric {p:?} {q:?}");
    }
    for _ in 0..1000 {
        let (a, b, x) = (random(&mut rng), random(&mut rng), random(&mut rng));
        let lhs = haversine(a, b, r);
        let rhs = haversine(a, x, r) + haversine(x, b, r);
        ensure!(lhs <= rhs + 1e-9 * rhs.max(1.0), "triangle fails {a:?} {b:?} {x:?}");
    }
    Ok("closed forms within 1e-6; 1000 pairs; 1000 triples".into())
}

/// A6: recall monotone in k and in threshold; AP = 1/r for one positive.
fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let thresholds = [0.0, 0.05, 0.2, 0.5, 1.0, 5.0, 50.0, 500.0, 5000.0];
    for fixture in 0..100 {
        let n_refs = rng.random_range(12..40);
        let ref_ids: Vec<String> = (0..n_refs).map(|i| format!("r{i}")).collect();
        let coords: HashMap<String, GeoCoord> = ref_ids
            .iter()
            .map(|id| {
                let g = GeoCoord::new(rng.random_range(40.0..40.5), rng.random_range(-3.5..-3.0)).unwrap();
                (id.clone(), g)
            })
            .collect();
        let mut rankings = Vec::new();
        let mut gt = GroundTruth::new();
        for q in 0..rng.random_range(1..20) {
            let qid = format!("q{q}");
            let mut ids = ref_ids.clone();
            ids.shuffle(&mut rng);
            let depth = rng.random_range(1..=10);
            let entries = ids[..depth]
                .iter()
                .enumerate()
                .map(|(i, id)| RankEntry {
                    reference_id: id.clone(),
                    score: 1.0 - i as f64 / 16.0,
                })
                .collect();
            let mut positives: BTreeSet<String> = BTreeSet::new();
            for _ in 0..rng.random_range(1..3) {
                positives.insert(ref_ids[rng.random_range(0..n_refs)].clone());
            }
            gt.insert(qid.clone(), positives);
            rankings.push(Ranking {
                query_id: qid,
                k: 10,
                entries,
                reranked: false,
            });
        }
        let mut prev = 0.0;
        for k in 1..=10 {
            let v = recall_at_k(&rankings, &gt, k).map_err(|e| e.to_string())?;
            ensure!(v >= prev, "fixture {fixture}: R@{k} {v} < {prev}");
            prev = v;
        }
        let mut prev = 0.0;
        for t in thresholds {
            let v = threshold_recall(&rankings, &coords, &gt, t, 10, EARTH_RADIUS_KM).map_err(|e| e.to_string())?;
            ensure!(v >= prev, "fixture {fixture}: threshold {t} gives {v} < {prev}");
            prev = v;
        }
    }
    for r in 1..=10usize {
        let entries = (0..10)
            .map(|i| RankEntry {
                reference_id: if i + 1 == r { "pos".into() } else { format!("n{i}") },
                score: -(i as f64),
            })
            .collect();
        let ranking = Ranking {
            query_id: "q".into(),
            k: 10,
            entries,
            reranked: false,
        };
        let ap = average_precision(&ranking, &BTreeSet::from(["pos".to_string()])).map_err(|e| e.to_string())?;
        ensure!(ap == 1.0 / r as f64, "AP at rank {r} is {ap}");
    }
    Ok("100 fixtures monotone; AP = 1/r for r in 1..10".into())
}

/// A7: golden descriptions and single-question corruptions.
fn a7() -> Outcome {
    let bank = QuestionBank::builtin();
    let dir = manifest_dir().join("tests/fixtures/descriptions");
    let mut firsts = BTreeSet::new();
    let mut lasts = BTreeSet::new();
    let mut sheets = Vec::new();
    for n in 1..=5 {
        let read = |ext: &str| fs::read_to_string(dir.join(format!("sheet{n}.{ext}"))).map_err(|e| e.to_string());
        let sheet: AnswerSheet = serde_json::from_str(&read("json")?).map_err(|e| e.to_string())?;
        let golden = read("txt")?;
        let got = render_description(&sheet, bank).map_err(|e| e.to_string())?;
        ensure!(got == golden, "sheet{n} differs from golden text");
        for q in bank.questions() {
            let a = &sheet.answers[&q.id];
            if a == q.options.first().unwrap() {
                firsts.insert(q.id.clone());
            }
            if a == q.options.last().unwrap() {
                lasts.insert(q.id.clone());
            }
        }
        sheets.push(sheet);
    }
    ensure!(firsts.len() == QuestionBank::SIZE, "first options not all covered");
    ensure!(lasts.len() == QuestionBank::SIZE, "last options not all covered");

    let base = &sheets[0];
    ensure!(validate_sheet(base, bank).is_empty(), "golden sheet reported invalid");
    for (i, q) in bank.questions().iter().enumerate() {
        let mut bad = base.clone();
        // Alternate corruption kinds across the thirty questions.
        match i % 3 {
            0 => {
                bad.answers.remove(&q.id);
            }
            1 => {
                bad.answers.insert(q.id.clone(), "not an option".into());
            }
            _ => {
                let a = bad.answers[&q.id].to_uppercase() + "!";
                bad.answers.insert(q.id.clone(), a);
            }
        }
        let violations = validate_sheet(&bad, bank);
        ensure!(violations.len() == 1, "{}: expected one violation, got {violations:?}", q.id);
        ensure!(render_description(&bad, bank).is_err(), "{}: corrupted sheet rendered", q.id);
    }
    Ok("5 goldens byte-exact; 30 corruptions rejected".into())
}

/// A8: stability metrics on hand cases; reference numbers documented.
fn a8() -> Outcome {
    let bank = QuestionBank::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let corpus: Vec<Description> = (0..20)
        .map(|i| {
            let sheet = bank.random_sheet(&format!("img{i}"), &mut rng);
            Description {
                image_id: sheet.image_id.clone(),
                description: render_description(&sheet, bank).unwrap(),
            }
        })
        .collect();
    let embs: Vec<Embedding> = corpus.iter().map(|d| mock_embedding(&d.description, 32)).collect();
    let report = stability_report(&corpus, &corpus, &embs, &embs).map_err(|e| e.to_string())?;
    ensure!(report.mean_cosine == 1.0, "duplicate corpus cosine {}", report.mean_cosine);
    ensure!(report.mean_jaccard == 1.0, "duplicate corpus Jaccard {}", report.mean_jaccard);
    ensure!(jaccard("a b", "b c") == 1.0 / 3.0, "Jaccard of a b / b c is {}", jaccard("a b", "b c"));
    let readme = fs::read_to_string(manifest_dir().join("../../README.md")).map_err(|e| e.to_string())?;
    for v in ["0.83", "0.44", "185.49", "14.76"] {
        ensure!(readme.contains(v), "README lacks reference value {v}");
    }
    Ok("cosine 1.0, Jaccard 1.0, 1/3 exact; reference values documented".into())
}

fn random_f32(rng: &mut ChaCha8Rng) -> f32 {
    loop {
        // Raw bit patterns cover subnormals, signed zeros and extremes.
        let x = f32::from_bits(rng.random());
        if x.is_finite() {
            return x;
        }
    }
}

/// A9: matrix and checkpoint files round-trip bit-exactly; corruption is caught.
fn a9(tmp: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<u32>>();
    for i in 0..100 {
        let dim = rng.random_range(1..24);
        let rows: Vec<Vec<f32>> = (0..rng.random_range(0..20))
            .map(|_| (0..dim).map(|_| random_f32(&mut rng)).collect())
            .collect();
        let m = EmbeddingMatrix::new(dim, rows).map_err(|e| e.to_string())?;
        let path = tmp.join(format!("m{i}.gvlm"));
        write_embedding_matrix(&path, &m).map_err(|e| e.to_string())?;
        let back = read_embedding_matrix(&path).map_err(|e| e.to_string())?;
        ensure!(back.dim == m.dim && back.rows.len() == m.rows.len(), "matrix {i} shape changed");
        for (a, b) in m.rows.iter().zip(&back.rows) {
            ensure!(bits(a) == bits(b), "matrix {i} payload changed");
        }

        let rank = rng.random_range(0..4);
        let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(1..6)).collect();
        let n: usize = shape.iter().product();
        let tensor = NamedTensor {
            name: format!("t{i}"),
            shape,
            data: (0..n).map(|_| random_f32(&mut rng)).collect(),
        };
        let file = CheckpointFile {
            meta: BTreeMap::from([("index".to_string(), i.to_string())]),
            tensors: vec![tensor],
        };
        let path = tmp.join(format!("c{i}.gvck"));
        file.write(&path).map_err(|e| e.to_string())?;
        let back = CheckpointFile::read(&path).map_err(|e| e.to_string())?;
        ensure!(back.meta == file.meta, "checkpoint {i} meta changed");
        let (a, b) = (&file.tensors[0], &back.tensors[0]);
        ensure!(a.name == b.name && a.shape == b.shape && bits(&a.data) == bits(&b.data), "checkpoint {i} tensor changed");
    }

    let m = EmbeddingMatrix::new(3, vec![vec![1.0, 2.0, 3.0]; 4]).unwrap();
    let bytes = m.encode();
    ensure!(
        matches!(EmbeddingMatrix::decode(&bytes[..bytes.len() - 1], "m"), Err(MatrixError::Truncated { .. })),
        "truncated matrix not reported as truncated"
    );
    let mut bad = bytes.clone();
    bad[0] = b'X';
    ensure!(
        matches!(EmbeddingMatrix::decode(&bad, "m"), Err(MatrixError::BadMagic { .. })),
        "bad matrix magic not reported"
    );
    let ck = CheckpointFile {
        meta: BTreeMap::new(),
        tensors: vec![NamedTensor {
            name: "w".into(),
            shape: vec![2, 2],
            data: vec![1.0; 4],
        }],
    }
    .encode();
    ensure!(
        matches!(CheckpointFile::decode(&ck[..ck.len() - 2]), Err(CheckpointError::Truncated(_))),
        "truncated checkpoint not reported as truncated"
    );
    let mut bad = ck.clone();
    bad[1] = b'?';
    ensure!(
        matches!(CheckpointFile::decode(&bad), Err(CheckpointError::BadMagic)),
        "bad checkpoint magic not reported"
    );
    Ok("100 matrices and 100 checkpoints bit-exact; truncation and magic caught".into())
}

fn pipeline_report_digest(out: &Path) -> Result<String, String> {
    let cfg = SynthConfig {
        n_locations: 200,
        ..SynthConfig::default()
    };
    let store = generate_synthetic(&cfg, 7).map_err(|e| e.to_string())?;
    let rankings = retrieve_all(&store, 10, Accumulation::F64).map_err(|e| e.to_string())?;
    let set = build_training_samples(&store, &rankings, SamplePolicy::default()).map_err(|e| e.to_string())?;
    let (rc, mut tc) = a3_configs(&store);
    tc.epochs = 3;
    let (params, _) = train(&set.samples, &store, init_params(&rc).map_err(|e| e.to_string())?, &tc)
        .map_err(|e| e.to_string())?;
    let params = params.cast::<f64>();
    let reranked = rankings
        .iter()
        .map(|r| rerank(store.query(&r.query_id).unwrap(), r, &store, &params))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let coords: HashMap<String, GeoCoord> = store
        .references()
        .iter()
        .filter_map(|r| r.coord.map(|c| (r.id.clone(), c)))
        .collect();
    let report = compare_rankings(&rankings, Some(&reranked), &store.ground_truth(), &coords, &EvalConfig::default())
        .map_err(|e| e.to_string())?;
    write_report(out, &report).map_err(|e| e.to_string())?;
    let bytes = fs::read(out.join(REPORT_JSON)).map_err(|e| e.to_string())?;
    Ok(sha256_hex(&bytes))
}

/// A10: the whole pipeline is reproducible.
fn a10(tmp: &Path) -> Outcome {
    let a = pipeline_report_digest(&tmp.join("run_a"))?;
    let b = pipeline_report_digest(&tmp.join("run_b"))?;
    ensure!(a == b, "report digests differ: {a} vs {b}");
    Ok(format!("report.json sha256 {}", &a[..16]))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("{name} PASS  {detail}");
            true
        }
        Err(detail) => {
            println!("{name} FAIL  {detail}");
            false
        }
    }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let results = [
        run("A1", a1),
        run("A2", a2),
        run("A3", a3),
        run("A4", a4),
        run("A5", a5),
        run("A6", a6),
        run("A7", a7),
        run("A8", a8),
        run("A9", || a9(tmp.path())),
        run("A10", || a10(tmp.path())),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
