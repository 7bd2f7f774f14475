//! Acceptance checks, one PASS/FAIL line per criterion.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use clir_core::analysis::{retrieved_language_distribution, same_language_rate, spearman};
use clir_core::ann::{HnswIndex, HnswParams};
use clir_core::bench::{
    normalize_and_summarize, run_interleaved, split_by_pair, AnnEngine, ExactEngine, IndexAccess,
    LatencyTrace, Method,
};
use clir_core::corpus::{query_pairs, Corpus, Document, Qrels, Query, QuerySet};
use clir_core::dense::{EmbeddingMatrix, ExactSearcher, IdMap, ToyEmbedder};
use clir_core::eval::{evaluate, query_ndcg, query_recall, EvalOptions};
use clir_core::lexical::{tokenize, Bm25Params, Field, InvertedIndex};
use clir_core::rerank::{make_candidates, read_scoring_requests, write_scores, ScoringResponse};
use clir_core::synth::{bilingual_fixture, SynthConfig};
use clir_core::{DatasetPreset, Hit, LanguageCode, RunList};
use rand::RngExt;

type Outcome = Result<String, String>;

/// Ranked grades, unretrieved relevant grades, k, hand nDCG, hand recall
/// (negative when not hand-computed).
type MetricCase = (Vec<u32>, Vec<u32>, usize, Option<f64>, f64);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn lang(s: &str) -> LanguageCode {
    s.parse().unwrap()
}

fn ids(prefix: &str, n: usize) -> IdMap {
    IdMap::new((0..n).map(|i| format!("{prefix}{i}")).collect()).unwrap()
}

fn bm25_oracle_equivalence() -> Outcome {
    let mut rng = oracles::rng(101);
    let vocab: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
    // skewed word choice gives a spread of document frequencies
    let word = |rng: &mut rand_chacha::ChaCha8Rng| {
        let r: f64 = rng.random();
        vocab[((r * r) * vocab.len() as f64) as usize].clone()
    };
    let mut docs = Vec::new();
    let mut tokens = Vec::new();
    for i in 0..200 {
        let len = rng.random_range(5..40);
        let words: Vec<String> = (0..len).map(|_| word(&mut rng)).collect();
        docs.push(Document {
            doc_id: format!("d{i:03}"),
            lang: lang("en"),
            text: words.join(" "),
            translated_text: None,
        });
        tokens.push(words);
    }
    let corpus = Corpus::new(docs).unwrap();
    let index = InvertedIndex::build(&corpus, Field::Original, Bm25Params::default()).unwrap();
    let mut compared = 0;
    for q in 0..20 {
        let len = rng.random_range(1..6);
        let query: Vec<String> = (0..len).map(|_| word(&mut rng)).collect();
        let got = index.search(&query.join(" "), corpus.len());
        let want = oracles::bm25_brute(&tokens, &tokenize(&query.join(" ")), 1.2, 0.75);
        ensure!(
            got.len() == want.len(),
            "query {q}: {} hits vs {} expected",
            got.len(),
            want.len()
        );
        for (rank, (h, (row, s))) in got.iter().zip(&want).enumerate() {
            ensure!(
                h.doc_id == corpus.docs()[*row].doc_id,
                "query {q} rank {}: {} vs {}",
                rank + 1,
                h.doc_id,
                corpus.docs()[*row].doc_id
            );
            ensure!(
                (h.score - s).abs() <= 1e-12 * s.abs().max(1.0),
                "query {q}: score {} vs {s}",
                h.score
            );
        }
        compared += got.len();
    }
    Ok(format!("20 queries, {compared} ranked documents identical"))
}

fn exact_dense_search() -> Outcome {
    let (n, nq, dim, k) = (1000, 100, 64, 100);
    let mut rng = oracles::rng(202);
    let docs = oracles::gaussian_unit_rows(&mut rng, n, dim);
    let queries = oracles::gaussian_unit_rows(&mut rng, nq, dim);
    let matrix = EmbeddingMatrix::new(docs.clone(), dim).unwrap();
    let doc_ids = ids("d", n);
    let qmatrix = EmbeddingMatrix::new(queries.clone(), dim).unwrap();
    let run = ExactSearcher::new(&matrix, &doc_ids)
        .unwrap()
        .search_batch(&qmatrix, &ids("q", nq), k, "dense")
        .unwrap();
    for qi in 0..nq {
        let want = oracles::argsort_topk(&docs, dim, &queries[qi * dim..(qi + 1) * dim], k);
        let got = run.get(&format!("q{qi}")).unwrap();
        ensure!(got.len() == k, "q{qi}: {} hits", got.len());
        for (h, (row, s)) in got.iter().zip(&want) {
            ensure!(
                h.doc_id == format!("d{row}") && h.score == *s,
                "q{qi}: {h:?} vs d{row} {s}"
            );
        }
    }
    Ok(format!("{nq} queries x top-{k} identical to full argsort"))
}

fn hnsw_quality() -> Outcome {
    let (n, nq, dim, k) = (10_000, 100, 64, 100);
    let mut rng = oracles::rng(303);
    let docs = oracles::gaussian_unit_rows(&mut rng, n, dim);
    let queries = oracles::gaussian_unit_rows(&mut rng, nq, dim);
    let matrix = EmbeddingMatrix::new(docs.clone(), dim).unwrap();
    let index = HnswIndex::build(&matrix, &ids("d", n), HnswParams::default(), 7).unwrap();
    let ef = clir_core::ann::default_ef(k);
    ensure!(ef == 200, "max(50, 2k) gave {ef}");
    let (mut at_default, mut at_n) = (0.0, 0.0);
    for qi in 0..nq {
        let q = &queries[qi * dim..(qi + 1) * dim];
        let truth: Vec<String> = oracles::argsort_topk(&docs, dim, q, k)
            .into_iter()
            .map(|(r, _)| format!("d{r}"))
            .collect();
        let overlap =
            |hits: &[Hit]| hits.iter().filter(|h| truth.contains(&h.doc_id)).count() as f64 / k as f64;
        at_default += overlap(&index.search(q, k, ef).unwrap());
        at_n += overlap(&index.search(q, k, n).unwrap());
    }
    let (at_default, at_n) = (at_default / nq as f64, at_n / nq as f64);
    ensure!(at_default >= 0.95, "overlap at ef={ef} is {at_default:.4}");
    ensure!(at_n == 1.0, "overlap at ef=n is {at_n}");
    Ok(format!("overlap {at_default:.4} at ef={ef}, {at_n} at ef=n"))
}

fn metric_correctness() -> Outcome {
    let hand: Vec<MetricCase> = vec![
        (vec![0, 0, 1], vec![], 10, Some(0.5), 1.0),
        (vec![1], vec![], 10, Some(1.0), 1.0),
        (vec![0, 1], vec![], 1, Some(0.0), 0.0),
        (vec![0; 5], vec![1], 10, Some(0.0), 0.0),
        (vec![], vec![1], 10, Some(0.0), 0.0),
        (vec![0, 1], vec![], 10, Some(1.0 / 3f64.log2()), 1.0),
        (vec![1, 1], vec![], 10, Some(1.0), 1.0),
        (vec![0, 0, 0, 1], vec![], 3, Some(0.0), 0.0),
        (vec![0, 0, 0, 1], vec![], 4, Some(1.0 / 5f64.log2()), 1.0),
        (
            vec![1, 0],
            vec![1],
            10,
            Some(1.0 / (1.0 + 1.0 / 3f64.log2())),
            1.0,
        ),
        (vec![2, 1], vec![], 10, Some(1.0), 1.0),
        (vec![1, 2], vec![], 10, None, 1.0),
        (vec![0, 3], vec![], 10, None, 1.0),
        (vec![3, 0, 0, 0, 0, 2], vec![1], 5, None, 1.0),
        (vec![0; 99], vec![1], 100, Some(0.0), 0.0),
    ];
    let mut cases = hand;
    let mut rng = oracles::rng(404);
    for _ in 0..20 {
        let len = rng.random_range(0..25);
        let ranked: Vec<u32> = (0..len).map(|_| rng.random_range(0..4)).collect();
        let extra: Vec<u32> = (0..rng.random_range(1..3))
            .map(|_| rng.random_range(1..4))
            .collect();
        cases.push((ranked, extra, rng.random_range(1..30), None, -1.0));
    }
    let mut checked = 0;
    for (i, (ranked, extra, k, hand_ndcg, hand_recall)) in cases.iter().enumerate() {
        let mut judged = BTreeMap::new();
        let hits: Vec<Hit> = ranked
            .iter()
            .enumerate()
            .map(|(r, &g)| {
                judged.insert(format!("r{r}"), g);
                Hit::new(format!("r{r}"), -(r as f64))
            })
            .collect();
        for (j, &g) in extra.iter().enumerate() {
            judged.insert(format!("x{j}"), g);
        }
        let all: Vec<u32> = judged.values().copied().collect();
        let ndcg = query_ndcg(&hits, &judged, *k);
        let recall = query_recall(&hits, &judged, *k, 0);
        let want_ndcg = oracles::ndcg_oracle(ranked, &all, *k);
        let want_recall = oracles::recall_oracle(ranked, *k);
        ensure!(
            (ndcg - want_ndcg).abs() < 1e-9,
            "case {i}: nDCG {ndcg} vs oracle {want_ndcg}"
        );
        ensure!(
            (recall - want_recall).abs() < 1e-9,
            "case {i}: recall {recall} vs oracle {want_recall}"
        );
        if let Some(h) = hand_ndcg {
            ensure!((ndcg - h).abs() < 1e-9, "case {i}: nDCG {ndcg} vs hand {h}");
        }
        if *hand_recall >= 0.0 {
            ensure!(
                (recall - hand_recall).abs() < 1e-9,
                "case {i}: recall {recall} vs hand {hand_recall}"
            );
        }
        checked += 1;
    }

    let qrels = Qrels::from_triples([("a", "g", 1), ("b", "g", 1)]).unwrap();
    let mut run = RunList::new("t");
    run.insert(
        "a",
        vec![Hit::new("x", 3.0), Hit::new("y", 2.0), Hit::new("g", 1.0)],
    )
    .unwrap();
    run.insert("b", vec![Hit::new("x", 1.0)]).unwrap();
    let report = evaluate(&run, &qrels, &[3], EvalOptions::default()).unwrap();
    ensure!(
        report.macro_ndcg[&3] == 0.25 && report.macro_recall[&3] == 0.5,
        "aggregate {report:?}"
    );
    Ok(format!("{checked} cases plus one aggregated run"))
}

fn gold_injection() -> Outcome {
    let mut run = RunList::new("first");
    let mut triples = Vec::new();
    let mut lists = BTreeMap::new();
    for q in 0..100 {
        let qid = format!("q{q:03}");
        let absent = q % 5 < 2;
        let docs: Vec<String> = (0..100)
            .map(|r| {
                if !absent && r == (q * 7) % 100 {
                    format!("gold{q}")
                } else {
                    format!("n{q}-{r}")
                }
            })
            .collect();
        run.insert(
            qid.clone(),
            docs.iter()
                .enumerate()
                .map(|(r, d)| Hit::new(d, 100.0 - r as f64))
                .collect(),
        )
        .unwrap();
        triples.push((qid.clone(), format!("gold{q}"), 1));
        lists.insert(qid, (absent, docs));
    }
    let qrels = Qrels::from_triples(triples).unwrap();
    let sets = make_candidates(&run, &qrels, 100).unwrap();
    ensure!(sets.len() == 100, "{} candidate sets", sets.len());
    let mut injected = 0;
    for c in &sets {
        let (absent, original) = &lists[&c.query_id];
        let gold = qrels.gold(&c.query_id).unwrap();
        ensure!(c.contains(gold), "{} lacks gold", c.query_id);
        ensure!(c.len() <= 100, "{} has {} candidates", c.query_id, c.len());
        if *absent {
            injected += 1;
            ensure!(
                c.injected && c.doc_ids[99] == gold,
                "{}: gold not at rank 100",
                c.query_id
            );
            ensure!(
                c.doc_ids[..99] == original[..99],
                "{}: ranks 1-99 changed",
                c.query_id
            );
            ensure!(
                !c.contains(&original[99]),
                "{}: former rank-100 item kept",
                c.query_id
            );
        } else {
            ensure!(
                !c.injected && c.doc_ids == *original,
                "{}: list altered",
                c.query_id
            );
        }
    }
    ensure!(injected == 40, "{injected} injected");
    Ok("40/100 injected at rank 100, all sets hold gold, all lengths <= 100".into())
}

fn cross_script_lexical_failure() -> Outcome {
    let fx = bilingual_fixture(&SynthConfig::default()).unwrap();
    let pairs = query_pairs(&fx.queries, &fx.qrels, &fx.corpus).unwrap();
    let index = InvertedIndex::build(&fx.corpus, Field::Original, Bm25Params::default()).unwrap();
    let mut bm25 = index.search_all(&fx.queries, 100, "bm25").unwrap();
    bm25.set_pairs(&pairs);
    let bm25 = evaluate(&bm25, &fx.qrels, &[100], EvalOptions::default())
        .unwrap()
        .recall_by_pair(100);

    let embedder = ToyEmbedder::new(256, 0)
        .unwrap()
        .with_aliases(fx.lexicon.iter().map(|(ru, en)| (ru.as_str(), en.as_str())));
    let doc_texts: Vec<&str> = fx.corpus.docs().iter().map(|d| d.text.as_str()).collect();
    let q_texts: Vec<&str> = fx.queries.queries().iter().map(|q| q.text.as_str()).collect();
    let doc_ids = IdMap::new(fx.corpus.docs().iter().map(|d| d.doc_id.clone()).collect()).unwrap();
    let q_ids = IdMap::new(fx.queries.queries().iter().map(|q| q.query_id.clone()).collect()).unwrap();
    let docs = embedder.embed_all(&doc_texts);
    let queries = embedder.embed_all(&q_texts);
    let mut dense = ExactSearcher::new(&docs, &doc_ids)
        .unwrap()
        .search_batch(&queries, &q_ids, 100, "toy")
        .unwrap();
    dense.set_pairs(&pairs);
    // the dense run must itself be exact
    for (row, qid) in q_ids.ids().iter().enumerate().step_by(16) {
        let want = oracles::argsort_topk(docs.as_slice(), docs.dim(), queries.row(row), 100);
        let got: Vec<&str> = dense
            .get(qid)
            .unwrap()
            .iter()
            .map(|h| h.doc_id.as_str())
            .collect();
        let want: Vec<&str> = want.iter().map(|&(r, _)| doc_ids.id(r)).collect();
        ensure!(got == want, "{qid}: dense run differs from argsort");
    }
    let dense = evaluate(&dense, &fx.qrels, &[100], EvalOptions::default())
        .unwrap()
        .recall_by_pair(100);

    for cross in ["en-ru", "ru-en"] {
        ensure!(bm25[cross] == 0.0, "BM25 {cross} recall {}", bm25[cross]);
        ensure!(dense[cross] > 0.0, "toy dense {cross} recall {}", dense[cross]);
    }
    for same in ["en-en", "ru-ru"] {
        ensure!(bm25[same] > 0.9, "BM25 {same} recall {}", bm25[same]);
    }
    Ok(format!(
        "BM25 R@100 en-ru {} ru-en {} en-en {} ru-ru {}; toy dense en-ru {} ru-en {}",
        bm25["en-ru"], bm25["ru-en"], bm25["en-en"], bm25["ru-ru"], dense["en-ru"], dense["ru-en"]
    ))
}

fn bias_analysis() -> Outcome {
    let langs = ["en", "de", "fr", "ru"];
    let docs: Vec<Document> = langs
        .iter()
        .flat_map(|l| {
            (0..12).map(move |i| Document {
                doc_id: format!("{l}-{i}"),
                lang: lang(l),
                text: format!("text {l} {i}"),
                translated_text: None,
            })
        })
        .collect();
    let corpus = Corpus::new(docs).unwrap();
    let same_top1 = BTreeMap::from([("en", 15), ("de", 8), ("fr", 5), ("ru", 0)]);
    let mut queries = Vec::new();
    let mut run = RunList::new("planted");
    let mut triples = Vec::new();
    let mut planted_top3: BTreeMap<&str, usize> = langs.iter().map(|l| (*l, 0)).collect();
    let mut cross_queries = 0;
    for (li, l) in langs.iter().enumerate() {
        for i in 0..20 {
            let qid = format!("{l}-q{i}");
            queries.push(Query {
                query_id: qid.clone(),
                lang: lang(l),
                text: "q".into(),
            });
            let other = langs[(li + 1 + i % 3) % 4];
            let first = if i < same_top1[l] { *l } else { other };
            let second = langs[(li + 2) % 4];
            let third = langs[(i + li) % 4];
            let cross = i % 2 == 1;
            let gold = if cross {
                format!("{other}-11")
            } else {
                format!("{l}-11")
            };
            triples.push((qid.clone(), gold, 1));
            if cross {
                cross_queries += 1;
                for pl in [first, second, third] {
                    *planted_top3.get_mut(pl).unwrap() += 1;
                }
            }
            let hits = [first, second, third]
                .iter()
                .enumerate()
                .map(|(j, pl)| Hit::new(format!("{pl}-{}", j * 3 + i % 3), 3.0 - j as f64))
                .collect();
            run.insert(qid, hits).unwrap();
        }
    }
    let queries = QuerySet::new(queries).unwrap();
    let qrels = Qrels::from_triples(triples).unwrap();

    let rate = same_language_rate(&run, &queries, &corpus, 1).unwrap();
    for l in langs {
        let want = same_top1[l] as f64 / 20.0;
        ensure!(
            rate.per_query_language[&lang(l)] == want,
            "{l}: {} vs {want}",
            rate.per_query_language[&lang(l)]
        );
    }
    let want_overall = same_top1.values().sum::<usize>() as f64 / 80.0;
    ensure!(
        rate.overall == want_overall,
        "overall {} vs {want_overall}",
        rate.overall
    );

    let dist = retrieved_language_distribution(&run, &queries, &corpus, &qrels, 3).unwrap();
    ensure!(
        dist.queries == cross_queries,
        "{} cross-lingual queries",
        dist.queries
    );
    for l in langs {
        let want = planted_top3[l] as f64 / (3 * cross_queries) as f64;
        ensure!(
            dist.shares[&lang(l)] == want,
            "{l} share {} vs {want}",
            dist.shares[&lang(l)]
        );
    }
    let sum: f64 = dist.shares.values().sum();
    ensure!((sum - 1.0).abs() < 1e-9, "shares sum to {sum}");
    ensure!(dist.uniform == 0.25, "uniform {}", dist.uniform);
    Ok(format!("rate {} over 80 queries; shares sum {sum}", rate.overall))
}

fn spearman_oracle() -> Outcome {
    let mut rng = oracles::rng(808);
    let mut ties = 0;
    for case in 0..50 {
        let n = rng.random_range(3..30);
        let (xs, ys): (Vec<f64>, Vec<f64>) = if case % 2 == 0 {
            (0..n)
                .map(|_| (rng.random_range(0..5) as f64, rng.random_range(0..5) as f64))
                .unzip()
        } else {
            (0..n)
                .map(|_| (oracles::gaussian(&mut rng), oracles::gaussian(&mut rng)))
                .unzip()
        };
        let has_tie = |v: &[f64]| (0..v.len()).any(|i| (0..i).any(|j| v[i] == v[j]));
        ties += usize::from(has_tie(&xs) || has_tie(&ys));
        match spearman(&xs, &ys) {
            Ok(rho) => {
                let want = oracles::spearman_oracle(&xs, &ys);
                ensure!((rho - want).abs() < 1e-12, "case {case}: {rho} vs {want}");
            }
            Err(e) => {
                let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
                ensure!(
                    constant(&xs) || constant(&ys),
                    "case {case}: unexpected error {e}"
                );
            }
        }
    }
    ensure!(ties >= 20, "only {ties} cases with ties");
    let xs: Vec<f64> = (0..25).map(|i| i as f64 * 0.37 - 2.0).collect();
    let up: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
    let down: Vec<f64> = xs.iter().map(|x| -x * x * x).collect();
    ensure!(
        spearman(&xs, &up).unwrap() == 1.0,
        "increasing gave {}",
        spearman(&xs, &up).unwrap()
    );
    ensure!(
        spearman(&xs, &down).unwrap() == -1.0,
        "decreasing gave {}",
        spearman(&xs, &down).unwrap()
    );
    Ok(format!(
        "50 cases ({ties} with ties) within 1e-12; monotone gives +1 and -1 exactly"
    ))
}

fn latency_protocol() -> Outcome {
    let fixture = LatencyTrace::from_timestamps(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
    let s = normalize_and_summarize(&fixture).unwrap();
    let want = [0.0, 2.0 / 3.0, 4.0 / 3.0, 2.0];
    for (g, w) in s.normalized.iter().zip(want) {
        ensure!((g - w).abs() < 1e-12, "normalized {:?}", s.normalized);
    }
    ensure!(
        (s.exact_to_ann - 2.0 / 3.0).abs() < 1e-12,
        "exact->ann {}",
        s.exact_to_ann
    );

    let fx = bilingual_fixture(&SynthConfig {
        docs_per_language: 80,
        queries_per_pair: 10,
        vocabulary: 500,
        doc_length: 20,
        query_length: 4,
        seed: 9,
    })
    .unwrap();
    let embedder = ToyEmbedder::new(64, 9).unwrap();
    let texts: Vec<&str> = fx.corpus.docs().iter().map(|d| d.text.as_str()).collect();
    let q_texts: Vec<&str> = fx.queries.queries().iter().map(|q| q.text.as_str()).collect();
    let doc_ids = IdMap::new(fx.corpus.docs().iter().map(|d| d.doc_id.clone()).collect()).unwrap();
    let q_ids = IdMap::new(fx.queries.queries().iter().map(|q| q.query_id.clone()).collect()).unwrap();
    let pairs = query_pairs(&fx.queries, &fx.qrels, &fx.corpus).unwrap();
    let workloads = split_by_pair(
        &pairs,
        &embedder.embed_all(&q_texts),
        &q_ids,
        &embedder.embed_all(&texts),
        &doc_ids,
        &fx.corpus,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut ann = AnnEngine::build(
        &workloads,
        HnswParams::with_m(8, 64),
        9,
        IndexAccess::PerPair,
        None,
        dir.path(),
    )
    .unwrap();
    let real = run_interleaved(&workloads, &mut ExactEngine, &mut ann, 10, workloads.len()).unwrap();
    let events = &real.trace.events;
    ensure!(events.len() == 2 * workloads.len(), "{} events", events.len());
    for (i, e) in events.iter().enumerate() {
        let want = if i % 2 == 0 { Method::Exact } else { Method::Ann };
        ensure!(e.method == want, "event {i} is {}", e.method);
    }
    let mut presets = Vec::new();
    for preset in DatasetPreset::ALL {
        let pc = preset.pair_count();
        let trace = LatencyTrace::new(events.clone(), pc).unwrap();
        let s = normalize_and_summarize(&trace).unwrap();
        ensure!(
            s.normalized.iter().all(|&v| (0.0..=pc as f64).contains(&v)),
            "{preset}: out of [0, {pc}]"
        );
        ensure!(
            s.exact_to_ann >= 0.0 && s.ann_to_exact <= 0.0,
            "{preset}: sign convention broken"
        );
        presets.push(pc);
    }
    ensure!(presets == [56, 196, 26], "preset pair counts {presets:?}");
    Ok(format!(
        "fixture reproduced; real trace of {} events alternates; presets {presets:?}",
        events.len()
    ))
}

const BIN: &str = env!("CARGO_BIN_EXE_clir");

fn pipeline(dir: &Path) -> Result<Vec<String>, String> {
    let collection = [
        "--qrels",
        "fx/qrels.txt",
        "--corpus",
        "fx/corpus.jsonl",
        "--queries",
        "fx/queries.jsonl",
    ];
    let dense = [
        "--doc-embeddings",
        "emb/docs.emb",
        "--doc-ids",
        "emb/docs.ids",
        "--query-embeddings",
        "emb/queries.emb",
        "--query-ids",
        "emb/queries.ids",
    ];
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "synth-fixture",
            "--docs-per-language",
            "120",
            "--queries-per-pair",
            "15",
            "--out-dir",
            "fx",
        ],
        vec!["index-bm25", "--corpus", "fx/corpus.jsonl", "--out", "bm25.clxi"],
        vec![
            "retrieve",
            "--method",
            "bm25",
            "--index",
            "bm25.clxi",
            "--queries",
            "fx/queries.jsonl",
            "--out",
            "bm25.trec",
        ],
        vec![
            "toy-embed",
            "--corpus",
            "fx/corpus.jsonl",
            "--queries",
            "fx/queries.jsonl",
            "--lexicon",
            "fx/lexicon.tsv",
            "--out-dir",
            "emb",
        ],
        [
            &["retrieve", "--method", "dense", "--out", "dense.trec"][..],
            &dense,
        ]
        .concat(),
        [&["index-hnsw", "--out", "hnsw.clrh"][..], &dense[..4]].concat(),
        [
            &[
                "retrieve",
                "--method",
                "ann",
                "--index",
                "hnsw.clrh",
                "--out",
                "ann.trec",
            ][..],
            &dense[4..],
        ]
        .concat(),
        [
            &["evaluate", "--run", "bm25.trec", "--out", "bm25.jsonl"][..],
            &collection,
        ]
        .concat(),
        [
            &["evaluate", "--run", "dense.trec", "--out", "dense.jsonl"][..],
            &collection,
        ]
        .concat(),
        [
            &["evaluate", "--run", "ann.trec", "--out", "ann.jsonl"][..],
            &collection,
        ]
        .concat(),
        [
            &[
                "make-candidates",
                "--run",
                "dense.trec",
                "--out",
                "cands.jsonl",
                "--requests",
                "req.jsonl",
            ][..],
            &collection,
        ]
        .concat(),
        [
            &[
                "export-negatives",
                "--mode",
                "easy",
                "--negatives",
                "3",
                "--out",
                "easy.jsonl",
            ][..],
            &collection,
        ]
        .concat(),
        [
            &[
                "export-negatives",
                "--mode",
                "hard",
                "--run",
                "bm25.trec",
                "--negatives",
                "3",
                "--out",
                "hard.jsonl",
            ][..],
            &collection,
        ]
        .concat(),
        [
            &["analyze-bias", "--run", "dense.trec", "--out", "bias.json"][..],
            &collection,
        ]
        .concat(),
    ];
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(BIN)
            .current_dir(dir)
            .args(["--seed", "17"])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        Ok(())
    };
    for step in &steps {
        run(step)?;
    }
    // a deterministic stand-in for the cross-encoder
    let requests = read_scoring_requests(&dir.join("req.jsonl")).map_err(|e| e.to_string())?;
    let responses: Vec<ScoringResponse> = requests
        .iter()
        .map(|r| ScoringResponse {
            query_id: r.query_id.clone(),
            doc_id: r.doc_id.clone(),
            score: tokenize(&r.doc_text).len() as f64 / (1.0 + r.doc_id.len() as f64),
        })
        .collect();
    write_scores(&dir.join("resp.jsonl"), &responses).map_err(|e| e.to_string())?;
    run(&[
        "apply-scores",
        "--candidates",
        "cands.jsonl",
        "--scores",
        "resp.jsonl",
        "--out",
        "rerank.trec",
    ])?;
    run(&[
        &["evaluate", "--run", "rerank.trec", "--out", "rerank.jsonl"][..],
        &collection,
    ]
    .concat())?;
    Ok([
        "fx/corpus.jsonl",
        "fx/queries.jsonl",
        "fx/qrels.txt",
        "fx/lexicon.tsv",
        "bm25.clxi",
        "emb/docs.emb",
        "emb/docs.ids",
        "emb/queries.emb",
        "hnsw.clrh",
        "bm25.trec",
        "dense.trec",
        "ann.trec",
        "bm25.jsonl",
        "dense.jsonl",
        "ann.jsonl",
        "cands.jsonl",
        "req.jsonl",
        "easy.jsonl",
        "hard.jsonl",
        "bias.json",
        "rerank.trec",
        "rerank.jsonl",
    ]
    .map(String::from)
    .to_vec())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files = pipeline(a.path())?;
    pipeline(b.path())?;
    for f in &files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure!(x == y, "{f} differs between runs");
        ensure!(!x.is_empty(), "{f} is empty");
    }
    let header = std::fs::read_to_string(a.path().join("bm25.trec")).unwrap();
    ensure!(header.contains("# seed 17"), "seed missing from run header");
    Ok(format!(
        "{} output files byte-identical across two runs",
        files.len()
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "BM25 oracle equivalence",
            budget: Some(Duration::from_secs(5)),
            check: bm25_oracle_equivalence,
        },
        Criterion {
            id: 2,
            name: "exact dense search",
            budget: Some(Duration::from_secs(5)),
            check: exact_dense_search,
        },
        Criterion {
            id: 3,
            name: "HNSW quality",
            budget: Some(Duration::from_secs(60)),
            check: hnsw_quality,
        },
        Criterion {
            id: 4,
            name: "metric correctness",
            budget: None,
            check: metric_correctness,
        },
        Criterion {
            id: 5,
            name: "gold injection",
            budget: None,
            check: gold_injection,
        },
        Criterion {
            id: 6,
            name: "cross-script lexical failure",
            budget: None,
            check: cross_script_lexical_failure,
        },
        Criterion {
            id: 7,
            name: "bias analysis",
            budget: None,
            check: bias_analysis,
        },
        Criterion {
            id: 8,
            name: "Spearman",
            budget: None,
            check: spearman_oracle,
        },
        Criterion {
            id: 9,
            name: "latency protocol",
            budget: None,
            check: latency_protocol,
        },
        Criterion {
            id: 10,
            name: "determinism",
            budget: None,
            check: determinism,
        },
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{status} {:>2} {:<30} {:>8.2}s  {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
