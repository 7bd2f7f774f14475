use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clir_core::analysis::{
    bias_report, correlate_similarity_with_performance, render_correlation_table, CorrelationOptions,
    CorrelationRow, TypologyTable,
};
use clir_core::ann::{default_ef, HnswIndex};
use clir_core::bench::{
    latency_rows, normalize_and_summarize, render_latency_table, run_interleaved, split_by_pair, AnnEngine,
    ExactEngine, Method as BenchMethod,
};
use clir_core::corpus::{
    dedupe_and_rebalance, query_pairs, sample_queries, Corpus, CorpusManifest, Qrels, QuerySet,
};
use clir_core::dense::{
    load_embeddings, write_embeddings, write_ids, ExactSearcher, IdMap, LoadedEmbeddings, ToyEmbedder,
};
use clir_core::eval::{evaluate, recall_at_k, EvalOptions, MetricReport};
use clir_core::lexical::{Field, InvertedIndex};
use clir_core::rerank::{
    export_scoring_requests, import_scores, make_candidates, read_candidates, rerank_all, training_pairs,
    write_candidates, write_training_pairs, DEFAULT_RERANK_DEPTH,
};
use clir_core::synth::{bilingual_fixture, SynthConfig};
use clir_core::{DatasetPreset, Error, LanguagePair, LanguageSet, RunList};
use serde_json::{json, Value};

use crate::config::{input, optional_input, RunConfig};
use crate::*;

struct Ctx {
    cfg: RunConfig,
    seed: u64,
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match cli.config {
        Some(path) => RunConfig::load(&input(Some(path), &None, "config")?)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: cfg.seed(cli.seed),
        cfg,
    };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::IndexBm25(a) => index_bm25(&ctx, a),
        Command::IndexHnsw(a) => index_hnsw(&ctx, a),
        Command::Retrieve(a) => retrieve(&ctx, a),
        Command::MakeCandidates(a) => candidates(&ctx, a),
        Command::ExportNegatives(a) => negatives(&ctx, a),
        Command::ApplyScores(a) => apply_scores(&ctx, a),
        Command::Evaluate(a) => evaluate_run(&ctx, a),
        Command::AnalyzeBias(a) => analyze_bias(&ctx, a),
        Command::AnalyzeLingsim(a) => analyze_lingsim(&ctx, a),
        Command::BenchLatency(a) => bench_latency(&ctx, a),
        Command::ToyEmbed(a) => toy_embed(&ctx, a),
        Command::SynthFixture(a) => synth_fixture(&ctx, a),
    }
}

fn header(command: &str, seed: u64) -> Vec<String> {
    vec![
        format!("clir {} {command}", env!("CARGO_PKG_VERSION")),
        format!("seed {seed}"),
    ]
}

fn json_header(command: &str, seed: u64) -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("command".to_owned(), json!(command)),
        ("seed".to_owned(), json!(seed)),
        ("version".to_owned(), json!(env!("CARGO_PKG_VERSION"))),
    ])
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

impl Ctx {
    fn corpus(&self, flag: Option<PathBuf>) -> Result<Corpus> {
        let path = input(flag, &self.cfg.paths.corpus, "corpus")?;
        Ok(Corpus::read(&path, &LanguageSet::known())?)
    }

    fn queries(&self, flag: Option<PathBuf>) -> Result<QuerySet> {
        let path = input(flag, &self.cfg.paths.queries, "queries")?;
        Ok(QuerySet::read(&path, &LanguageSet::known())?)
    }

    fn qrels(&self, flag: Option<PathBuf>) -> Result<Qrels> {
        let path = input(flag, &self.cfg.paths.qrels, "qrels")?;
        Ok(Qrels::read(&path)?)
    }

    fn doc_vectors(&self, a: DocEmbeddingArgs) -> Result<LoadedEmbeddings> {
        let p = &self.cfg.paths;
        embeddings(
            input(a.doc_embeddings, &p.doc_embeddings, "doc-embeddings")?,
            input(a.doc_ids, &p.doc_ids, "doc-ids")?,
        )
    }

    fn query_vectors(&self, a: QueryEmbeddingArgs) -> Result<LoadedEmbeddings> {
        let p = &self.cfg.paths;
        embeddings(
            input(a.query_embeddings, &p.query_embeddings, "query-embeddings")?,
            input(a.query_ids, &p.query_ids, "query-ids")?,
        )
    }
}

fn embeddings(matrix: PathBuf, ids: PathBuf) -> Result<LoadedEmbeddings> {
    let loaded = load_embeddings(&matrix, &ids)?;
    if !loaded.renormalized.is_empty() {
        eprintln!(
            "warning: {} rows of {} were rescaled to unit norm",
            loaded.renormalized.len(),
            matrix.display()
        );
    }
    Ok(loaded)
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    let dataset = ctx.cfg.dataset(a.dataset);
    let preset = dataset.parse::<DatasetPreset>().ok();
    let languages = if !a.languages.is_empty() {
        Some(LanguageSet::new(&a.languages)?)
    } else {
        preset.map(DatasetPreset::languages)
    };
    let accepted = languages.clone().unwrap_or_else(LanguageSet::known);
    let p = &ctx.cfg.paths;
    let mut corpus = Corpus::read(&input(a.input.corpus, &p.corpus, "corpus")?, &accepted)?;
    let mut queries = QuerySet::read(&input(a.input.queries, &p.queries, "queries")?, &accepted)?;
    let mut qrels = ctx.qrels(a.input.qrels)?;
    let k = ctx.cfg.k(a.k)?;

    for q in qrels.query_ids() {
        if queries.get(q).is_none() {
            return Err(Error::Invalid(format!("qrels query {q:?} is not in the query file")).into());
        }
        for d in qrels.judged(q).into_iter().flat_map(|j| j.keys()) {
            if corpus.get(d).is_none() {
                return Err(Error::UnknownDocument(d.clone()).into());
            }
        }
    }

    if a.rebalance {
        let langs: Vec<_> = languages
            .ok_or_else(|| Usage("--rebalance needs --languages or a preset --dataset".into()))?
            .iter()
            .cloned()
            .collect();
        let out = dedupe_and_rebalance(&corpus, &langs, ctx.seed)?;
        eprintln!("merged {} duplicate documents", out.merged.len());
        qrels = qrels.remap_docs(&out.merged);
        corpus = out.corpus;
    }
    if a.truncate > 0 {
        corpus = corpus.truncated(a.truncate);
    }
    if let Some(n) = a.queries_per_pair {
        let pairs = query_pairs(&queries, &qrels, &corpus)?;
        let mut by_pair: BTreeMap<&LanguagePair, Vec<_>> = BTreeMap::new();
        for q in queries.queries() {
            if let Some(pair) = pairs.get(&q.query_id) {
                by_pair.entry(pair).or_default().push(q.clone());
            }
        }
        let mut kept = Vec::new();
        for (pair, pool) in by_pair {
            let sampled = sample_queries(&QuerySet::new(pool)?, pair, n, ctx.seed)?;
            kept.extend(sampled.queries().iter().cloned());
        }
        queries = QuerySet::new(kept)?;
        qrels = qrels.restrict(queries.queries().iter().map(|q| q.query_id.as_str()));
    }

    create_dir(&a.out_dir)?;
    corpus.write(&a.out_dir.join("corpus.jsonl"))?;
    queries.write(&a.out_dir.join("queries.jsonl"))?;
    qrels.write(&a.out_dir.join("qrels.txt"))?;
    let manifest = CorpusManifest::describe(&dataset, &corpus, k, a.truncate, ctx.seed)?;
    write_json(
        &a.out_dir.join("manifest.json"),
        &serde_json::to_value(&manifest)?,
    )?;
    eprintln!(
        "{} documents, {} queries, {} judged queries",
        corpus.len(),
        queries.len(),
        qrels.num_queries()
    );
    Ok(())
}

fn index_bm25(ctx: &Ctx, a: IndexBm25Args) -> Result<()> {
    let corpus = ctx.corpus(a.corpus)?;
    let params = ctx.cfg.bm25(a.k1, a.b)?;
    let index = InvertedIndex::build(&corpus, ctx.cfg.field(a.field), params)?;
    index.save(&a.out)?;
    eprintln!(
        "indexed {} documents, {} terms, avg length {:.2}",
        index.doc_count(),
        index.terms().count(),
        index.avg_doc_length()
    );
    Ok(())
}

fn index_hnsw(ctx: &Ctx, a: IndexHnswArgs) -> Result<()> {
    let docs = ctx.doc_vectors(a.docs)?;
    let params = ctx.cfg.hnsw(a.hnsw.m, a.hnsw.ef_construction, a.hnsw.ef)?;
    let index = HnswIndex::build(&docs.matrix, &docs.ids, params, ctx.seed)?.with_model(a.model);
    index.save(&a.out)?;
    eprintln!("indexed {} vectors, top layer {}", index.len(), index.max_level());
    Ok(())
}

fn retrieve(ctx: &Ctx, a: RetrieveArgs) -> Result<()> {
    let k = ctx.cfg.k(a.k)?;
    let method = match a.method {
        Method::Bm25 => "bm25",
        Method::Dense => "dense",
        Method::Ann => "ann",
    };
    let tag = a.tag.unwrap_or_else(|| method.to_owned());
    let mut head = header("retrieve", ctx.seed);
    head.push(format!("method {method}"));
    head.push(format!("k {k}"));
    let run = match a.method {
        Method::Bm25 => {
            let index = InvertedIndex::load(&input(a.index, &None, "index")?)?;
            let queries = ctx.queries(a.queries)?;
            let p = index.params();
            head.push(format!("bm25 k1 {} b {} field {:?}", p.k1, p.b, index.field()));
            index.search_all(&queries, k, &tag)?
        }
        Method::Dense => {
            let docs = ctx.doc_vectors(a.docs)?;
            let queries = ctx.query_vectors(a.query_vecs)?;
            ExactSearcher::new(&docs.matrix, &docs.ids)?.search_batch(
                &queries.matrix,
                &queries.ids,
                k,
                &tag,
            )?
        }
        Method::Ann => {
            let index = HnswIndex::load(&input(a.index, &None, "index")?)?;
            let queries = ctx.query_vectors(a.query_vecs)?;
            let ef = a.ef.or(ctx.cfg.hnsw.ef_search).or(index.params().ef_search);
            let p = index.params();
            head.push(format!(
                "hnsw m {} ef_construction {} ef {} index_seed {}",
                p.m,
                p.ef_construction,
                ef.unwrap_or_else(|| default_ef(k)),
                index.seed()
            ));
            index.search_batch(&queries.matrix, &queries.ids, k, ef, &tag)?
        }
    };
    run.write_trec(&a.out, &head)?;
    eprintln!("{} queries retrieved", run.len());
    Ok(())
}

fn candidates(ctx: &Ctx, a: MakeCandidatesArgs) -> Result<()> {
    let run = RunList::read_trec(&input(Some(a.run), &None, "run")?)?;
    let qrels = ctx.qrels(a.qrels)?;
    let depth = a.depth.unwrap_or(DEFAULT_RERANK_DEPTH);
    let sets = make_candidates(&run, &qrels, depth)?;
    write_candidates(&a.out, &sets)?;
    let injected = sets.iter().filter(|c| c.injected).count();
    eprintln!("{} candidate sets, gold injected into {injected}", sets.len());
    if let Some(path) = a.requests {
        let corpus = ctx.corpus(a.corpus)?;
        let queries = ctx.queries(a.queries)?;
        let n = export_scoring_requests(&path, &sets, &queries, &corpus)?;
        eprintln!("{n} scoring requests");
    }
    Ok(())
}

fn negatives(ctx: &Ctx, a: ExportNegativesArgs) -> Result<()> {
    let corpus = ctx.corpus(a.input.corpus)?;
    let qrels = ctx.qrels(a.input.qrels)?;
    let queries = ctx
        .queries(a.input.queries)?
        .filter(|q| qrels.contains_query(&q.query_id));
    let run = match a.run {
        Some(p) => Some(RunList::read_trec(&input(Some(p), &None, "run")?)?),
        None => None,
    };
    let pairs = training_pairs(
        &queries,
        &qrels,
        &corpus,
        run.as_ref(),
        a.mode,
        a.negatives,
        ctx.seed,
    )?;
    write_training_pairs(&a.out, &pairs)?;
    eprintln!("{} training pairs for {} queries", pairs.len(), queries.len());
    Ok(())
}

fn apply_scores(ctx: &Ctx, a: ApplyScoresArgs) -> Result<()> {
    let sets = read_candidates(&input(Some(a.candidates), &None, "candidates")?)?;
    let scores = import_scores(&input(Some(a.scores), &None, "scores")?)?;
    let run = rerank_all(&sets, &scores, &a.tag)?;
    let mut head = header("apply-scores", ctx.seed);
    head.push("method rerank".to_owned());
    run.write_trec(&a.out, &head)?;
    Ok(())
}

/// Labels run queries with their language pair when the collection is known.
fn attach_pairs(ctx: &Ctx, run: &mut RunList, input: &CollectionArgs, qrels: &Qrels) -> Result<bool> {
    let p = &ctx.cfg.paths;
    let corpus = optional_input(input.corpus.clone(), &p.corpus, "corpus")?;
    let queries = optional_input(input.queries.clone(), &p.queries, "queries")?;
    let (Some(corpus), Some(queries)) = (corpus, queries) else {
        return Ok(false);
    };
    let corpus = Corpus::read(&corpus, &LanguageSet::known())?;
    let queries = QuerySet::read(&queries, &LanguageSet::known())?;
    run.set_pairs(&query_pairs(&queries, qrels, &corpus)?);
    Ok(true)
}

fn evaluate_run(ctx: &Ctx, a: EvaluateArgs) -> Result<()> {
    let mut run = RunList::read_trec(&input(Some(a.run), &None, "run")?)?;
    let qrels = ctx.qrels(a.input.qrels.clone())?;
    let paired = attach_pairs(ctx, &mut run, &a.input, &qrels)?;
    let options = EvalOptions {
        relevance_threshold: a.relevance_threshold,
    };
    let report = evaluate(&run, &qrels, &a.k, options)?;
    let mut head = json_header("evaluate", ctx.seed);
    head.insert("cutoffs".into(), json!(a.k));
    head.insert("relevance_threshold".into(), json!(a.relevance_threshold));
    head.insert("paired".into(), json!(paired));
    report.write_jsonl(&a.out, head)?;
    print!("{}", report.render_table());
    Ok(())
}

fn analyze_bias(ctx: &Ctx, a: AnalyzeBiasArgs) -> Result<()> {
    let run = RunList::read_trec(&input(Some(a.run), &None, "run")?)?;
    let corpus = ctx.corpus(a.input.corpus)?;
    let queries = ctx.queries(a.input.queries)?;
    let qrels = ctx.qrels(a.input.qrels)?;
    let report = bias_report(&run, &queries, &corpus, &qrels, a.depth)?;
    let mut head = json_header("analyze-bias", ctx.seed);
    head.insert("depth".into(), json!(a.depth));
    write_json(&a.out, &json!({ "header": head, "report": report }))?;
    print!("{}", report.render());
    Ok(())
}

fn analyze_lingsim(ctx: &Ctx, a: AnalyzeLingsimArgs) -> Result<()> {
    let report = MetricReport::read_jsonl(&input(Some(a.report), &None, "report")?)?;
    let table = TypologyTable::read(&input(a.typology, &ctx.cfg.paths.typology, "typology")?)?;
    let k = ctx.cfg.k(a.k)?;
    let recall = report.recall_by_pair(k);
    if recall.is_empty() {
        return Err(Error::Invalid(format!("report has no Recall@{k} values")).into());
    }
    let options = CorrelationOptions {
        include_same_language: a.include_same_language,
    };
    let correlations = table
        .feature_sets()
        .into_iter()
        .map(|set| correlate_similarity_with_performance(&recall, &table, set, options))
        .collect::<clir_core::Result<Vec<_>>>()?;
    let rows = vec![CorrelationRow {
        model: a.model.unwrap_or_else(|| report.run_tag.clone()),
        dataset: ctx.cfg.dataset(a.dataset),
        correlations,
    }];
    let mut head = json_header("analyze-lingsim", ctx.seed);
    head.insert("k".into(), json!(k));
    head.insert("include_same_language".into(), json!(a.include_same_language));
    write_json(&a.out, &json!({ "header": head, "rows": rows }))?;
    print!("{}", render_correlation_table(&rows));
    Ok(())
}

fn macro_recall(runs: &BTreeMap<String, RunList>, qrels: &Qrels, k: usize) -> Result<f64> {
    let mut per_pair = Vec::new();
    for run in runs.values() {
        per_pair.extend(recall_at_k(run, qrels, k)?.into_values());
    }
    Ok(per_pair.iter().sum::<f64>() / per_pair.len().max(1) as f64)
}

fn bench_latency(ctx: &Ctx, a: BenchLatencyArgs) -> Result<()> {
    let corpus = ctx.corpus(a.input.corpus)?;
    let queries = ctx.queries(a.input.queries)?;
    let qrels = ctx.qrels(a.input.qrels)?;
    let docs = ctx.doc_vectors(a.docs)?;
    let qv = ctx.query_vectors(a.query_vecs)?;
    let k = ctx.cfg.k(a.k)?;
    let params = ctx.cfg.hnsw(a.hnsw.m, a.hnsw.ef_construction, a.hnsw.ef)?;
    let dataset = ctx.cfg.dataset(a.dataset);

    let pairs = query_pairs(&queries, &qrels, &corpus)?;
    let judged: Vec<usize> = (0..qv.ids.len())
        .filter(|&r| pairs.contains_key(qv.ids.id(r)))
        .collect();
    let qmatrix = qv.matrix.select(&judged);
    let qids: IdMap = qv.ids.select(&judged);
    let workloads = split_by_pair(&pairs, &qmatrix, &qids, &docs.matrix, &docs.ids, &corpus)?;
    let pair_count = match a.pair_count {
        Some(n) => n,
        None => dataset
            .parse::<DatasetPreset>()
            .map(DatasetPreset::pair_count)
            .unwrap_or(workloads.len()),
    };

    let work_dir = a.work_dir.unwrap_or_else(|| {
        let mut name = a.out.as_os_str().to_owned();
        name.push(".indexes");
        PathBuf::from(name)
    });
    create_dir(&work_dir)?;
    let mut ann = AnnEngine::build(
        &workloads,
        params,
        ctx.seed,
        a.access,
        params.ef_search,
        &work_dir,
    )?;
    let mut exact = ExactEngine;
    let result = run_interleaved(&workloads, &mut exact, &mut ann, k, pair_count)?;
    let summary = normalize_and_summarize(&result.trace)?;

    let recall = BTreeMap::from([
        (BenchMethod::Exact, macro_recall(&result.exact_runs, &qrels, k)?),
        (BenchMethod::Ann, macro_recall(&result.ann_runs, &qrels, k)?),
    ]);
    let rows = latency_rows(&dataset, &summary, &recall);
    let durations: Vec<Value> = result
        .durations
        .iter()
        .map(|(pair, method, secs)| json!({ "pair": pair.to_string(), "method": method, "seconds": secs }))
        .collect();
    let mut head = json_header("bench-latency", ctx.seed);
    head.insert("k".into(), json!(k));
    head.insert("pair_count".into(), json!(pair_count));
    head.insert("access".into(), json!(a.access));
    head.insert("hnsw".into(), json!(params));
    write_json(
        &a.out,
        &json!({
            "header": head,
            "summary": summary,
            "rows": rows,
            "overlap": result.overlap,
            "durations": durations,
        }),
    )?;
    print!("{}", render_latency_table(&rows, k));
    Ok(())
}

fn toy_embed(ctx: &Ctx, a: ToyEmbedArgs) -> Result<()> {
    let p = &ctx.cfg.paths;
    let corpus = optional_input(a.corpus, &p.corpus, "corpus")?;
    let queries = optional_input(a.queries, &p.queries, "queries")?;
    if corpus.is_none() && queries.is_none() {
        return Err(Usage("toy-embed needs --corpus, --queries or both".into()).into());
    }
    let mut embedder = ToyEmbedder::new(a.dim, ctx.seed)?;
    if let Some(lex) = optional_input(a.lexicon, &p.lexicon, "lexicon")? {
        embedder = embedder.with_lexicon_file(&lex)?;
    }
    create_dir(&a.out_dir)?;
    if let Some(path) = corpus {
        let corpus = Corpus::read(&path, &LanguageSet::known())?;
        let field = ctx.cfg.field(a.field);
        let texts = corpus
            .docs()
            .iter()
            .map(|d| match field {
                Field::Original => Ok(d.text.as_str()),
                Field::Translated => d
                    .translated_text
                    .as_deref()
                    .ok_or_else(|| Error::MissingTranslation(d.doc_id.clone())),
            })
            .collect::<clir_core::Result<Vec<_>>>()?;
        let ids = IdMap::new(corpus.docs().iter().map(|d| d.doc_id.clone()).collect())?;
        write_embeddings(&a.out_dir.join("docs.emb"), &embedder.embed_all(&texts))?;
        write_ids(&a.out_dir.join("docs.ids"), &ids)?;
    }
    if let Some(path) = queries {
        let queries = QuerySet::read(&path, &LanguageSet::known())?;
        let texts: Vec<&str> = queries.queries().iter().map(|q| q.text.as_str()).collect();
        let ids = IdMap::new(queries.queries().iter().map(|q| q.query_id.clone()).collect())?;
        write_embeddings(&a.out_dir.join("queries.emb"), &embedder.embed_all(&texts))?;
        write_ids(&a.out_dir.join("queries.ids"), &ids)?;
    }
    Ok(())
}

fn synth_fixture(ctx: &Ctx, a: SynthFixtureArgs) -> Result<()> {
    let config = SynthConfig {
        docs_per_language: a.docs_per_language,
        queries_per_pair: a.queries_per_pair,
        vocabulary: a.vocabulary,
        doc_length: a.doc_length,
        query_length: a.query_length,
        seed: ctx.seed,
    };
    let fixture = bilingual_fixture(&config)?;
    fixture.write(&a.out_dir)?;
    eprintln!(
        "{} documents, {} queries",
        fixture.corpus.len(),
        fixture.queries.len()
    );
    Ok(())
}
