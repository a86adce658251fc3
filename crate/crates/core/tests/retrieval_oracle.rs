//! Brute-force reference for fact retrieval: enumerate every fact with a
//! linear scan, score it literally, sort stably, apply the per-candidate
//! cap and cross-candidate dedup exactly as specified, then require the
//! indexed implementation to be byte-identical on randomized inputs.

use knreader_core::data::ClozeInstance;
use knreader_core::knowledge::{default_lemmatizer, FactStore, KnowledgeTriple};
use knreader_core::retrieval::{retrieve_facts, RetrievalConfig, RetrievedFact, RetrievedFacts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Literal re-statement of the selection rule, index-free.
fn brute_force(
    instance: &ClozeInstance,
    triples: &[KnowledgeTriple],
    cfg: &RetrievalConfig,
) -> RetrievedFacts {
    let lem = default_lemmatizer;
    let cap = cfg.budget / instance.candidates.len();

    let tier = |token_lemma: &str| -> u32 {
        let in_set = |tokens: &[String]| tokens.iter().any(|t| lem(t) == token_lemma);
        let cand_tokens: Vec<String> = instance
            .candidates
            .iter()
            .flat_map(|c| c.split_whitespace().map(String::from))
            .collect();
        if in_set(&cand_tokens) {
            cfg.weights.answer
        } else if in_set(&instance.question_tokens) {
            cfg.weights.question
        } else if in_set(&instance.document_tokens) {
            cfg.weights.document
        } else {
            0
        }
    };
    let node_weight = |phrase: &[String]| -> u32 {
        phrase.iter().map(|t| tier(&lem(t))).max().unwrap_or(0)
    };

    let mut claimed: Vec<usize> = Vec::new();
    let mut entries = Vec::new();
    for (ci, cand) in instance.candidates.iter().enumerate() {
        let cand_lemmas: Vec<String> = cand.split_whitespace().map(lem).collect();
        // Linear scan over the whole store, in ordinal order.
        let mut matching: Vec<(usize, u32)> = Vec::new();
        for (fid, t) in triples.iter().enumerate() {
            let contains = t
                .subject_tokens
                .iter()
                .chain(&t.object_tokens)
                .any(|tok| cand_lemmas.contains(&lem(tok)));
            if contains {
                let w = node_weight(&t.subject_tokens) + node_weight(&t.object_tokens);
                matching.push((fid, w));
            }
        }
        // Stable sort by weight descending keeps ordinal order on ties.
        matching.sort_by_key(|&(_, w)| std::cmp::Reverse(w));
        let mut taken = 0;
        for (fid, w) in matching {
            if taken == cap {
                break;
            }
            if claimed.contains(&fid) {
                continue;
            }
            claimed.push(fid);
            entries.push(RetrievedFact {
                fact_id: fid,
                weight: w,
                candidate_index: ci,
            });
            taken += 1;
        }
    }
    RetrievedFacts { entries }
}

fn lexicon() -> Vec<String> {
    let mut words: Vec<String> = [
        "bird", "head", "ear", "eye", "tree", "dog", "cat", "fox", "hen", "cow", "bow", "arrow",
        "hunt", "animal", "garden", "winter", "song", "cloth", "king", "magic", "father", "son",
        "cliff", "sea", "shore", "person", "help", "hand", "stone", "apple",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    // Inflected forms so lemmatization actually matters.
    words.extend(
        ["birds", "animals", "hunting", "hunted", "trees", "songs", "stones", "apples"]
            .iter()
            .map(|s| s.to_string()),
    );
    words
}

fn random_instance(rng: &mut ChaCha8Rng, words: &[String]) -> ClozeInstance {
    let pick = |rng: &mut ChaCha8Rng| words[rng.random_range(0..words.len())].clone();
    let mut candidates: Vec<String> = Vec::new();
    while candidates.len() < 10 {
        let w = pick(rng);
        if !candidates.contains(&w) {
            candidates.push(w);
        }
    }
    let mut document_tokens: Vec<String> = (0..rng.random_range(8..25)).map(|_| pick(rng)).collect();
    document_tokens.extend(candidates.iter().cloned());
    let mut question_tokens: Vec<String> = (0..rng.random_range(2..7)).map(|_| pick(rng)).collect();
    let pl = rng.random_range(0..=question_tokens.len());
    question_tokens.insert(pl, "xxxxx".into());
    let gold = candidates[rng.random_range(0..10)].clone();
    ClozeInstance {
        instance_id: "r".into(),
        document_tokens,
        question_tokens,
        placeholder_index: pl,
        candidates,
        gold_answer: gold,
    }
}

fn random_store_text(rng: &mut ChaCha8Rng, words: &[String], n: usize) -> String {
    let relations = ["/r/IsA", "/r/PartOf", "/r/IsUsedFor", "/r/RelatedTo", "/r/CapableOf"];
    let mut text = String::new();
    for _ in 0..n {
        let phrase = |rng: &mut ChaCha8Rng| {
            let len = rng.random_range(1..4);
            (0..len)
                .map(|_| words[rng.random_range(0..words.len())].clone())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let rel = relations[rng.random_range(0..relations.len())];
        let tag = if rng.random_bool(0.3) { "wordnet3" } else { "omcs" };
        text.push_str(&format!("{}\t{}\t{}\t{}\n", phrase(rng), rel, phrase(rng), tag));
    }
    text
}

#[test]
fn randomized_instances_match_brute_force_byte_for_byte() {
    let words = lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACE);
    for round in 0..200 {
        let n_facts = rng.random_range(0..=500);
        let store_text = random_store_text(&mut rng, &words, n_facts);
        let store = FactStore::ingest(store_text.as_bytes(), default_lemmatizer).unwrap();
        let instance = random_instance(&mut rng, &words);
        let budget = [20, 50, 100][rng.random_range(0..3)];
        let cfg = RetrievalConfig::new(budget);

        let got = retrieve_facts(&instance, &store, &cfg).unwrap();
        let want = brute_force(&instance, store.triples(), &cfg);
        assert_eq!(
            serde_json::to_string(&got).unwrap(),
            serde_json::to_string(&want).unwrap(),
            "round {round} with {n_facts} facts, budget {budget}"
        );
    }
}

#[test]
fn quota_dedup_and_ordering_invariants_hold_on_random_inputs() {
    let words = lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEE);
    for _ in 0..60 {
        let n_facts = rng.random_range(0..=400);
        let store_text = random_store_text(&mut rng, &words, n_facts);
        let store = FactStore::ingest(store_text.as_bytes(), default_lemmatizer).unwrap();
        let instance = random_instance(&mut rng, &words);
        let cfg = RetrievalConfig::new(50);
        let got = retrieve_facts(&instance, &store, &cfg).unwrap();

        assert!(got.len() <= cfg.budget);
        let mut seen = std::collections::HashSet::new();
        for e in &got.entries {
            assert!(seen.insert(e.fact_id), "fact {} retrieved twice", e.fact_id);
        }
        for ci in 0..10 {
            let slice: Vec<&RetrievedFact> = got
                .entries
                .iter()
                .filter(|e| e.candidate_index == ci)
                .collect();
            assert!(slice.len() <= cfg.budget / 10);
            for pair in slice.windows(2) {
                assert!(
                    pair[0].weight > pair[1].weight
                        || (pair[0].weight == pair[1].weight
                            && pair[0].fact_id < pair[1].fact_id),
                    "ordering violated for candidate {ci}"
                );
            }
        }
    }
}

/// Tie-breaking fixture: equal-weight facts must come back in store order.
#[test]
fn equal_weights_resolve_by_ingestion_order() {
    let text = "head\t/r/RelatedTo\tthingc\tomcs\n\
                head\t/r/RelatedTo\tthingb\tomcs\n\
                head\t/r/RelatedTo\tthinga\tomcs\n";
    let store = FactStore::ingest(text.as_bytes(), default_lemmatizer).unwrap();
    let mut document_tokens: Vec<String> =
        "one two three four five six seven eight nine".split_whitespace().map(String::from).collect();
    let candidates: Vec<String> = ["head", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    document_tokens.push("head".into());
    let instance = ClozeInstance {
        instance_id: "tie".into(),
        document_tokens,
        question_tokens: vec!["xxxxx".into()],
        placeholder_index: 0,
        candidates,
        gold_answer: "head".into(),
    };
    let got = retrieve_facts(&instance, &store, &RetrievalConfig::new(20)).unwrap();
    let head_facts: Vec<usize> = got
        .entries
        .iter()
        .filter(|e| e.candidate_index == 0)
        .map(|e| e.fact_id)
        .collect();
    assert_eq!(head_facts, vec![0, 1], "cap 2, earliest ordinals win ties");
    let want = brute_force(&instance, store.triples(), &RetrievalConfig::new(20));
    assert_eq!(
        serde_json::to_string(&got).unwrap(),
        serde_json::to_string(&want).unwrap()
    );
}

/// Cross-candidate dedup fixture: a fact naming two candidates belongs to
/// the earlier one and is skipped (not double-counted) for the later one.
#[test]
fn shared_fact_is_added_once_for_the_earlier_candidate() {
    let text = "ear\t/r/PartOf\thead\tomcs\n\
                ear\t/r/RelatedTo\tsound\tomcs\n\
                head\t/r/PartOf\tbody\tomcs\n";
    let store = FactStore::ingest(text.as_bytes(), default_lemmatizer).unwrap();
    let mut document_tokens: Vec<String> =
        "one two three four five six seven eight".split_whitespace().map(String::from).collect();
    let candidates: Vec<String> = ["ear", "head", "one", "two", "three", "four", "five", "six", "seven", "eight"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    document_tokens.push("ear".into());
    document_tokens.push("head".into());
    let instance = ClozeInstance {
        instance_id: "dedup".into(),
        document_tokens,
        question_tokens: vec!["xxxxx".into()],
        placeholder_index: 0,
        candidates,
        gold_answer: "ear".into(),
    };
    let got = retrieve_facts(&instance, &store, &RetrievalConfig::new(50)).unwrap();
    // Fact 0 names both "ear" (candidate 0) and "head" (candidate 1): owned
    // by ear. Head still receives its own fact 2.
    let owner_of_f0: Vec<usize> = got
        .entries
        .iter()
        .filter(|e| e.fact_id == 0)
        .map(|e| e.candidate_index)
        .collect();
    assert_eq!(owner_of_f0, vec![0]);
    let head_facts: Vec<usize> = got
        .entries
        .iter()
        .filter(|e| e.candidate_index == 1)
        .map(|e| e.fact_id)
        .collect();
    assert_eq!(head_facts, vec![2]);
    let want = brute_force(&instance, store.triples(), &RetrievalConfig::new(50));
    assert_eq!(
        serde_json::to_string(&got).unwrap(),
        serde_json::to_string(&want).unwrap()
    );
}

/// Per-candidate quota fixture: abundant facts fill exactly budget/10 per
/// candidate.
#[test]
fn quota_is_exact_with_abundant_facts() {
    let mut text = String::new();
    let candidates = ["bird", "head", "ear", "eye", "tree", "dog", "cat", "fox", "hen", "cow"];
    for c in candidates {
        for k in 0..8 {
            text.push_str(&format!("{c}\t/r/RelatedTo\tfiller{k}\tomcs\n"));
        }
    }
    let store = FactStore::ingest(text.as_bytes(), default_lemmatizer).unwrap();
    let document_tokens: Vec<String> = candidates.iter().map(|s| s.to_string()).collect();
    let instance = ClozeInstance {
        instance_id: "quota".into(),
        document_tokens,
        question_tokens: vec!["xxxxx".into()],
        placeholder_index: 0,
        candidates: candidates.iter().map(|s| s.to_string()).collect(),
        gold_answer: "bird".into(),
    };
    let cfg = RetrievalConfig::new(50);
    let got = retrieve_facts(&instance, &store, &cfg).unwrap();
    assert_eq!(got.len(), 50);
    for ci in 0..10 {
        assert_eq!(
            got.entries.iter().filter(|e| e.candidate_index == ci).count(),
            5
        );
    }
    let want = brute_force(&instance, store.triples(), &cfg);
    assert_eq!(
        serde_json::to_string(&got).unwrap(),
        serde_json::to_string(&want).unwrap()
    );
}
