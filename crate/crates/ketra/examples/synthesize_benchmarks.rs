//! Regenerate the bundled stand-in benchmark datasets.
//!
//! The two bundled datasets mirror the shape statistics of the classic
//! Kinship (104 entities, 26 relations, 10,686 facts) and UMLS (135
//! entities, 49 relations, 6,752 facts) fact-prediction benchmarks, which
//! cannot be redistributed inside this repository. See datasets/README.md
//! for how to swap in the real files.
//!
//! The generator is deliberately independent of the ketra library: it emits
//! plain TSV with its own bookkeeping, so ingestion tests validate the
//! parser against an external writer. Structure:
//!
//! - kinship-like: 8 interleaved clans; each relation maps a band of source
//!   clans to a shifted target clan, and relations sharing a band form
//!   similarity clusters.
//! - umls-like: 9 entity groups; each relation connects two domain groups
//!   to two range groups, with very uneven per-relation densities inside a
//!   cluster so thin relations lean on their cluster mates.
//!
//! Both files end with a block of repeated lines to exercise duplicate
//! handling, and both are exact: the deduplicated triple count, entity
//! count, and relation count match the targets.
//!
//! Usage: cargo run --example synthesize_benchmarks [-- <output_root>]

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Spec {
    n_entities: usize,
    n_relations: usize,
    n_facts: usize,
    entity: fn(usize) -> String,
    relation: fn(usize) -> String,
    duplicate_lines: usize,
}

fn kinship_entity(i: usize) -> String {
    format!("person_{i:03}")
}

fn kinship_relation(k: usize) -> String {
    format!("term_{k:02}")
}

fn umls_entity(i: usize) -> String {
    format!("type_{i:03}")
}

fn umls_relation(k: usize) -> String {
    format!("rel_{k:02}")
}

/// Deterministic spine covering every entity (as subject and object) and
/// every relation, so dictionary sizes are exact by construction.
fn spine(spec: &Spec) -> Vec<(usize, usize, usize)> {
    (0..spec.n_entities)
        .map(|i| (i, i % spec.n_relations, (i + 1) % spec.n_entities))
        .collect()
}

fn kinship_candidates(rng: &mut ChaCha8Rng) -> Vec<(usize, usize, usize)> {
    let clans = 8usize;
    let clan = |e: usize| e % clans;
    let mut out = Vec::new();
    for k in 0..26 {
        let cluster = k % clans;
        let shift = cluster + 1;
        let band: HashSet<usize> = (0..4).map(|d| (2 * cluster + d) % clans).collect();
        for s in 0..104 {
            if !band.contains(&clan(s)) {
                continue;
            }
            for o in 0..104 {
                if clan(o) == (clan(s) + shift) % clans && rng.random::<f64>() < 0.62 {
                    out.push((s, k, o));
                }
            }
        }
    }
    out
}

/// Relation families for the umls-like stand-in.
///
/// Six clusters live on small disjoint entity communities: one richly
/// observed relation per cluster plus five thin ones sampling the same
/// low-rank bilinear pattern. Thin relations carry too few facts to be
/// learned alone, but their subject/object sets almost coincide with their
/// cluster mates', so set-overlap similarity singles the family out
/// sharply. Thirteen wide filler relations absorb the remaining fact
/// budget.
fn umls_candidates(
    rng: &mut ChaCha8Rng,
) -> (Vec<(usize, usize, usize)>, Vec<(usize, usize, usize)>) {
    let n = 135usize;
    let d = 8usize;
    let z: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect()
        })
        .collect();

    let bilinear_pattern = |rng: &mut ChaCha8Rng,
                            members: &[usize],
                            z: &Vec<Vec<f64>>,
                            keep: f64|
     -> Vec<(usize, usize)> {
        let m: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let mut scored: Vec<(f64, usize, usize)> = Vec::new();
        for &s in members {
            for &o in members {
                let mut v = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        v += z[s][a] * m[a][b] * z[o][b];
                    }
                }
                scored.push((v, s, o));
            }
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        scored
            .iter()
            .take((scored.len() as f64 * keep) as usize)
            .map(|&(_, s, o)| (s, o))
            .collect()
    };

    // a pattern sample that spreads across distinct subjects and objects, so
    // even a 20-fact slice covers most of its community
    let spread_sample = |rng: &mut ChaCha8Rng,
                         pattern: &[(usize, usize)],
                         k: usize,
                         count: usize|
     -> Vec<(usize, usize, usize)> {
        let mut order: Vec<usize> = (0..pattern.len()).collect();
        order.shuffle(rng);
        let mut seen_s: HashSet<usize> = HashSet::new();
        let mut seen_o: HashSet<usize> = HashSet::new();
        let mut picked = Vec::new();
        for pass in 0..3 {
            for &idx in &order {
                if picked.len() == count {
                    break;
                }
                let (s, o) = pattern[idx];
                let fresh = match pass {
                    0 => !seen_s.contains(&s) && !seen_o.contains(&o),
                    1 => !seen_s.contains(&s) || !seen_o.contains(&o),
                    _ => !picked.contains(&(s, k, o)),
                };
                if fresh {
                    seen_s.insert(s);
                    seen_o.insert(o);
                    picked.push((s, k, o));
                }
            }
        }
        picked
    };

    let mut entities: Vec<usize> = (0..n).collect();
    entities.shuffle(rng);
    let mut protected = Vec::new();
    let mut pool = Vec::new();

    // 5 clusters × (1 rich + 6 thin) on disjoint 24-entity communities
    for cluster in 0..5usize {
        let community: Vec<usize> = entities[cluster * 24..(cluster + 1) * 24].to_vec();
        let pattern = bilinear_pattern(rng, &community, &z, 0.25);
        let members: Vec<usize> = (cluster * 7..cluster * 7 + 7).collect();
        for (slot, &k) in members.iter().enumerate() {
            if slot == 0 {
                let mut rich: Vec<(usize, usize, usize)> = pattern
                    .iter()
                    .filter(|_| rng.random::<f64>() < 0.95)
                    .map(|&(s, o)| (s, k, o))
                    .collect();
                while rich.len() < 16 {
                    let &(s, o) = &pattern[rng.random_range(0..pattern.len())];
                    if !rich.contains(&(s, k, o)) {
                        rich.push((s, k, o));
                    }
                }
                protected.extend(rich);
            } else {
                protected.extend(spread_sample(rng, &pattern, k, 36));
            }
        }
    }

    // 14 wide filler relations over 90-entity subsets
    for k in 35..49usize {
        entities.shuffle(rng);
        let wide: Vec<usize> = entities[..90].to_vec();
        let pattern = bilinear_pattern(rng, &wide, &z, 0.25);
        let mut slice: Vec<(usize, usize, usize)> = pattern
            .iter()
            .filter(|_| rng.random::<f64>() < 0.3)
            .map(|&(s, o)| (s, k, o))
            .collect();
        while slice.len() < 16 {
            let &(s, o) = &pattern[rng.random_range(0..pattern.len())];
            if !slice.contains(&(s, k, o)) {
                slice.push((s, k, o));
            }
        }
        pool.extend(slice);
    }
    (protected, pool)
}

fn synthesize(
    spec: &Spec,
    protected: Vec<(usize, usize, usize)>,
    candidates: Vec<(usize, usize, usize)>,
    seed: u64,
) -> Vec<(usize, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = spine(spec);
    let mut seen: HashSet<(usize, usize, usize)> = triples.iter().copied().collect();
    for t in protected {
        if seen.insert(t) {
            triples.push(t);
        }
    }

    let mut pool: Vec<(usize, usize, usize)> = candidates
        .into_iter()
        .filter(|t| !seen.contains(t))
        .collect();
    pool.sort_unstable();
    pool.dedup();
    pool.shuffle(&mut rng);
    for t in pool {
        if triples.len() == spec.n_facts {
            break;
        }
        if seen.insert(t) {
            triples.push(t);
        }
    }
    // top up with uniform noise if the structured pool ran dry
    while triples.len() < spec.n_facts {
        let t = (
            rng.random_range(0..spec.n_entities),
            rng.random_range(0..spec.n_relations),
            rng.random_range(0..spec.n_entities),
        );
        if seen.insert(t) {
            triples.push(t);
        }
    }
    assert_eq!(triples.len(), spec.n_facts);
    let subjects: HashSet<usize> = triples.iter().map(|t| t.0).collect();
    let objects: HashSet<usize> = triples.iter().map(|t| t.2).collect();
    let relations: HashSet<usize> = triples.iter().map(|t| t.1).collect();
    assert_eq!(subjects.len(), spec.n_entities);
    assert_eq!(objects.len(), spec.n_entities);
    assert_eq!(relations.len(), spec.n_relations);
    triples
}

fn write_tsv(path: &Path, spec: &Spec, triples: &[(usize, usize, usize)]) {
    let mut text = String::new();
    for &(s, k, o) in triples {
        let _ = writeln!(
            text,
            "{}\t{}\t{}",
            (spec.entity)(s),
            (spec.relation)(k),
            (spec.entity)(o)
        );
    }
    // repeated lines: the loader must drop these as duplicates
    for &(s, k, o) in triples.iter().take(spec.duplicate_lines) {
        let _ = writeln!(
            text,
            "{}\t{}\t{}",
            (spec.entity)(s),
            (spec.relation)(k),
            (spec.entity)(o)
        );
    }
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
    println!(
        "wrote {} ({} facts + {} duplicate lines)",
        path.display(),
        triples.len(),
        spec.duplicate_lines
    );
}

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("datasets"));

    let kinship = Spec {
        n_entities: 104,
        n_relations: 26,
        n_facts: 10_686,
        entity: kinship_entity,
        relation: kinship_relation,
        duplicate_lines: 40,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1040);
    let cands = kinship_candidates(&mut rng);
    let triples = synthesize(&kinship, Vec::new(), cands, 26);
    write_tsv(
        &root.join("kinship").join("kinship.tsv"),
        &kinship,
        &triples,
    );

    let umls = Spec {
        n_entities: 135,
        n_relations: 49,
        n_facts: 6_752,
        entity: umls_entity,
        relation: umls_relation,
        duplicate_lines: 30,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1350);
    let (protected, pool) = umls_candidates(&mut rng);
    let triples = synthesize(&umls, protected, pool, 49);
    write_tsv(&root.join("umls").join("umls.tsv"), &umls, &triples);
}
