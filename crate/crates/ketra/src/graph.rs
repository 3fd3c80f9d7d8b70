//! Triple ingestion and the sparse binary tensor.
//!
//! A knowledge graph of N_r binary relations among N_e entities is stored as
//! an order-3 tensor X of shape N_e × N_e × N_r whose frontal slice X_k is
//! the adjacency matrix of relation k: X[s, o, k] = 1 iff the fact
//! (s, k, o) was observed.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How to treat literal-valued objects during ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LiteralPolicy {
    /// Keep object tokens as they appear in the file.
    #[default]
    Keep,
    /// Replace objects that look like ISO dates with the token `date` and
    /// numeric objects with `number`, so attribute-valued facts share
    /// tensor columns.
    TagByType,
}

/// Interning dictionary assigning dense indices in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Dictionary {
    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        i
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: u32) -> &str {
        &self.labels[i as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Entity/relation dictionaries plus the deduplicated triple list.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    pub entities: Dictionary,
    pub relations: Dictionary,
    triples: Vec<(u32, u32, u32)>,
    triple_set: HashSet<(u32, u32, u32)>,
}

/// Counters reported after ingestion.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub files: Vec<PathBuf>,
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_facts: usize,
    pub duplicates_dropped: usize,
    pub tagged_dates: usize,
    pub tagged_numbers: usize,
}

impl IngestReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for f in &self.files {
            let _ = writeln!(s, "file:              {}", f.display());
        }
        let _ = writeln!(s, "entities:          {}", self.n_entities);
        let _ = writeln!(s, "relations:         {}", self.n_relations);
        let _ = writeln!(s, "facts:             {}", self.n_facts);
        let _ = writeln!(s, "duplicates dropped: {}", self.duplicates_dropped);
        if self.tagged_dates + self.tagged_numbers > 0 {
            let _ = writeln!(
                s,
                "literals tagged:   {} date, {} number",
                self.tagged_dates, self.tagged_numbers
            );
        }
        s
    }
}

impl KnowledgeGraph {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn triples(&self) -> &[(u32, u32, u32)] {
        &self.triples
    }

    pub fn contains(&self, s: u32, r: u32, o: u32) -> bool {
        self.triple_set.contains(&(s, r, o))
    }

    /// Insert a triple given by labels, deduplicating. Returns false if the
    /// triple was already present.
    pub fn insert(&mut self, subject: &str, relation: &str, object: &str) -> bool {
        let s = self.entities.intern(subject);
        let r = self.relations.intern(relation);
        let o = self.entities.intern(object);
        self.insert_ids(s, r, o)
    }

    fn insert_ids(&mut self, s: u32, r: u32, o: u32) -> bool {
        if self.triple_set.insert((s, r, o)) {
            self.triples.push((s, r, o));
            true
        } else {
            false
        }
    }

    /// Same graph with a subset of triples and the dictionaries untouched.
    pub fn with_triples(&self, triples: Vec<(u32, u32, u32)>) -> KnowledgeGraph {
        let triple_set = triples.iter().copied().collect();
        KnowledgeGraph {
            entities: self.entities.clone(),
            relations: self.relations.clone(),
            triples,
            triple_set,
        }
    }

    /// Serialize as subject⟨TAB⟩relation⟨TAB⟩object lines.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for &(s, r, o) in &self.triples {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                self.entities.label(s),
                self.relations.label(r),
                self.entities.label(o)
            );
        }
        let mut file = fs::File::create(path).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        file.write_all(out.as_bytes()).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })
    }
}

fn looks_like_iso_date(tok: &str) -> bool {
    let b = tok.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && [0, 1, 2, 3, 5, 6, 8, 9]
            .iter()
            .all(|&i| b[i].is_ascii_digit())
}

fn looks_like_number(tok: &str) -> bool {
    let t = tok.strip_prefix(['+', '-']).unwrap_or(tok);
    if t.is_empty() {
        return false;
    }
    let mut parts = t.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    if int.is_empty() && frac.is_none_or(str::is_empty) {
        return false;
    }
    int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

/// Ingest one TSV triple file into `kg`, updating `report`.
fn ingest_into(
    kg: &mut KnowledgeGraph,
    report: &mut IngestReport,
    path: &Path,
    policy: LiteralPolicy,
) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let mut saw_any = false;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedLine {
                path: path.to_owned(),
                line: lineno + 1,
                expected: 3,
                found: fields.len(),
            });
        }
        saw_any = true;
        let object = match policy {
            LiteralPolicy::Keep => fields[2],
            LiteralPolicy::TagByType => {
                if looks_like_iso_date(fields[2]) {
                    report.tagged_dates += 1;
                    "date"
                } else if looks_like_number(fields[2]) {
                    report.tagged_numbers += 1;
                    "number"
                } else {
                    fields[2]
                }
            }
        };
        if !kg.insert(fields[0], fields[1], object) {
            report.duplicates_dropped += 1;
        }
    }
    if !saw_any {
        return Err(Error::EmptyInput(path.to_owned()));
    }
    report.files.push(path.to_owned());
    Ok(())
}

/// Ingest a single subject⟨TAB⟩relation⟨TAB⟩object file.
///
/// Duplicate triples are dropped (the graph is binary); the count of dropped
/// lines is reported. With [`LiteralPolicy::TagByType`], object tokens that
/// parse as ISO dates or numbers are replaced by the fixed tokens `date` /
/// `number`.
pub fn ingest_triples(
    path: &Path,
    policy: LiteralPolicy,
) -> Result<(KnowledgeGraph, IngestReport)> {
    let mut kg = KnowledgeGraph::default();
    let mut report = IngestReport::default();
    ingest_into(&mut kg, &mut report, path, policy)?;
    report.n_entities = kg.n_entities();
    report.n_relations = kg.n_relations();
    report.n_facts = kg.triples.len();
    Ok((kg, report))
}

/// Ingest every `.tsv`/`.txt` file in a dataset directory (sorted by name)
/// into one graph. Split datasets keep their train/valid/test files side by
/// side; the union is the full graph.
pub fn load_dataset_dir(
    dir: &Path,
    policy: LiteralPolicy,
) -> Result<(KnowledgeGraph, IngestReport)> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_owned(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| x == "tsv" || x == "txt")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyInput(dir.to_owned()));
    }
    let mut kg = KnowledgeGraph::default();
    let mut report = IngestReport::default();
    for f in &files {
        ingest_into(&mut kg, &mut report, f, policy)?;
    }
    report.n_entities = kg.n_entities();
    report.n_relations = kg.n_relations();
    report.n_facts = kg.triples.len();
    Ok((kg, report))
}

/// Load only the named file from a dataset directory (e.g. the test split).
pub fn load_split(dir: &Path, stem: &str, policy: LiteralPolicy) -> Result<KnowledgeGraph> {
    for ext in ["tsv", "txt"] {
        let p = dir.join(format!("{stem}.{ext}"));
        if p.exists() {
            return Ok(ingest_triples(&p, policy)?.0);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no {stem}.tsv or {stem}.txt in {}",
        dir.display()
    )))
}

/// Coordinate-format binary tensor of shape N_e × N_e × N_r.
#[derive(Debug, Clone)]
pub struct SparseTensor3 {
    n_entities: usize,
    n_relations: usize,
    slices: Vec<Vec<(u32, u32)>>,
    nnz: usize,
}

impl SparseTensor3 {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_entities, self.n_entities, self.n_relations)
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Entries (i, j) of the adjacency matrix of relation k, sorted.
    pub fn slice(&self, k: usize) -> Result<&[(u32, u32)]> {
        self.slices
            .get(k)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::IndexOutOfRange(format!("relation {k} of {}", self.n_relations)))
    }

    pub fn slices(&self) -> &[Vec<(u32, u32)>] {
        &self.slices
    }
}

/// Build the 0-1 tensor whose entry (s, o, k) is set for every fact
/// (s, k, o) of the graph.
pub fn build_tensor(kg: &KnowledgeGraph) -> Result<SparseTensor3> {
    if kg.triples.is_empty() {
        return Err(Error::InvalidArgument("empty knowledge graph".into()));
    }
    let mut slices = vec![Vec::new(); kg.n_relations()];
    for &(s, r, o) in &kg.triples {
        slices[r as usize].push((s, o));
    }
    for sl in &mut slices {
        sl.sort_unstable();
    }
    Ok(SparseTensor3 {
        n_entities: kg.n_entities(),
        n_relations: kg.n_relations(),
        nnz: kg.triples.len(),
        slices,
    })
}

/// Shape statistics of a dataset tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_facts: usize,
    /// facts / entities
    pub avg_degree: f64,
    /// facts / entities²
    pub graph_density: f64,
}

pub fn stats(t: &SparseTensor3) -> DatasetStats {
    let ne = t.n_entities as f64;
    let facts = t.nnz as f64;
    DatasetStats {
        n_entities: t.n_entities,
        n_relations: t.n_relations,
        n_facts: t.nnz,
        avg_degree: facts / ne,
        graph_density: facts / (ne * ne),
    }
}

/// Keep only triples whose subject falls in a random subset of
/// ⌈fraction × #distinct subjects⌉ subjects. Dictionaries (and with them the
/// candidate object set) are left untouched, so the tensor shape is stable
/// across fractions.
pub fn subsample_subjects(kg: &KnowledgeGraph, fraction: f64, seed: u64) -> Result<KnowledgeGraph> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "subject fraction must be in (0, 1], got {fraction}"
        )));
    }
    let mut subjects: Vec<u32> = {
        let set: HashSet<u32> = kg.triples.iter().map(|&(s, _, _)| s).collect();
        let mut v: Vec<u32> = set.into_iter().collect();
        v.sort_unstable();
        v
    };
    let keep = ((fraction * subjects.len() as f64).ceil() as usize).min(subjects.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, subjects.len(), keep);
    let mut chosen: Vec<u32> = picked.iter().map(|i| subjects[i]).collect();
    chosen.sort_unstable();
    subjects = chosen;
    let kept: HashSet<u32> = subjects.into_iter().collect();
    let triples = kg
        .triples
        .iter()
        .copied()
        .filter(|&(s, _, _)| kept.contains(&s))
        .collect();
    Ok(kg.with_triples(triples))
}
