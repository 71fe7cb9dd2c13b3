//! Random instance generation and naive reference implementations used as
//! oracles by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sawmatch_core::similarity::{jaro, monge_elkan, unfold};
use sawmatch_core::{
    Axioms, IndexItem, MatchConfig, NodeKind, OperationIndexEntry, Query, SimAlgorithm, SimKind, Strategy,
};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn read_dir_docs(dir: &std::path::Path) -> Vec<sawmatch_core::evaluation::SourceDoc> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| sawmatch_core::evaluation::SourceDoc {
            id: p.file_name().unwrap().to_string_lossy().into_owned(),
            bytes: std::fs::read(&p).unwrap(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// reasoner oracle

/// Relation computed by plain DFS over asserted edges, with equivalence
/// treated as subsumption in both directions.
pub struct ReferenceReasoner {
    edges: BTreeMap<String, BTreeSet<String>>,
    classes: BTreeSet<String>,
}

impl ReferenceReasoner {
    pub fn new(axioms: &Axioms) -> Self {
        let mut edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (sub, sup) in &axioms.sub_class_of {
            edges.entry(sub.clone()).or_default().insert(sup.clone());
        }
        for (a, b) in &axioms.equivalent {
            edges.entry(a.clone()).or_default().insert(b.clone());
            edges.entry(b.clone()).or_default().insert(a.clone());
        }
        ReferenceReasoner {
            edges,
            classes: axioms.classes.clone(),
        }
    }

    /// Whether `to` is reachable from `from` in one or more steps.
    fn reaches(&self, from: &str, to: &str) -> bool {
        let mut stack = vec![from.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if let Some(next) = self.edges.get(&x) {
                for n in next {
                    if n == to {
                        return true;
                    }
                    if seen.insert(n.clone()) {
                        stack.push(n.clone());
                    }
                }
            }
        }
        false
    }

    /// "equivalent", "super", "sub" or "unrelated" for (offered, requested).
    pub fn relate(&self, offered: &str, requested: &str) -> &'static str {
        if offered == requested {
            return "equivalent";
        }
        if !self.classes.contains(offered) || !self.classes.contains(requested) {
            return "unrelated";
        }
        let up = self.reaches(offered, requested);
        let down = self.reaches(requested, offered);
        match (up, down) {
            (true, true) => "equivalent",
            (false, true) => "super",
            (true, false) => "sub",
            (false, false) => "unrelated",
        }
    }
}

// ---------------------------------------------------------------------------
// ranking oracle

#[derive(Debug, Clone, PartialEq)]
pub struct RefRanked {
    pub service_id: String,
    pub interface_name: String,
    pub operation_name: String,
    pub rating: f64,
    pub name_tier: bool,
}

fn ref_sim(kind: SimKind, a: &str, b: &str) -> f64 {
    match kind {
        SimKind::MongeElkan => monge_elkan(a, b),
        SimKind::Jaro => jaro(a, b),
    }
}

/// Logic-based rating of one offered/requested pair, following the
/// two-parameter rating table literally.
fn ref_logic(r: &ReferenceReasoner, cfg: &MatchConfig, o: &str, req: &str, input: bool) -> f64 {
    match r.relate(o, req) {
        "equivalent" => 1.0,
        "super" => {
            if input {
                cfg.upper_rate
            } else {
                cfg.lower_rate
            }
        }
        "sub" => {
            if !input {
                cfg.upper_rate
            } else {
                cfg.lower_rate
            }
        }
        _ => 0.0,
    }
}

fn ref_pair(
    r: &ReferenceReasoner,
    cfg: &MatchConfig,
    strategy: Strategy,
    item: &IndexItem,
    req: &str,
    input: bool,
) -> Option<f64> {
    let req = req.trim();
    let req_name = unfold(req);
    let sim = cfg.sim;
    match strategy {
        Strategy::Logic => item.annotation.as_ref().map(|a| ref_logic(r, cfg, a, req, input)),
        Strategy::SynOnSem => item.annotation.as_ref().map(|a| ref_sim(sim.kind, unfold(a), req_name)),
        Strategy::SynOnSyn => {
            if item.element_name.is_empty() {
                None
            } else {
                Some(ref_sim(sim.kind, &item.element_name, req_name))
            }
        }
        Strategy::Hybrid | Strategy::S3 => {
            if let Some(a) = &item.annotation {
                if r.relate(a, req) == "equivalent" {
                    return Some(1.0);
                }
                if ref_sim(sim.kind, unfold(a), req_name) >= sim.match_threshold {
                    return Some(1.0);
                }
            }
            if !item.element_name.is_empty() && ref_sim(sim.kind, &item.element_name, req_name) >= sim.match_threshold {
                return Some(1.0);
            }
            Some(match &item.annotation {
                Some(a) => ref_logic(r, cfg, a, req, input),
                None => 0.0,
            })
        }
    }
}

fn ref_side(
    r: &ReferenceReasoner,
    cfg: &MatchConfig,
    strategy: Strategy,
    requested: &[String],
    offered: &[IndexItem],
    input: bool,
) -> f64 {
    let mut maxima = Vec::new();
    for req in requested {
        let mut best = 0.0f64;
        for item in offered {
            if let Some(v) = ref_pair(r, cfg, strategy, item, req, input) {
                if v > best {
                    best = v;
                }
            }
        }
        maxima.push(best);
    }
    let mut sum = 0.0;
    for m in &maxima {
        sum += m;
    }
    sum / maxima.len() as f64
}

/// Straight transcription of the rating loop: max per requested concept,
/// average per side, weighted sum, then threshold and sort.
pub fn reference_match(
    axioms: &Axioms,
    entries: &[OperationIndexEntry],
    query: &Query,
    cfg: &MatchConfig,
) -> Vec<RefRanked> {
    let r = ReferenceReasoner::new(axioms);
    let strategy = if cfg.strategy == Strategy::S3 {
        Strategy::Hybrid
    } else {
        cfg.strategy
    };
    let mut out = Vec::new();
    for e in entries {
        let ri = &query.requested_inputs;
        let ro = &query.requested_outputs;
        let rating_i = if ri.is_empty() {
            0.0
        } else {
            ref_side(&r, cfg, strategy, ri, &e.inputs, true)
        };
        let rating_o = if ro.is_empty() {
            0.0
        } else {
            ref_side(&r, cfg, strategy, ro, &e.outputs, false)
        };
        let rating = if !ri.is_empty() && !ro.is_empty() {
            cfg.weight * rating_i + (1.0 - cfg.weight) * rating_o
        } else if ri.is_empty() {
            rating_o
        } else {
            rating_i
        };
        let name_tier = cfg.strategy == Strategy::S3
            && query.query_name.as_deref().is_some_and(|n| {
                !n.trim().is_empty()
                    && (ref_sim(cfg.sim.kind, n.trim(), &e.service_name) >= cfg.sim.match_threshold
                        || ref_sim(cfg.sim.kind, n.trim(), &e.operation_name) >= cfg.sim.match_threshold)
            });
        if rating + 1e-9 >= cfg.rating_threshold {
            out.push(RefRanked {
                service_id: e.service_id.clone(),
                interface_name: e.interface_name.clone(),
                operation_name: e.operation_name.clone(),
                rating,
                name_tier,
            });
        }
    }
    out.sort_by(|a, b| {
        b.name_tier
            .cmp(&a.name_tier)
            .then(b.rating.partial_cmp(&a.rating).unwrap())
            .then(a.service_id.cmp(&b.service_id))
            .then(a.operation_name.cmp(&b.operation_name))
            .then(a.interface_name.cmp(&b.interface_name))
    });
    out
}

// ---------------------------------------------------------------------------
// metric oracles, written from the textbook definitions with floats only

pub fn ref_relevant(ranking: &[String], grades: &BTreeMap<String, u32>) -> Vec<u32> {
    let mut seen = BTreeSet::new();
    ranking
        .iter()
        .filter(|s| seen.insert((*s).clone()))
        .map(|s| *grades.get(s).unwrap_or(&0))
        .collect()
}

pub fn ref_ap(ranking: &[String], grades: &BTreeMap<String, u32>) -> f64 {
    let g = ref_relevant(ranking, grades);
    let total = grades.values().filter(|&&x| x >= 1).count() as f64;
    let mut acc = 0.0;
    for r in 0..g.len() {
        if g[r] >= 1 {
            let rel_so_far = g[..=r].iter().filter(|&&x| x >= 1).count() as f64;
            acc += rel_so_far / (r as f64 + 1.0);
        }
    }
    acc / total
}

pub fn ref_ndcg(ranking: &[String], grades: &BTreeMap<String, u32>) -> f64 {
    let g = ref_relevant(ranking, grades);
    let dcg: f64 = g
        .iter()
        .enumerate()
        .map(|(i, &x)| x as f64 / (i as f64 + 2.0).log2())
        .sum();
    let mut ideal: Vec<u32> = grades.values().copied().collect();
    ideal.sort_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .enumerate()
        .map(|(i, &x)| x as f64 / (i as f64 + 2.0).log2())
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

pub fn ref_q(ranking: &[String], grades: &BTreeMap<String, u32>) -> f64 {
    let g = ref_relevant(ranking, grades);
    let mut ideal: Vec<u32> = grades.values().copied().collect();
    ideal.sort_by(|a, b| b.cmp(a));
    let total = grades.values().filter(|&&x| x >= 1).count() as f64;
    let mut acc = 0.0;
    for r in 0..g.len() {
        if g[r] >= 1 {
            let cg: f64 = g[..=r].iter().map(|&x| x as f64).sum();
            let cig: f64 = ideal.iter().take(r + 1).map(|&x| x as f64).sum();
            let count = g[..=r].iter().filter(|&&x| x >= 1).count() as f64;
            acc += (cg + count) / (cig + r as f64 + 1.0);
        }
    }
    acc / total
}

pub fn ref_interp_precision(ranking: &[String], grades: &BTreeMap<String, u32>) -> Vec<f64> {
    let g = ref_relevant(ranking, grades);
    let total = grades.values().filter(|&&x| x >= 1).count() as f64;
    let mut pr = Vec::new();
    for k in 1..=g.len() {
        let hits = g[..k].iter().filter(|&&x| x >= 1).count() as f64;
        pr.push((hits / k as f64, hits / total));
    }
    (1..=20)
        .map(|j| {
            let level = j as f64 / 20.0;
            pr.iter()
                .filter(|(_, rec)| *rec >= level)
                .map(|(p, _)| *p)
                .fold(0.0, f64::max)
        })
        .collect()
}

pub fn ref_f1(ranking: &[String], grades: &BTreeMap<String, u32>) -> Vec<f64> {
    let g = ref_relevant(ranking, grades);
    let total = grades.values().filter(|&&x| x >= 1).count() as f64;
    (1..=20)
        .map(|j| {
            let k = ((j as f64 / 20.0) * g.len() as f64 - 1e-9).ceil().max(0.0) as usize;
            if k == 0 {
                return 0.0;
            }
            let hits = g[..k].iter().filter(|&&x| x >= 1).count() as f64;
            let p = hits / k as f64;
            let r = hits / total;
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// random instances

const NAMES: &[&str] = &[
    "Book",
    "BookPrice",
    "Price",
    "Novel",
    "Author",
    "BookAuthor",
    "City",
    "UrbanArea",
    "Hotel",
    "HotelPrice",
    "Genre",
    "Science_Fiction",
    "ScienceFiction",
    "Title",
    "BookTitle",
    "Zoom",
    "OpticalZoom",
    "Person",
];

fn styled(rng: &mut impl Rng, name: &str) -> String {
    match rng.gen_range(0..5) {
        0 => format!("_{}", name.to_uppercase()),
        1 => name.to_lowercase(),
        2 => format!("get{name}"),
        3 => String::new(),
        _ => name.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub axioms: Axioms,
    pub classes: Vec<String>,
    pub entries: Vec<OperationIndexEntry>,
    pub query: Query,
    pub config: MatchConfig,
}

pub fn random_axioms(rng: &mut impl Rng, max_classes: usize) -> Axioms {
    let n = rng.gen_range(1..=max_classes);
    let mut classes: Vec<String> = Vec::new();
    while classes.len() < n {
        let ns = if rng.gen_bool(0.7) {
            "http://t/o1.owl#"
        } else {
            "http://t/o2.owl#"
        };
        let iri = format!("{ns}{}", NAMES.choose(rng).unwrap());
        if !classes.contains(&iri) {
            classes.push(iri);
        }
    }
    let mut ax = Axioms::default();
    ax.classes.extend(classes.iter().cloned());
    for i in 1..n {
        if rng.gen_bool(0.6) {
            let j = rng.gen_range(0..i);
            ax.sub_class_of.insert((classes[i].clone(), classes[j].clone()));
        }
        if rng.gen_bool(0.15) {
            let j = rng.gen_range(0..i);
            ax.sub_class_of.insert((classes[i].clone(), classes[j].clone()));
        }
        if rng.gen_bool(0.05) {
            // back edge, possibly closing a cycle
            let j = rng.gen_range(0..i);
            ax.sub_class_of.insert((classes[j].clone(), classes[i].clone()));
        }
        if rng.gen_bool(0.12) {
            let j = rng.gen_range(0..i);
            ax.equivalent.insert((classes[i].clone(), classes[j].clone()));
        }
    }
    ax
}

fn random_concept(rng: &mut impl Rng, classes: &[String]) -> String {
    if rng.gen_bool(0.1) {
        format!("http://t/unknown.owl#{}", NAMES.choose(rng).unwrap())
    } else {
        classes.choose(rng).unwrap().clone()
    }
}

fn random_items(rng: &mut impl Rng, classes: &[String]) -> Vec<IndexItem> {
    let kinds = [
        NodeKind::Part,
        NodeKind::Element,
        NodeKind::SimpleType,
        NodeKind::Message,
    ];
    (0..rng.gen_range(0..=4))
        .map(|_| {
            let annotation = rng.gen_bool(0.7).then(|| random_concept(rng, classes));
            let base = match &annotation {
                Some(a) if rng.gen_bool(0.5) => unfold(a).to_string(),
                _ => NAMES.choose(rng).unwrap().to_string(),
            };
            IndexItem {
                annotation,
                element_name: styled(rng, &base),
                node_kind: *kinds.choose(rng).unwrap(),
            }
        })
        .filter(|i| i.annotation.is_some() || !i.element_name.is_empty())
        .collect()
}

pub fn random_config(rng: &mut impl Rng) -> MatchConfig {
    let strategy = *Strategy::ALL.choose(rng).unwrap();
    let kind = if rng.gen_bool(0.5) {
        SimKind::MongeElkan
    } else {
        SimKind::Jaro
    };
    let sim = if rng.gen_bool(0.7) {
        SimAlgorithm::new(kind)
    } else {
        SimAlgorithm::with_threshold(kind, rng.gen_range(0.4..=1.0)).unwrap()
    };
    let (upper_rate, lower_rate) = if rng.gen_bool(0.7) {
        (0.75, 0.25)
    } else {
        let lo = rng.gen_range(0.0..0.5);
        (rng.gen_range(lo + 0.01..=1.0), lo)
    };
    MatchConfig {
        strategy,
        sim,
        weight: rng.gen_range(0.05..0.95),
        rating_threshold: if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..=1.0)
        },
        upper_rate,
        lower_rate,
    }
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axioms = random_axioms(&mut rng, 15);
    let classes: Vec<String> = axioms.classes.iter().cloned().collect();

    let mut entries: Vec<OperationIndexEntry> = Vec::new();
    let mut keys = BTreeSet::new();
    for _ in 0..rng.gen_range(0..=30) {
        let service = rng.gen_range(0..12);
        let op = format!("get{}", NAMES.choose(&mut rng).unwrap());
        if !keys.insert((service, op.clone())) {
            continue;
        }
        entries.push(OperationIndexEntry {
            service_id: format!("svc{service:02}"),
            service_name: format!("{}_service", NAMES.choose(&mut rng).unwrap().to_lowercase()),
            interface_name: "Soap".into(),
            operation_name: op,
            inputs: random_items(&mut rng, &classes),
            outputs: random_items(&mut rng, &classes),
        });
    }

    let mut query = Query::default();
    while query.requested_inputs.is_empty() && query.requested_outputs.is_empty() {
        query.requested_inputs = (0..rng.gen_range(0..=3))
            .map(|_| random_concept(&mut rng, &classes))
            .collect();
        query.requested_outputs = (0..rng.gen_range(0..=3))
            .map(|_| random_concept(&mut rng, &classes))
            .collect();
    }
    if rng.gen_bool(0.6) {
        query.query_name = Some(format!("{}_service", NAMES.choose(&mut rng).unwrap().to_lowercase()));
    }

    Instance {
        axioms,
        classes,
        entries,
        query,
        config: random_config(&mut rng),
    }
}

/// Random graded judgments and a ranking over a small pool of services.
pub fn random_ranking_case(seed: u64) -> (Vec<String>, BTreeMap<String, u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..rng.gen_range(1..=25)).map(|i| format!("s{i}")).collect();
    let mut grades = BTreeMap::new();
    for s in &pool {
        if rng.gen_bool(0.5) {
            grades.insert(s.clone(), rng.gen_range(0..=3));
        }
    }
    // at least one relevant item
    let pick = pool.choose(&mut rng).unwrap().clone();
    grades.insert(pick, rng.gen_range(1..=3));
    let mut ranking = pool.clone();
    ranking.shuffle(&mut rng);
    ranking.truncate(rng.gen_range(0..=pool.len()));
    if rng.gen_bool(0.2) && !ranking.is_empty() {
        // duplicate service ids must not count twice
        let dup = ranking[0].clone();
        ranking.push(dup);
    }
    (ranking, grades)
}
