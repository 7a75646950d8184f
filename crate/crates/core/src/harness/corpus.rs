//! Synthetic labeled corpus: goodware and malware programs built from
//! disjoint signal pools plus a shared neutral pool.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::minilang::{
    parse, registry, render, BinOp, CallTarget, Class, ComponentKind, Expr, Function, Manifest,
    Program, RandomExpr, Stmt, TestInput,
};

use super::HarnessError;

const OPS: &[&str] = &[
    "load", "save", "draw", "fetch", "sync", "open", "close", "scan", "sort", "merge", "share",
    "query", "update", "render", "parse", "format", "track", "notify", "cache", "flush", "resize",
    "rotate", "encode", "decode", "filter", "blend", "compose", "select", "commit", "watch",
    "probe", "index", "bind", "scroll", "fade", "zoom", "crop", "tick", "poll", "pack",
];

const BENIGN_NAMESPACES: &[&str] = &["ui", "text", "anim", "prefs", "db", "time", "math", "wifi", "vibrate", "wake", "nfc", "bt"];
const MALWARE_NAMESPACES: &[&str] = &["sms", "phone", "loc", "cam", "contacts", "storage", "mic", "boot"];
const NEUTRAL_NAMESPACES: &[&str] = &["log", "net"];

const BENIGN_WORDS: &[&str] = &[
    "Settings", "Gallery", "Player", "Reader", "Editor", "Profile", "Search", "Album", "Notes",
    "Weather", "Calendar", "Recipe", "Puzzle", "Chess", "Journal", "Library", "Compass", "Timer",
    "Stopwatch", "Palette", "Sketch", "Lyrics", "Podcast", "Radio", "Planner", "Budget", "Fitness",
    "Garden", "Travel", "Museum", "Atlas", "Quiz", "Flashcard", "Recorder", "Scanner", "Theme",
    "Widget", "Wallpaper", "Shelf", "Diary",
];
const MALWARE_WORDS: &[&str] = &[
    "Payload", "Dropper", "Loader", "Stealth", "Relay", "Harvest", "Beacon", "Keylog", "Premium",
    "Boot", "Admin", "Overlay", "Hook", "Proxy", "Shell", "Miner", "Spy", "Tracker", "Inject",
    "Silent", "Clicker", "Dialer", "Locker", "Grabber",
];
const HELPER_WORDS: &[&str] = &["Util", "Core", "Store", "Task", "Data", "Cache", "Work", "Job", "Tool", "Base"];

const SHARED_INTENTS: &[&str] = &["android.intent.action.MAIN", "android.intent.category.LAUNCHER"];
const BENIGN_INTENTS: &[&str] = &[
    "android.intent.action.VIEW",
    "android.intent.action.SEND",
    "android.intent.action.SEARCH",
    "android.intent.action.EDIT",
];
const MALWARE_INTENTS: &[&str] = &[
    "android.intent.action.BOOT_COMPLETED",
    "android.provider.Telephony.SMS_RECEIVED",
    "android.intent.action.PACKAGE_ADDED",
    "android.intent.action.USER_PRESENT",
];

/// Apis that carry an endpoint literal.
const ENDPOINT_APIS: &[&str] = &["net.get", "net.post"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub n_goodware: usize,
    pub n_malware: usize,
    pub seed: u64,
    pub benign_apis: usize,
    pub malware_apis: usize,
    pub neutral_apis: usize,
    pub benign_components: usize,
    pub malware_components: usize,
    pub benign_endpoints: usize,
    pub malware_endpoints: usize,
    pub neutral_endpoints: usize,
    /// Probability that a drawn signal feature comes from the other class.
    pub noise: f64,
    /// Host modules per program.
    pub min_modules: usize,
    pub max_modules: usize,
    /// Malware adds between one and this many payload modules.
    pub max_payload_modules: usize,
    /// Probability that a shared api comes from the half of the neutral pool
    /// leaning toward the program's class.
    pub neutral_lean: f64,
    /// Malware host code draws from this trailing fraction of each goodware
    /// pool, so the most common goodware features stay goodware-only.
    pub host_overlap: f64,
    /// Behavioural test inputs recorded per program.
    pub upsilon_inputs: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_goodware: 2000,
            n_malware: 200,
            seed: 1,
            benign_apis: 180,
            malware_apis: 48,
            neutral_apis: 30,
            benign_components: 40,
            malware_components: 24,
            benign_endpoints: 30,
            malware_endpoints: 15,
            neutral_endpoints: 10,
            noise: 0.05,
            min_modules: 1,
            max_modules: 10,
            max_payload_modules: 2,
            host_overlap: 0.5,
            neutral_lean: 0.5,
            upsilon_inputs: 8,
        }
    }
}

impl CorpusConfig {
    pub fn malware_fraction(&self) -> f64 {
        self.n_malware as f64 / (self.n_goodware + self.n_malware) as f64
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.n_goodware == 0 || self.n_malware == 0 {
            return bad("both classes need at least one program");
        }
        if !(self.host_overlap > 0.0 && self.host_overlap <= 1.0) {
            return bad("host_overlap must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.neutral_lean) {
            return bad("neutral_lean must lie in [0, 1]");
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return bad("noise must lie in [0, 0.5]");
        }
        if self.min_modules == 0 || self.min_modules > self.max_modules {
            return bad("module bounds must satisfy 1 <= min <= max");
        }
        if [self.benign_apis, self.malware_apis, self.neutral_apis, self.benign_components, self.malware_components]
            .contains(&0)
        {
            return bad("api and component pools must be non-empty");
        }
        if self.benign_components > BENIGN_WORDS.len() * 4 || self.malware_components > MALWARE_WORDS.len() * 4 {
            return bad("component pool larger than the name list");
        }
        Ok(())
    }
}

/// Feature pools of one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassPool {
    pub apis: Vec<String>,
    pub components: Vec<(String, ComponentKind)>,
    pub endpoints: Vec<String>,
    pub intents: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePools {
    pub goodware: ClassPool,
    pub malware: ClassPool,
    pub neutral_apis: Vec<String>,
    pub neutral_endpoints: Vec<String>,
}

fn api_pool(namespaces: &[&str], n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let ns = namespaces[i % namespaces.len()];
            let j = i / namespaces.len();
            let op = OPS[j % OPS.len()];
            match j / OPS.len() {
                0 => format!("{ns}.{op}"),
                r => format!("{ns}.{op}{r}"),
            }
        })
        .collect()
}

fn component_pool(words: &[&str], n: usize) -> Vec<(String, ComponentKind)> {
    const KINDS: [(ComponentKind, &str); 4] = [
        (ComponentKind::Activity, "Activity"),
        (ComponentKind::Service, "Service"),
        (ComponentKind::Receiver, "Receiver"),
        (ComponentKind::Provider, "Provider"),
    ];
    (0..n)
        .map(|i| {
            let (kind, suffix) = KINDS[(i / words.len()) % 4];
            (format!("{}{suffix}", words[i % words.len()]), kind)
        })
        .collect()
}

impl FeaturePools {
    pub fn new(cfg: &CorpusConfig) -> Self {
        Self {
            goodware: ClassPool {
                apis: api_pool(BENIGN_NAMESPACES, cfg.benign_apis),
                components: component_pool(BENIGN_WORDS, cfg.benign_components),
                endpoints: (0..cfg.benign_endpoints).map(|i| format!("https://cdn{i}.apps.example/assets")).collect(),
                intents: BENIGN_INTENTS.iter().map(|s| s.to_string()).collect(),
            },
            malware: ClassPool {
                apis: api_pool(MALWARE_NAMESPACES, cfg.malware_apis),
                components: component_pool(MALWARE_WORDS, cfg.malware_components),
                endpoints: (0..cfg.malware_endpoints).map(|i| format!("http://gate{i}.c2.example/panel")).collect(),
                intents: MALWARE_INTENTS.iter().map(|s| s.to_string()).collect(),
            },
            neutral_apis: api_pool(NEUTRAL_NAMESPACES, cfg.neutral_apis),
            neutral_endpoints: (0..cfg.neutral_endpoints).map(|i| format!("https://api{i}.metrics.example/v1")).collect(),
        }
    }

    /// Names of the features planted predominantly in each class.
    pub fn signal_features(&self, malware: bool) -> BTreeSet<String> {
        use crate::minilang::{api_feature, component_feature, endpoint_feature, intent_feature};
        let p = if malware { &self.malware } else { &self.goodware };
        let mut out: BTreeSet<String> = p.apis.iter().map(|a| api_feature(a)).collect();
        out.extend(p.components.iter().map(|(n, k)| component_feature(*k, n)));
        out.extend(p.endpoints.iter().map(|e| endpoint_feature(e)));
        out.extend(p.intents.iter().map(|i| intent_feature(i)));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub id: String,
    pub malware: bool,
    pub program: Program,
    pub upsilon: Vec<TestInput>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Write `<id>.mini` per program and `labels.csv`
    /// (`id,label,upsilon` with `input:seed` pairs joined by `;`).
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        let mut labels = String::from("id,label,upsilon\n");
        for e in &self.entries {
            fs::write(dir.join(format!("{}.mini", e.id)), render(&e.program))?;
            let ups: Vec<String> = e.upsilon.iter().map(|t| format!("{}:{}", t.input, t.seed)).collect();
            let label = if e.malware { "malware" } else { "goodware" };
            writeln!(labels, "{},{label},{}", e.id, ups.join(";")).expect("string write");
        }
        fs::write(dir.join("labels.csv"), labels)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let labels = fs::read_to_string(dir.join("labels.csv"))?;
        let mut entries = Vec::new();
        for (n, line) in labels.lines().enumerate().skip(1) {
            let bad = || HarnessError::Corpus(format!("labels.csv line {}: malformed row", n + 1));
            let mut cols = line.split(',');
            let (Some(id), Some(label), Some(ups)) = (cols.next(), cols.next(), cols.next()) else {
                return Err(bad());
            };
            let malware = match label {
                "malware" => true,
                "goodware" => false,
                _ => return Err(bad()),
            };
            let upsilon = ups
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|pair| {
                    let (i, s) = pair.split_once(':').ok_or_else(bad)?;
                    Ok(TestInput { input: i.parse().map_err(|_| bad())?, seed: s.parse().map_err(|_| bad())? })
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let text = fs::read_to_string(dir.join(format!("{id}.mini")))?;
            let program = parse(&text).map_err(|e| HarnessError::Corpus(format!("{id}: {e}")))?;
            entries.push(CorpusEntry { id: id.to_string(), malware, program, upsilon });
        }
        Ok(Self { entries })
    }
}

/// Stratified seeded split. The training side holds `round(fraction * n)`
/// programs, shared between classes by largest remainder. Returns indices
/// into `corpus.entries`.
pub fn split(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), HarnessError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(HarnessError::Config(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = [false, true]
        .into_iter()
        .map(|label| {
            let mut idx: Vec<usize> = (0..corpus.len()).filter(|&i| corpus.entries[i].malware == label).collect();
            idx.shuffle(&mut rng);
            idx
        })
        .collect();
    let exact: Vec<f64> = groups.iter().map(|g| train_fraction * g.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let target = (train_fraction * corpus.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &g in order.iter().cycle().take(target.saturating_sub(quota.iter().sum())) {
        quota[g] = (quota[g] + 1).min(groups[g].len());
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (g, q) in groups.iter().zip(quota) {
        train.extend_from_slice(&g[..q]);
        test.extend_from_slice(&g[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Generate the corpus. Program `i` depends only on `(cfg, i)`.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Corpus, HarnessError> {
    cfg.validate()?;
    let pools = FeaturePools::new(cfg);
    let total = cfg.n_goodware + cfg.n_malware;
    let entries = (0..total)
        .map(|i| {
            let malware = i >= cfg.n_goodware;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let program = ProgramBuilder::new(cfg, &pools, malware, &mut rng).build();
            let upsilon = (0..cfg.upsilon_inputs)
                .map(|_| TestInput { input: rng.gen_range(-50..=50), seed: rng.gen() })
                .collect();
            CorpusEntry { id: format!("app{i:05}"), malware, program, upsilon }
        })
        .collect();
    Ok(Corpus { entries })
}

struct ProgramBuilder<'a> {
    cfg: &'a CorpusConfig,
    pools: &'a FeaturePools,
    malware: bool,
    /// The module being built carries the malicious payload.
    payload: bool,
    rng: &'a mut ChaCha8Rng,
    manifest: Manifest,
}

/// Index skewed toward the front of a pool so some features are common.
fn skewed(rng: &mut ChaCha8Rng, len: usize) -> usize {
    let u: f64 = rng.gen();
    ((u * u) * len as f64) as usize
}

impl<'a> ProgramBuilder<'a> {
    fn new(cfg: &'a CorpusConfig, pools: &'a FeaturePools, malware: bool, rng: &'a mut ChaCha8Rng) -> Self {
        Self { cfg, pools, malware, payload: false, rng, manifest: Manifest::default() }
    }

    fn class_pool(&mut self) -> &'a ClassPool {
        if self.payload || self.rng.gen_bool(self.cfg.noise) {
            &self.pools.malware
        } else {
            &self.pools.goodware
        }
    }

    /// Skewed index into a pool of `len` items; malware hosts only reach the
    /// trailing part of goodware pools.
    fn draw(&mut self, pool: &ClassPool, len: usize) -> usize {
        if self.malware && std::ptr::eq(pool, &self.pools.goodware) {
            let reach = ((len as f64 * self.cfg.host_overlap).ceil() as usize).clamp(1, len);
            return len - reach + skewed(self.rng, reach);
        }
        skewed(self.rng, len)
    }

    fn intent(&mut self) {
        let pool = self.class_pool();
        let i = self.rng.gen_range(0..pool.intents.len());
        self.manifest.intents.insert(pool.intents[i].clone());
    }

    fn signal_api(&mut self) -> String {
        let pool = self.class_pool();
        let i = self.draw(pool, pool.apis.len());
        pool.apis[i].clone()
    }

    /// Shared api; the first half of the pool leans goodware, the second
    /// half malware.
    fn neutral_api(&mut self) -> String {
        let pool = &self.pools.neutral_apis;
        let half = (pool.len() / 2).max(1);
        let own = self.rng.gen_bool(self.cfg.neutral_lean);
        let upper = own == self.malware;
        let (start, len) = if upper && pool.len() > half { (half, pool.len() - half) } else { (0, half) };
        pool[start + skewed(self.rng, len)].clone()
    }

    fn endpoint(&mut self) -> Option<String> {
        if self.rng.gen_bool(0.3) {
            let pool = &self.pools.neutral_endpoints;
            return (!pool.is_empty()).then(|| pool[skewed(self.rng, pool.len())].clone());
        }
        let pool = self.class_pool();
        (!pool.endpoints.is_empty()).then(|| pool.endpoints[self.draw(pool, pool.endpoints.len())].clone())
    }

    fn api(&mut self, name: String, args: Vec<Expr>) -> Stmt {
        if let Some(cap) = registry::required_capability(&name) {
            self.manifest.capabilities.insert(cap.to_string());
        }
        Stmt::Api(name, args)
    }

    fn worker(&mut self, index: usize) -> Function {
        let v = Expr::var("v");
        let mut body = Vec::new();
        let first = if index == 0 || self.rng.gen_bool(0.8) { self.signal_api() } else { self.neutral_api() };
        let call = self.api(first, vec![v.clone()]);
        match self.rng.gen_range(0..4) {
            0 => {
                body.push(Stmt::Assign("i".into(), Expr::Int(0)));
                let bound = self.rng.gen_range(2..4);
                body.push(Stmt::While(
                    Expr::binary(BinOp::Lt, Expr::var("i"), Expr::Int(bound)),
                    vec![call, Stmt::Assign("i".into(), Expr::binary(BinOp::Add, Expr::var("i"), Expr::Int(1)))],
                ));
            }
            1 => {
                let t = self.rng.gen_range(-20..20);
                let other = self.neutral_api();
                let other = self.api(other, vec![Expr::Int(t)]);
                body.push(Stmt::If(Expr::binary(BinOp::Gt, v.clone(), Expr::Int(t)), vec![call], vec![other]));
            }
            _ => body.push(call),
        }
        if self.rng.gen_bool(0.5) {
            let name = if self.rng.gen_bool(0.5) { self.signal_api() } else { self.neutral_api() };
            let s = self.api(name, vec![Expr::binary(BinOp::Add, v.clone(), Expr::Int(1))]);
            body.push(s);
        }
        for j in 0..self.rng.gen_range(0..=2) {
            let name = self.neutral_api();
            let s = self.api(name, vec![Expr::binary(BinOp::Mul, v.clone(), Expr::Int(j + 2))]);
            body.push(s);
        }
        if self.rng.gen_bool(0.3) {
            if let Some(url) = self.endpoint() {
                self.manifest.endpoints.insert(url.clone());
                body.push(Stmt::Assign("url".into(), Expr::Str(url)));
                let api = ENDPOINT_APIS[self.rng.gen_range(0..ENDPOINT_APIS.len())].to_string();
                let s = self.api(api, vec![Expr::var("url")]);
                body.push(s);
            }
        }
        let k = self.rng.gen_range(1..10);
        body.push(Stmt::Return(Expr::binary(BinOp::Add, v, Expr::Int(k))));
        Function::new(format!("step{index}"), vec!["v".into()], body)
    }

    fn module(&mut self, name: &str) -> Class {
        let n = self.rng.gen_range(1..=3);
        let mut functions: Vec<Function> = (0..n).map(|i| self.worker(i)).collect();
        let v = Expr::var("v");
        let mut run = Vec::new();
        for (i, f) in functions.iter().enumerate() {
            let target = CallTarget::new(name, &f.name);
            if self.rng.gen_bool(0.5) {
                run.push(Stmt::Call(target, vec![v.clone()]));
            } else {
                let t = format!("t{i}");
                run.push(Stmt::Assign(t.clone(), Expr::Call(target, vec![v.clone()])));
                run.push(Stmt::Emit(Expr::var(&t)));
            }
        }
        run.push(Stmt::Return(v));
        functions.insert(0, Function::new("run", vec!["v".into()], run));
        Class { name: name.to_string(), functions }
    }

    fn build(mut self) -> Program {
        self.manifest.components.insert("MainActivity".into(), ComponentKind::Activity);
        self.manifest.intents.extend(SHARED_INTENTS.iter().map(|s| s.to_string()));
        if self.malware {
            self.payload = true;
            for _ in 0..self.rng.gen_range(1..=2) {
                self.intent();
            }
            self.payload = false;
        }
        for _ in 0..self.rng.gen_range(0..=2) {
            self.intent();
        }

        // Malware is a host app with one or more payload modules mixed in.
        let mut plan = vec![false; self.rng.gen_range(self.cfg.min_modules..=self.cfg.max_modules)];
        if self.malware {
            plan.extend(std::iter::repeat(true).take(self.rng.gen_range(1..=self.cfg.max_payload_modules.max(1))));
            plan.shuffle(self.rng);
        }
        let mut names: Vec<String> = Vec::new();
        let mut classes = Vec::new();
        for payload in plan {
            self.payload = payload;
            let as_component = self.rng.gen_bool(if payload { 0.7 } else { 0.5 });
            let name = if as_component {
                let pool = self.class_pool();
                let (name, kind) = pool.components[self.draw(pool, pool.components.len())].clone();
                if names.contains(&name) {
                    continue;
                }
                self.manifest.components.insert(name.clone(), kind);
                name
            } else {
                let word = HELPER_WORDS[self.rng.gen_range(0..HELPER_WORDS.len())];
                let name = format!("{word}{}", self.rng.gen_range(0..10));
                if names.contains(&name) {
                    continue;
                }
                name
            };
            classes.push(self.module(&name));
            names.push(name);
        }
        self.payload = false;

        let mut main = vec![Stmt::Assign("seed".into(), Expr::Random(RandomExpr::Int(Box::new(Expr::Int(100)))))];
        for _ in 0..self.rng.gen_range(0..=2) {
            let name = self.neutral_api();
            let s = self.api(name, vec![Expr::var("seed")]);
            main.push(s);
        }
        for (k, name) in names.iter().enumerate() {
            let target = CallTarget::new(name, "run");
            if self.rng.gen_bool(0.5) {
                let a = format!("a{k}");
                main.push(Stmt::Assign(a.clone(), Expr::binary(BinOp::Add, Expr::var("input"), Expr::Int(k as i64 + 1))));
                main.push(Stmt::Call(target, vec![Expr::var(&a)]));
            } else {
                let r = format!("r{k}");
                main.push(Stmt::Assign(r.clone(), Expr::Call(target, vec![Expr::var("input")])));
                main.push(Stmt::Emit(Expr::var(&r)));
            }
        }
        main.push(Stmt::Emit(Expr::var("seed")));
        main.push(Stmt::Return(Expr::var("input")));

        let mut all = vec![Class {
            name: "MainActivity".into(),
            functions: vec![Function::new("main", vec!["input".into()], main)],
        }];
        all.extend(classes);
        Program { manifest: self.manifest, entry: CallTarget::new("MainActivity", "main"), classes: all }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{
        check_well_formed, eliminate_dead_code, feature_names, interpret_case, DEFAULT_FUEL,
    };

    fn small() -> CorpusConfig {
        CorpusConfig { n_goodware: 120, n_malware: 30, seed: 9, ..CorpusConfig::default() }
    }

    #[test]
    fn programs_are_valid_and_dce_stable() {
        let c = generate_corpus(&small()).unwrap();
        assert_eq!(c.len(), 150);
        for e in &c.entries {
            check_well_formed(&e.program).unwrap_or_else(|err| panic!("{}: {err}", e.id));
            assert_eq!(eliminate_dead_code(&e.program), e.program, "{}", e.id);
            assert_eq!(e.upsilon.len(), 8);
            for &t in &e.upsilon {
                interpret_case(&e.program, t, DEFAULT_FUEL).unwrap_or_else(|err| panic!("{}: {err}", e.id));
            }
            assert!(!render(&e.program).contains("rand_bools"));
            assert_eq!(parse(&render(&e.program)).unwrap(), e.program);
        }
    }

    #[test]
    fn default_malware_fraction() {
        assert!((CorpusConfig::default().malware_fraction() - 200.0 / 2200.0).abs() < 1e-12);
    }

    #[test]
    fn signal_sets_are_disjoint() {
        let pools = FeaturePools::new(&CorpusConfig::default());
        let g = pools.signal_features(false);
        let m = pools.signal_features(true);
        assert!(g.is_disjoint(&m));
        assert!(!g.is_empty() && !m.is_empty());
    }

    #[test]
    fn zero_noise_keeps_goodware_clean_and_is_separable() {
        use crate::features::{train_svm, FeatureVocabulary, Sample};
        use crate::minilang::extract_features;
        let cfg = CorpusConfig { noise: 0.0, ..small() };
        let pools = FeaturePools::new(&cfg);
        let c = generate_corpus(&cfg).unwrap();
        for e in &c.entries {
            let f = feature_names(&e.program);
            assert!(f.is_disjoint(&pools.signal_features(true)) != e.malware, "{}", e.id);
        }
        let names: BTreeSet<String> = c.entries.iter().flat_map(|e| feature_names(&e.program)).collect();
        let vocab = FeatureVocabulary::new(names).unwrap();
        let samples: Vec<Sample> =
            c.entries.iter().map(|e| Sample { x: extract_features(&e.program, &vocab), malware: e.malware }).collect();
        let m = train_svm(&samples, &vocab, 1.0, 0).unwrap();
        for s in &samples {
            assert_eq!(m.discriminant(&s.x).unwrap() > 0.0, s.malware);
        }
    }

    #[test]
    fn deterministic_and_round_trips_on_disk() {
        let a = generate_corpus(&small()).unwrap();
        let b = generate_corpus(&small()).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        let back = Corpus::load(dir.path()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn stratified_split() {
        let entries = (0..10)
            .map(|i| CorpusEntry {
                id: format!("s{i}"),
                malware: i % 2 == 0,
                program: crate::minilang::minimal_program(),
                upsilon: Vec::new(),
            })
            .collect();
        let c = Corpus { entries };
        let (train, test) = split(&c, 0.5, 3).unwrap();
        assert_eq!((train.len(), test.len()), (5, 5));
        assert_eq!(split(&c, 0.5, 3).unwrap(), (train.clone(), test));
        let mal = train.iter().filter(|&&i| c.entries[i].malware).count();
        assert!((2..=3).contains(&mal));
        assert!(split(&c, 1.0, 3).is_err());
    }
}
