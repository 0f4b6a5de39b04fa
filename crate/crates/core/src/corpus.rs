//! Resume records, corpus files, the synthetic corpus generator, and fold
//! planning for repeated k-fold evaluation.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EducationLevel {
    HighSchool,
    Bachelor,
    Master,
    Doctor,
}

impl EducationLevel {
    /// Ordinal code, 1 (high school) through 4 (doctor).
    pub fn ordinal(self) -> u8 {
        match self {
            EducationLevel::HighSchool => 1,
            EducationLevel::Bachelor => 2,
            EducationLevel::Master => 3,
            EducationLevel::Doctor => 4,
        }
    }

    fn from_ordinal(v: u8) -> Self {
        match v {
            0 | 1 => EducationLevel::HighSchool,
            2 => EducationLevel::Bachelor,
            3 => EducationLevel::Master,
            _ => EducationLevel::Doctor,
        }
    }
}

/// Expert judgement attached to a resume. Stored as `1`, `-1` or `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
    Unlabeled,
}

impl Label {
    pub fn is_labeled(self) -> bool {
        self != Label::Unlabeled
    }

    /// `+1` / `-1` target, `None` when unlabeled.
    pub fn sign(self) -> Option<i8> {
        match self {
            Label::Positive => Some(1),
            Label::Negative => Some(-1),
            Label::Unlabeled => None,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(match self {
            Label::Positive => 1,
            Label::Negative => -1,
            Label::Unlabeled => 0,
        })
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i64::deserialize(d)? {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            0 => Ok(Label::Unlabeled),
            other => Err(serde::de::Error::custom(format!(
                "label must be 1, -1 or 0, got {other}"
            ))),
        }
    }
}

/// One candidate record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resume {
    pub id: String,
    pub skills: Vec<String>,
    pub work_experiences: Vec<String>,
    pub education_level: EducationLevel,
    pub university_rank: Option<u32>,
    pub years_working: f64,
    pub num_awards: u32,
    pub num_positions: u32,
    pub num_entries: u32,
    pub label: Label,
}

#[derive(Deserialize)]
struct ResumeRecord {
    id: String,
    skills: Vec<String>,
    work_experiences: Vec<String>,
    education_level: EducationLevel,
    university_rank: Option<u32>,
    years_working: f64,
    num_awards: u32,
    num_positions: Option<u32>,
    num_entries: u32,
    label: Label,
}

const RECORD_FIELDS: [&str; 10] = [
    "id",
    "skills",
    "work_experiences",
    "education_level",
    "university_rank",
    "years_working",
    "num_awards",
    "num_positions",
    "num_entries",
    "label",
];

impl From<ResumeRecord> for Resume {
    fn from(r: ResumeRecord) -> Self {
        let num_positions = r
            .num_positions
            .unwrap_or(r.work_experiences.len() as u32);
        Resume {
            id: r.id,
            skills: r.skills,
            work_experiences: r.work_experiences,
            education_level: r.education_level,
            university_rank: r.university_rank,
            years_working: r.years_working,
            num_awards: r.num_awards,
            num_positions,
            num_entries: r.num_entries,
            label: r.label,
        }
    }
}

impl Resume {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("resume id is empty".into()));
        }
        if self.skills.iter().any(|s| s.is_empty()) {
            return Err(Error::Validation(format!("{}: empty skill text", self.id)));
        }
        if self.work_experiences.iter().any(|s| s.is_empty()) {
            return Err(Error::Validation(format!(
                "{}: empty work experience text",
                self.id
            )));
        }
        if self.university_rank == Some(0) {
            return Err(Error::Validation(format!(
                "{}: university_rank must be >= 1",
                self.id
            )));
        }
        if !self.years_working.is_finite() || self.years_working < 0.0 {
            return Err(Error::Validation(format!(
                "{}: years_working must be a non-negative number",
                self.id
            )));
        }
        Ok(())
    }

    /// Parse one corpus line. Unknown fields are reported and skipped.
    pub fn from_json_line(line: &str) -> std::result::Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if let serde_json::Value::Object(map) = &value {
            for key in map.keys() {
                if !RECORD_FIELDS.contains(&key.as_str()) {
                    warn!("ignoring unknown resume field {key:?}");
                }
            }
        }
        let record: ResumeRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
        Ok(record.into())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("resume serializes")
    }
}

/// Label tallies of a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
    pub unlabeled: usize,
}

impl LabelCounts {
    pub fn labeled(&self) -> usize {
        self.positive + self.negative
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    resumes: Vec<Resume>,
    counts: LabelCounts,
}

impl Corpus {
    /// Validates every record and the id uniqueness invariant.
    pub fn new(resumes: Vec<Resume>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(resumes.len());
        let mut counts = LabelCounts::default();
        for r in &resumes {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate resume id {:?}", r.id)));
            }
            match r.label {
                Label::Positive => counts.positive += 1,
                Label::Negative => counts.negative += 1,
                Label::Unlabeled => counts.unlabeled += 1,
            }
        }
        Ok(Self { resumes, counts })
    }

    pub fn resumes(&self) -> &[Resume] {
        &self.resumes
    }

    pub fn counts(&self) -> LabelCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.resumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resumes.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Resume> {
        self.resumes.iter().find(|r| r.id == id)
    }

    /// Ids of labeled resumes in corpus order.
    pub fn labeled_ids(&self) -> Vec<&str> {
        self.resumes
            .iter()
            .filter(|r| r.label.is_labeled())
            .map(|r| r.id.as_str())
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.resumes {
            out.push_str(&r.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str, origin: &Path) -> Result<Self> {
        let mut resumes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let resume = Resume::from_json_line(line).map_err(|message| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message,
            })?;
            resumes.push(resume);
        }
        Corpus::new(resumes)
    }
}

/// Read a line-delimited corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::parse_jsonl(&text, path)
}

// Shared vocabulary for the synthetic generator. Each topic owns a set of
// skill phrases; work experience sentences are assembled from a topic's
// phrases plus filler words common to every topic.
const TOPICS: [&[&str]; 8] = [
    &[
        "python", "machine learning", "statistics", "pandas", "deep learning",
        "feature engineering", "regression", "data mining", "tensorflow", "clustering",
    ],
    &[
        "java", "microservices", "spring", "kubernetes", "docker", "rest api",
        "distributed systems", "kafka", "service mesh", "grpc",
    ],
    &[
        "javascript", "react", "typescript", "css", "html", "frontend", "redux",
        "web design", "accessibility", "webpack",
    ],
    &[
        "accounting", "auditing", "tax", "bookkeeping", "payroll", "budgeting",
        "financial reporting", "ledger", "reconciliation", "forecasting",
    ],
    &[
        "sales", "negotiation", "crm", "lead generation", "account management",
        "cold calling", "pipeline", "quota", "prospecting", "closing",
    ],
    &[
        "nursing", "patient care", "triage", "phlebotomy", "clinical", "vital signs",
        "medication", "charting", "icu", "emergency care",
    ],
    &[
        "autocad", "structural analysis", "concrete", "surveying", "civil", "steel",
        "site inspection", "drafting", "geotechnical", "construction",
    ],
    &[
        "recruiting", "onboarding", "interviewing", "hr policy", "benefits",
        "employee relations", "talent acquisition", "compensation", "training", "retention",
    ],
];

const VERBS: [&str; 6] = ["developed", "managed", "led", "built", "maintained", "delivered"];
const CONTEXTS: [&str; 5] = [
    "for enterprise clients",
    "across the team",
    "for internal projects",
    "in a fast paced environment",
    "with cross functional partners",
];

fn experience_sentence(rng: &mut ChaCha8Rng, topic: usize) -> String {
    let vocab = TOPICS[topic];
    let a = vocab[rng.random_range(0..vocab.len())];
    let b = vocab[rng.random_range(0..vocab.len())];
    let verb = VERBS[rng.random_range(0..VERBS.len())];
    let ctx = CONTEXTS[rng.random_range(0..CONTEXTS.len())];
    format!("{verb} {a} and {b} solutions {ctx}")
}

fn other_topic(rng: &mut ChaCha8Rng, topic: usize) -> usize {
    let shift = rng.random_range(1..TOPICS.len());
    (topic + shift) % TOPICS.len()
}

fn synth_resume(rng: &mut ChaCha8Rng, quality: f64, label: Label) -> Resume {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let z = |rng: &mut ChaCha8Rng| noise.sample(rng);

    let skill_topic = rng.random_range(0..TOPICS.len());
    let n_skills = (3.0 + 8.0 * quality + 2.0 * z(rng)).round().clamp(1.0, 15.0) as usize;
    let vocab = TOPICS[skill_topic];
    let mut pool: Vec<&str> = vocab.to_vec();
    pool.shuffle(rng);
    let mut skills: Vec<String> = pool.iter().take(n_skills).map(|s| s.to_string()).collect();
    // Larger skill lists spill into a second topic.
    if n_skills > vocab.len() {
        let extra = TOPICS[other_topic(rng, skill_topic)];
        skills.extend(extra.iter().take(n_skills - vocab.len()).map(|s| s.to_string()));
    }

    let num_positions = (1.0 + 3.0 * quality + z(rng)).round().clamp(1.0, 6.0) as u32;
    let work_experiences = (0..num_positions)
        .map(|_| {
            let topic = if rng.random_bool(quality.clamp(0.0, 1.0)) {
                skill_topic
            } else {
                other_topic(rng, skill_topic)
            };
            experience_sentence(rng, topic)
        })
        .collect();

    let education_level =
        EducationLevel::from_ordinal((1.0 + 3.0 * quality + 0.7 * z(rng)).round().clamp(1.0, 4.0) as u8);
    let rank_known = rng.random_bool(0.9);
    let university_rank = if education_level >= EducationLevel::Bachelor && rank_known {
        let log_rank = 6.9 * (1.0 - quality) + 0.8 * z(rng);
        Some(log_rank.exp().round().clamp(1.0, 2000.0) as u32)
    } else {
        None
    };
    let years_working = ((12.0 * quality + 2.5 * z(rng)).max(0.0) * 10.0).round() / 10.0;
    let num_awards = Poisson::new(0.3 + 3.0 * quality)
        .expect("positive rate")
        .sample(rng) as u32;
    let num_entries = (4.0 + 10.0 * quality + 2.0 * z(rng)).round().clamp(1.0, 20.0) as u32;

    Resume {
        id: String::new(),
        skills,
        work_experiences,
        education_level,
        university_rank,
        years_working,
        num_awards,
        num_positions,
        num_entries,
        label,
    }
}

/// Resume-level noise shared by every observable attribute, so the classes
/// overlap instead of separating perfectly.
const PRESENTATION_NOISE: f64 = 0.3;

/// Deterministic synthetic corpus. Each resume carries a latent quality
/// `u`: positives draw `u ∈ [0.7, 1]`, negatives `u ∈ [0, 0.3]`, unlabeled
/// `u ∈ [0, 1]`. Attributes are generated from `u` plus shared Gaussian
/// noise, clamped to `[0, 1]`: every scalar attribute is a noisy increasing
/// function of it, and each work experience shares the skill topic with that
/// probability.
pub fn generate_synthetic(n_pos: usize, n_neg: usize, n_unlabeled: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan: Vec<Label> = std::iter::repeat_n(Label::Positive, n_pos)
        .chain(std::iter::repeat_n(Label::Negative, n_neg))
        .chain(std::iter::repeat_n(Label::Unlabeled, n_unlabeled))
        .collect();
    plan.shuffle(&mut rng);

    let resumes = plan
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let quality = match label {
                Label::Positive => rng.random_range(0.7..=1.0),
                Label::Negative => rng.random_range(0.0..=0.3),
                Label::Unlabeled => rng.random_range(0.0..=1.0),
            };
            let shift: f64 = StandardNormal.sample(&mut rng);
            let observed = (quality + PRESENTATION_NOISE * shift).clamp(0.0, 1.0);
            let mut r = synth_resume(&mut rng, observed, label);
            r.id = format!("r{i:05}");
            r
        })
        .collect();
    Corpus::new(resumes).expect("generator emits valid records")
}

/// Role of each fold when one fold is held out for testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRoles {
    pub test: usize,
    pub validation: usize,
    pub training: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub shuffle_seed: u64,
    pub n_folds: usize,
    pub assignments: BTreeMap<String, usize>,
    pub schedule: Vec<FoldRoles>,
}

impl FoldPlan {
    /// Ids in `fold`, ordered by id.
    pub fn fold_ids(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffle the labeled ids and deal them round-robin into `n_folds` folds.
/// For test fold `t` the validation fold is `(t + 1) % n_folds`.
pub fn plan_folds(corpus: &Corpus, n_folds: usize, shuffle_seed: u64) -> Result<FoldPlan> {
    let mut ids = corpus.labeled_ids();
    if n_folds < 2 {
        return Err(Error::Protocol(format!("need at least 2 folds, got {n_folds}")));
    }
    if ids.len() < n_folds {
        return Err(Error::Protocol(format!(
            "{} labeled resumes cannot fill {n_folds} folds",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    ids.shuffle(&mut rng);
    let assignments = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.to_string(), i % n_folds))
        .collect();
    let schedule = (0..n_folds)
        .map(|test| {
            let validation = (test + 1) % n_folds;
            FoldRoles {
                test,
                validation,
                training: (0..n_folds).filter(|&f| f != test && f != validation).collect(),
            }
        })
        .collect();
    Ok(FoldPlan {
        shuffle_seed,
        n_folds,
        assignments,
        schedule,
    })
}
