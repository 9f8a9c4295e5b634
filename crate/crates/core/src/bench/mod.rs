//! Skill-based prompt corpus with paired evaluation programs.
//!
//! Object (80 objects × 5 templates) and text (31 words × 13 templates)
//! prompts are enumerated exhaustively. Count, spatial and scale prompts are
//! 1000-element samples from their combination spaces, drawn so that every
//! object and relation is used a near-equal number of times. Sampling is
//! driven by a seeded ChaCha RNG, so a seed fully determines the corpus.

mod template;
mod vocab;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{parse_program, print_program, EvalProgram};

pub use template::{
    fill_template, pair_program, templates, Slots, COUNT_TEMPLATES, OBJECT_TEMPLATES,
    SCALE_TEMPLATES, SPATIAL_TEMPLATES, TEXT_TEMPLATES,
};
pub use vocab::{
    article, number_word, plural, Vocab, COCO_OBJECTS, COUNTS, IRREGULAR_PLURALS, SCALE_RELATIONS,
    SPATIAL_RELATIONS, TEXT_WORDS,
};

/// Number of prompts drawn for each sampled skill.
pub const SAMPLED_SKILL_SIZE: usize = 1000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("vocabulary needs {expected} {what}, got {actual}")]
    VocabSize {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("vocabulary entry {0:?} must be non-empty lowercase")]
    VocabEntry(String),
    #[error("template slot {0} is not filled")]
    MissingSlot(String),
    #[error("unknown template variable {0}")]
    UnknownVariable(String),
    #[error("unknown skill {0:?}")]
    UnknownSkill(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Skill {
    Object,
    Count,
    Spatial,
    Scale,
    Text,
}

impl Skill {
    pub const ALL: [Skill; 5] = [
        Skill::Object,
        Skill::Count,
        Skill::Spatial,
        Skill::Scale,
        Skill::Text,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Skill::Object => "object",
            Skill::Count => "count",
            Skill::Spatial => "spatial",
            Skill::Scale => "scale",
            Skill::Text => "text",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Skill {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Skill::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| BenchError::UnknownSkill(s.to_string()))
    }
}

/// One benchmark prompt with the program that checks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WirePrompt", into = "WirePrompt")]
pub struct SkillPrompt {
    pub id: String,
    pub skill: Skill,
    pub template: usize,
    pub prompt: String,
    pub slots: Slots,
    pub program: EvalProgram,
}

#[derive(Serialize, Deserialize)]
struct WirePrompt {
    id: String,
    skill: Skill,
    prompt: String,
    slots: Slots,
    program: String,
    #[serde(default)]
    template: usize,
}

impl From<SkillPrompt> for WirePrompt {
    fn from(p: SkillPrompt) -> Self {
        WirePrompt {
            id: p.id,
            skill: p.skill,
            prompt: p.prompt,
            slots: p.slots,
            program: print_program(&p.program),
            template: p.template,
        }
    }
}

impl TryFrom<WirePrompt> for SkillPrompt {
    type Error = String;

    fn try_from(w: WirePrompt) -> Result<Self, String> {
        Ok(SkillPrompt {
            program: parse_program(&w.program).map_err(|e| e.to_string())?,
            id: w.id,
            skill: w.skill,
            template: w.template,
            prompt: w.prompt,
            slots: w.slots,
        })
    }
}

/// Stable 16-hex-digit id from skill, slots and template index.
pub fn prompt_id(skill: Skill, slots: &Slots, template: usize) -> String {
    let key = format!(
        "{skill}|{}|{template}",
        serde_json::to_string(slots).expect("slots serialize")
    );
    Sha256::digest(key.as_bytes())[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Fill the template and pair the program.
pub fn make_prompt(skill: Skill, template: usize, slots: Slots) -> Result<SkillPrompt, BenchError> {
    let prompt = fill_template(templates(skill)[template], &slots)?;
    let program = pair_program(skill, &slots)?;
    Ok(SkillPrompt {
        id: prompt_id(skill, &slots, template),
        skill,
        template,
        prompt,
        slots,
        program,
    })
}

/// Draw `k` items from strata of sub-groups so that strata, and sub-groups
/// within each stratum, are used in near-equal numbers.
fn balanced_sample<T>(strata: Vec<Vec<Vec<T>>>, k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut queues: Vec<std::vec::IntoIter<T>> = strata
        .into_iter()
        .map(|mut groups| {
            for g in &mut groups {
                g.shuffle(rng);
            }
            groups.shuffle(rng);
            let longest = groups.iter().map(Vec::len).max().unwrap_or(0);
            let mut iters: Vec<_> = groups.into_iter().map(Vec::into_iter).collect();
            let mut merged = Vec::new();
            for _ in 0..longest {
                merged.extend(iters.iter_mut().filter_map(Iterator::next));
            }
            merged.into_iter()
        })
        .collect();
    queues.shuffle(rng);

    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let before = out.len();
        for q in &mut queues {
            if out.len() == k {
                break;
            }
            if let Some(item) = q.next() {
                out.push(item);
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}

fn skill_rng(seed: u64, skill: Skill) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(skill as u64))
}

/// Generate prompts for one skill.
pub fn generate_skill(
    vocab: &Vocab,
    skill: Skill,
    seed: u64,
) -> Result<Vec<SkillPrompt>, BenchError> {
    vocab.validate()?;
    let mut rng = skill_rng(seed, skill);
    let slots_list: Vec<(usize, Slots)> = match skill {
        Skill::Object => vocab
            .objects
            .iter()
            .flat_map(|o| {
                (0..OBJECT_TEMPLATES.len()).map(move |t| {
                    (
                        t,
                        Slots {
                            obj_a: Some(o.clone()),
                            ..Default::default()
                        },
                    )
                })
            })
            .collect(),
        Skill::Text => vocab
            .words
            .iter()
            .flat_map(|w| {
                (0..TEXT_TEMPLATES.len()).map(move |t| {
                    (
                        t,
                        Slots {
                            text: Some(w.clone()),
                            ..Default::default()
                        },
                    )
                })
            })
            .collect(),
        Skill::Count => {
            let strata = vocab
                .objects
                .iter()
                .map(|o| {
                    vocab
                        .counts
                        .iter()
                        .map(|&n| {
                            (0..COUNT_TEMPLATES.len())
                                .map(|t| {
                                    let slots = Slots {
                                        obj_a: Some(o.clone()),
                                        count: Some(n),
                                        ..Default::default()
                                    };
                                    (t, slots)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            balanced_sample(strata, SAMPLED_SKILL_SIZE, &mut rng)
        }
        Skill::Spatial | Skill::Scale => {
            let relations = if skill == Skill::Spatial {
                &vocab.spatial_relations
            } else {
                &vocab.scale_relations
            };
            let strata = vocab
                .objects
                .iter()
                .map(|a| {
                    relations
                        .iter()
                        .map(|r| {
                            vocab
                                .objects
                                .iter()
                                .filter(|b| *b != a)
                                .map(|b| {
                                    let mut slots = Slots {
                                        obj_a: Some(a.clone()),
                                        obj_b: Some(b.clone()),
                                        ..Default::default()
                                    };
                                    if skill == Skill::Spatial {
                                        slots.rel = Some(r.clone());
                                    } else {
                                        slots.scale = Some(r.clone());
                                    }
                                    (0, slots)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            balanced_sample(strata, SAMPLED_SKILL_SIZE, &mut rng)
        }
    };
    slots_list
        .into_iter()
        .map(|(t, slots)| make_prompt(skill, t, slots))
        .collect()
}

/// All five skill corpora.
pub fn generate_corpus(
    vocab: &Vocab,
    seed: u64,
) -> Result<BTreeMap<Skill, Vec<SkillPrompt>>, BenchError> {
    Skill::ALL
        .into_iter()
        .map(|s| Ok((s, generate_skill(vocab, s, seed)?)))
        .collect()
}

/// JSON-Lines, one prompt per line, skills in canonical order.
pub fn corpus_to_jsonl<'a>(prompts: impl IntoIterator<Item = &'a SkillPrompt>) -> String {
    let mut out = String::new();
    for p in prompts {
        out.push_str(&serde_json::to_string(p).expect("prompts serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::validate_semantics;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn sizes_match_the_benchmark() {
        let corpus = generate_corpus(&Vocab::default(), 0).unwrap();
        let sizes: Vec<usize> = Skill::ALL.iter().map(|s| corpus[s].len()).collect();
        assert_eq!(sizes, [400, 1000, 1000, 1000, 403]);
    }

    #[test]
    fn deterministic_per_seed() {
        let v = Vocab::default();
        assert_eq!(
            generate_skill(&v, Skill::Spatial, 7).unwrap(),
            generate_skill(&v, Skill::Spatial, 7).unwrap()
        );
        assert_ne!(
            generate_skill(&v, Skill::Spatial, 7).unwrap(),
            generate_skill(&v, Skill::Spatial, 8).unwrap()
        );
    }

    #[test]
    fn no_self_pairs_and_no_duplicates() {
        let corpus = generate_corpus(&Vocab::default(), 3).unwrap();
        for skill in Skill::ALL {
            let ids: HashSet<_> = corpus[&skill]
                .iter()
                .map(|p| (&p.slots, p.template))
                .collect();
            assert_eq!(ids.len(), corpus[&skill].len(), "{skill}");
        }
        for p in corpus[&Skill::Spatial].iter().chain(&corpus[&Skill::Scale]) {
            assert_ne!(p.slots.obj_a, p.slots.obj_b);
        }
    }

    #[test]
    fn near_uniform_marginals() {
        let corpus = generate_corpus(&Vocab::default(), 0).unwrap();
        for skill in [Skill::Count, Skill::Spatial, Skill::Scale] {
            let mut per_obj: HashMap<&str, usize> = HashMap::new();
            let mut per_rel: HashMap<String, usize> = HashMap::new();
            for p in &corpus[&skill] {
                *per_obj
                    .entry(p.slots.obj_a.as_deref().unwrap())
                    .or_default() += 1;
                let r = p
                    .slots
                    .rel
                    .clone()
                    .or(p.slots.scale.clone())
                    .or(p.slots.count.map(|n| n.to_string()));
                *per_rel.entry(r.unwrap()).or_default() += 1;
            }
            assert_eq!(per_obj.len(), 80);
            let (lo, hi) = (
                per_obj.values().min().unwrap(),
                per_obj.values().max().unwrap(),
            );
            assert!(hi - lo <= 1, "{skill}: objects {lo}..{hi}");
            let expected = 1000.0 / per_rel.len() as f64;
            for (r, n) in &per_rel {
                assert!(
                    (*n as f64 - expected).abs() / expected < 0.1,
                    "{skill} {r}: {n}"
                );
            }
        }
    }

    #[test]
    fn every_program_validates_and_prompts_are_expanded() {
        let corpus = generate_corpus(&Vocab::default(), 0).unwrap();
        for p in corpus.values().flatten() {
            assert!(validate_semantics(&p.program).is_empty(), "{}", p.prompt);
            assert!(
                !p.prompt.contains('<') && !p.prompt.contains('>'),
                "{}",
                p.prompt
            );
            for word in [
                "a apple",
                "a elephant",
                "a umbrella",
                "a orange",
                "a oven",
                "a airplane",
            ] {
                assert!(
                    !p.prompt.starts_with(word) && !p.prompt.contains(&format!(" {word}")),
                    "{}",
                    p.prompt
                );
            }
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let prompts = generate_skill(&Vocab::default(), Skill::Count, 0).unwrap();
        let text = corpus_to_jsonl(&prompts[..3]);
        let back: Vec<SkillPrompt> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(back, prompts[..3]);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert!(v["program"]
            .as_str()
            .unwrap()
            .starts_with("countEval(img, '"));
        assert_eq!(v["skill"], "count");
    }
}
