//! Template prompt generation standing in for the language-model labeler.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PromptCategory, PromptLabel};

/// Adjectives used to corrupt descriptive prompts.
pub static DECOY_ADJECTIVES: std::sync::LazyLock<Vec<&'static str>> = std::sync::LazyLock::new(|| {
    include_str!("../../data/decoy_adjectives.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDescription {
    pub noun: String,
    pub attributes: Vec<String>,
}

impl ObjectDescription {
    pub fn text(&self) -> String {
        let mut parts: Vec<&str> = self.attributes.iter().map(String::as_str).collect();
        parts.push(&self.noun);
        parts.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub noise_prob: f64,
    pub implicit_prob: f64,
    pub min_prompts: usize,
    pub max_prompts: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            noise_prob: 0.3,
            implicit_prob: 0.3,
            min_prompts: 1,
            max_prompts: 6,
        }
    }
}

fn prompt(text: String, category: PromptCategory) -> PromptLabel {
    PromptLabel { text, category }
}

/// Emits a simple prompt, descriptive prompts when the object has attributes
/// or neighbors, and (with the configured probabilities) one noisy and one
/// implicit variant. Objects with neither attributes nor neighbors only get
/// the simple prompt. `neighbors` should be sorted nearest first.
pub fn generate_prompts<R: Rng + ?Sized>(
    obj: &ObjectDescription,
    neighbors: &[ObjectDescription],
    cfg: &PromptConfig,
    rng: &mut R,
) -> Vec<PromptLabel> {
    let noun = &obj.noun;
    let attrs = obj.attributes.join(" ");
    let mut out = vec![prompt(format!("go to the {noun}"), PromptCategory::Simple)];

    if !obj.attributes.is_empty() {
        out.push(prompt(
            format!("go to the {attrs} {noun}"),
            PromptCategory::Descriptive,
        ));
    }
    if let Some(nb) = neighbors.first() {
        let lead = if attrs.is_empty() {
            noun.clone()
        } else {
            format!("{attrs} {noun}")
        };
        out.push(prompt(
            format!("go to the {lead} next to the {}", nb.noun),
            PromptCategory::Descriptive,
        ));
    }

    if !obj.attributes.is_empty() && rng.random_bool(cfg.noise_prob.clamp(0.0, 1.0)) {
        let slot = rng.random_range(0..obj.attributes.len());
        let decoys: Vec<&&str> = DECOY_ADJECTIVES
            .iter()
            .filter(|d| !obj.attributes.iter().any(|a| a == **d))
            .collect();
        if let Some(decoy) = decoys.choose(rng) {
            let mut noisy = obj.attributes.clone();
            noisy[slot] = (**decoy).to_string();
            out.push(prompt(
                format!("go to the {} {noun}", noisy.join(" ")),
                PromptCategory::Noisy,
            ));
        }
    }
    if !obj.attributes.is_empty() && rng.random_bool(cfg.implicit_prob.clamp(0.0, 1.0)) {
        out.push(prompt(
            format!("go to the {attrs} one"),
            PromptCategory::Implicit,
        ));
    }

    let keep = out.len().min(cfg.max_prompts.max(cfg.min_prompts).max(1));
    out.truncate(keep);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::tokenize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chair() -> ObjectDescription {
        ObjectDescription {
            noun: "chair".into(),
            attributes: vec!["white".into()],
        }
    }

    fn desk() -> ObjectDescription {
        ObjectDescription {
            noun: "desk".into(),
            attributes: vec![],
        }
    }

    #[test]
    fn template_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = generate_prompts(&chair(), &[desk()], &PromptConfig::default(), &mut rng);
        let texts: Vec<&str> = p.iter().map(|l| l.text.as_str()).collect();
        assert!(texts.contains(&"go to the chair"));
        assert!(texts.contains(&"go to the white chair next to the desk"));
        assert!(p.iter().all(|l| l.text.to_lowercase().starts_with("go to")));
    }

    #[test]
    fn no_neighbors_no_next_to() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = generate_prompts(&chair(), &[], &PromptConfig::default(), &mut rng);
        assert!(p.iter().all(|l| !l.text.contains("next to")));
        assert!(p.iter().any(|l| l.category == PromptCategory::Descriptive));
    }

    #[test]
    fn noisy_differs_in_exactly_one_attribute() {
        let cfg = PromptConfig {
            noise_prob: 1.0,
            ..Default::default()
        };
        let obj = ObjectDescription {
            noun: "backpack".into(),
            attributes: vec!["large".into(), "blue".into()],
        };
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = generate_prompts(&obj, &[], &cfg, &mut rng);
            let noisy = p.iter().find(|l| l.category == PromptCategory::Noisy).unwrap();
            let truth = tokenize("go to the large blue backpack");
            let got = tokenize(&noisy.text);
            assert_eq!(truth.len(), got.len());
            assert_eq!(truth.iter().zip(&got).filter(|(a, b)| a != b).count(), 1);
        }
    }

    #[test]
    fn deterministic_and_capped() {
        let cfg = PromptConfig {
            noise_prob: 1.0,
            implicit_prob: 1.0,
            max_prompts: 3,
            ..Default::default()
        };
        let a = generate_prompts(&chair(), &[desk()], &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let b = generate_prompts(&chair(), &[desk()], &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(DECOY_ADJECTIVES.len() > 10);
    }
}
