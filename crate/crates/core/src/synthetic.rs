//! Synthetic supernet ranking tasks.
//!
//! Each task draws distinct architectures uniformly from the search space, scores them with
//! a hidden effect model (linear + sparse pairwise interactions + a tanh ridge), adds
//! Gaussian observation noise and converts the noisy scores to per-split rank labels.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_batch, Encoding, RawArchitecture, SearchSpaceSchema};
use crate::error::{Error, Result};

pub const DEFAULT_N_TRAIN: usize = 500;
/// Desk-scale test split.
pub const DEFAULT_N_TEST: usize = 2000;
pub const CHALLENGE_N_TEST: usize = 99_500;
pub const DEFAULT_TASKS: u32 = 8;

/// Noise standard deviation (in units of the signal's standard deviation) for tasks 1..=8.
const TASK_NOISE: [f64; 8] = [0.20, 0.30, 0.25, 0.40, 0.15, 0.35, 0.30, 0.45];

pub fn default_noise_sd(task_id: u32) -> f64 {
    TASK_NOISE[(task_id.max(1) as usize - 1) % TASK_NOISE.len()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGenerator {
    pub schema: SearchSpaceSchema,
    pub noise_sd: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Number of random feature pairs with a product effect.
    pub interaction_pairs: usize,
    pub interaction_scale: f64,
    /// Weight of the tanh ridge term.
    pub nonlinearity: f64,
}

impl Default for TaskGenerator {
    fn default() -> Self {
        TaskGenerator {
            schema: SearchSpaceSchema::default(),
            noise_sd: 0.3,
            seed: 0,
            n_train: DEFAULT_N_TRAIN,
            n_test: DEFAULT_N_TEST,
            interaction_pairs: 12,
            interaction_scale: 0.8,
            nonlinearity: 1.0,
        }
    }
}

impl TaskGenerator {
    /// Default generator for `task_id` with that task's noise level.
    pub fn for_task(seed: u64, task_id: u32) -> Self {
        TaskGenerator {
            seed,
            noise_sd: default_noise_sd(task_id),
            ..TaskGenerator::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise_sd", "must be finite and non-negative"));
        }
        if self.n_train < 2 || self.n_test < 2 {
            return Err(Error::config(
                "n_train/n_test",
                "each split needs at least 2 rows",
            ));
        }
        if !(self.interaction_scale >= 0.0 && self.nonlinearity >= 0.0) {
            return Err(Error::config("effect", "scales must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledArch {
    pub arch: RawArchitecture,
    pub rank: usize,
}

/// Noise-free scores, kept apart from anything a learner reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLatents {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub task_id: u32,
    pub train: Vec<LabeledArch>,
    pub test: Vec<LabeledArch>,
    pub hidden: HiddenLatents,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic sub-seed for `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix(seed ^ splitmix(stream))
}

fn decode_index(schema: &SearchSpaceSchema, mut index: u128) -> RawArchitecture {
    for (o, &symbol) in schema.depth_symbols.iter().enumerate() {
        let active = schema.active_layers(o + 1);
        let block = 9u128.pow(active as u32);
        if index < block {
            let mut layers = vec![(0u8, 0u8); schema.max_layers];
            for p in layers.iter_mut().take(active) {
                let code = (index % 9) as u8;
                index /= 9;
                *p = (code / 3 + 1, code % 3 + 1);
            }
            return RawArchitecture {
                depth: symbol,
                layers,
                embed: None,
            };
        }
        index -= block;
    }
    unreachable!("index within space size")
}

const ENUMERATION_LIMIT: u128 = 1 << 20;

/// Distinct architectures drawn uniformly without replacement.
pub fn sample_architectures(
    schema: &SearchSpaceSchema,
    count: usize,
    seed: u64,
) -> Result<Vec<RawArchitecture>> {
    schema.validate()?;
    let space = schema.space_size();
    if count as u128 > space {
        return Err(Error::Domain(format!(
            "requested {count} architectures from a space of {space}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<u128> = if space <= ENUMERATION_LIMIT {
        rand::seq::index::sample(&mut rng, space as usize, count)
            .into_iter()
            .map(|i| i as u128)
            .collect()
    } else {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let i = rng.gen_range(0..space);
            if seen.insert(i) {
                out.push(i);
            }
        }
        out
    };
    Ok(indices
        .into_iter()
        .map(|i| {
            let mut a = decode_index(schema, i);
            if schema.includes_embed_column {
                a.embed = Some(rng.gen_range(1..=3));
            }
            a
        })
        .collect())
}

struct EffectModel {
    linear: Vec<f64>,
    pairs: Vec<(usize, usize, f64)>,
    ridge: Vec<f64>,
    ridge_weight: f64,
}

impl EffectModel {
    fn draw(width: usize, gen: &TaskGenerator, rng: &mut ChaCha8Rng) -> Self {
        let linear: Vec<f64> = (0..width)
            .map(|j| {
                let w: f64 = StandardNormal.sample(rng);
                // depth carries a stronger main effect
                if j == 0 {
                    2.0 * w
                } else {
                    w
                }
            })
            .collect();
        let pairs = (0..gen.interaction_pairs)
            .map(|_| {
                let a = rng.gen_range(0..width);
                let mut b = rng.gen_range(0..width - 1);
                if b >= a {
                    b += 1;
                }
                let v: f64 = StandardNormal.sample(rng);
                (a.min(b), a.max(b), v * gen.interaction_scale)
            })
            .collect();
        let mut ridge: Vec<f64> = (0..width).map(|_| StandardNormal.sample(rng)).collect();
        let norm = ridge.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        ridge.iter_mut().for_each(|v| *v *= 2.0 / norm);
        EffectModel {
            linear,
            pairs,
            ridge,
            ridge_weight: gen.nonlinearity,
        }
    }

    fn score(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(x).map(|(w, v)| w * v).sum();
        let inter: f64 = self.pairs.iter().map(|&(a, b, v)| v * x[a] * x[b]).sum();
        let proj: f64 = self.ridge.iter().zip(x).map(|(w, v)| w * v).sum();
        lin + inter + self.ridge_weight * self.linear.len() as f64 * 0.25 * (proj).tanh()
    }
}

/// Ranks `0..n` by ascending score; equal scores fall back to the architecture string.
fn ranks_of(scores: &[f64], archs: &[RawArchitecture]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("finite scores")
            .then_with(|| {
                crate::encoding::format_architecture(&archs[a])
                    .cmp(&crate::encoding::format_architecture(&archs[b]))
            })
    });
    let mut ranks = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r;
    }
    ranks
}

pub fn gen_task(gen: &TaskGenerator, task_id: u32) -> Result<SyntheticTask> {
    gen.validate()?;
    let task_seed = derive_seed(gen.seed, u64::from(task_id));
    let total = gen.n_train + gen.n_test;
    let archs = sample_architectures(&gen.schema, total, derive_seed(task_seed, 1))?;

    let (x, _) = encode_batch::<f64>(&archs, &gen.schema, Encoding::Ordinal);
    let mut effect_rng = ChaCha8Rng::seed_from_u64(derive_seed(task_seed, 2));
    let effect = EffectModel::draw(x.cols(), gen, &mut effect_rng);
    let raw: Vec<f64> = x.row_iter().map(|r| effect.score(r)).collect();
    let mean = raw.iter().sum::<f64>() / total as f64;
    let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total as f64)
        .sqrt()
        .max(1e-12);
    let truth: Vec<f64> = raw.iter().map(|v| (v - mean) / sd).collect();

    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(task_seed, 3));
    let noise =
        Normal::new(0.0, gen.noise_sd).map_err(|e| Error::config("noise_sd", e.to_string()))?;
    let observed: Vec<f64> = truth
        .iter()
        .map(|t| t + noise.sample(&mut noise_rng))
        .collect();

    let (train_archs, test_archs) = archs.split_at(gen.n_train);
    let label = |archs: &[RawArchitecture], obs: &[f64]| -> Vec<LabeledArch> {
        ranks_of(obs, archs)
            .into_iter()
            .zip(archs)
            .map(|(rank, a)| LabeledArch {
                arch: a.clone(),
                rank,
            })
            .collect()
    };
    Ok(SyntheticTask {
        task_id,
        train: label(train_archs, &observed[..gen.n_train]),
        test: label(test_archs, &observed[gen.n_train..]),
        hidden: HiddenLatents {
            train: truth[..gen.n_train].to_vec(),
            test: truth[gen.n_train..].to_vec(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{format_architecture, parse_architecture};
    use crate::metrics::kendall_tau_b;

    fn tiny() -> SearchSpaceSchema {
        SearchSpaceSchema {
            max_layers: 2,
            depth_symbols: vec!['a', 'b'],
            includes_embed_column: false,
        }
    }

    /// Every valid tiny architecture by direct nested enumeration.
    fn brute_force_tiny() -> HashSet<String> {
        let mut all = HashSet::new();
        for h in 1..=3 {
            for m in 1..=3 {
                all.insert(format!("a{h}{m}00"));
                for h2 in 1..=3 {
                    for m2 in 1..=3 {
                        all.insert(format!("b{h}{m}{h2}{m2}"));
                    }
                }
            }
        }
        all
    }

    #[test]
    fn tiny_space_is_fully_enumerated() {
        let s = tiny();
        assert_eq!(s.space_size(), 90);
        let all = sample_architectures(&s, 90, 4).unwrap();
        let texts: HashSet<String> = all.iter().map(format_architecture).collect();
        assert_eq!(texts.len(), 90);
        assert_eq!(texts, brute_force_tiny());
        assert!(sample_architectures(&s, 91, 4).is_err());
    }

    #[test]
    fn single_sample_round_trips() {
        let s = SearchSpaceSchema::default();
        let a = sample_architectures(&s, 1, 11).unwrap();
        let text = format_architecture(&a[0]);
        assert_eq!(parse_architecture(&text, &s).unwrap(), a[0]);
        assert_eq!(
            sample_architectures(&s, 50, 3).unwrap(),
            sample_architectures(&s, 50, 3).unwrap()
        );
    }

    #[test]
    fn ranks_are_permutations_and_deterministic() {
        let gen = TaskGenerator {
            n_train: 120,
            n_test: 200,
            seed: 5,
            ..TaskGenerator::default()
        };
        let t = gen_task(&gen, 3).unwrap();
        for split in [&t.train, &t.test] {
            let mut r: Vec<usize> = split.iter().map(|l| l.rank).collect();
            r.sort_unstable();
            assert_eq!(r, (0..split.len()).collect::<Vec<_>>());
        }
        assert_eq!(t, gen_task(&gen, 3).unwrap());
        assert_ne!(t.train, gen_task(&gen, 4).unwrap().train);
    }

    #[test]
    fn noiseless_linear_task_is_perfectly_ordered_by_truth() {
        let gen = TaskGenerator {
            n_train: 200,
            n_test: 300,
            noise_sd: 0.0,
            interaction_pairs: 0,
            nonlinearity: 0.0,
            seed: 8,
            ..TaskGenerator::default()
        };
        let t = gen_task(&gen, 1).unwrap();
        let ranks: Vec<f64> = t.test.iter().map(|l| l.rank as f64).collect();
        assert_eq!(kendall_tau_b(&t.hidden.test, &ranks).unwrap(), 1.0);
        let mut truth = t.hidden.test.clone();
        truth.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(truth.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn embed_column_is_filled_when_requested() {
        let s = SearchSpaceSchema {
            includes_embed_column: true,
            ..SearchSpaceSchema::default()
        };
        let a = sample_architectures(&s, 5, 1).unwrap();
        assert!(a.iter().all(|x| x.embed.is_some()));
        for x in &a {
            assert_eq!(&parse_architecture(&format_architecture(x), &s).unwrap(), x);
        }
    }
}
