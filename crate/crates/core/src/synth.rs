//! Synthetic review worlds with known structure.
//!
//! Ratings are `user bias + item shift + noise`, rounded into 1..5. Texts
//! are built from a fixed template per rating, optionally wrapped in a user
//! signature phrase and an item tag. A fraction of texts can be corrupted by
//! swapping in the template of a different rating.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ReviewRecord;
use crate::error::{Error, Result};

/// One text per rating, in increasing sentiment under the bundled lexicon.
pub const RATING_TEMPLATES: [&str; 5] = [
    "terrible product, i hate it.",
    "poor quality, quite disappointing.",
    "it is okay, average overall.",
    "good product, works well.",
    "excellent product, i love it!",
];

const SIG_ADJ: [&str; 8] = ["retired", "busy", "young", "careful", "frugal", "curious", "picky", "patient"];
const SIG_ROLE: [&str; 8] = ["teacher", "nurse", "farmer", "student", "baker", "pilot", "painter", "driver"];
const SIG_PLACE: [&str; 6] = ["ohio", "texas", "maine", "oregon", "utah", "iowa"];
const SIG_HOBBY: [&str; 7] = ["fishing", "chess", "gardening", "hiking", "knitting", "cycling", "baking"];
const ITEM_COLOR: [&str; 6] = ["red", "blue", "green", "silver", "black", "orange"];
const ITEM_KIND: [&str; 7] = ["kettle", "lamp", "blender", "radio", "clock", "fan", "toaster"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub users: usize,
    pub items: usize,
    pub reviews_per_user: usize,
    /// Standard deviation of the rating noise before rounding.
    pub rating_noise: f64,
    /// Fraction of texts given another rating's template.
    pub corruption: f64,
    /// Prefix a user signature and an item tag to every text.
    pub styled: bool,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            users: 20,
            items: 20,
            reviews_per_user: 8,
            rating_noise: 0.3,
            corruption: 0.0,
            styled: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub records: Vec<ReviewRecord>,
    /// Texts before corruption, aligned with `records`.
    pub clean_texts: Vec<String>,
    pub corrupted: Vec<bool>,
}

/// Signature phrase for user `u`, unique for `u < 384`. It carries more
/// user-specific words than an item tag carries item-specific ones.
pub fn user_signature(u: usize) -> String {
    format!(
        "{} {} from {} into {} ,",
        SIG_ADJ[u % SIG_ADJ.len()],
        SIG_ROLE[(u / SIG_ADJ.len()) % SIG_ROLE.len()],
        SIG_PLACE[(u / (SIG_ADJ.len() * SIG_ROLE.len())) % SIG_PLACE.len()],
        SIG_HOBBY[u % SIG_HOBBY.len()]
    )
}

/// Tag for item `i`, unique for `i < 42`.
pub fn item_tag(i: usize) -> String {
    format!("{} {} :", ITEM_COLOR[i % ITEM_COLOR.len()], ITEM_KIND[(i / ITEM_COLOR.len()) % ITEM_KIND.len()])
}

fn compose(styled: bool, u: usize, i: usize, template: &str) -> String {
    if styled {
        format!("{} {} {}", user_signature(u), item_tag(i), template)
    } else {
        template.to_string()
    }
}

pub fn generate(cfg: &WorldConfig) -> Result<World> {
    if cfg.users == 0 || cfg.items == 0 || cfg.reviews_per_user == 0 || cfg.reviews_per_user > cfg.items {
        return Err(Error::Config("world needs users, items and 1..=items reviews per user".into()));
    }
    if !(0.0..=1.0).contains(&cfg.corruption) {
        return Err(Error::Config("corruption must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let user_bias: Vec<f64> = (0..cfg.users).map(|_| rng.gen_range(1.5..4.5)).collect();
    let item_shift: Vec<f64> = (0..cfg.items).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut world = World {
        records: Vec::new(),
        clean_texts: Vec::new(),
        corrupted: Vec::new(),
    };
    for (u, &bias) in user_bias.iter().enumerate() {
        for k in 0..cfg.reviews_per_user {
            let i = (u + k) % cfg.items;
            // Box-Muller keeps the dependency surface to `rand` alone.
            let (a, b): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
            let noise = (-2.0 * a.ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos() * cfg.rating_noise;
            let rating = (bias + item_shift[i] + noise).round().clamp(1.0, 5.0) as u8;
            let clean = compose(cfg.styled, u, i, RATING_TEMPLATES[rating as usize - 1]);
            let corrupt = rng.gen::<f64>() < cfg.corruption;
            let text = if corrupt {
                let mut other = rng.gen_range(1..=4u8);
                if other >= rating {
                    other += 1;
                }
                compose(cfg.styled, u, i, RATING_TEMPLATES[other as usize - 1])
            } else {
                clean.clone()
            };
            let total = rng.gen_range(1..=10u32);
            let helpful = rng.gen_range(0..=total);
            world.records.push(ReviewRecord::new(
                format!("U{u:03}"),
                format!("I{i:03}"),
                rating,
                helpful,
                total,
                text,
            ));
            world.clean_texts.push(clean);
            world.corrupted.push(corrupt);
        }
    }
    Ok(world)
}
