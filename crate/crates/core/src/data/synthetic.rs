//! Planted-theme synthetic catalogue.
//!
//! Items and bundles are grouped into themes; every bundle draws its items from
//! one theme's pool and every user prefers one theme, so an evaluator can
//! check that ranking quality tracks how much of each bundle's contents is
//! visible. The affiliation partition produced here additionally pins one edge
//! per bundle into the first subset, so no bundle ever goes empty, no matter
//! how low the variability level drops.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{split_user_bundle, AffiliationPartition, Dataset, InteractionMatrix};
use crate::error::{Error, Result};
use crate::seeds::{labels, SeedBank};

/// Shape and density knobs for the generator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticConfig {
    pub n_themes: usize,
    pub items_per_theme: usize,
    pub bundles_per_theme: usize,
    /// Items per bundle; must not exceed `items_per_theme` and must be at least
    /// `partition_subsets` so the first subset can hold one edge per bundle.
    pub bundle_size: usize,
    pub n_users: usize,
    /// Expected fraction of the bundle catalogue each user interacts with.
    pub user_bundle_density: f64,
    /// Extra uniform user-item edges, as a fraction of the item catalogue.
    #[serde(default = "default_noise")]
    pub ui_noise_rate: f64,
    /// Train/validation/test ratios for the user-bundle split.
    #[serde(default = "default_ratios")]
    pub split_ratios: (f64, f64, f64),
    /// Number of affiliation subsets.
    #[serde(default = "default_subsets")]
    pub partition_subsets: usize,
    /// Preference weight of a user's own theme relative to the others.
    #[serde(default = "default_affinity")]
    pub theme_affinity: f64,
}

fn default_noise() -> f64 {
    0.02
}

fn default_ratios() -> (f64, f64, f64) {
    (0.7, 0.1, 0.2)
}

fn default_subsets() -> usize {
    10
}

fn default_affinity() -> f64 {
    8.0
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_themes: 4,
            items_per_theme: 40,
            bundles_per_theme: 25,
            bundle_size: 10,
            n_users: 200,
            user_bundle_density: 0.08,
            ui_noise_rate: default_noise(),
            split_ratios: default_ratios(),
            partition_subsets: default_subsets(),
            theme_affinity: default_affinity(),
        }
    }
}

impl SyntheticConfig {
    pub fn n_items(&self) -> usize {
        self.n_themes * self.items_per_theme
    }

    pub fn n_bundles(&self) -> usize {
        self.n_themes * self.bundles_per_theme
    }

    /// Theme a bundle belongs to.
    pub fn bundle_theme(&self, bundle: usize) -> usize {
        bundle / self.bundles_per_theme
    }

    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("n_themes", self.n_themes),
            ("items_per_theme", self.items_per_theme),
            ("bundles_per_theme", self.bundles_per_theme),
            ("bundle_size", self.bundle_size),
            ("n_users", self.n_users),
            ("partition_subsets", self.partition_subsets),
        ] {
            if value == 0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if self.bundle_size > self.items_per_theme {
            return Err(Error::invalid(
                "bundle_size",
                format!(
                    "{} exceeds items_per_theme {}",
                    self.bundle_size, self.items_per_theme
                ),
            ));
        }
        if self.bundle_size < self.partition_subsets {
            return Err(Error::invalid(
                "bundle_size",
                format!(
                    "{} below partition_subsets {}; the first subset could not pin one edge per bundle",
                    self.bundle_size, self.partition_subsets
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.user_bundle_density) || self.user_bundle_density == 0.0 {
            return Err(Error::invalid("user_bundle_density", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.ui_noise_rate) {
            return Err(Error::invalid("ui_noise_rate", "must lie in [0, 1]"));
        }
        if self.theme_affinity < 1.0 {
            return Err(Error::invalid("theme_affinity", "must be at least 1"));
        }
        Ok(())
    }
}

/// Generate a themed catalogue plus its affiliation partition.
///
/// All randomness fans out from `seed` through named streams, so the same seed
/// reproduces the same dataset byte for byte.
pub fn synth_planted_dataset(
    cfg: &SyntheticConfig,
    seed: u64,
) -> Result<(Dataset, AffiliationPartition)> {
    cfg.validate()?;
    let bank = SeedBank::new(seed);
    let mut rng = bank.rng(labels::SYNTHETIC);

    let n_bundles = cfg.n_bundles();
    let n_items = cfg.n_items();
    let n_users = cfg.n_users;

    // Bundle contents: a without-replacement draw from a contiguous window of
    // the bundle's theme pool (treated as a ring). Windows overlap across
    // bundles, so neighbouring bundles share items the way real catalogues do:
    // a partial view of a bundle still narrows down the rest of its contents
    // instead of leaving the remainder exchangeable with the whole theme.
    //
    // The draw is stratified over the k assortment classes that the partition
    // later groups edges by (ring position modulo k), so every bundle spans
    // the classes as evenly as its size allows and adding or removing a class
    // resizes all bundles by the same fraction.
    let window = (cfg.bundle_size + cfg.bundle_size / 2).min(cfg.items_per_theme);
    let k = cfg.partition_subsets;
    let mut z_full = InteractionMatrix::new(n_bundles, n_items);
    let mut bundle_items: Vec<Vec<u32>> = Vec::with_capacity(n_bundles);
    for b in 0..n_bundles {
        let theme = cfg.bundle_theme(b);
        let pool_start = (theme * cfg.items_per_theme) as u32;
        let anchor = rng.gen_range(0..cfg.items_per_theme);
        let mut by_class: Vec<Vec<u32>> = vec![Vec::new(); k];
        for off in 0..window {
            let pos = (anchor + off) % cfg.items_per_theme;
            by_class[pos % k].push(pool_start + pos as u32);
        }
        for bucket in &mut by_class {
            bucket.shuffle(&mut rng);
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let mut pool: Vec<u32> = Vec::with_capacity(cfg.bundle_size);
        while pool.len() < cfg.bundle_size {
            let before = pool.len();
            for &cls in &order {
                if pool.len() == cfg.bundle_size {
                    break;
                }
                if let Some(item) = by_class[cls].pop() {
                    pool.push(item);
                }
            }
            if pool.len() == before {
                break;
            }
        }
        for &item in &pool {
            z_full.insert(b as u32, item)?;
        }
        bundle_items.push(pool);
    }

    // User-bundle interactions, biased toward each user's own theme.
    let mut x = InteractionMatrix::new(n_users, n_bundles);
    let target_per_user = ((cfg.user_bundle_density * n_bundles as f64).round() as usize).max(1);
    let mut interacted: Vec<Vec<u32>> = Vec::with_capacity(n_users);
    for u in 0..n_users {
        let own_theme = rng.gen_range(0..cfg.n_themes);
        let total_weight = cfg.theme_affinity + (cfg.n_themes - 1) as f64;
        let mut chosen: Vec<u32> = Vec::with_capacity(target_per_user);
        let mut attempts = 0usize;
        while chosen.len() < target_per_user && attempts < 50 * target_per_user {
            attempts += 1;
            let roll: f64 = rng.gen_range(0.0..total_weight);
            let theme = if roll < cfg.theme_affinity {
                own_theme
            } else {
                // Map the remaining mass uniformly over the other themes.
                let other = (roll - cfg.theme_affinity).floor() as usize;
                (own_theme + 1 + other) % cfg.n_themes
            };
            let b = (theme * cfg.bundles_per_theme + rng.gen_range(0..cfg.bundles_per_theme)) as u32;
            if !chosen.contains(&b) {
                chosen.push(b);
                x.insert(u as u32, b)?;
            }
        }
        interacted.push(chosen);
    }

    // User-item interactions: the training-visible items of interacted bundles
    // plus uniform noise. Held-back affiliation subsets stay out of the
    // behaviour data, so items that only surface at positive variability
    // levels really are new to the trained model.
    let partition = pinned_partition(cfg, &z_full, &bundle_items, &bank)?;
    let visible = crate::data::z_train_val(&partition);
    let mut y = InteractionMatrix::new(n_users, n_items);
    let noise_per_user = (cfg.ui_noise_rate * n_items as f64).round() as usize;
    for u in 0..n_users {
        for &b in &interacted[u] {
            for item in visible.row(b) {
                y.insert(u as u32, item)?;
            }
        }
        for _ in 0..noise_per_user {
            y.insert(u as u32, rng.gen_range(0..n_items) as u32)?;
        }
    }

    let [x_train, x_val, x_test] =
        split_user_bundle(&x, cfg.split_ratios, bank.derive(labels::SPLIT))?;
    let dataset = Dataset::new(x_train, x_val, x_test, y, z_full)?;
    Ok((dataset, partition))
}

/// Partition the affiliations evenly while forcing one edge per bundle into
/// the first subset, so the lowest variability level still leaves every bundle
/// with at least one item.
fn pinned_partition(
    cfg: &SyntheticConfig,
    z_full: &InteractionMatrix,
    bundle_items: &[Vec<u32>],
    bank: &SeedBank,
) -> Result<AffiliationPartition> {
    let mut rng = bank.rng(labels::PARTITION);
    let k = cfg.partition_subsets;

    // Subset membership follows the item: within its theme pool, an item's
    // class is its ring position modulo k, and an affiliation edge lands in
    // its item's class. Hiding a subset therefore hides the same items in
    // every bundle at once, the way a catalogue-wide assortment change would,
    // instead of trimming each bundle independently — and because the bundle
    // draw stratifies over the same classes, each removal level shrinks all
    // bundles by a near-equal share.
    let class = |item: u32| (item as usize % cfg.items_per_theme) % k;

    let mut subsets: Vec<InteractionMatrix> = (0..k)
        .map(|_| InteractionMatrix::new(z_full.n_rows(), z_full.n_cols()))
        .collect();
    for (b, items) in bundle_items.iter().enumerate() {
        // One edge per bundle stays in the first subset so no bundle empties
        // at the deepest removal level; prefer an item already classed there.
        let pin = items
            .iter()
            .copied()
            .find(|&i| class(i) == 0)
            .unwrap_or_else(|| items[rng.gen_range(0..items.len())]);
        for &i in items {
            let cls = if i == pin { 0 } else { class(i) };
            subsets[cls].insert(b as u32, i)?;
        }
    }
    AffiliationPartition::from_subsets(subsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::compose_z_test;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n_themes: 3,
            items_per_theme: 20,
            bundles_per_theme: 5,
            bundle_size: 10,
            n_users: 30,
            user_bundle_density: 0.2,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn shapes_match_the_config() {
        let cfg = small();
        let (data, partition) = synth_planted_dataset(&cfg, 1).unwrap();
        assert_eq!(data.n_users(), 30);
        assert_eq!(data.n_bundles(), 15);
        assert_eq!(data.n_items(), 60);
        assert_eq!(partition.k(), 10);
        assert_eq!(partition.union_all(), data.z_full);
        assert_eq!(data.z_full.len(), 15 * 10);
    }

    #[test]
    fn bundles_stay_within_their_theme_pool() {
        let cfg = small();
        let (data, _) = synth_planted_dataset(&cfg, 7).unwrap();
        for (b, i) in data.z_full.iter() {
            let theme = cfg.bundle_theme(b as usize);
            let pool = (theme * cfg.items_per_theme) as u32..((theme + 1) * cfg.items_per_theme) as u32;
            assert!(pool.contains(&i), "bundle {b} holds off-theme item {i}");
        }
    }

    #[test]
    fn every_bundle_keeps_an_item_at_every_level() {
        let cfg = small();
        let (data, partition) = synth_planted_dataset(&cfg, 3).unwrap();
        for rho in -4..=5 {
            let z = compose_z_test(&partition, rho).unwrap();
            for b in 0..data.n_bundles() as u32 {
                assert!(!z.row(b).is_empty(), "bundle {b} empty at level {rho}");
            }
        }
    }

    #[test]
    fn same_seed_reproduces_everything() {
        let cfg = small();
        let (d1, p1) = synth_planted_dataset(&cfg, 11).unwrap();
        let (d2, p2) = synth_planted_dataset(&cfg, 11).unwrap();
        assert_eq!(d1.x_train, d2.x_train);
        assert_eq!(d1.y, d2.y);
        assert_eq!(d1.z_full, d2.z_full);
        assert_eq!(p1, p2);
    }

    #[test]
    fn oversized_bundles_are_rejected() {
        let cfg = SyntheticConfig {
            bundle_size: 50,
            items_per_theme: 40,
            ..SyntheticConfig::default()
        };
        assert!(synth_planted_dataset(&cfg, 0).is_err());
    }

    #[test]
    fn zero_counts_are_rejected() {
        let cfg = SyntheticConfig {
            n_users: 0,
            ..SyntheticConfig::default()
        };
        assert!(synth_planted_dataset(&cfg, 0).is_err());
    }
}
