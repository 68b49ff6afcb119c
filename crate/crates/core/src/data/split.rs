use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("cannot split an empty dataset")]
    Empty,
    #[error("{instances} object instances cannot fill {folds} folds")]
    TooFewInstances { instances: usize, folds: usize },
    #[error("split mode must be image-wise or object-wise")]
    UnknownMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    ImageWise,
    ObjectWise,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::ImageWise => "image-wise",
            SplitMode::ObjectWise => "object-wise",
        }
    }
}

impl core::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts `image`, `image-wise`, `object` and `object-wise`.
impl core::str::FromStr for SplitMode {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "image" | "image-wise" => Ok(SplitMode::ImageWise),
            "object" | "object-wise" => Ok(SplitMode::ObjectWise),
            _ => Err(SplitError::UnknownMode),
        }
    }
}

/// Five disjoint folds of sample indices covering the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl SplitPlan {
    /// Fold holding a sample index.
    pub fn fold_of(&self, sample: usize) -> Option<usize> {
        self.folds.iter().position(|f| f.contains(&sample))
    }
}

/// `instances[i]` is the object instance of sample `i`.
///
/// Image-wise plans shuffle samples and deal them round-robin. Object-wise
/// plans shuffle instances, then give each instance (largest first, stable
/// over the shuffle) to the currently smallest fold.
pub fn make_splits(
    instances: &[String],
    mode: SplitMode,
    seed: u64,
) -> Result<SplitPlan, SplitError> {
    if instances.is_empty() {
        return Err(SplitError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); FOLDS];
    match mode {
        SplitMode::ImageWise => {
            let mut order: Vec<usize> = (0..instances.len()).collect();
            order.shuffle(&mut rng);
            for (pos, idx) in order.into_iter().enumerate() {
                folds[pos % FOLDS].push(idx);
            }
        }
        SplitMode::ObjectWise => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, inst) in instances.iter().enumerate() {
                groups.entry(inst.as_str()).or_default().push(i);
            }
            if groups.len() < FOLDS {
                return Err(SplitError::TooFewInstances {
                    instances: groups.len(),
                    folds: FOLDS,
                });
            }
            let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
            groups.shuffle(&mut rng);
            groups.sort_by_key(|g| core::cmp::Reverse(g.len()));
            for g in groups {
                let target = (0..FOLDS).min_by_key(|&f| (folds[f].len(), f)).unwrap_or(0);
                folds[target].extend(g);
            }
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(SplitPlan { mode, seed, folds })
}
