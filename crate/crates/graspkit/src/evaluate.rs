//! Top-1 evaluation of prediction files against annotated folds.

use std::collections::HashMap;
use std::fmt::Write as _;

use graspkit_core::eval::{
    score_image, AccuracyReport, ImageEval, Outcome, SWEEP_ANGLE, SWEEP_JACCARD,
};
use graspkit_core::{EvalConfig, GraspCandidate};
use rayon::prelude::*;

use crate::dataset::Annotation;
use crate::formats::{content_lines, fmt6, FormatError};

/// Pairs each annotated image with its predictions; images without a line
/// get no candidates.
pub fn assemble(
    annotations: &[Annotation],
    predictions: Vec<(String, Vec<GraspCandidate>)>,
) -> Result<Vec<ImageEval>, FormatError> {
    let index: HashMap<&str, usize> = annotations
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id.as_str(), i))
        .collect();
    let mut cands: Vec<Vec<GraspCandidate>> = vec![Vec::new(); annotations.len()];
    for (id, c) in predictions {
        let i = *index.get(id.as_str()).ok_or_else(|| {
            FormatError::Content(format!("prediction for unknown image id {id:?}"))
        })?;
        cands[i] = c;
    }
    Ok(annotations
        .iter()
        .zip(cands)
        .map(|(a, candidates)| ImageEval {
            id: a.id.clone(),
            gts: a.grasps.clone(),
            candidates,
        })
        .collect())
}

/// `fold id` lines with 1-based folds; every id must appear exactly once.
pub fn parse_fold_file(text: &str, ids: &[String]) -> Result<Vec<Vec<usize>>, FormatError> {
    let index: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut fold_of: Vec<Option<usize>> = vec![None; ids.len()];
    let bad = |line, message: String| FormatError::Line { line, message };
    for (n, l) in content_lines(text) {
        let f: Vec<&str> = l.split_ascii_whitespace().collect();
        let [fold, id] = f[..] else {
            return Err(bad(n, format!("expected 2 fields, found {}", f.len())));
        };
        let fold: usize = fold
            .parse()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| bad(n, format!("bad fold {fold:?}")))?;
        let &i = index
            .get(id)
            .ok_or_else(|| bad(n, format!("unknown image id {id:?}")))?;
        if fold_of[i].replace(fold - 1).is_some() {
            return Err(bad(n, format!("image id {id:?} listed twice")));
        }
    }
    if let Some(i) = fold_of.iter().position(Option::is_none) {
        return Err(FormatError::Content(format!(
            "image id {:?} has no fold",
            ids[i]
        )));
    }
    let count = fold_of.iter().flatten().max().map_or(0, |m| m + 1);
    let mut folds = vec![Vec::new(); count];
    for (i, f) in fold_of.into_iter().enumerate() {
        folds[f.expect("checked above")].push(i);
    }
    Ok(folds)
}

pub fn fold_lines(folds: &[Vec<usize>], ids: &[String]) -> String {
    let mut s = String::new();
    for (f, members) in folds.iter().enumerate() {
        for &i in members {
            let _ = writeln!(s, "{} {}", f + 1, ids[i]);
        }
    }
    s
}

pub fn group(images: &[ImageEval], folds: &[Vec<usize>]) -> Vec<Vec<ImageEval>> {
    folds
        .iter()
        .map(|f| f.iter().map(|&i| images[i].clone()).collect())
        .collect()
}

/// Scores every image on the rayon pool; outcomes keep fold order.
pub fn score_folds(folds: &[Vec<ImageEval>], cfg: &EvalConfig) -> Vec<Vec<Outcome>> {
    folds
        .iter()
        .map(|imgs| imgs.par_iter().map(|i| score_image(i, cfg)).collect())
        .collect()
}

pub fn report(folds: &[Vec<ImageEval>], cfg: EvalConfig) -> (AccuracyReport, Vec<Vec<Outcome>>) {
    let outcomes = score_folds(folds, &cfg);
    (
        AccuracyReport::from_outcomes(folds, &outcomes, cfg),
        outcomes,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTables {
    pub top1: AccuracyReport,
    pub jaccard_sweep: Vec<AccuracyReport>,
    pub angle_sweep: Vec<AccuracyReport>,
    pub outcomes: Vec<Vec<Outcome>>,
}

/// Top-1 accuracy at `cfg`, the Jaccard sweep at `cfg`'s angle threshold
/// and the angle sweep at `cfg`'s Jaccard threshold.
pub fn tables(folds: &[Vec<ImageEval>], cfg: EvalConfig) -> EvalTables {
    let (top1, outcomes) = report(folds, cfg);
    let jaccard_sweep = SWEEP_JACCARD
        .iter()
        .map(|&j| {
            report(
                folds,
                EvalConfig {
                    jaccard_threshold: j,
                    ..cfg
                },
            )
            .0
        })
        .collect();
    let angle_sweep = SWEEP_ANGLE
        .iter()
        .map(|&a| {
            report(
                folds,
                EvalConfig {
                    angle_threshold: a,
                    ..cfg
                },
            )
            .0
        })
        .collect();
    EvalTables {
        top1,
        jaccard_sweep,
        angle_sweep,
        outcomes,
    }
}

pub fn csv(t: &EvalTables, split: &str) -> String {
    let folds = t.top1.per_fold.len();
    let mut s = String::from("table,split,jaccard_threshold,angle_threshold");
    for f in 1..=folds {
        let _ = write!(s, ",fold_{f}");
    }
    s.push_str(",mean\n");
    let mut row = |name: &str, r: &AccuracyReport| {
        let _ = write!(
            s,
            "{name},{split},{},{}",
            fmt6(r.config.jaccard_threshold),
            fmt6(r.config.angle_threshold)
        );
        for a in &r.per_fold {
            let _ = write!(s, ",{}", fmt6(*a));
        }
        let _ = writeln!(s, ",{}", fmt6(r.mean));
    };
    row("top1", &t.top1);
    for r in &t.jaccard_sweep {
        row("jaccard_sweep", r);
    }
    for r in &t.angle_sweep {
        row("angle_sweep", r);
    }
    s
}

/// `fold,id,outcome` per image at the top-1 setting.
pub fn per_image_csv(folds: &[Vec<ImageEval>], outcomes: &[Vec<Outcome>]) -> String {
    let mut s = String::from("fold,id,outcome\n");
    for (f, (imgs, outs)) in folds.iter().zip(outcomes).enumerate() {
        for (img, o) in imgs.iter().zip(outs) {
            let name = match o {
                Outcome::Correct => "correct",
                Outcome::Wrong => "wrong",
                Outcome::Missing => "missing",
            };
            let _ = writeln!(s, "{},{},{name}", f + 1, img.id);
        }
    }
    s
}
