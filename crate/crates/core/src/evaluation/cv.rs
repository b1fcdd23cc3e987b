use std::collections::BTreeMap;

use rayon::prelude::*;

use super::auc::{RiskRow, RiskTable};
use crate::error::{Error, Result};
use crate::lmm::SubjectRecord;
use crate::methods::{fit_methods, FittedMethod, Method, Score};

/// Fold layout for cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Folds {
    /// Every subject is its own fold.
    LeaveOneOut,
    /// K folds assigned by hashing the subject id with the seed; an approximation of
    /// leave-one-out for large cohorts.
    KFold { k: usize, seed: u64 },
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// K-fold index of a subject id; depends only on (id, k, seed).
pub fn fold_of(id: &str, k: usize, seed: u64) -> usize {
    let mut x = fnv1a(id.as_bytes()) ^ seed.rotate_left(17);
    x = (x ^ (x >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    (x % k as u64) as usize
}

/// Held-out index sets, each sorted, in a layout that depends on ids, not on input order.
fn fold_sets(data: &[SubjectRecord], folds: Folds) -> Result<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].id.cmp(&data[b].id));
    if order.windows(2).any(|w| data[w[0]].id == data[w[1]].id) {
        return Err(Error::InvalidData("subject ids must be unique for cross-validation".into()));
    }
    Ok(match folds {
        Folds::LeaveOneOut => order.into_iter().map(|i| vec![i]).collect(),
        Folds::KFold { k, seed } => {
            if k < 2 {
                return Err(Error::InvalidArgument(format!("k-fold needs k >= 2, got {k}")));
            }
            let mut sets = vec![Vec::new(); k];
            for i in order {
                sets[fold_of(&data[i].id, k, seed)].push(i);
            }
            sets.retain(|s| !s.is_empty());
            sets
        }
    })
}

/// Train on everything outside each fold and score the fold with `fit_score(train,
/// held_out)`. Rows come back sorted by id; failed folds are counted in `excluded`.
pub fn cross_validate<F>(data: &[SubjectRecord], folds: Folds, fit_score: F) -> Result<RiskTable>
where
    F: Fn(&[SubjectRecord], &[SubjectRecord]) -> Result<Vec<Score>> + Sync,
{
    let mut tables = cross_validate_many(data, folds, |train, held| {
        fit_score(train, held).map(|s| vec![s])
    }, 1)?;
    Ok(tables.remove(0))
}

/// (training, held-out) subjects of one fold. Training order is canonical (by id) so
/// results do not depend on input order.
fn split_fold(data: &[SubjectRecord], held_idx: &[usize]) -> (Vec<SubjectRecord>, Vec<SubjectRecord>) {
    let mut mask = vec![false; data.len()];
    for &i in held_idx {
        mask[i] = true;
    }
    let mut train_idx: Vec<usize> = (0..data.len()).filter(|&i| !mask[i]).collect();
    train_idx.sort_by(|&a, &b| data[a].id.cmp(&data[b].id));
    let train = train_idx.iter().map(|&i| data[i].clone()).collect();
    let held = held_idx.iter().map(|&i| data[i].clone()).collect();
    (train, held)
}

/// Cross-validation producing `m` score columns per fold.
fn cross_validate_many<F>(data: &[SubjectRecord], folds: Folds, fit_score: F, m: usize) -> Result<Vec<RiskTable>>
where
    F: Fn(&[SubjectRecord], &[SubjectRecord]) -> Result<Vec<Vec<Score>>> + Sync,
{
    if data.len() < 3 {
        return Err(Error::InvalidData(format!("cross-validation needs >= 3 subjects, got {}", data.len())));
    }
    let sets = fold_sets(data, folds)?;
    let results: Vec<(Vec<usize>, Result<Vec<Vec<Score>>>)> = sets
        .into_par_iter()
        .map(|held_idx| {
            let (train, held) = split_fold(data, &held_idx);
            let r = fit_score(&train, &held);
            (held_idx, r)
        })
        .collect();
    let mut tables = vec![RiskTable::default(); m];
    for (held_idx, r) in results {
        for (col, table) in tables.iter_mut().enumerate() {
            match r.as_ref().ok().and_then(|v| v.get(col)).filter(|s| s.len() == held_idx.len()) {
                Some(scores) => {
                    for (&i, s) in held_idx.iter().zip(scores) {
                        let sub = &data[i];
                        if s.log_odds.is_nan() {
                            table.excluded += 1;
                            continue;
                        }
                        table.rows.push(RiskRow {
                            id: sub.id.clone(),
                            risk: s.risk,
                            log_odds: s.log_odds,
                            gap: sub.gap,
                            event: sub.event,
                        });
                    }
                }
                None => {
                    if let Err(e) = &r {
                        log::warn!("fold of {} subjects failed: {e}", held_idx.len());
                    }
                    table.excluded += held_idx.len();
                }
            }
        }
    }
    for t in &mut tables {
        t.rows.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(tables)
}

/// One fold's held-out subjects and the method fits trained without them.
#[derive(Debug)]
pub struct FoldFit {
    pub held_out: Vec<SubjectRecord>,
    pub fits: BTreeMap<Method, Result<FittedMethod>>,
}

/// Fit every method on each fold's training set and keep the fits, in fold order.
pub fn cv_method_fits(data: &[SubjectRecord], methods: &[Method], folds: Folds) -> Result<Vec<FoldFit>> {
    if data.len() < 3 {
        return Err(Error::InvalidData(format!("cross-validation needs >= 3 subjects, got {}", data.len())));
    }
    let sets = fold_sets(data, folds)?;
    sets.into_par_iter()
        .map(|held_idx| {
            let (train, held_out) = split_fold(data, &held_idx);
            Ok(FoldFit {
                held_out,
                fits: fit_methods(methods, &train)?,
            })
        })
        .collect()
}

/// Out-of-fold risk table of one method from kept fold fits.
pub fn table_from_fold_fits(folds: &[FoldFit], method: Method) -> RiskTable {
    let mut table = RiskTable::default();
    for f in folds {
        let Some(Ok(fit)) = f.fits.get(&method) else {
            table.excluded += f.held_out.len();
            continue;
        };
        for s in &f.held_out {
            match fit.score(s) {
                Ok(sc) if !sc.log_odds.is_nan() => table.rows.push(RiskRow {
                    id: s.id.clone(),
                    risk: sc.risk,
                    log_odds: sc.log_odds,
                    gap: s.gap,
                    event: s.event,
                }),
                _ => table.excluded += 1,
            }
        }
    }
    table.rows.sort_by(|a, b| a.id.cmp(&b.id));
    table
}

/// Cross-validated risk tables for several methods at once, sharing component fits
/// within each fold. A method that fails to fit in a fold excludes that fold's subjects
/// from its own table only.
pub fn cv_method_tables(
    data: &[SubjectRecord],
    methods: &[Method],
    folds: Folds,
) -> Result<BTreeMap<Method, RiskTable>> {
    let tables = cross_validate_many(
        data,
        folds,
        |train, held| {
            let fits = fit_methods(methods, train)?;
            Ok(methods
                .iter()
                .map(|m| match &fits[m] {
                    Ok(f) => held
                        .iter()
                        .map(|s| f.score(s).unwrap_or(Score { risk: f64::NAN, log_odds: f64::NAN }))
                        .collect(),
                    Err(_) => Vec::new(),
                })
                .collect())
        },
        methods.len(),
    )?;
    Ok(methods.iter().copied().zip(tables).collect())
}
