use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::nemenyi::{friedman_nemenyi, Alpha, FriedmanNemenyi};
use super::{harmonic_rank, rank_criterion, ScoreError};
use crate::datagen::Task;
use crate::symbolic::EquivalenceVerdict;

/// Criterion names in record order.
pub const CRITERIA: [&str; 3] = ["r2", "simplicity", "task"];

/// One (algorithm, dataset, run) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub algorithm: String,
    pub dataset: String,
    pub task: Option<Task>,
    pub run: usize,
    /// `-inf` (JSON `null`) for failed runs and undefined models.
    #[serde(with = "crate::serde_f64")]
    pub r2_test: f64,
    #[serde(with = "crate::serde_f64")]
    pub simplicity: f64,
    pub task_score: Option<f64>,
    pub exact: Option<EquivalenceVerdict>,
    /// Infix form of the scored model.
    pub model: Option<String>,
    /// Why the run failed, if it did.
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl ScoreRecord {
    fn criterion(&self, c: usize) -> Option<f64> {
        match c {
            0 => Some(self.r2_test),
            1 => Some(self.simplicity),
            _ => self.task_score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AggregationOrder {
    /// Median over runs per criterion, then rank, then harmonic mean.
    #[default]
    MedianThenRank,
    /// Rank and harmonic-mean every run, then take the median over runs.
    RankThenMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AggregateOptions {
    pub order: AggregationOrder,
    pub alpha: Alpha,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hole {
    pub algorithm: String,
    pub dataset: String,
    pub run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRanks {
    pub dataset: String,
    /// Criteria present on this dataset.
    pub criteria: Vec<String>,
    /// `medians[c][a]`: median over runs of criterion `c` for algorithm `a`.
    #[serde(serialize_with = "ser_matrix", deserialize_with = "de_matrix")]
    pub medians: Vec<Vec<f64>>,
    /// `ranks[c][a]`, best = number of algorithms.
    pub ranks: Vec<Vec<f64>>,
    /// Harmonic aggregate per algorithm.
    pub aggregate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    /// Aggregate rank on every dataset, in report order.
    pub aggregate: Vec<f64>,
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    pub order: AggregationOrder,
    pub per_dataset: Vec<DatasetRanks>,
    pub summary: Vec<AlgorithmSummary>,
    pub winner: String,
    /// Absent with fewer than two datasets or more than twenty algorithms.
    pub friedman: Option<FriedmanNemenyi>,
}

fn ser_matrix<S: serde::Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    let conv: Vec<Vec<Option<f64>>> = m
        .iter()
        .map(|r| r.iter().map(|v| v.is_finite().then_some(*v)).collect())
        .collect();
    conv.serialize(s)
}

fn de_matrix<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
    let raw: Vec<Vec<Option<f64>>> = Deserialize::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect())
        .collect())
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    for v in values.iter_mut() {
        if v.is_nan() {
            *v = f64::NEG_INFINITY;
        }
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        let (a, b) = (values[n / 2 - 1], values[n / 2]);
        if a == b {
            a
        } else {
            a / 2.0 + b / 2.0
        }
    }
}

/// Ranks every criterion across algorithms and returns per-criterion ranks
/// and the harmonic aggregate. `values[c][a]`.
fn rank_block(values: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let ranks: Vec<Vec<f64>> = values.iter().map(|v| rank_criterion(v, true)).collect();
    let k = values.first().map_or(0, Vec::len);
    let agg = (0..k)
        .map(|a| {
            let r: Vec<f64> = ranks.iter().map(|rc| rc[a]).collect();
            harmonic_rank(&r).expect("ranks are at least 1")
        })
        .collect();
    (ranks, agg)
}

/// Aggregates a track's records into per-dataset harmonic ranks and an
/// overall ranking.
///
/// Every algorithm must have a record for every run index that appears on a
/// dataset; otherwise the holes are reported. Missing task scores and
/// non-finite values count as the worst value of their criterion.
pub fn aggregate_track(records: &[ScoreRecord], opts: AggregateOptions) -> Result<RankReport, ScoreError> {
    let algorithms: Vec<String> = records
        .iter()
        .map(|r| r.algorithm.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut cells: BTreeMap<&str, BTreeMap<usize, BTreeMap<&str, &ScoreRecord>>> = BTreeMap::new();
    for r in records {
        cells
            .entry(r.dataset.as_str())
            .or_default()
            .entry(r.run)
            .or_default()
            .entry(r.algorithm.as_str())
            .or_insert(r);
    }

    let mut holes = Vec::new();
    for (ds, runs) in &cells {
        for (run, by_alg) in runs {
            for a in &algorithms {
                if !by_alg.contains_key(a.as_str()) {
                    holes.push(Hole {
                        algorithm: a.clone(),
                        dataset: ds.to_string(),
                        run: *run,
                    });
                }
            }
        }
    }
    if !holes.is_empty() || records.is_empty() {
        return Err(ScoreError::MissingRecords(holes));
    }

    let k = algorithms.len();
    let mut per_dataset = Vec::with_capacity(cells.len());
    for (ds, runs) in &cells {
        let present: Vec<usize> = (0..CRITERIA.len())
            .filter(|&c| runs.values().flat_map(|m| m.values()).any(|r| r.criterion(c).is_some()))
            .collect();
        let value = |r: &ScoreRecord, c: usize| r.criterion(c).unwrap_or(f64::NEG_INFINITY);
        let medians: Vec<Vec<f64>> = present
            .iter()
            .map(|&c| {
                algorithms
                    .iter()
                    .map(|a| {
                        let mut v: Vec<f64> = runs.values().map(|m| value(m[a.as_str()], c)).collect();
                        median(&mut v)
                    })
                    .collect()
            })
            .collect();
        let (ranks, aggregate) = match opts.order {
            AggregationOrder::MedianThenRank => rank_block(&medians),
            AggregationOrder::RankThenMedian => {
                let per_run: Vec<(Vec<Vec<f64>>, Vec<f64>)> = runs
                    .values()
                    .map(|m| {
                        let vals: Vec<Vec<f64>> = present
                            .iter()
                            .map(|&c| algorithms.iter().map(|a| value(m[a.as_str()], c)).collect())
                            .collect();
                        rank_block(&vals)
                    })
                    .collect();
                let ranks = (0..present.len())
                    .map(|c| {
                        (0..k)
                            .map(|a| median(&mut per_run.iter().map(|(r, _)| r[c][a]).collect::<Vec<_>>()))
                            .collect()
                    })
                    .collect();
                let agg = (0..k)
                    .map(|a| median(&mut per_run.iter().map(|(_, g)| g[a]).collect::<Vec<_>>()))
                    .collect();
                (ranks, agg)
            }
        };
        per_dataset.push(DatasetRanks {
            dataset: ds.to_string(),
            criteria: present.iter().map(|&c| CRITERIA[c].to_string()).collect(),
            medians,
            ranks,
            aggregate,
        });
    }

    let summary: Vec<AlgorithmSummary> = algorithms
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let aggregate: Vec<f64> = per_dataset.iter().map(|d| d.aggregate[a]).collect();
            let mean = aggregate.iter().sum::<f64>() / aggregate.len() as f64;
            AlgorithmSummary {
                algorithm: name.clone(),
                median: median(&mut aggregate.clone()),
                mean,
                aggregate,
            }
        })
        .collect();
    let winner = summary
        .iter()
        .reduce(|best, s| {
            if (s.median, s.mean) > (best.median, best.mean) {
                s
            } else {
                best
            }
        })
        .map(|s| s.algorithm.clone())
        .expect("at least one algorithm");

    let rank_matrix: Vec<Vec<f64>> = per_dataset.iter().map(|d| rank_criterion(&d.aggregate, true)).collect();
    let friedman = friedman_nemenyi(&rank_matrix, opts.alpha).ok();

    Ok(RankReport {
        algorithms,
        datasets: per_dataset.iter().map(|d| d.dataset.clone()).collect(),
        order: opts.order,
        per_dataset,
        summary,
        winner,
        friedman,
    })
}

impl RankReport {
    pub fn summary_for(&self, algorithm: &str) -> Option<&AlgorithmSummary> {
        self.summary.iter().find(|s| s.algorithm == algorithm)
    }

    /// Mean Friedman ranks with the critical difference, one row per
    /// algorithm, for external plotting.
    pub fn cd_csv(&self) -> String {
        let mut out = String::from("algorithm,mean_rank,critical_difference,alpha\n");
        if let Some(f) = &self.friedman {
            for (a, r) in self.algorithms.iter().zip(&f.mean_ranks) {
                let _ = writeln!(out, "{a},{r},{},{}", f.critical_difference, f.alpha.value());
            }
        }
        out
    }

    /// Summary table in Markdown, best median first.
    pub fn to_markdown(&self, title: &str) -> String {
        let mut rows: Vec<&AlgorithmSummary> = self.summary.iter().collect();
        rows.sort_by(|a, b| {
            b.median
                .total_cmp(&a.median)
                .then(b.mean.total_cmp(&a.mean))
                .then(a.algorithm.cmp(&b.algorithm))
        });
        let mut out = format!("## {title}\n\n| algorithm | median rank | mean rank |\n|---|---:|---:|\n");
        for s in rows {
            let _ = writeln!(out, "| {} | {:.4} | {:.4} |", s.algorithm, s.median, s.mean);
        }
        let _ = writeln!(out, "\nWinner: **{}** ({} datasets).", self.winner, self.datasets.len());
        if let Some(f) = &self.friedman {
            let _ = writeln!(
                out,
                "Friedman chi2 = {:.4}; Nemenyi CD = {:.4} at alpha = {}.",
                f.statistic,
                f.critical_difference,
                f.alpha.value()
            );
        }
        out
    }
}

/// Per-record CSV.
pub fn records_csv(records: &[ScoreRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "dataset",
        "task",
        "run",
        "r2_test",
        "simplicity",
        "task_score",
        "exact",
        "constant",
        "model",
        "failure",
        "wall_seconds",
    ])
    .expect("in-memory write");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.algorithm.clone(),
            r.dataset.clone(),
            r.task.map(|t| t.name().to_string()).unwrap_or_default(),
            r.run.to_string(),
            r.r2_test.to_string(),
            r.simplicity.to_string(),
            opt(r.task_score),
            r.exact.as_ref().map(|v| v.is_exact().to_string()).unwrap_or_default(),
            opt(r.exact.as_ref().and_then(|v| v.constant)),
            r.model.clone().unwrap_or_default(),
            r.failure.clone().unwrap_or_default(),
            opt(r.wall_seconds),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(alg: &str, ds: &str, run: usize, r2: f64, simp: f64, task: Option<f64>) -> ScoreRecord {
        ScoreRecord {
            algorithm: alg.into(),
            dataset: ds.into(),
            task: None,
            run,
            r2_test: r2,
            simplicity: simp,
            task_score: task,
            exact: None,
            model: None,
            failure: None,
            wall_seconds: None,
        }
    }

    #[test]
    fn single_algorithm_has_rank_one() {
        let r = aggregate_track(&[rec("a", "d", 0, 0.5, -1.0, Some(1.0))], Default::default()).unwrap();
        assert_eq!(r.summary[0].median, 1.0);
        assert_eq!(r.winner, "a");
        assert!(r.friedman.is_none());
    }

    #[test]
    fn two_algorithm_converse_profiles() {
        // a is best on r2 and simplicity, b on the task score
        let records = [
            rec("a", "d", 0, 0.9, -1.0, Some(0.1)),
            rec("b", "d", 0, 0.5, -2.0, Some(0.9)),
        ];
        let r = aggregate_track(&records, Default::default()).unwrap();
        let agg = &r.per_dataset[0].aggregate;
        assert!((agg[0] - 1.5).abs() < 1e-12);
        assert!((agg[1] - 1.2).abs() < 1e-12);
        assert_eq!(r.winner, "a");
    }

    #[test]
    fn dominant_algorithm_scores_k_everywhere() {
        let mut records = vec![];
        for ds in ["d1", "d2", "d3"] {
            for run in 0..3 {
                records.push(rec("best", ds, run, 0.99, -0.5, Some(1.0)));
                records.push(rec("mid", ds, run, 0.5, -1.0, Some(0.5)));
                records.push(rec("low", ds, run, 0.1, -2.0, Some(0.0)));
            }
        }
        for order in [AggregationOrder::MedianThenRank, AggregationOrder::RankThenMedian] {
            let r = aggregate_track(
                &records,
                AggregateOptions {
                    order,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(r.summary_for("best").unwrap().median, 3.0);
            assert_eq!(r.winner, "best");
            let f = r.friedman.as_ref().unwrap();
            assert!((f.statistic - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn holes_are_listed() {
        let records = [
            rec("a", "d", 0, 0.9, -1.0, None),
            rec("a", "d", 1, 0.9, -1.0, None),
            rec("b", "d", 0, 0.5, -2.0, None),
        ];
        match aggregate_track(&records, Default::default()) {
            Err(ScoreError::MissingRecords(h)) => assert_eq!(
                h,
                vec![Hole {
                    algorithm: "b".into(),
                    dataset: "d".into(),
                    run: 1
                }]
            ),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn medians_and_failures() {
        let records = [
            rec("a", "d", 0, 0.9, -1.0, None),
            rec("a", "d", 1, f64::NEG_INFINITY, -1.0, None),
            rec("a", "d", 2, 0.8, -1.0, None),
            rec("b", "d", 0, 0.7, -1.0, None),
            rec("b", "d", 1, 0.7, -1.0, None),
            rec("b", "d", 2, 0.7, -1.0, None),
        ];
        let r = aggregate_track(&records, Default::default()).unwrap();
        assert_eq!(r.per_dataset[0].criteria, vec!["r2", "simplicity"]);
        assert_eq!(r.per_dataset[0].medians[0], vec![0.8, 0.7]);
        assert_eq!(r.per_dataset[0].ranks[1], vec![1.5, 1.5]);
    }

    #[test]
    fn report_json_round_trip_with_infinite_medians() {
        let records = [
            rec("a", "d", 0, f64::NEG_INFINITY, -1.0, None),
            rec("b", "d", 0, 0.7, -1.0, None),
        ];
        let r = aggregate_track(&records, Default::default()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: RankReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(r.to_markdown("t").contains("| b |"));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = records_csv(&[rec("a", "d", 0, 0.5, -1.0, Some(0.25))]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("a,d,,0,0.5,-1,0.25"));
    }
}
