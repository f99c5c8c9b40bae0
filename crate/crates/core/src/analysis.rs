//! Pairwise behaviour statistics over playthrough logs.
//!
//! Per-tick quantities are averaged within a playthrough first and then
//! across playthroughs, so long and short games weigh the same.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::GameId;
use crate::shadowing::PlaythroughLog;

/// Uniform smoothing mass mixed into both distributions before KL.
pub const KL_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("probability vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no playthroughs to analyse")]
    Empty,
    #[error("missing pairs for {game}: {}", format_pairs(.pairs))]
    MissingPairs {
        game: GameId,
        pairs: Vec<(String, String)>,
    },
    #[error("log for {game} found while building the {expected} matrix")]
    WrongGame { game: GameId, expected: GameId },
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(m, s)| format!("({m}, {s})"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// Half-sum symmetric Kullback-Leibler divergence (natural log) after
/// mixing `KL_EPSILON` of the uniform distribution into each side.
pub fn sym_kl(p: &[f64], q: &[f64]) -> Result<f64, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::LengthMismatch(p.len(), q.len()));
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    let u = KL_EPSILON / p.len() as f64;
    let smooth = |v: &[f64]| v.iter().map(|&x| (1.0 - KL_EPSILON) * x + u).collect::<Vec<_>>();
    let (ps, qs) = (smooth(p), smooth(q));
    if ps == qs {
        return Ok(0.0);
    }
    Ok(0.5 * (kl(&ps, &qs) + kl(&qs, &ps)))
}

/// Kendall's tau-b. `None` when either side is constant or lengths differ.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut untied_x, mut untied_y) = (0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = (x[i] - x[j]).partial_cmp(&0.0)? as i64;
            let dy = (y[i] - y[j]).partial_cmp(&0.0)? as i64;
            if dx != 0 {
                untied_x += 1;
            }
            if dy != 0 {
                untied_y += 1;
            }
            match dx * dy {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    if untied_x == 0 || untied_y == 0 {
        return None;
    }
    Some((concordant - discordant) as f64 / ((untied_x as f64) * (untied_y as f64)).sqrt())
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean over playthroughs of the per-playthrough mean of `per_tick`.
/// Playthroughs without ticks are skipped.
fn nested_mean<F>(logs: &[&PlaythroughLog], per_tick: F) -> Result<f64, AnalysisError>
where
    F: Fn(&crate::shadowing::TickLog) -> f64,
{
    mean(logs.iter().filter_map(|l| mean(l.ticks.iter().map(&per_tick)))).ok_or(AnalysisError::Empty)
}

/// Percentage of ticks on which both agents recommend the same action.
pub fn agreement_percentage(logs: &[&PlaythroughLog]) -> Result<f64, AnalysisError> {
    nested_mean(logs, |t| f64::from(u8::from(t.main.a_star == t.shadow.a_star))).map(|x| 100.0 * x)
}

/// Mean symmetric KL between the two consideration-probability vectors.
pub fn decision_similarity(logs: &[&PlaythroughLog]) -> Result<f64, AnalysisError> {
    let mut per_log = Vec::with_capacity(logs.len());
    for l in logs {
        let mut kls = Vec::with_capacity(l.ticks.len());
        for t in &l.ticks {
            kls.push(sym_kl(&t.main.p, &t.shadow.p)?);
        }
        per_log.extend(mean(kls));
    }
    mean(per_log).ok_or(AnalysisError::Empty)
}

/// Mean Kendall tau-b between the two value vectors over ticks where both
/// are fully defined and non-constant; `None` if no tick qualifies.
pub fn value_rank_similarity(logs: &[&PlaythroughLog]) -> Option<f64> {
    let per_log = logs.iter().filter_map(|l| {
        mean(l.ticks.iter().filter_map(|t| {
            if t.main.v.iter().chain(&t.shadow.v).any(|x| x.is_nan()) {
                return None;
            }
            kendall_tau_b(&t.main.v, &t.shadow.v)
        }))
    });
    mean(per_log)
}

/// Mean conv per tick index over the playthroughs still running at that
/// tick, read from the main agent's records.
pub fn conv_timeseries(logs: &[&PlaythroughLog]) -> Vec<f64> {
    let longest = logs.iter().map(|l| l.ticks.len()).max().unwrap_or(0);
    (0..longest)
        .map(|i| mean(logs.iter().filter_map(|l| l.ticks.get(i)).map(|t| t.main.conv)).unwrap_or(0.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub ap: f64,
    pub ds: f64,
    pub mean_conv_main: f64,
    pub mean_conv_shadow: f64,
    pub mean_b_main: f64,
    pub mean_b_shadow: f64,
    pub value_rank_corr: Option<f64>,
    pub win_rate_main: f64,
    pub n_ticks: usize,
    pub n_playthroughs: usize,
}

pub fn pair_stats(logs: &[&PlaythroughLog]) -> Result<PairStats, AnalysisError> {
    Ok(PairStats {
        ap: agreement_percentage(logs)?,
        ds: decision_similarity(logs)?,
        mean_conv_main: nested_mean(logs, |t| t.main.conv)?,
        mean_conv_shadow: nested_mean(logs, |t| t.shadow.conv)?,
        mean_b_main: nested_mean(logs, |t| t.main.b)?,
        mean_b_shadow: nested_mean(logs, |t| t.shadow.b)?,
        value_rank_corr: value_rank_similarity(logs),
        win_rate_main: win_rate(logs).ok_or(AnalysisError::Empty)?,
        n_ticks: logs.iter().map(|l| l.ticks.len()).sum(),
        n_playthroughs: logs.len(),
    })
}

/// Percentage of playthroughs the main agent won.
pub fn win_rate(logs: &[&PlaythroughLog]) -> Option<f64> {
    mean(logs.iter().map(|l| if l.outcome.win { 100.0 } else { 0.0 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Agreement percentage at or above which agents count as similar.
    pub ap: f64,
    /// Decision similarity at or below which agents count as similar.
    pub ds: f64,
    /// Largest conv difference still treated as equal.
    pub conv_tolerance: f64,
    /// Largest budget-ratio difference still treated as equal.
    pub b_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ap: 80.0,
            ds: 0.1,
            conv_tolerance: 0.05,
            b_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preferred {
    Main,
    Shadow,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub preferred: Preferred,
    /// Shadow minus main; positive favours main for lower-is-better stats.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueStage {
    pub tau: Option<f64>,
    /// Whether the two agents rank actions the same way on average.
    pub concordant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub similar: bool,
    pub ap: f64,
    pub ds: f64,
    pub convergence: Option<StageResult>,
    pub value_rank: Option<ValueStage>,
    /// Only reached when convergence is a tie.
    pub efficiency: Option<StageResult>,
}

fn lower_is_better(main: f64, shadow: f64, tolerance: f64) -> StageResult {
    let margin = shadow - main;
    let preferred = if margin.abs() <= tolerance {
        Preferred::Neither
    } else if margin > 0.0 {
        Preferred::Main
    } else {
        Preferred::Shadow
    };
    StageResult { preferred, margin }
}

/// Walks the staged comparison: similarity gate, then convergence and
/// value ranking, then efficiency when convergence does not separate them.
pub fn decision_graph_verdict(stats: &PairStats, th: &Thresholds) -> Verdict {
    let similar = stats.ap >= th.ap || stats.ds <= th.ds;
    let mut verdict = Verdict {
        similar,
        ap: stats.ap,
        ds: stats.ds,
        convergence: None,
        value_rank: None,
        efficiency: None,
    };
    if !similar {
        return verdict;
    }
    let conv = lower_is_better(stats.mean_conv_main, stats.mean_conv_shadow, th.conv_tolerance);
    verdict.convergence = Some(conv);
    verdict.value_rank = Some(ValueStage {
        tau: stats.value_rank_corr,
        concordant: stats.value_rank_corr.map(|t| t > 0.0),
    });
    if conv.preferred == Preferred::Neither {
        verdict.efficiency = Some(lower_is_better(stats.mean_b_main, stats.mean_b_shadow, th.b_tolerance));
    }
    verdict
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub label: String,
    /// Win percentage as main agent over every log in the matrix.
    pub win_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub game: GameId,
    pub roster: Vec<RosterEntry>,
    /// `cells[main][shadow]`.
    pub cells: Vec<Vec<PairStats>>,
}

/// Labels in order of first appearance, main before shadow within a log.
pub fn infer_roster(logs: &[PlaythroughLog]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for l in logs {
        for label in [&l.header.main.label, &l.header.shadow.label] {
            if !out.contains(label) {
                out.push(label.clone());
            }
        }
    }
    out
}

pub fn build_matrix(logs: &[PlaythroughLog], game: GameId) -> Result<ComparisonMatrix, AnalysisError> {
    build_matrix_for(logs, game, &infer_roster(logs))
}

pub fn build_matrix_for(
    logs: &[PlaythroughLog],
    game: GameId,
    roster: &[String],
) -> Result<ComparisonMatrix, AnalysisError> {
    if let Some(l) = logs.iter().find(|l| l.header.game != game) {
        return Err(AnalysisError::WrongGame {
            game: l.header.game,
            expected: game,
        });
    }
    let mut by_pair: HashMap<(&str, &str), Vec<&PlaythroughLog>> = HashMap::new();
    for l in logs {
        by_pair
            .entry((l.header.main.label.as_str(), l.header.shadow.label.as_str()))
            .or_default()
            .push(l);
    }
    let missing: Vec<(String, String)> = roster
        .iter()
        .flat_map(|m| roster.iter().map(move |s| (m, s)))
        .filter(|(m, s)| !by_pair.contains_key(&(m.as_str(), s.as_str())))
        .map(|(m, s)| (m.clone(), s.clone()))
        .collect();
    if !missing.is_empty() || roster.is_empty() {
        return Err(AnalysisError::MissingPairs { game, pairs: missing });
    }

    let mut cells = Vec::with_capacity(roster.len());
    let mut entries = Vec::with_capacity(roster.len());
    for m in roster {
        let mut row = Vec::with_capacity(roster.len());
        let mut as_main = Vec::new();
        for s in roster {
            let pair = &by_pair[&(m.as_str(), s.as_str())];
            row.push(pair_stats(pair)?);
            as_main.extend(pair.iter().copied());
        }
        entries.push(RosterEntry {
            label: m.clone(),
            win_rate: win_rate(&as_main).unwrap_or(0.0),
        });
        cells.push(row);
    }
    Ok(ComparisonMatrix {
        game,
        roster: entries,
        cells,
    })
}

/// Statistics exported as one CSV matrix each.
pub const MATRIX_STATS: [&str; 8] = [
    "ap",
    "ds",
    "conv_main",
    "conv_shadow",
    "b_main",
    "b_shadow",
    "value_rank",
    "win_rate",
];

fn stat_value(cell: &PairStats, stat: &str) -> Option<f64> {
    match stat {
        "ap" => Some(cell.ap),
        "ds" => Some(cell.ds),
        "conv_main" => Some(cell.mean_conv_main),
        "conv_shadow" => Some(cell.mean_conv_shadow),
        "b_main" => Some(cell.mean_b_main),
        "b_shadow" => Some(cell.mean_b_shadow),
        "value_rank" => cell.value_rank_corr,
        "win_rate" => Some(cell.win_rate_main),
        _ => None,
    }
}

/// Row label with the main agent's win percentage, e.g. `ucb [65%]`.
pub fn row_label(entry: &RosterEntry) -> String {
    format!("{} [{:.0}%]", entry.label, entry.win_rate)
}

impl ComparisonMatrix {
    pub fn size(&self) -> usize {
        self.roster.len()
    }

    /// One statistic as CSV: a header of shadow labels, then one row per
    /// main agent. Undefined values are left empty.
    pub fn to_csv(&self, stat: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = std::iter::once("main \\ shadow".to_string())
            .chain(self.roster.iter().map(|e| e.label.clone()));
        w.write_record(header).expect("writing to memory");
        for (entry, row) in self.roster.iter().zip(&self.cells) {
            let values = row
                .iter()
                .map(|c| stat_value(c, stat).map_or(String::new(), |x| format!("{x:.6}")));
            w.write_record(std::iter::once(row_label(entry)).chain(values))
                .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
    }

    pub fn verdicts(&self, th: &Thresholds) -> Vec<PairVerdict> {
        let mut out = Vec::new();
        for (m, row) in self.roster.iter().zip(&self.cells) {
            for (s, cell) in self.roster.iter().zip(row) {
                out.push(PairVerdict {
                    main: m.label.clone(),
                    shadow: s.label.clone(),
                    verdict: decision_graph_verdict(cell, th),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub main: String,
    pub shadow: String,
    pub verdict: Verdict,
}

/// `tick,mean_conv` rows.
pub fn conv_series_csv(series: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tick", "mean_conv"]).expect("writing to memory");
    for (i, c) in series.iter().enumerate() {
        w.write_record([i.to_string(), format!("{c:.6}")]).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

/// Conv series for each label, from the logs where it played main.
pub fn conv_series_by_agent(logs: &[PlaythroughLog]) -> BTreeMap<String, Vec<f64>> {
    let mut by_label: BTreeMap<String, Vec<&PlaythroughLog>> = BTreeMap::new();
    for l in logs {
        by_label.entry(l.header.main.label.clone()).or_default().push(l);
    }
    by_label
        .into_iter()
        .map(|(label, ls)| (label, conv_timeseries(&ls)))
        .collect()
}
