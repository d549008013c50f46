use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;

use super::metrics::RunMetrics;
use super::scenario::{ScenarioConfig, ScenarioKind, WalkerKind, STEER_TARGETS_DEG};
use super::sim::run_scenario;
use super::HarnessError;

/// One entry of a batch, in submission order.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRun {
    pub index: usize,
    pub name: String,
    pub kind: ScenarioKind,
    pub walker: WalkerKind,
    pub seed: u64,
    /// Metrics of a completed or timed-out run; the error text otherwise.
    pub result: Result<RunMetrics, String>,
    pub timed_out: bool,
}

/// Aggregate over the runs of one (kind, walker) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KindSummary {
    pub kind: ScenarioKind,
    pub walker: WalkerKind,
    pub runs: usize,
    pub failures: usize,
    pub arrived: usize,
    /// Runs that arrived without any contact.
    pub clean_arrivals: usize,
    pub completion_mean: f64,
    pub completion_std: f64,
    pub path_length_mean: f64,
    pub lateral_rmse_mean: f64,
    /// Root mean square of the final heading errors, degrees.
    pub heading_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub runs: Vec<BatchRun>,
}

/// One copy of `cfg` per seed, in seed order.
pub fn seed_sweep(cfg: &ScenarioConfig, seeds: Range<u64>) -> Vec<ScenarioConfig> {
    seeds.map(|s| cfg.with_seed(s)).collect()
}

/// Parses `A..B` (B excluded) or `A..=B`.
pub fn parse_seed_range(s: &str) -> Option<Range<u64>> {
    let (a, b) = s.split_once("..")?;
    let start: u64 = a.trim().parse().ok()?;
    let end = match b.strip_prefix('=') {
        Some(b) => b.trim().parse::<u64>().ok()?.checked_add(1)?,
        None => b.trim().parse().ok()?,
    };
    (start < end).then_some(start..end)
}

/// The steering suite: every target angle of [`STEER_TARGETS_DEG`] for each
/// seed, starting from `base`.
pub fn steer_suite(base: &ScenarioConfig, seeds: Range<u64>) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for deg in STEER_TARGETS_DEG {
        for seed in seeds.clone() {
            let mut c = base.with_seed(seed);
            c.target_angle = deg.to_radians();
            out.push(c);
        }
    }
    out
}

/// Runs every configuration, in parallel, and collects the results in input
/// order. A failing run is recorded and does not stop the others.
pub fn run_batch(cfgs: &[ScenarioConfig]) -> BatchReport {
    let runs = cfgs
        .par_iter()
        .enumerate()
        .map(|(index, cfg)| {
            let (result, timed_out) = match run_scenario(cfg) {
                Ok(o) => (Ok(o.metrics), false),
                Err(HarnessError::TimedOut(o)) => (Ok(o.metrics), true),
                Err(e) => (Err(e.to_string()), false),
            };
            BatchRun { index, name: cfg.name.clone(), kind: cfg.kind, walker: cfg.walker, seed: cfg.seed, result, timed_out }
        })
        .collect();
    BatchReport { runs }
}

/// Sums in sorted order so the result does not depend on run order.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

impl BatchReport {
    /// Per-(kind, walker) aggregates, independent of run order.
    pub fn summaries(&self) -> Vec<KindSummary> {
        let mut groups: BTreeMap<(&str, &str), Vec<&BatchRun>> = BTreeMap::new();
        let mut ordered: Vec<&BatchRun> = self.runs.iter().collect();
        ordered.sort_by_key(|r| r.index);
        for r in ordered {
            groups.entry((r.kind.name(), r.walker.name())).or_default().push(r);
        }
        groups
            .into_values()
            .map(|runs| {
                let ok: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.result.as_ref().ok()).collect();
                let completion: Vec<f64> = ok.iter().map(|m| m.completion_time).collect();
                let (completion_mean, completion_std) = mean_std(&completion);
                let (path_length_mean, _) = mean_std(&ok.iter().map(|m| m.path_length).collect::<Vec<_>>());
                let (lateral_rmse_mean, _) = mean_std(&ok.iter().map(|m| m.lateral_rmse).collect::<Vec<_>>());
                let heading_rmse = if ok.is_empty() {
                    f64::NAN
                } else {
                    let mut sq: Vec<f64> = ok.iter().map(|m| m.final_heading_error.powi(2)).collect();
                    sq.sort_by(f64::total_cmp);
                    (sq.iter().sum::<f64>() / ok.len() as f64).sqrt()
                };
                KindSummary {
                    kind: runs[0].kind,
                    walker: runs[0].walker,
                    runs: runs.len(),
                    failures: runs.len() - ok.len(),
                    arrived: ok.iter().filter(|m| m.arrived).count(),
                    clean_arrivals: ok.iter().filter(|m| m.arrived && m.collision_count == 0).count(),
                    completion_mean,
                    completion_std,
                    path_length_mean,
                    lateral_rmse_mean,
                    heading_rmse,
                }
            })
            .collect()
    }

    fn metrics_of(&self, kind: ScenarioKind, walker: WalkerKind) -> BTreeMap<u64, &RunMetrics> {
        self.runs
            .iter()
            .filter(|r| r.kind == kind && r.walker == walker)
            .filter_map(|r| r.result.as_ref().ok().map(|m| (r.seed, m)))
            .collect()
    }

    /// Pass/fail of the per-kind acceptance rules the batch can check.
    /// Comparisons against a baseline are made only when the batch holds
    /// that baseline's runs. Returns `(rule, passed, detail)`.
    pub fn acceptance(&self) -> Vec<(String, bool, String)> {
        let mut out = Vec::new();
        let summaries = self.summaries();
        let find = |kind, walker| summaries.iter().find(|s| s.kind == kind && s.walker == walker);
        // Seeds where guided beats `walker` under `better`, out of the seeds both ran.
        let per_seed = |kind, walker, better: &dyn Fn(&RunMetrics, &RunMetrics) -> bool| {
            let g = self.metrics_of(kind, WalkerKind::Guided);
            let b = self.metrics_of(kind, walker);
            let shared: Vec<u64> = g.keys().filter(|k| b.contains_key(k)).copied().collect();
            let wins = shared.iter().filter(|k| better(g[*k], b[*k])).count();
            (wins, shared.len())
        };
        for s in summaries.iter().filter(|s| s.walker == WalkerKind::Guided) {
            let ok_runs: Vec<&RunMetrics> = self
                .runs
                .iter()
                .filter(|r| r.kind == s.kind && r.walker == s.walker)
                .filter_map(|r| r.result.as_ref().ok())
                .collect();
            match s.kind {
                ScenarioKind::Turn90 => {
                    let worst = ok_runs.iter().map(|m| m.completion_time).fold(0.0, f64::max);
                    let pass = s.failures == 0 && s.arrived == s.runs && worst <= 2.5;
                    out.push(("turn90 within 2.5 s".into(), pass, format!("{}/{} arrived, slowest {worst:.2} s", s.arrived, s.runs)));
                }
                ScenarioKind::SteerToAngle => {
                    let pass = s.failures == 0 && s.heading_rmse <= 2.5;
                    out.push(("steer-to-angle rmse <= 2.5 deg".into(), pass, format!("rmse {:.3} deg over {} runs", s.heading_rmse, s.runs)));
                    if let Some(a) = find(s.kind, WalkerKind::AudioOnly) {
                        out.push((
                            "steer-to-angle rmse below audio-only".into(),
                            s.heading_rmse < a.heading_rmse,
                            format!("{:.3} vs {:.3} deg", s.heading_rmse, a.heading_rmse),
                        ));
                    }
                }
                ScenarioKind::StraightWalk => {
                    if find(s.kind, WalkerKind::AudioOnly).is_some() {
                        let (wins, n) = per_seed(s.kind, WalkerKind::AudioOnly, &|g, b| g.lateral_rmse < b.lateral_rmse);
                        out.push((
                            "straight walk lateral rmse below audio-only on every seed".into(),
                            n > 0 && wins == n,
                            format!("{wins}/{n} seeds"),
                        ));
                    }
                }
                ScenarioKind::ObstacleCourse => {
                    let frac = s.clean_arrivals as f64 / s.runs as f64;
                    out.push((
                        "obstacle course >= 95% contact-free arrivals".into(),
                        frac >= 0.95,
                        format!("{}/{} ({:.1}%)", s.clean_arrivals, s.runs, 100.0 * frac),
                    ));
                }
                ScenarioKind::Hallway | ScenarioKind::OutdoorRoute => {
                    out.push((
                        format!("{} arrivals", s.kind.name()),
                        s.failures == 0 && s.arrived == s.runs,
                        format!("{}/{} arrived", s.arrived, s.runs),
                    ));
                    if let Some(c) = find(s.kind, WalkerKind::CaneContact) {
                        let (wins, n) = per_seed(s.kind, WalkerKind::CaneContact, &|g, b| {
                            g.arrived && b.arrived && g.completion_time < b.completion_time
                        });
                        out.push((
                            format!("{} faster than cane on every seed", s.kind.name()),
                            n > 0 && wins == n,
                            format!(
                                "{wins}/{n} seeds, mean {:.1} s vs {:.1} s ({:.1}% less time)",
                                s.completion_mean,
                                c.completion_mean,
                                100.0 * (1.0 - s.completion_mean / c.completion_mean)
                            ),
                        ));
                    }
                }
            }
        }
        out
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from(
            "index,name,kind,walker,seed,status,completion_time,path_length,lateral_rmse,final_heading_error,collision_count,steps,arrived\n",
        );
        for r in &self.runs {
            match &r.result {
                Ok(m) => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        r.index,
                        r.name,
                        r.kind.name(),
                        r.walker.name(),
                        r.seed,
                        if r.timed_out { "timeout" } else { "ok" },
                        m.completion_time,
                        m.path_length,
                        m.lateral_rmse,
                        m.final_heading_error,
                        m.collision_count,
                        m.steps,
                        m.arrived
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},error: {},,,,,,,false",
                        r.index,
                        r.name,
                        r.kind.name(),
                        r.walker.name(),
                        r.seed,
                        e.replace(',', ";")
                    );
                }
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "kind,walker,runs,failures,arrived,clean_arrivals,completion_mean,completion_std,path_length_mean,lateral_rmse_mean,heading_rmse\n",
        );
        for k in self.summaries() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
                k.kind.name(),
                k.walker.name(),
                k.runs,
                k.failures,
                k.arrived,
                k.clean_arrivals,
                k.completion_mean,
                k.completion_std,
                k.path_length_mean,
                k.lateral_rmse_mean,
                k.heading_rmse
            );
        }
        s
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<15} {:<12} {:>5} {:>5} {:>8} {:>8} {:>10} {:>9} {:>9}\n",
            "kind", "walker", "runs", "fail", "arrived", "clean", "time_s", "lat_rmse", "hdg_rmse"
        );
        for k in self.summaries() {
            let _ = writeln!(
                s,
                "{:<15} {:<12} {:>5} {:>5} {:>8} {:>8} {:>10} {:>9.3} {:>9.3}",
                k.kind.name(),
                k.walker.name(),
                k.runs,
                k.failures,
                k.arrived,
                k.clean_arrivals,
                format!("{:.2}±{:.2}", k.completion_mean, k.completion_std),
                k.lateral_rmse_mean,
                k.heading_rmse
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..10"), Some(0..10));
        assert_eq!(parse_seed_range("3..=5"), Some(3..6));
        assert_eq!(parse_seed_range("5..5"), None);
        assert_eq!(parse_seed_range("a..3"), None);
        assert_eq!(parse_seed_range("7"), None);
    }

    #[test]
    fn failing_run_does_not_abort_batch() {
        let good = ScenarioConfig::default_for(ScenarioKind::Turn90);
        let mut bad = good.clone();
        bad.duration_cap = -1.0;
        let report = run_batch(&[bad, good]);
        assert!(report.runs[0].result.is_err());
        assert!(report.runs[1].result.as_ref().unwrap().arrived);
        assert_eq!(report.summaries()[0].failures, 1);
    }
}
