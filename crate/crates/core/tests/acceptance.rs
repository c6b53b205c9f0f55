//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one `PASS`/`FAIL`/`SKIP` line; any FAIL exits non-zero.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;

use debtcast::dropcol::{drop_column_importance, exhaustive_search};
use debtcast::eval::{evaluate_all, mae, make_folds, r_squared, EvalError, Grouping};
use debtcast::features::{build_matrix, DesignMatrix, DistributionPolicy, TargetKind};
use debtcast::ingest::parse_snapshot_csv;
use debtcast::lifecycle::{
    build_timelines, debt_series, simulate_events, EventKind, Impact, SimulationParams, TDItemEvent,
};
use debtcast::matrix::Matrix;
use debtcast::regress::{fit, LearnedParameters, RegressorConfig, RegressorKind};
use debtcast::rng::rng_from_seed;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Friedman #1 response on the first five columns (fewer if `p < 5`); the
/// remaining columns are noise.
fn friedman(n: usize, p: usize, noise: f64, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        let z: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
        y.push(
            10.0 * (std::f64::consts::PI * row[0] * row[1]).sin()
                + 20.0 * (row[2] - 0.5).powi(2)
                + 10.0 * row[3]
                + 5.0 * row.get(4).copied().unwrap_or(0.0)
                + noise * z,
        );
        data.extend(row);
    }
    (Matrix::new(n, p, data).unwrap(), y)
}

fn oracle_mae(a: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += if a[i] > p[i] { a[i] - p[i] } else { p[i] - a[i] };
    }
    s / a.len() as f64
}

fn oracle_r2(a: &[f64], p: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mut mean = 0.0;
    for v in a {
        mean += v / n;
    }
    let (mut res, mut tot) = (0.0, 0.0);
    for i in 0..a.len() {
        res += (a[i] - p[i]) * (a[i] - p[i]);
        tot += (a[i] - mean) * (a[i] - mean);
    }
    1.0 - res / tot
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(1);
    for trial in 0..100 {
        let n = rng.gen_range(2..=1000);
        let scale = 10f64.powi(rng.gen_range(-3..=6));
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        let p: Vec<f64> = a.iter().map(|v| v + rng.gen_range(-0.5..0.5) * scale).collect();
        let (m, o) = (mae(&a, &p).unwrap(), oracle_mae(&a, &p));
        ensure(close(m, o, 1e-9), || format!("trial {trial}: mae {m} vs oracle {o}"))?;
        let (r, o) = (r_squared(&a, &p).unwrap(), oracle_r2(&a, &p));
        ensure(close(r, o, 1e-9), || format!("trial {trial}: r2 {r} vs oracle {o}"))?;
    }
    let a = [3.0, -0.5, 2.0, 7.0];
    let p = [2.5, 0.0, 2.0, 8.0];
    ensure(mae(&a, &a).unwrap() == 0.0, || "mae of identical vectors is not 0".into())?;
    ensure(r_squared(&a, &a).unwrap() == 1.0, || "perfect r2 is not 1".into())?;
    let mean = a.iter().sum::<f64>() / 4.0;
    ensure(r_squared(&a, &[mean; 4]).unwrap() == 0.0, || "mean predictor r2 is not 0".into())?;
    ensure(mae(&a, &p).unwrap() == 0.5, || "worked mae example".into())?;
    ensure(close(r_squared(&a, &p).unwrap(), 0.948_608_137_044_967_9, 1e-15), || {
        "worked r2 example".into()
    })?;
    ensure(
        matches!(r_squared(&[2.0; 3], &[1.0, 2.0, 3.0]), Err(EvalError::UndefinedScore(_))),
        || "constant actuals must give UndefinedScore".into(),
    )?;
    Ok("100 random pairs within 1e-9 of the oracle; exact cases hold".into())
}

fn criterion_2() -> Outcome {
    // (a) noiseless linear data
    let mut rng = rng_from_seed(2);
    let rows: Vec<[f64; 2]> = (0..50).map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(0.0..20.0)]).collect();
    let y: Vec<f64> = rows.iter().map(|r| 3.5 * r[0] - 2.0 * r[1] + 10.0).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let lr = fit(&RegressorConfig::new(RegressorKind::LinearRegression, 0), &x, &y, None).unwrap();
    let LearnedParameters::Linear(m) = lr.parameters() else {
        return Err("linear regression did not learn linear parameters".into());
    };
    let recovered = [m.intercept - 10.0, m.coefficients[0] - 3.5, m.coefficients[1] + 2.0];
    ensure(recovered.iter().all(|d| d.abs() < 1e-6), || format!("(a) off by {recovered:?}"))?;

    // (b) distinct rows
    let (x, y) = friedman(120, 5, 1.0, 3);
    let dt = fit(&RegressorConfig::new(RegressorKind::DecisionTree, 0), &x, &y, None).unwrap();
    let train_mae = mae(&y, &dt.predict(&x).unwrap()).unwrap();
    ensure(train_mae == 0.0, || format!("(b) unbounded tree training MAE {train_mae}"))?;

    // (c) staged boosting
    let gb = fit(&RegressorConfig::new(RegressorKind::GradientBoost, 0), &x, &y, None).unwrap();
    let LearnedParameters::GradientBoost(g) = gb.parameters() else {
        return Err("gradient boost did not learn boosting parameters".into());
    };
    let mut prev = f64::INFINITY;
    for s in 0..=g.n_stages() {
        let m = mae(&y, &g.predict_staged(&x, s)).unwrap();
        ensure(m <= prev + 1e-9, || format!("(c) stage {s}: MAE {m} > {prev}"))?;
        prev = m;
    }

    // (d) one-tree ensembles
    let p = x.cols() as i64;
    for (kind, mode) in [
        (RegressorKind::RandomForest, "best"),
        (RegressorKind::ExtraTrees, "random"),
        (RegressorKind::Bagging, "best"),
    ] {
        for seed in [0, 7, 99] {
            let lone = RegressorConfig::new(RegressorKind::DecisionTree, seed).with("threshold_mode", mode);
            let ens = RegressorConfig::new(kind, seed)
                .with("n_estimators", 1i64)
                .with("bootstrap", false)
                .with("max_features", p);
            let a = fit(&lone, &x, &y, None).unwrap().predict(&x).unwrap();
            let b = fit(&ens, &x, &y, None).unwrap().predict(&x).unwrap();
            ensure(a == b, || format!("(d) {kind} seed {seed} differs from its lone tree"))?;
        }
    }

    // (e) fixed benchmark, seeded splits
    let (x, y) = friedman(300, 10, 1.0, 4);
    let mut wins = 0;
    for trial in 0..20u64 {
        let plan = make_folds(300, 3, trial, Grouping::RowShuffle, None).unwrap();
        let (train, test) = (plan.train_rows(0), plan.test_rows(0));
        let xtr = x.select_rows(&train);
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xte = x.select_rows(&test);
        let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let score = |kind| {
            let m = fit(&RegressorConfig::new(kind, trial), &xtr, &ytr, None).unwrap();
            mae(&yte, &m.predict(&xte).unwrap()).unwrap()
        };
        wins += usize::from(score(RegressorKind::RandomForest) <= score(RegressorKind::DecisionTree));
    }
    ensure(wins >= 16, || format!("(e) random forest won only {wins}/20 trials"))?;
    Ok(format!("(a)-(d) hold; random forest beat the lone tree in {wins}/20 trials"))
}

fn criterion_3() -> Outcome {
    let (x, y) = friedman(80, 4, 0.5, 5);
    let matrix = DesignMatrix::from_xy(x, y).unwrap();
    let plan = make_folds(80, 5, 11, Grouping::RowShuffle, None).unwrap();
    let config = RegressorConfig::new(RegressorKind::ExtraTrees, 3).with("n_estimators", 20i64);
    let report = drop_column_importance(&config, &matrix, &plan).map_err(|e| e.to_string())?;
    let subsets = exhaustive_search(&config, &matrix, &plan, 12).map_err(|e| e.to_string())?;
    ensure(subsets.len() == 15, || format!("{} subsets, expected 15", subsets.len()))?;
    let names = matrix.feature_names();
    let full = &subsets[names];
    ensure(
        full.mae.to_bits() == report.baseline.mae.to_bits() && full.r2.to_bits() == report.baseline.r2.to_bits(),
        || "baseline differs from the full subset".into(),
    )?;
    for e in &report.entries {
        let key: Vec<String> = names.iter().filter(|n| **n != e.feature).cloned().collect();
        let s = &subsets[&key];
        ensure(
            s.mae.to_bits() == e.without.mae.to_bits() && s.r2.to_bits() == e.without.r2.to_bits(),
            || format!("subset without {} differs", e.feature),
        )?;
    }
    Ok("baseline and all 4 drop-one subsets match exhaustive search bit-for-bit".into())
}

fn snapshot_matrix() -> Result<DesignMatrix, String> {
    let bytes = std::fs::read(fixture("snapshots.csv")).map_err(|e| e.to_string())?;
    let snapshots = parse_snapshot_csv(&bytes).map_err(|e| e.to_string())?;
    build_matrix(&snapshots, TargetKind::Maintainability, DistributionPolicy::WeightedSum).map_err(|e| e.to_string())
}

/// The snapshot fixture plus one uniform column. The 0.05 bound was fixed
/// before the run; observed ratios on sibling seeds were 0.008 to 0.035.
fn criterion_4() -> Outcome {
    let base = snapshot_matrix()?;
    let (n, p) = (base.n_rows(), base.n_features());
    let mut rng = rng_from_seed(123);
    let mut data = Vec::with_capacity(n * (p + 1));
    for r in 0..n {
        data.extend_from_slice(base.rows().row(r));
        data.push(rng.gen::<f64>());
    }
    let mut names = base.feature_names().to_vec();
    names.push("noise".into());
    let x = Matrix::new(n, p + 1, data).unwrap();
    let matrix = DesignMatrix::new(names, x, base.target().to_vec(), base.target_kind(), base.groups().to_vec())
        .map_err(|e| e.to_string())?;
    let plan = make_folds(n, 10, 42, Grouping::RowShuffle, None).unwrap();
    let config = RegressorConfig::new(RegressorKind::ExtraTrees, 42);
    let report = drop_column_importance(&config, &matrix, &plan).map_err(|e| e.to_string())?;
    let noise = report.entries.last().unwrap();
    let ratio = noise.mae_delta.abs() / report.baseline.mae;
    ensure(ratio < 0.05, || format!("|mae_delta| / baseline = {ratio:.4}"))?;
    let top = report.entries.iter().map(|e| e.mae_delta).fold(f64::NEG_INFINITY, f64::max);
    Ok(format!("noise |mae_delta| / baseline = {ratio:.4} (largest feature delta / baseline = {:.4})", top / report.baseline.mae))
}

fn run_evaluate(dir: &Path, threads: &str) -> Result<(Vec<u8>, Vec<u8>), String> {
    std::fs::copy(fixture("snapshots.csv"), dir.join("snapshots.csv")).map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_debtcast"))
        .current_dir(dir)
        .args(["--threads", threads, "evaluate", "--data", "snapshots.csv", "--target", "maintainability"])
        .args(["--folds", "5", "--seed", "9", "--out", "report.md"])
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("evaluate exited with {status}"))?;
    let read = |name: &str| std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"));
    Ok((read("report.md")?, read("report.md.manifest.json")?))
}

fn criterion_5() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let first = run_evaluate(dirs[0].path(), "1")?;
    let again = run_evaluate(dirs[1].path(), "1")?;
    let parallel = run_evaluate(dirs[2].path(), "4")?;
    ensure(first == again, || "repeated sequential runs differ".into())?;
    ensure(first == parallel, || "1-thread and 4-thread runs differ".into())?;
    Ok(format!(
        "3 runs byte-identical ({} report bytes, {} manifest bytes)",
        first.0.len(),
        first.1.len()
    ))
}

/// Replays events in order; an item is open at `t` iff its latest event at
/// or before `t` opens an episode, and then owes that event's cost.
fn brute_force_debt(events: &[TDItemEvent], t: DateTime<Utc>) -> f64 {
    let mut open = std::collections::BTreeMap::new();
    for e in events.iter().filter(|e| e.at <= t) {
        if e.kind == EventKind::Removed {
            open.remove(&e.item_id);
        } else {
            open.insert(e.item_id.clone(), e.remediation_minutes.unwrap());
        }
    }
    open.values().sum()
}

fn criterion_6() -> Outcome {
    let params = SimulationParams::default();
    let mut samples = 0;
    for seed in 0..50u64 {
        let events = simulate_events(25, 400, seed, &params).map_err(|e| e.to_string())?;
        let timelines = build_timelines(&events).map_err(|e| e.to_string())?;
        // Half-day step samples both exact event days and instants between them.
        let end = params.origin + Duration::days(400);
        let series = debt_series(&timelines, params.origin, end, Duration::hours(12)).map_err(|e| e.to_string())?;
        for (t, got) in series.instants.iter().zip(&series.open_debt) {
            let want = brute_force_debt(&events, *t);
            ensure(*got == want, || format!("seed {seed} at {t}: {got} vs {want}"))?;
            samples += 1;
        }
    }

    let at = |d| Utc.with_ymd_and_hms(2021, 1, d, 0, 0, 0).unwrap();
    let event = |kind, day, cost| TDItemEvent {
        item_id: "item".into(),
        kind,
        at: at(day),
        remediation_minutes: cost,
        impact: Impact::default(),
    };
    let timelines = build_timelines(&[
        event(EventKind::Introduced, 1, Some(30.0)),
        event(EventKind::Removed, 5, None),
        event(EventKind::Reintroduced, 9, Some(45.0)),
    ])
    .map_err(|e| e.to_string())?;
    let eps = &timelines[0].episodes;
    ensure(eps.len() == 2, || format!("X/Y/Z gave {} episodes", eps.len()))?;
    ensure(eps[0].closed_at == Some(at(5)) && eps[1].closed_at.is_none(), || {
        "X/Y/Z: first episode must close at Y and the second stay open".into()
    })?;
    Ok(format!("{samples} samples over 50 runs match exactly; X/Y/Z gives 2 episodes, second open"))
}

fn criterion_7() -> Outcome {
    let matrix = snapshot_matrix()?;
    let plan = make_folds(matrix.n_rows(), 5, 42, Grouping::RowShuffle, None).unwrap();
    let report = evaluate_all(&RegressorConfig::all_defaults(42), &matrix, &plan).map_err(|e| e.to_string())?;
    let md = report.to_markdown();
    let lines: Vec<&str> = md.lines().collect();
    ensure(lines.len() == 12, || format!("{} lines", lines.len()))?;
    ensure(lines[0].starts_with("### ") && lines[1].is_empty(), || "caption block".into())?;
    ensure(lines[2] == "| Regressor | MAE | MAE_std | R2 | R2_std |", || format!("header `{}`", lines[2]))?;
    for (line, kind) in lines[4..].iter().zip(RegressorKind::ALL) {
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        ensure(cells.len() == 5 && cells[0] == kind.display_name(), || format!("row `{line}`"))?;
        for c in &cells[1..] {
            let three_decimals = c.split_once('.').is_some_and(|(_, frac)| frac.len() == 3);
            ensure(c.parse::<f64>().is_ok() && three_decimals, || format!("cell `{c}` in `{line}`"))?;
        }
    }
    Ok("caption, header and 8 rows in default order with 3-decimal cells".into())
}

/// Advisory only: needs a local export of the public dataset.
fn criterion_8() -> Option<Outcome> {
    let path = std::env::var_os("DEBTCAST_TDD_CSV")?;
    let run = || -> Outcome {
        let snapshots = parse_snapshot_csv(&std::fs::read(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let matrix = build_matrix(&snapshots, TargetKind::Maintainability, DistributionPolicy::WeightedSum)
            .map_err(|e| e.to_string())?;
        let plan = make_folds(matrix.n_rows(), 10, 42, Grouping::RowShuffle, None).unwrap();
        let report = evaluate_all(&RegressorConfig::all_defaults(42), &matrix, &plan).map_err(|e| e.to_string())?;
        let weak: Vec<String> = report
            .rows
            .iter()
            .filter(|r| r.kind.is_tree_ensemble() && r.r2 <= 0.9)
            .map(|r| format!("{} R2 {:.3}", r.kind, r.r2))
            .collect();
        let last = report.rows.iter().min_by(|a, b| a.r2.total_cmp(&b.r2)).unwrap().kind;
        ensure(weak.is_empty(), || format!("ensembles at or below 0.9: {}", weak.join(", ")))?;
        ensure(last == RegressorKind::Svm, || format!("{last} ranks last, not svm"))?;
        Ok("tree ensembles R2 > 0.9 and svm ranks last".into())
    };
    Some(run())
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("formula oracles", criterion_1),
        ("regressor sanity", criterion_2),
        ("drop-column/exhaustive equivalence", criterion_3),
        ("irrelevant-feature bound", criterion_4),
        ("determinism", criterion_5),
        ("lifecycle conservation", criterion_6),
        ("report fidelity", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    match criterion_8() {
        None => println!("SKIP 8 advisory reproduction: set DEBTCAST_TDD_CSV to a snapshot CSV export to run"),
        Some(Ok(detail)) => println!("PASS 8 advisory reproduction: {detail}"),
        Some(Err(detail)) => println!("FAIL 8 advisory reproduction (not fatal): {detail}"),
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
