use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crashrisk::advisor::{
    rank_slots, write_category_csv, write_summary_csv, RankedSlot, Slot, SlotModel, SlotQuery,
    RANKING_CAVEAT,
};
use crashrisk::artifact::{load_model, save_model, sha256_hex, ModelArtifact};
use crashrisk::features::Category;
use crashrisk::forest::{write_importance_csv, write_sweep_csv};
use crashrisk::ingest::{
    build_hourly_grid, parse_crash_csv, parse_weather_csv, read_grid_csv, write_grid_csv,
    HourlyObservation, Weekday,
};
use crashrisk::pipeline::{run_forest, run_glm};
use crashrisk::synth::{crashes_from_grid, synth_dataset, write_crash_csv, write_weather_csv, Profile};
use crashrisk_service::AppState;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| {
        CliError::Core(crashrisk::Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut sink = BufWriter::new(File::create(&path)?);
    body(&mut sink)?;
    sink.flush()?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = cfg.require(&cfg.out, "--out")?;
    std::fs::create_dir_all(dir)?;
    Ok(dir)
}

/// `config.json`: the resolved configuration plus a checksum of every input.
fn write_provenance(dir: &Path, command: &str, cfg: &RunConfig, inputs: &[(&str, &Path)]) -> Result<(), CliError> {
    let mut fingerprints = serde_json::Map::new();
    for (role, path) in inputs {
        let bytes = std::fs::read(path)?;
        fingerprints.insert(
            role.to_string(),
            json!({ "path": path.display().to_string(), "sha256": sha256_hex(&bytes) }),
        );
    }
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "inputs": fingerprints,
    });
    write_json(dir, "config.json", &doc)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

struct Ingested {
    grid: Vec<HourlyObservation>,
    report: serde_json::Value,
}

fn ingest_files(cfg: &RunConfig) -> Result<Ingested, CliError> {
    let crash_path = cfg.require(&cfg.crash, "--crash")?;
    let weather_path = cfg.require(&cfg.weather, "--weather")?;
    let range = cfg.range()?;
    let crashes = parse_crash_csv(open(crash_path)?, &range, &cfg.crash_columns)?;
    let weather = parse_weather_csv(open(weather_path)?, &range, &cfg.weather_columns)?;
    let grid = build_hourly_grid(&crashes.records, &weather.records, &range)?;
    let crash_total: u64 = grid.iter().map(|o| u64::from(o.crash_count)).sum();
    let zero_hours = grid.iter().filter(|o| o.crash_count == 0).count();
    let report = json!({
        "crash": crashes.report,
        "weather": weather.report,
        "grid_rows": grid.len(),
        "crash_total": crash_total,
        "zero_filled_hours": zero_hours,
    });
    Ok(Ingested { grid, report })
}

/// Input files by role, for provenance.
type Inputs<'a> = Vec<(&'static str, &'a Path)>;

/// The grid from `--grid`, or built from `--crash` and `--weather`.
fn load_grid(cfg: &RunConfig) -> Result<(Vec<HourlyObservation>, Inputs<'_>), CliError> {
    if let Some(path) = &cfg.grid {
        return Ok((read_grid_csv(open(path)?)?, vec![("grid", path.as_path())]));
    }
    if cfg.crash.is_none() || cfg.weather.is_none() {
        return Err(CliError::Usage("need --grid, or both --crash and --weather".into()));
    }
    let grid = ingest_files(cfg)?.grid;
    Ok((
        grid,
        vec![
            ("crash", cfg.crash.as_deref().unwrap()),
            ("weather", cfg.weather.as_deref().unwrap()),
        ],
    ))
}

pub fn ingest(cfg: &RunConfig, json: bool) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let Ingested { grid, report } = ingest_files(cfg)?;
    write_file(dir, "grid.csv", |w| Ok(write_grid_csv(&grid, w)?))?;
    write_json(dir, "ingest_report.json", &report)?;
    write_provenance(
        dir,
        "ingest",
        cfg,
        &[("crash", cfg.crash.as_deref().unwrap()), ("weather", cfg.weather.as_deref().unwrap())],
    )?;
    if json {
        print_json(&report)?;
    } else {
        println!(
            "grid: {} rows, {} crashes, {} zero-count hours -> {}",
            report["grid_rows"],
            report["crash_total"],
            report["zero_filled_hours"],
            dir.join("grid.csv").display()
        );
        println!(
            "crash rows read {}, duplicates dropped {}, bad timestamps {}, out of range {}",
            report["crash"]["rows_read"],
            report["crash"]["duplicate_ids"],
            report["crash"]["bad_timestamps"],
            report["crash"]["out_of_range"]
        );
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig, json: bool) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let (grid, inputs) = load_grid(cfg)?;
    let out = run_glm(&grid, &cfg.glm_run())?;
    let sha = write_file(dir, "model.json", |w| {
        save_model(&ModelArtifact::Glm(out.artifact.clone()), w)?;
        Ok(())
    })
    .and_then(|p| Ok(sha256_hex(&std::fs::read(p)?)))?;
    write_file(dir, "summary.csv", |w| Ok(write_summary_csv(&out.summary, w)?))?;
    for (category, name) in [
        (Category::Hour, "coefficients_hour.csv"),
        (Category::Weekday, "coefficients_weekday.csv"),
        (Category::Month, "coefficients_month.csv"),
    ] {
        write_file(dir, name, |w| Ok(write_category_csv(&out.summary, category, w)?))?;
    }
    write_json(dir, "dispersion.json", &out.dispersion)?;
    write_provenance(dir, "fit", cfg, &inputs)?;

    let model = &out.artifact.model;
    let rmse = out.artifact.diagnostics.test_rmse;
    if json {
        print_json(&json!({
            "family": model.family.label(),
            "alpha": model.alpha,
            "dispersion": out.dispersion,
            "test_rmse": rmse,
            "converged": model.converged,
            "model_file_sha256": sha,
        }))?;
    } else {
        let d = &out.dispersion;
        println!(
            "dispersion: pearson chi2/dof {:.4}, auxiliary slope {:.4} (p = {:.3e}) -> {}",
            d.pearson_ratio,
            d.ct_coefficient,
            d.ct_p_value,
            if d.overdispersed { "overdispersed" } else { "no overdispersion" }
        );
        println!(
            "model: {} (alpha {:.6}), test RMSE {}, converged {}",
            model.family.label(),
            model.alpha,
            rmse.map_or("n/a".into(), |r| format!("{r:.4}")),
            model.converged
        );
        for w in &model.warnings {
            println!("warning: {w}");
        }
        println!("wrote {}", dir.display());
    }
    Ok(())
}

pub fn forest(cfg: &RunConfig, json: bool) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let (grid, inputs) = load_grid(cfg)?;
    let out = run_forest(&grid, &cfg.forest_run())?;
    write_file(dir, "forest.json", |w| {
        save_model(&ModelArtifact::Forest(out.artifact.clone()), w)?;
        Ok(())
    })?;
    write_file(dir, "sweep.csv", |w| Ok(write_sweep_csv(&out.sweep, w)?))?;
    write_file(dir, "importance.csv", |w| Ok(write_importance_csv(&out.artifact.model, w)?))?;
    write_provenance(dir, "forest", cfg, &inputs)?;
    if json {
        print_json(&json!({
            "sweep": out.sweep,
            "importance": out.artifact.model.ranked_importance(),
        }))?;
    } else {
        println!("{:>7}  {:>8}  {:>8}", "n_trees", "mae", "r2");
        for row in &out.sweep {
            let r2 = row.r2.map_or("n/a".into(), |r| format!("{r:.4}"));
            println!("{:>7}  {:>8.4}  {:>8}", row.n_trees, row.mae, r2);
        }
        if let Some((name, share)) = out.artifact.model.ranked_importance().first() {
            println!("most important feature: {name} ({share:.3})");
        }
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn parse_weekday(s: &str) -> Result<Weekday, CliError> {
    s.trim().parse().map_err(|e: crashrisk::Error| CliError::Usage(e.to_string()))
}

/// Explicit `WEEKDAY:HOUR:MONTH` slots, or the cross product of the
/// month, weekday and hour lists.
pub fn rank_slots_from(explicit: &[String], months: &[u8], weekdays: &[String], hours: &[u8]) -> Result<Vec<Slot>, CliError> {
    if !explicit.is_empty() {
        return explicit
            .iter()
            .map(|s| {
                let parts: Vec<&str> = s.split(':').collect();
                let [d, h, m] = parts[..] else {
                    return Err(CliError::Usage(format!("--slot expects WEEKDAY:HOUR:MONTH, got {s}")));
                };
                let num = |v: &str, what: &str| {
                    v.trim().parse::<u8>().map_err(|_| CliError::Usage(format!("bad {what} in --slot {s}")))
                };
                Ok(Slot {
                    weekday: parse_weekday(d)?,
                    hour: num(h, "hour")?,
                    month: num(m, "month")?,
                })
            })
            .collect();
    }
    if months.is_empty() {
        return Err(CliError::Usage("rank needs --slot or --month".into()));
    }
    let days = if weekdays.is_empty() {
        Weekday::ALL.to_vec()
    } else {
        weekdays.iter().map(|d| parse_weekday(d)).collect::<Result<_, _>>()?
    };
    let hours: Vec<u8> = if hours.is_empty() { (0..24).collect() } else { hours.to_vec() };
    let mut slots = Vec::with_capacity(months.len() * days.len() * hours.len());
    for &month in months {
        for &weekday in &days {
            for &hour in &hours {
                slots.push(Slot { weekday, hour, month });
            }
        }
    }
    Ok(slots)
}

fn load_artifact(path: &Path) -> Result<ModelArtifact, CliError> {
    Ok(load_model(open(path)?)?.artifact)
}

pub fn rank_with(artifact: &ModelArtifact, query: &SlotQuery) -> Result<Vec<RankedSlot>, CliError> {
    let model: &dyn SlotModel = match artifact {
        ModelArtifact::Glm(a) => &a.model,
        ModelArtifact::Forest(a) => &a.model,
    };
    Ok(rank_slots(model, query)?)
}

pub fn rank(cfg: &RunConfig, slots: Vec<Slot>, precip: f64, json: bool) -> Result<(), CliError> {
    let path = cfg.require(&cfg.model, "--model")?;
    let artifact = load_artifact(path)?;
    let ranked = rank_with(&artifact, &SlotQuery { slots, precip })?;
    if cfg.out.is_some() {
        let dir = out_dir(cfg)?;
        write_json(dir, "ranking.json", &ranked)?;
        write_provenance(dir, "rank", cfg, &[("model", path)])?;
    }
    if json {
        print_json(&ranked)?;
    } else {
        println!("{:>4}  {:>3}  {:>4}  {:>5}  {:>10}  {:>8}", "rank", "day", "hour", "month", "expected", "relative");
        for r in &ranked {
            println!(
                "{:>4}  {:>3}  {:>4}  {:>5}  {:>10.4}  {:>8.4}",
                r.rank,
                r.slot.weekday.code(),
                r.slot.hour,
                r.slot.month,
                r.expected_count,
                r.relative_risk
            );
        }
        println!("{RANKING_CAVEAT}");
    }
    Ok(())
}

pub fn serve(cfg: &RunConfig) -> Result<(), CliError> {
    let state = match &cfg.model {
        Some(path) => {
            let loaded = load_model(open(path)?)?;
            AppState::new(Some(loaded))
        }
        None => {
            log::warn!("no --model given; model endpoints will answer 404");
            AppState::default()
        }
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    println!("serving on http://{} (model {})", cfg.bind, state.fingerprint());
    runtime.block_on(crashrisk_service::serve(&cfg.bind, state, cfg.static_dir.clone()))?;
    Ok(())
}

pub fn synth(cfg: &RunConfig, json: bool) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let range = cfg.range()?;
    let (weather, grid) = synth_dataset(&range, &Profile::calibrated(), cfg.seed)?;
    let crashes = crashes_from_grid(&grid, cfg.seed);
    write_file(dir, "crashes.csv", |w| Ok(write_crash_csv(&crashes, w)?))?;
    write_file(dir, "weather.csv", |w| Ok(write_weather_csv(&weather, w)?))?;
    write_provenance(dir, "synth", cfg, &[])?;
    if json {
        print_json(&json!({ "crashes": crashes.len(), "days": weather.len() }))?;
    } else {
        println!("{} crashes over {} days -> {}", crashes.len(), weather.len(), dir.display());
    }
    Ok(())
}
