use chrono::NaiveDate;
use crashrisk::advisor::{heatmap, rank_slots, Slot, SlotQuery};
use crashrisk::artifact::{load_model, save_model, ModelArtifact};
use crashrisk::features::{build_design, FeatureSchema};
use crashrisk::forest::{predict_forest, SweepConfig};
use crashrisk::glm::{predict_mean, Family};
use crashrisk::ingest::{
    build_hourly_grid, parse_crash_csv, parse_weather_csv, read_grid_csv, write_grid_csv,
    CrashColumns, DateRange, Weekday, WeatherColumns,
};
use crashrisk::pipeline::{run_forest, run_glm, ForestRun, GlmRun};
use crashrisk::synth::{crashes_from_grid, synth_dataset, write_crash_csv, write_weather_csv, Profile};

fn year() -> DateRange {
    DateRange::new(
        NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2017, 12, 31).unwrap(),
    )
    .unwrap()
}

/// Writes synthetic raw files, reads them back and rebuilds the grid.
fn grid_through_files() -> Vec<crashrisk::ingest::HourlyObservation> {
    let range = year();
    let (weather, grid) = synth_dataset(&range, &Profile::calibrated(), 3).unwrap();
    let crashes = crashes_from_grid(&grid, 3);
    let (mut crash_csv, mut weather_csv) = (Vec::new(), Vec::new());
    write_crash_csv(&crashes, &mut crash_csv).unwrap();
    write_weather_csv(&weather, &mut weather_csv).unwrap();

    let crashes = parse_crash_csv(crash_csv.as_slice(), &range, &CrashColumns::default()).unwrap();
    let weather = parse_weather_csv(weather_csv.as_slice(), &range, &WeatherColumns::default()).unwrap();
    let rebuilt = build_hourly_grid(&crashes.records, &weather.records, &range).unwrap();
    assert_eq!(rebuilt, grid);
    rebuilt
}

#[test]
fn files_to_ranked_slots() {
    let grid = grid_through_files();
    let mut csv = Vec::new();
    write_grid_csv(&grid, &mut csv).unwrap();
    assert_eq!(read_grid_csv(csv.as_slice()).unwrap(), grid);

    let out = run_glm(&grid, &GlmRun::default()).unwrap();
    assert_eq!(out.artifact.model.family, Family::NegBinomial2);

    let mut saved = Vec::new();
    save_model(&ModelArtifact::Glm(out.artifact.clone()), &mut saved).unwrap();
    let loaded = match load_model(saved.as_slice()).unwrap().artifact {
        ModelArtifact::Glm(a) => a,
        other => panic!("expected glm, got {:?}", other.kind()),
    };

    let design = build_design(&grid[..200], &FeatureSchema::default()).unwrap();
    for i in 0..design.rows {
        let x = design.row(i);
        assert_eq!(
            predict_mean(&loaded.model, x).unwrap().to_bits(),
            predict_mean(&out.artifact.model, x).unwrap().to_bits()
        );
    }

    let slots = vec![
        Slot { weekday: Weekday::Friday, hour: 2, month: 10 },
        Slot { weekday: Weekday::Tuesday, hour: 11, month: 2 },
        Slot { weekday: Weekday::Sunday, hour: 17, month: 6 },
    ];
    let ranked = rank_slots(&loaded.model, &SlotQuery { slots, precip: 0.0 }).unwrap();
    // safest first
    assert_eq!(ranked[0].slot.hour, 11);
    assert_eq!(ranked[2].slot.hour, 2);
    assert!(ranked.windows(2).all(|w| w[0].expected_count <= w[1].expected_count));

    let map = heatmap(&loaded.model, 10, 1.0).unwrap();
    assert!(map.min <= map.max);
}

#[test]
fn forest_artifact_round_trip() {
    let grid = grid_through_files();
    let run = ForestRun {
        sweep: SweepConfig { sizes: vec![2, 4], ..SweepConfig::default() },
        ..ForestRun::default()
    };
    let out = run_forest(&grid, &run).unwrap();
    let mut saved = Vec::new();
    let sha = save_model(&ModelArtifact::Forest(out.artifact.clone()), &mut saved).unwrap();
    let loaded = load_model(saved.as_slice()).unwrap();
    assert_eq!(loaded.sha256, sha);
    let ModelArtifact::Forest(forest) = loaded.artifact else {
        panic!("expected forest");
    };
    let design = build_design(&grid[..100], &FeatureSchema::default()).unwrap();
    for i in 0..design.rows {
        let x = design.row(i);
        assert_eq!(
            predict_forest(&forest.model, x).unwrap().to_bits(),
            predict_forest(&out.artifact.model, x).unwrap().to_bits()
        );
    }
}
