//! The three subcommands: `synth`, `run` and `sweep`.
//!
//! Each is a plain function of resolved [`Settings`]; determinism falls out
//! of the core library (all randomness flows from the configured seeds) and
//! of writing every artifact from a fully rendered buffer. Cross-validation
//! folds run in parallel inside the core harness, but file output happens
//! here, on one thread, after the computation has finished.

use std::fs;

use medeeg_core::synth::generate_cohort;
use medeeg_core::{
    dsp, grid_sweep, plan_experiment, run_experiment, BandDef, CohortDataset, Pipeline,
    Recording, SubjectRecordings,
};

use crate::config::Settings;
use crate::error::{classify_cv, CliError};
use crate::{eegb, manifest, report};

/// Quality factor of the optional mains notch: rejects ±~1 Hz around the
/// line frequency, narrow enough to leave neighbouring EEG content alone.
const NOTCH_Q: f64 = 30.0;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Generate the configured synthetic cohort and write it to the data
/// directory: one EEGB file per subject per condition plus `manifest.json`.
///
/// The directory is created if missing, and existing files are replaced;
/// since generation is a pure function of the config, re-running the same
/// config rewrites identical bytes.
pub fn cmd_synth(settings: &Settings) -> Result<(), CliError> {
    let cohort = generate_cohort(&settings.synth).map_err(|e| CliError::Validation(e.to_string()))?;

    fs::create_dir_all(&settings.data_dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", settings.data_dir.display())))?;
    let mut entries = Vec::with_capacity(2 * cohort.n_subjects());
    for subject in cohort.subjects() {
        for rec in [&subject.rest, &subject.meditation] {
            let bytes = eegb::encode(rec).map_err(runtime)?;
            let file = manifest::recording_filename(&subject.subject_id, rec.condition);
            fs::write(settings.data_dir.join(&file), &bytes)
                .map_err(|e| runtime(format!("cannot write {file}: {e}")))?;
            entries.push(manifest::ManifestEntry {
                subject_id: subject.subject_id.clone(),
                condition: rec.condition,
                file,
                sha256: manifest::sha256_hex(&bytes),
            });
        }
    }
    manifest::write_manifest(&settings.data_dir, &entries).map_err(runtime)?;

    println!(
        "wrote {} recordings ({} subjects × 2 conditions) and manifest.json to {}",
        entries.len(),
        cohort.n_subjects(),
        settings.data_dir.display()
    );
    Ok(())
}

/// Notch (if configured) then bandpass one recording.
fn preprocess(rec: &Recording, band: &BandDef, notch_hz: Option<f64>) -> Result<Recording, CliError> {
    let notched;
    let rec = match notch_hz {
        Some(f0) => {
            notched = dsp::notch(rec, f0, NOTCH_Q).map_err(|e| CliError::Validation(e.to_string()))?;
            &notched
        }
        None => rec,
    };
    dsp::bandpass(rec, band).map_err(|e| CliError::Validation(e.to_string()))
}

/// Load the manifest, verify every file, and return the cohort filtered to
/// the analysis band. All failures up to here are validation failures —
/// nothing has been written yet.
fn load_filtered_cohort(settings: &Settings) -> Result<CohortDataset, CliError> {
    let raw = manifest::load_subjects(&settings.data_dir)?;
    let band = settings.band.definition();
    let mut subjects = Vec::with_capacity(raw.len());
    for s in raw {
        subjects.push(SubjectRecordings {
            rest: preprocess(&s.rest, &band, settings.notch_hz)?,
            meditation: preprocess(&s.meditation, &band, settings.notch_hz)?,
            subject_id: s.subject_id,
        });
    }
    CohortDataset::new(band, subjects).map_err(|e| CliError::Validation(e.to_string()))
}

/// Run one cross-validated experiment and write `report.json` and
/// `report.csv` into the output directory.
pub fn cmd_run(settings: &Settings) -> Result<(), CliError> {
    let cohort = load_filtered_cohort(settings)?;
    let plan = plan_experiment(&cohort, settings.pipeline, settings.mode, settings.seeds.plan)
        .map_err(classify_cv)?;
    let result = run_experiment(&cohort, &settings.hyper, &plan, settings.seeds, &settings.tuning)
        .map_err(classify_cv)?;
    let (json_path, _) = report::write_run_reports(&settings.out_dir, &result).map_err(runtime)?;

    println!(
        "{} / {} / {}: {:.1}% ± {:.1} over {} folds → {}",
        result.pipeline,
        settings.band,
        result.mode,
        result.mean_accuracy_pct,
        result.sd_accuracy_pct,
        result.fold_ids.len(),
        json_path.display()
    );
    Ok(())
}

/// Sweep filter-pair count × regularization strength for the CSP-LDA
/// pipeline and write `sweep.csv` in the appendix layout.
///
/// The sweep always evaluates CSP-LDA — the grid axes only exist there —
/// so any configured `pipeline` is ignored.
pub fn cmd_sweep(settings: &Settings) -> Result<(), CliError> {
    let cohort = load_filtered_cohort(settings)?;
    let plan = plan_experiment(&cohort, Pipeline::CspLda, settings.mode, settings.seeds.plan)
        .map_err(classify_cv)?;
    let table = grid_sweep(
        &cohort,
        &settings.sweep_alphas,
        &settings.sweep_pairs,
        &plan,
        settings.seeds,
    )
    .map_err(classify_cv)?;
    let path = report::write_sweep_csv(&settings.out_dir, &table).map_err(runtime)?;

    let best = table
        .cells
        .iter()
        .max_by(|a, b| a.mean_accuracy_pct.total_cmp(&b.mean_accuracy_pct))
        .expect("grid is non-empty");
    println!(
        "swept {} pair counts × {} alphas ({} folds each); best cell {:.1}% ± {:.1} → {}",
        table.pair_counts.len(),
        table.alphas.len(),
        best.fold_ids.len(),
        best.mean_accuracy_pct,
        best.sd_accuracy_pct,
        path.display()
    );
    Ok(())
}
