#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixent/config.hpp"
#include "mixent/estimators.hpp"
#include "mixent/model_io.hpp"

namespace mixent {

// One training-curve row as emitted to CSV. Phase is "knife" while the base
// mixture is fitted by cross-entropy and "remedi" while the variational
// correction is trained on top of it; epochs count from zero within a phase.
// Columns a phase does not produce hold NaN.
struct CurveRow {
    std::string run_id;
    uint64_t seed = 0;
    std::string phase;
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double dv_estimate = 0.0;
    double entropy_estimate = 0.0;
    double wall_seconds = 0.0;
};

// Everything one seeded run produces except the trained model itself (kept
// beside it in SeedRun so this struct round-trips through JSON unchanged).
// Curves are ordered by (phase, epoch); estimates are keyed by method name
// ("knife" = base cross-entropy bound, "remedi" = corrected bound, plus any
// configured oracles "knn"/"kde"/"mc"). The final estimate is the last-epoch
// validation value; the best-validation epoch is reported alongside, found
// by the lowest validation entropy bound anywhere on the curve.
struct RunResult {
    std::string run_id;  // "<name>-<confighash>-s<seed>"
    uint64_t seed = 0;
    std::vector<CurveRow> curves;
    std::map<std::string, EntropyEstimate> estimates;
    double base_val_ce = 0.0;
    double final_estimate = 0.0;
    double best_val_estimate = 0.0;
    int best_val_epoch = -1;  // -1 when no per-epoch validation was recorded
    std::string best_val_phase;
    double wall_seconds = 0.0;
    std::string config_json;  // canonical config echo
    std::string config_hash;
    std::string code_version;
};

struct SeedRun {
    RunResult result;
    GibbsBundle model;
};

struct MethodAggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; zero for a single run
    long runs = 0;
};

// Multi-seed outcome: per-seed runs in config order plus mean/std over seeds
// for every estimate key and for the reported final ("final") estimate.
struct ExperimentResult {
    ExperimentConfig config;
    std::string config_hash;
    std::vector<SeedRun> runs;
    std::map<std::string, MethodAggregate> aggregate;
    double wall_seconds = 0.0;
};

// The full two-phase pipeline for one seed: generate or load the train and
// validation sets, fit the base mixture by cross-entropy, draw the reference
// sample once from the frozen base, train the corrective network against it,
// then evaluate every configured estimator on the validation set. Errors
// from any stage are rethrown with the run id and pipeline phase prepended.
SeedRun run_seed(const ExperimentConfig& cfg, uint64_t seed);

// run_seed over every configured seed, plus aggregation. When the config
// names an output directory, curves, results, and models are rewritten after
// every completed seed and on failure, so a crash never discards finished
// seeds; every write goes through the atomic temp-file-and-rename path.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// One run_experiment per value with the named config field replaced; value
// outputs land in "<output_dir>/<axis>-<value>" with a summary table at
// "<output_dir>/sweep.csv". Unknown axis names and values outside the
// field's range are rejected.
struct SweepResult {
    std::string axis;
    std::vector<double> values;
    std::vector<ExperimentResult> experiments;
};
SweepResult run_sweep(const ExperimentConfig& base_cfg, const std::string& axis,
                      const std::vector<double>& values);
std::vector<std::string> sweep_axes();

// Artifact writers. curves.csv columns: run_id, seed, phase, epoch,
// train_loss, val_loss, dv_estimate, entropy_estimate, wall_seconds (numbers
// at 17 significant digits, NaN spelled "nan"). results.json holds the
// canonical config, its hash, per-run results, and the aggregate; a nonempty
// `error` is recorded in it when a partial flush follows a failure. Models
// are written per seed as model-s<seed>.model with the config hash in their
// header.
std::string curves_csv(const std::vector<CurveRow>& rows);
std::string run_result_json(const RunResult& r);
RunResult parse_run_result(const std::string& text);
std::string experiment_json(const ExperimentResult& r, const std::string& error = "");
std::string sweep_csv(const SweepResult& s);
void emit_experiment(const ExperimentResult& result, const std::string& out_dir,
                     const std::string& error = "");

}  // namespace mixent
