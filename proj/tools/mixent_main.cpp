// Command-line front end: generate synthetic data, train models from a JSON
// config, evaluate estimators, draw samples from trained models, and sweep
// config axes. Subcommands print machine-readable JSON to stdout; any failure
// prints {"error": ...} to stderr and exits nonzero.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixent/blas_setup.hpp"
#include "mixent/config.hpp"
#include "mixent/datasets.hpp"
#include "mixent/estimators.hpp"
#include "mixent/gibbs.hpp"
#include "mixent/harness.hpp"
#include "mixent/model_io.hpp"
#include "mixent/rng.hpp"
#include "mixent/samplers.hpp"

using namespace mixent;
using nlohmann::json;

namespace {

std::string csv_of(const Tensor& X) {
    std::string out;
    char buf[40];
    for (long i = 0; i < X.rows(); ++i) {
        for (long j = 0; j < X.cols(); ++j) {
            if (j > 0) out += ',';
            std::snprintf(buf, sizeof buf, "%.17g", X.at(i, j));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DatasetSpec spec_from_flags(const std::string& kind, int dim, double noise) {
    if (kind == "triangle") {
        if (dim < 1) throw std::runtime_error("triangle data needs --dim >= 1");
        return DatasetSpec::make_triangle(dim == 1 ? TriangleMixtureSpec::ten_component_1d()
                                                   : TriangleMixtureSpec::product_bimodal(dim));
    }
    if (kind == "two_moons") {
        DatasetSpec s = DatasetSpec::make_two_moons(noise);
        return s;
    }
    if (kind == "ball" || kind == "cube") {
        if (dim < 1) throw std::runtime_error(kind + " data needs --dim >= 1");
        return DatasetSpec::make_body(
            kind == "ball" ? UniformBodySpec::Body::ball : UniformBodySpec::Body::cube, dim);
    }
    throw std::runtime_error("unknown dataset kind \"" + kind +
                             "\" (want triangle, two_moons, ball, or cube)");
}

json estimate_json(const EntropyEstimate& e) {
    return {{"value", e.value},   {"standard_error", e.standard_error},
            {"method", e.method}, {"n", e.n},
            {"m", e.m},           {"seconds", e.seconds}};
}

void print_stdout(const json& j) { std::cout << j.dump(2) << "\n"; }

// Config overrides shared by train and sweep. Each present flag is patched
// into the config JSON before parsing, so the strict parser validates
// overrides exactly like file values.
struct Overrides {
    std::optional<std::string> name, output_dir;
    std::optional<int> components, base_epochs, correction_epochs, threads;
    std::optional<long> n_train, n_val, q_samples, batch_size, curve_eval;
    std::optional<double> learning_rate, weight_decay, ema_decay;
    std::vector<long> widths;
    std::vector<uint64_t> seeds;
    bool resample_q = false;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--name", o.name, "run label used in ids and file names");
    cmd->add_option("--output", o.output_dir, "directory for curves, results, and models");
    cmd->add_option("--components", o.components, "mixture components in the base model");
    cmd->add_option("--base-epochs", o.base_epochs, "cross-entropy epochs for the base");
    cmd->add_option("--correction-epochs", o.correction_epochs,
                    "variational epochs for the correction");
    cmd->add_option("--n-train", o.n_train, "synthetic training sample count");
    cmd->add_option("--n-val", o.n_val, "synthetic validation sample count");
    cmd->add_option("--q-samples", o.q_samples, "reference draws from the base (0 = train size)");
    cmd->add_option("--batch-size", o.batch_size, "minibatch size for both phases");
    cmd->add_option("--curve-eval", o.curve_eval,
                    "per-epoch validation size (-1 full, 0 none, k first rows)");
    cmd->add_option("--learning-rate", o.learning_rate, "Adam learning rate");
    cmd->add_option("--weight-decay", o.weight_decay, "decoupled weight decay");
    cmd->add_option("--ema-decay", o.ema_decay, "moving-average decay for the normalizer");
    cmd->add_option("--widths", o.widths, "correction trunk widths")->delimiter(',');
    cmd->add_option("--seeds", o.seeds, "seeds to run")->delimiter(',');
    cmd->add_option("--threads", o.threads, "BLAS threads");
    cmd->add_flag("--resample-q", o.resample_q,
                  "redraw the reference set every epoch after the first");
}

ExperimentConfig config_with_overrides(const std::string& config_path, const Overrides& o) {
    json j;
    try {
        j = json::parse(read_text_file(config_path));
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + config_path + ": " + e.what());
    }
    if (o.name) j["name"] = *o.name;
    if (o.output_dir) j["output_dir"] = *o.output_dir;
    if (o.components) j["base"]["components"] = *o.components;
    if (o.base_epochs) j["base"]["epochs"] = *o.base_epochs;
    if (o.correction_epochs) j["correction"]["epochs"] = *o.correction_epochs;
    if (o.n_train) j["dataset"]["n_train"] = *o.n_train;
    if (o.n_val) j["dataset"]["n_val"] = *o.n_val;
    if (o.q_samples) j["correction"]["q_samples"] = *o.q_samples;
    if (o.batch_size) j["optimizer"]["batch_size"] = *o.batch_size;
    if (o.curve_eval) j["correction"]["curve_eval"] = *o.curve_eval;
    if (o.learning_rate) j["optimizer"]["learning_rate"] = *o.learning_rate;
    if (o.weight_decay) j["optimizer"]["weight_decay"] = *o.weight_decay;
    if (o.ema_decay) j["correction"]["ema_decay"] = *o.ema_decay;
    if (!o.widths.empty()) j["correction"]["widths"] = o.widths;
    if (!o.seeds.empty()) j["seeds"] = o.seeds;
    if (o.threads) j["threads"] = *o.threads;
    if (o.resample_q) j["correction"]["resample_q"] = true;
    return parse_config(j.dump());
}

json run_summary(const RunResult& r) {
    return {{"run_id", r.run_id},
            {"seed", r.seed},
            {"final_estimate", r.final_estimate},
            {"best_val_estimate", r.best_val_estimate},
            {"best_val_epoch", r.best_val_epoch},
            {"wall_seconds", r.wall_seconds}};
}

json aggregate_json(const std::map<std::string, MethodAggregate>& agg) {
    json out = json::object();
    for (const auto& [key, a] : agg)
        out[key] = {{"mean", a.mean}, {"std", a.stddev}, {"runs", a.runs}};
    return out;
}

// ---- subcommand bodies ------------------------------------------------------

void cmd_generate(const std::string& kind, int dim, double noise, long n, uint64_t seed,
                  const std::string& out_path) {
    DatasetSpec spec = spec_from_flags(kind, dim, noise);
    Rng rng(seed);
    Tensor X = generate(spec, n, rng);
    atomic_write_text(out_path, csv_of(X));
    json info{{"out", out_path}, {"n", X.rows()}, {"dim", X.cols()}, {"kind", kind}};
    if (std::optional<double> h = true_entropy(spec)) info["true_entropy"] = *h;
    print_stdout(info);
}

void cmd_train(const std::string& config_path, const Overrides& o) {
    ExperimentConfig cfg = config_with_overrides(config_path, o);
    ExperimentResult res = run_experiment(cfg);
    json out{{"config_hash", res.config_hash},
             {"aggregate", aggregate_json(res.aggregate)},
             {"wall_seconds", res.wall_seconds}};
    json runs = json::array();
    for (const SeedRun& sr : res.runs) runs.push_back(run_summary(sr.result));
    out["runs"] = std::move(runs);
    if (!cfg.output_dir.empty()) out["output_dir"] = cfg.output_dir;
    print_stdout(out);
}

void cmd_sweep(const std::string& config_path, const Overrides& o, const std::string& axis,
               const std::vector<double>& values) {
    ExperimentConfig cfg = config_with_overrides(config_path, o);
    SweepResult s = run_sweep(cfg, axis, values);
    json rows = json::array();
    for (size_t i = 0; i < s.experiments.size(); ++i)
        rows.push_back({{"value", s.values[i]},
                        {"config_hash", s.experiments[i].config_hash},
                        {"aggregate", aggregate_json(s.experiments[i].aggregate)}});
    json out{{"axis", s.axis}, {"rows", std::move(rows)}};
    if (!cfg.output_dir.empty()) out["output_dir"] = cfg.output_dir;
    print_stdout(out);
}

void cmd_estimate(const std::string& model_path, const std::string& data_path, char delimiter,
                  bool header, long q_samples, uint64_t seed, int knn_k, double kde_h,
                  const std::string& train_path, int threads) {
    set_blas_threads(threads);
    LoadedModel lm = load_model(model_path);
    Tensor data = load_delimited(data_path, delimiter, header);
    if (data.cols() != lm.bundle.base.dim())
        throw std::runtime_error("model expects " + std::to_string(lm.bundle.base.dim()) +
                                 " columns but " + data_path + " has " +
                                 std::to_string(data.cols()));

    json ests = json::object();
    EntropyEstimate base_est =
        estimate_remedi(lm.bundle.base, nullptr, data, data);
    base_est.method = "knife";
    ests["knife"] = estimate_json(base_est);
    if (lm.bundle.correction) {
        Rng rng(seed);
        const long m = q_samples > 0 ? q_samples : data.rows();
        Tensor q = lm.bundle.base.sample(m, rng);
        ests["remedi"] = estimate_json(
            estimate_remedi(lm.bundle.base, &*lm.bundle.correction, data, q));
    }
    if (knn_k > 0) ests["knn"] = estimate_json(estimate_knn_kl(data, knn_k));
    if (kde_h > 0) {
        if (train_path.empty())
            throw std::runtime_error("kernel estimate needs --train for the density sample");
        Tensor train = load_delimited(train_path, delimiter, header);
        ests["kde"] = estimate_json(oracle_kde(train, data, kde_h));
    }
    print_stdout(json{{"model", model_path},
                      {"kind", lm.kind},
                      {"n", data.rows()},
                      {"estimates", std::move(ests)}});
}

void cmd_sample(const std::string& model_path, const std::string& method,
                const std::string& out_path, uint64_t seed, long count, long max_proposals,
                double margin, long calibration, long chains, double beta, double dt,
                double horizon, long traj_stride, const std::string& traj_path, int threads) {
    set_blas_threads(threads);
    LoadedModel lm = load_model(model_path);
    GibbsModel model(lm.bundle.base,
                     lm.bundle.correction ? &*lm.bundle.correction : nullptr);
    Rng rng(seed);
    json info{{"model", model_path}, {"method", method}, {"out", out_path}};

    if (method == "rejection") {
        Tensor cal = lm.bundle.base.sample(calibration, rng);
        RejectionSampler sampler = calibrate_envelope(model, cal, margin);
        RejectionResult res = rejection_sample(sampler, count, max_proposals, rng);
        atomic_write_text(out_path, csv_of(res.samples));
        info["accepted"] = res.accepted;
        info["proposals"] = res.proposals;
        info["envelope_violations"] = res.envelope_violations;
        info["low_acceptance_warning"] = res.low_acceptance_warning;
        info["envelope_constant"] = sampler.c_tilde;
    } else if (method == "langevin") {
        LangevinConfig config;
        config.beta = beta;
        config.dt = dt;
        config.horizon = horizon;
        config.traj_stride = traj_stride;
        std::vector<Tensor> trajectory;
        LangevinResult res = langevin_simulate(
            model, config, chains, rng, traj_stride > 0 ? &trajectory : nullptr);
        atomic_write_text(out_path, csv_of(res.terminal));
        if (traj_stride > 0 && !traj_path.empty()) {
            // One block per snapshot with a leading snapshot-index column.
            std::string text = "snapshot,";
            for (long j = 0; j < res.terminal.cols(); ++j)
                text += (j > 0 ? ",x" : "x") + std::to_string(j);
            text += '\n';
            char buf[40];
            for (size_t s = 0; s < trajectory.size(); ++s)
                for (long i = 0; i < trajectory[s].rows(); ++i) {
                    text += std::to_string(s);
                    for (long j = 0; j < trajectory[s].cols(); ++j) {
                        std::snprintf(buf, sizeof buf, ",%.17g", trajectory[s].at(i, j));
                        text += buf;
                    }
                    text += '\n';
                }
            atomic_write_text(traj_path, text);
            info["trajectory"] = traj_path;
            info["snapshots"] = trajectory.size();
        }
        info["chains"] = chains;
        info["dropped"] = res.dropped;
        info["steps"] = res.steps;
    } else {
        throw std::runtime_error("unknown sampling method \"" + method +
                                 "\" (want rejection or langevin)");
    }
    print_stdout(info);
}

void cmd_oracle(const std::string& method, const std::string& data_path, char delimiter,
                bool header, int k, double h, const std::string& train_path,
                const std::string& kind, int dim, double noise, long n, uint64_t seed,
                int threads) {
    set_blas_threads(threads);
    json out{{"method", method}};
    if (method == "knn") {
        if (data_path.empty()) throw std::runtime_error("knn oracle needs --data");
        Tensor data = load_delimited(data_path, delimiter, header);
        out["estimate"] = estimate_json(estimate_knn_kl(data, k));
    } else if (method == "kde") {
        if (data_path.empty() || train_path.empty())
            throw std::runtime_error("kde oracle needs --data and --train");
        Tensor data = load_delimited(data_path, delimiter, header);
        Tensor train = load_delimited(train_path, delimiter, header);
        out["estimate"] = estimate_json(oracle_kde(train, data, h));
    } else if (method == "mc") {
        if (kind.empty())
            throw std::runtime_error("mc oracle needs --kind (the exact density to score)");
        DatasetSpec spec = spec_from_flags(kind, dim, noise);
        Tensor data;
        if (!data_path.empty()) {
            data = load_delimited(data_path, delimiter, header);
        } else {
            Rng rng(seed);
            data = generate(spec, n, rng);
        }
        out["estimate"] = estimate_json(
            oracle_mc([&spec](const Tensor& X) { return true_log_density(spec, X); }, data));
        if (std::optional<double> t = true_entropy(spec)) out["true_entropy"] = *t;
    } else {
        throw std::runtime_error("unknown oracle \"" + method + "\" (want knn, kde, or mc)");
    }
    print_stdout(out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"differential-entropy estimation toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "draw a synthetic dataset to CSV");
    std::string gen_kind, gen_out;
    int gen_dim = 1;
    double gen_noise = 0.05;
    long gen_n = 50000;
    uint64_t gen_seed = 1;
    gen->add_option("--kind", gen_kind, "triangle, two_moons, ball, or cube")->required();
    gen->add_option("--dim", gen_dim, "dimension (two_moons is always 2)");
    gen->add_option("--noise", gen_noise, "two-moons noise level");
    gen->add_option("--n", gen_n, "sample count");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output CSV path")->required();
    gen->callback([&] { cmd_generate(gen_kind, gen_dim, gen_noise, gen_n, gen_seed, gen_out); });

    // train
    auto* train = app.add_subcommand("train", "run the two-phase training pipeline");
    std::string train_config;
    Overrides train_o;
    train->add_option("--config", train_config, "experiment config JSON")->required();
    add_override_flags(train, train_o);
    train->callback([&] { cmd_train(train_config, train_o); });

    // sweep
    auto* sweep = app.add_subcommand("sweep", "repeat an experiment along one config axis");
    std::string sweep_config, sweep_axis;
    std::vector<double> sweep_values;
    Overrides sweep_o;
    sweep->add_option("--config", sweep_config, "experiment config JSON")->required();
    sweep->add_option("--axis", sweep_axis, "config field to vary")->required();
    sweep->add_option("--values", sweep_values, "axis values")->required()->delimiter(',');
    add_override_flags(sweep, sweep_o);
    sweep->callback([&] { cmd_sweep(sweep_config, sweep_o, sweep_axis, sweep_values); });

    // estimate
    auto* est = app.add_subcommand("estimate", "evaluate a saved model on data");
    std::string est_model, est_data, est_train;
    char est_delim = ',';
    bool est_header = false;
    long est_q = 0;
    uint64_t est_seed = 1;
    int est_knn = 0, est_threads = 1;
    double est_kde = 0.0;
    est->add_option("--model", est_model, "model file")->required();
    est->add_option("--data", est_data, "evaluation CSV")->required();
    est->add_option("--delimiter", est_delim, "CSV delimiter");
    est->add_flag("--header", est_header, "skip the first CSV line");
    est->add_option("--q-samples", est_q, "reference draws (0 = data size)");
    est->add_option("--seed", est_seed, "seed for the reference draw");
    est->add_option("--knn-k", est_knn, "also run the nearest-neighbor oracle");
    est->add_option("--kde-h", est_kde, "also run the kernel oracle with this bandwidth");
    est->add_option("--train", est_train, "density sample for the kernel oracle");
    est->add_option("--threads", est_threads, "BLAS threads");
    est->callback([&] {
        cmd_estimate(est_model, est_data, est_delim, est_header, est_q, est_seed, est_knn,
                     est_kde, est_train, est_threads);
    });

    // sample
    auto* smp = app.add_subcommand("sample", "draw from a saved model");
    std::string smp_model, smp_method, smp_out, smp_traj;
    uint64_t smp_seed = 1;
    long smp_count = 1000, smp_budget = 1000000, smp_cal = 10000, smp_chains = 1000;
    long smp_stride = 0;
    double smp_margin = 0.05, smp_beta = 1.0, smp_dt = 1e-3, smp_horizon = 5.0;
    int smp_threads = 1;
    smp->add_option("--model", smp_model, "model file")->required();
    smp->add_option("--method", smp_method, "rejection or langevin")->required();
    smp->add_option("--out", smp_out, "output CSV path")->required();
    smp->add_option("--seed", smp_seed, "generator seed");
    smp->add_option("--count", smp_count, "rejection: accepted samples wanted (0 = use budget)");
    smp->add_option("--max-proposals", smp_budget, "rejection: proposal budget");
    smp->add_option("--margin", smp_margin, "rejection: envelope headroom fraction");
    smp->add_option("--calibration", smp_cal, "rejection: base draws for the envelope");
    smp->add_option("--chains", smp_chains, "langevin: chain count");
    smp->add_option("--beta", smp_beta, "langevin: inverse temperature");
    smp->add_option("--dt", smp_dt, "langevin: step size");
    smp->add_option("--horizon", smp_horizon, "langevin: integration time");
    smp->add_option("--traj-stride", smp_stride, "langevin: snapshot every k steps");
    smp->add_option("--traj-out", smp_traj, "langevin: snapshot CSV path");
    smp->add_option("--threads", smp_threads, "BLAS threads");
    smp->callback([&] {
        cmd_sample(smp_model, smp_method, smp_out, smp_seed, smp_count, smp_budget, smp_margin,
                   smp_cal, smp_chains, smp_beta, smp_dt, smp_horizon, smp_stride, smp_traj,
                   smp_threads);
    });

    // oracle
    auto* orc = app.add_subcommand("oracle", "reference estimators on data or exact densities");
    std::string orc_method, orc_data, orc_train, orc_kind;
    char orc_delim = ',';
    bool orc_header = false;
    int orc_k = 10, orc_dim = 1, orc_threads = 1;
    double orc_h = 0.01, orc_noise = 0.05;
    long orc_n = 50000;
    uint64_t orc_seed = 1;
    orc->add_option("--method", orc_method, "knn, kde, or mc")->required();
    orc->add_option("--data", orc_data, "evaluation CSV");
    orc->add_option("--delimiter", orc_delim, "CSV delimiter");
    orc->add_flag("--header", orc_header, "skip the first CSV line");
    orc->add_option("--k", orc_k, "knn: neighbor order");
    orc->add_option("--bandwidth", orc_h, "kde: bandwidth");
    orc->add_option("--train", orc_train, "kde: density sample CSV");
    orc->add_option("--kind", orc_kind, "mc: exact density kind");
    orc->add_option("--dim", orc_dim, "mc: dimension");
    orc->add_option("--noise", orc_noise, "mc: two-moons noise");
    orc->add_option("--n", orc_n, "mc: draws when --data is absent");
    orc->add_option("--seed", orc_seed, "mc: seed for those draws");
    orc->add_option("--threads", orc_threads, "BLAS threads");
    orc->callback([&] {
        cmd_oracle(orc_method, orc_data, orc_delim, orc_header, orc_k, orc_h, orc_train,
                   orc_kind, orc_dim, orc_noise, orc_n, orc_seed, orc_threads);
    });

    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        json err{{"error", e.what()}};
        for (const CLI::App* sub : app.get_subcommands()) err["command"] = sub->get_name();
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
