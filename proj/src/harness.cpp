#include "mixent/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "mixent/blas_setup.hpp"
#include "mixent/correction.hpp"
#include "mixent/datasets.hpp"
#include "mixent/gmm.hpp"
#include "mixent/rng.hpp"

namespace mixent {
namespace {

using nlohmann::json;

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// 17 significant digits: enough for a bit-exact double round trip.
std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// %g keeps integers short ("16") and small reals readable ("0.001").
std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

double num_or_nan(const json& v) {
    if (v.is_null()) return std::nan("");  // NaN serializes as null
    return v.get<double>();
}

// Rethrows anything a pipeline stage throws with the run and stage prepended.
template <class F>
auto stage(const std::string& run_id, const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw std::runtime_error(run_id + ": " + name + ": " + e.what());
    }
}

struct SplitData {
    Tensor train, val;
};

SplitData load_data(const ExperimentConfig& cfg, Rng& rng) {
    SplitData d;
    if (cfg.data.synthetic) {
        d.train = generate(cfg.data.spec, cfg.data.n_train, rng);
        d.val = generate(cfg.data.spec, cfg.data.n_val, rng);
        return d;
    }
    d.train = load_delimited(cfg.data.train_path, cfg.data.delimiter, cfg.data.header);
    d.val = load_delimited(cfg.data.val_path, cfg.data.delimiter, cfg.data.header);
    if (d.train.cols() != d.val.cols())
        throw std::runtime_error("training data has " + std::to_string(d.train.cols()) +
                                 " columns but validation data has " +
                                 std::to_string(d.val.cols()));
    return d;
}

void append_curve(std::vector<CurveRow>& out, const std::vector<EpochRecord>& recs,
                  const std::string& run_id, uint64_t seed, const char* phase) {
    for (const EpochRecord& rec : recs) {
        CurveRow row;
        row.run_id = run_id;
        row.seed = seed;
        row.phase = phase;
        row.epoch = rec.epoch;
        row.train_loss = rec.train_loss;
        row.val_loss = rec.val_loss;
        row.dv_estimate = rec.dv_estimate;
        row.entropy_estimate = rec.entropy_estimate;
        row.wall_seconds = rec.seconds;
        out.push_back(std::move(row));
    }
}

void aggregate_into(ExperimentResult& out) {
    out.aggregate.clear();
    std::map<std::string, std::vector<double>> columns;
    for (const SeedRun& sr : out.runs) {
        for (const auto& [key, est] : sr.result.estimates) columns[key].push_back(est.value);
        columns["final"].push_back(sr.result.final_estimate);
    }
    for (const auto& [key, vals] : columns) {
        MethodAggregate a;
        a.runs = static_cast<long>(vals.size());
        a.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(a.runs);
        if (a.runs > 1) {
            double ss = 0.0;
            for (double v : vals) ss += (v - a.mean) * (v - a.mean);
            a.stddev = std::sqrt(ss / static_cast<double>(a.runs - 1));
        }
        out.aggregate[key] = a;
    }
}

json run_to_json(const RunResult& r) {
    json j;
    j["run_id"] = r.run_id;
    j["seed"] = r.seed;
    j["code_version"] = r.code_version;
    j["config_hash"] = r.config_hash;
    j["config"] = json::parse(r.config_json);
    json curves = json::array();
    for (const CurveRow& row : r.curves) {
        // run_id and seed are constant per run; the parser refills them.
        curves.push_back({{"phase", row.phase},
                          {"epoch", row.epoch},
                          {"train_loss", row.train_loss},
                          {"val_loss", row.val_loss},
                          {"dv_estimate", row.dv_estimate},
                          {"entropy_estimate", row.entropy_estimate},
                          {"wall_seconds", row.wall_seconds}});
    }
    j["curves"] = std::move(curves);
    json ests = json::object();
    for (const auto& [key, est] : r.estimates) {
        ests[key] = {{"value", est.value},     {"standard_error", est.standard_error},
                     {"method", est.method},   {"n", est.n},
                     {"m", est.m},             {"seconds", est.seconds}};
    }
    j["estimates"] = std::move(ests);
    j["base_val_ce"] = r.base_val_ce;
    j["final_estimate"] = r.final_estimate;
    j["best_val_estimate"] = r.best_val_estimate;
    j["best_val_epoch"] = r.best_val_epoch;
    j["best_val_phase"] = r.best_val_phase;
    j["wall_seconds"] = r.wall_seconds;
    return j;
}

RunResult run_from_json(const json& j) {
    RunResult r;
    r.run_id = j.at("run_id").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.code_version = j.at("code_version").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config_json = j.at("config").dump(2);
    for (const json& c : j.at("curves")) {
        CurveRow row;
        row.run_id = r.run_id;
        row.seed = r.seed;
        row.phase = c.at("phase").get<std::string>();
        row.epoch = c.at("epoch").get<int>();
        row.train_loss = num_or_nan(c.at("train_loss"));
        row.val_loss = num_or_nan(c.at("val_loss"));
        row.dv_estimate = num_or_nan(c.at("dv_estimate"));
        row.entropy_estimate = num_or_nan(c.at("entropy_estimate"));
        row.wall_seconds = num_or_nan(c.at("wall_seconds"));
        r.curves.push_back(std::move(row));
    }
    for (const auto& [key, e] : j.at("estimates").items()) {
        EntropyEstimate est;
        est.value = num_or_nan(e.at("value"));
        est.standard_error = num_or_nan(e.at("standard_error"));
        est.method = e.at("method").get<std::string>();
        est.n = e.at("n").get<long>();
        est.m = e.at("m").get<long>();
        est.seconds = num_or_nan(e.at("seconds"));
        r.estimates[key] = std::move(est);
    }
    r.base_val_ce = num_or_nan(j.at("base_val_ce"));
    r.final_estimate = num_or_nan(j.at("final_estimate"));
    r.best_val_estimate = num_or_nan(j.at("best_val_estimate"));
    r.best_val_epoch = j.at("best_val_epoch").get<int>();
    r.best_val_phase = j.at("best_val_phase").get<std::string>();
    r.wall_seconds = num_or_nan(j.at("wall_seconds"));
    return r;
}

// ---- sweep axes ------------------------------------------------------------

long axis_integer(const char* axis, double v, long lo, long hi) {
    const double r = std::round(v);
    if (!std::isfinite(v) || std::abs(v - r) > 1e-9)
        throw std::runtime_error(std::string("sweep axis ") + axis + ": value " + fmt_value(v) +
                                 " is not an integer");
    if (r < static_cast<double>(lo) || r > static_cast<double>(hi))
        throw std::runtime_error(std::string("sweep axis ") + axis + ": value " + fmt_value(v) +
                                 " is outside [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                 "]");
    return static_cast<long>(r);
}

void axis_real(const char* axis, double v, double lo, double hi) {
    if (!std::isfinite(v) || v < lo || v > hi)
        throw std::runtime_error(std::string("sweep axis ") + axis + ": value " + fmt_value(v) +
                                 " is outside [" + fmt_value(lo) + ", " + fmt_value(hi) + "]");
}

struct Axis {
    const char* name;
    void (*apply)(ExperimentConfig&, double);
};

const Axis kAxes[] = {
    {"components",
     [](ExperimentConfig& c, double v) {
         c.base.components = static_cast<int>(axis_integer("components", v, 1, 4096));
     }},
    {"seed",
     [](ExperimentConfig& c, double v) {
         c.seeds = {static_cast<uint64_t>(axis_integer("seed", v, 0, 1L << 62))};
     }},
    {"base_epochs",
     [](ExperimentConfig& c, double v) {
         c.base.epochs = static_cast<int>(axis_integer("base_epochs", v, 0, 1000000));
     }},
    {"correction_epochs",
     [](ExperimentConfig& c, double v) {
         c.correction.epochs = static_cast<int>(axis_integer("correction_epochs", v, 0, 1000000));
     }},
    {"q_samples",
     [](ExperimentConfig& c, double v) {
         c.correction.q_samples = axis_integer("q_samples", v, 0, 1000000000);
     }},
    {"batch_size",
     [](ExperimentConfig& c, double v) {
         c.batch_size = axis_integer("batch_size", v, 1, 10000000);
     }},
    {"n_train",
     [](ExperimentConfig& c, double v) {
         if (!c.data.synthetic)
             throw std::runtime_error("sweep axis n_train: only applies to synthetic data");
         c.data.n_train = axis_integer("n_train", v, 1, 100000000);
     }},
    {"learning_rate",
     [](ExperimentConfig& c, double v) {
         axis_real("learning_rate", v, 1e-12, 10.0);
         c.adam.lr = v;
     }},
    {"weight_decay",
     [](ExperimentConfig& c, double v) {
         axis_real("weight_decay", v, 0.0, 10.0);
         c.adam.weight_decay = v;
     }},
    {"ema_decay",
     [](ExperimentConfig& c, double v) {
         axis_real("ema_decay", v, 0.0, 0.999999);
         c.correction.ema_decay = v;
     }},
    {"noise",
     [](ExperimentConfig& c, double v) {
         if (!c.data.synthetic || c.data.spec.kind != DatasetSpec::Kind::two_moons)
             throw std::runtime_error("sweep axis noise: only applies to the two-moons set");
         axis_real("noise", v, 1e-12, 10.0);
         c.data.spec.moons.noise = v;
     }},
};

const Axis* find_axis(const std::string& name) {
    for (const Axis& a : kAxes)
        if (name == a.name) return &a;
    return nullptr;
}

}  // namespace

SeedRun run_seed(const ExperimentConfig& cfg, uint64_t seed) {
    const double t0 = now_seconds();
    RunResult r;
    r.seed = seed;
    r.config_json = config_canonical_json(cfg);
    r.config_hash = config_hash_hex(cfg);
    r.code_version = kVersion;
    r.run_id = cfg.name + "-" + r.config_hash + "-s" + std::to_string(seed);

    // One generator drives the whole run in a fixed order: data, base init,
    // base training, reference draws, correction init, correction training.
    Rng rng(seed);

    SplitData data = stage(r.run_id, "data", [&] { return load_data(cfg, rng); });
    const int d = static_cast<int>(data.train.cols());

    // Phase 1: fit the base mixture by cross-entropy.
    GaussianMixture base = stage(r.run_id, "base init", [&] {
        if (cfg.base.init == "data")
            return GaussianMixture::init_from_data(data.train, cfg.base.components,
                                                   cfg.base.diagonal, rng);
        return GaussianMixture(cfg.base.components, d, cfg.base.diagonal);
    });
    MixtureTrainOptions mopts;
    mopts.epochs = cfg.base.epochs;
    mopts.batch_size = cfg.batch_size;
    mopts.adam = cfg.adam;
    mopts.record_val = true;
    std::vector<EpochRecord> base_curve = stage(r.run_id, "base training", [&] {
        return base.train_cross_entropy(data.train, data.val, mopts, rng);
    });
    append_curve(r.curves, base_curve, r.run_id, seed, "knife");

    r.base_val_ce =
        stage(r.run_id, "base evaluation", [&] { return base.entropy_upper_estimate(data.val); });
    EntropyEstimate base_est = stage(r.run_id, "base evaluation", [&] {
        return estimate_remedi(base, nullptr, data.val, data.val);
    });
    base_est.method = "knife";
    r.estimates["knife"] = base_est;

    // Phase 2: draw the reference set once from the frozen base, then train
    // the corrective network against it.
    std::optional<CorrectionNetwork> net;
    double log_normalizer = 0.0;
    long normalizer_samples = 0;
    if (cfg.correction.epochs > 0) {
        const long m =
            cfg.correction.q_samples > 0 ? cfg.correction.q_samples : data.train.rows();
        Tensor q_train =
            stage(r.run_id, "reference draw", [&] { return base.sample(m, rng); });
        Tensor q_eval = stage(r.run_id, "reference draw",
                              [&] { return base.sample(data.val.rows(), rng); });
        stage(r.run_id, "correction init", [&] {
            net.emplace(d, cfg.base.components, cfg.correction.net, rng);
        });
        DvTrainOptions dopts;
        dopts.epochs = cfg.correction.epochs;
        dopts.batch_size = cfg.batch_size;
        dopts.adam = cfg.adam;
        dopts.ema_decay = cfg.correction.ema_decay;
        dopts.curve_eval = cfg.correction.curve_eval;
        dopts.base_val_ce = r.base_val_ce;
        dopts.resample_q = cfg.correction.resample_q;
        std::vector<EpochRecord> dv_curve = stage(r.run_id, "correction training", [&] {
            return train_dv(*net, base, data.train, q_train, data.val, q_eval, dopts, rng);
        });
        append_curve(r.curves, dv_curve, r.run_id, seed, "remedi");

        r.estimates["remedi"] = stage(r.run_id, "evaluation", [&] {
            return estimate_remedi(base, &*net, data.val, q_eval);
        });
        DvEstimate dv = stage(r.run_id, "evaluation",
                              [&] { return dv_estimate(*net, base, data.val, q_eval); });
        log_normalizer = dv.log_mean_exp_t_q;
        normalizer_samples = q_eval.rows();
    }

    if (cfg.eval.knn_k > 0)
        r.estimates["knn"] = stage(r.run_id, "evaluation",
                                   [&] { return estimate_knn_kl(data.val, cfg.eval.knn_k); });
    if (cfg.eval.kde_h > 0)
        r.estimates["kde"] = stage(r.run_id, "evaluation", [&] {
            return oracle_kde(data.train, data.val, cfg.eval.kde_h);
        });
    if (cfg.eval.mc_oracle) {
        const DatasetSpec spec = cfg.data.spec;
        r.estimates["mc"] = stage(r.run_id, "evaluation", [&] {
            return oracle_mc([&spec](const Tensor& X) { return true_log_density(spec, X); },
                             data.val);
        });
    }

    r.final_estimate = r.estimates.at(net ? "remedi" : "knife").value;
    // Best validation epoch: the tightest (lowest) entropy bound on the curve.
    const CurveRow* best = nullptr;
    for (const CurveRow& row : r.curves)
        if (std::isfinite(row.entropy_estimate) &&
            (best == nullptr || row.entropy_estimate < best->entropy_estimate))
            best = &row;
    if (best != nullptr) {
        r.best_val_estimate = best->entropy_estimate;
        r.best_val_epoch = best->epoch;
        r.best_val_phase = best->phase;
    } else {
        r.best_val_estimate = r.final_estimate;
        r.best_val_epoch = -1;
    }
    r.wall_seconds = now_seconds() - t0;

    SeedRun out{std::move(r),
                GibbsBundle{std::move(base), std::move(net), log_normalizer, normalizer_samples}};
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const double t0 = now_seconds();
    set_blas_threads(cfg.threads);
    ExperimentResult out;
    out.config = cfg;
    out.config_hash = config_hash_hex(cfg);
    const bool emitting = !cfg.output_dir.empty();
    for (uint64_t seed : cfg.seeds) {
        try {
            out.runs.push_back(run_seed(cfg, seed));
        } catch (const std::exception& e) {
            // Flush everything finished so far before giving up.
            aggregate_into(out);
            out.wall_seconds = now_seconds() - t0;
            if (emitting) emit_experiment(out, cfg.output_dir, e.what());
            throw;
        }
        if (emitting) {
            aggregate_into(out);
            emit_experiment(out, cfg.output_dir);
        }
    }
    aggregate_into(out);
    out.wall_seconds = now_seconds() - t0;
    if (emitting) emit_experiment(out, cfg.output_dir);
    return out;
}

std::vector<std::string> sweep_axes() {
    std::vector<std::string> names;
    for (const Axis& a : kAxes) names.push_back(a.name);
    return names;
}

SweepResult run_sweep(const ExperimentConfig& base_cfg, const std::string& axis,
                      const std::vector<double>& values) {
    if (values.empty()) throw std::runtime_error("sweep: need at least one value");
    const Axis* ax = find_axis(axis);
    if (ax == nullptr) {
        std::string valid;
        for (const Axis& a : kAxes) valid += std::string(valid.empty() ? "" : ", ") + a.name;
        throw std::runtime_error("sweep: unknown axis \"" + axis + "\" (valid: " + valid + ")");
    }
    // Reject any bad value before burning time on the first runs.
    for (double v : values) {
        ExperimentConfig scratch = base_cfg;
        ax->apply(scratch, v);
    }
    SweepResult s;
    s.axis = axis;
    s.values = values;
    for (double v : values) {
        ExperimentConfig c = base_cfg;
        ax->apply(c, v);
        if (!base_cfg.output_dir.empty())
            c.output_dir = base_cfg.output_dir + "/" + axis + "-" + fmt_value(v);
        s.experiments.push_back(run_experiment(c));
    }
    if (!base_cfg.output_dir.empty())
        atomic_write_text(base_cfg.output_dir + "/sweep.csv", sweep_csv(s));
    return s;
}

std::string curves_csv(const std::vector<CurveRow>& rows) {
    std::string out =
        "run_id,seed,phase,epoch,train_loss,val_loss,dv_estimate,entropy_estimate,wall_seconds\n";
    for (const CurveRow& row : rows) {
        out += row.run_id;
        out += ',';
        out += std::to_string(row.seed);
        out += ',';
        out += row.phase;
        out += ',';
        out += std::to_string(row.epoch);
        for (double v : {row.train_loss, row.val_loss, row.dv_estimate, row.entropy_estimate,
                         row.wall_seconds}) {
            out += ',';
            out += fmt17(v);
        }
        out += '\n';
    }
    return out;
}

std::string run_result_json(const RunResult& r) { return run_to_json(r).dump(2) + "\n"; }

RunResult parse_run_result(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("run result is not valid JSON: ") + e.what());
    }
    try {
        return run_from_json(j);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("run result: ") + e.what());
    }
}

std::string experiment_json(const ExperimentResult& r, const std::string& error) {
    json j;
    j["config"] = json::parse(config_canonical_json(r.config));
    j["config_hash"] = r.config_hash;
    j["code_version"] = kVersion;
    json agg = json::object();
    for (const auto& [key, a] : r.aggregate)
        agg[key] = {{"mean", a.mean}, {"std", a.stddev}, {"runs", a.runs}};
    j["aggregate"] = std::move(agg);
    json runs = json::array();
    for (const SeedRun& sr : r.runs) runs.push_back(run_to_json(sr.result));
    j["runs"] = std::move(runs);
    j["wall_seconds"] = r.wall_seconds;
    if (!error.empty()) j["error"] = error;
    return j.dump(2) + "\n";
}

std::string sweep_csv(const SweepResult& s) {
    std::string out = "axis,value,method,mean,std,runs\n";
    for (size_t i = 0; i < s.experiments.size(); ++i) {
        for (const auto& [key, a] : s.experiments[i].aggregate) {
            out += s.axis;
            out += ',';
            out += fmt_value(s.values[i]);
            out += ',';
            out += key;
            out += ',';
            out += fmt17(a.mean);
            out += ',';
            out += fmt17(a.stddev);
            out += ',';
            out += std::to_string(a.runs);
            out += '\n';
        }
    }
    return out;
}

void emit_experiment(const ExperimentResult& result, const std::string& out_dir,
                     const std::string& error) {
    if (out_dir.empty()) throw std::runtime_error("emit: empty output directory");
    std::vector<CurveRow> all;
    for (const SeedRun& sr : result.runs)
        all.insert(all.end(), sr.result.curves.begin(), sr.result.curves.end());
    atomic_write_text(out_dir + "/curves.csv", curves_csv(all));
    atomic_write_text(out_dir + "/results.json", experiment_json(result, error));
    for (const SeedRun& sr : result.runs) {
        ModelMeta meta;
        meta.entries = {{"run_id", sr.result.run_id},
                        {"config_hash", sr.result.config_hash},
                        {"code_version", sr.result.code_version},
                        {"seed", std::to_string(sr.result.seed)}};
        save_model(out_dir + "/model-s" + std::to_string(sr.result.seed) + ".model", sr.model,
                   meta);
    }
}

}  // namespace mixent
