#include "mixent/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mixent {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw std::runtime_error("config " + (path.empty() ? "/" : path) + ": " + msg);
}

// Tracks which keys of one JSON object were consumed so leftovers can be
// rejected by name — typos in config files must never pass silently.
struct ObjectReader {
    const json& j;
    std::string path;
    std::set<std::string> seen;

    ObjectReader(const json& jj, std::string p) : j(jj), path(std::move(p)) {
        if (!j.is_object()) fail(path, "expected an object");
    }
    const json* opt(const std::string& key) {
        seen.insert(key);
        auto it = j.find(key);
        return it == j.end() ? nullptr : &*it;
    }
    const json& req(const std::string& key) {
        const json* p = opt(key);
        if (p == nullptr) fail(path, "missing required key '" + key + "'");
        return *p;
    }
    void finish() const {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!seen.count(it.key())) fail(path + "/" + it.key(), "unknown key");
    }
};

long read_long(const json& v, const std::string& path, long lo, long hi) {
    if (!v.is_number_integer())
        fail(path, "expected an integer, got " + std::string(v.type_name()));
    const long x = v.get<long>();
    if (x < lo || x > hi)
        fail(path, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
    return x;
}

double read_double(const json& v, const std::string& path, double lo, double hi) {
    if (!v.is_number()) fail(path, "expected a number, got " + std::string(v.type_name()));
    const double x = v.get<double>();
    if (!(x >= lo && x <= hi))
        fail(path, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
    return x;
}

bool read_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected a boolean, got " + std::string(v.type_name()));
    return v.get<bool>();
}

std::string read_string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string, got " + std::string(v.type_name()));
    return v.get<std::string>();
}

DataConfig parse_dataset(const json& j, const std::string& path) {
    ObjectReader o(j, path);
    DataConfig d;
    const std::string kind = read_string(o.req("kind"), path + "/kind");

    if (kind == "csv") {
        d.synthetic = false;
        d.train_path = read_string(o.req("train"), path + "/train");
        d.val_path = read_string(o.req("val"), path + "/val");
        if (d.train_path.empty() || d.val_path.empty())
            fail(path, "train and val paths must be nonempty");
        if (const json* v = o.opt("delimiter")) {
            const std::string s = read_string(*v, path + "/delimiter");
            if (s.size() != 1) fail(path + "/delimiter", "must be a single character");
            d.delimiter = s[0];
        }
        if (const json* v = o.opt("header")) d.header = read_bool(*v, path + "/header");
        o.finish();
        return d;
    }

    if (kind == "triangle") {
        const int dim =
            static_cast<int>(read_long(o.req("dim"), path + "/dim", 1, 4096));
        if (const json* v = o.opt("marginal")) {
            if (!v->is_array() || v->empty()) fail(path + "/marginal", "expected a nonempty array");
            TriangleMixtureSpec spec;
            spec.dim = dim;
            for (size_t i = 0; i < v->size(); ++i) {
                const std::string cpath = path + "/marginal/" + std::to_string(i);
                ObjectReader c((*v)[i], cpath);
                TriangleComponent tc;
                tc.center = read_double(c.req("center"), cpath + "/center", -1e12, 1e12);
                tc.width = read_double(c.req("width"), cpath + "/width", 1e-12, 1e12);
                tc.weight = read_double(c.req("weight"), cpath + "/weight", 1e-12, 1.0);
                c.finish();
                spec.marginal.push_back(tc);
            }
            spec.validate();
            d.spec = DatasetSpec::make_triangle(spec);
        } else {
            d.spec = DatasetSpec::make_triangle(dim == 1 ? TriangleMixtureSpec::ten_component_1d()
                                                         : TriangleMixtureSpec::product_bimodal(dim));
        }
    } else if (kind == "two_moons") {
        double noise = 0.05;
        if (const json* v = o.opt("noise")) noise = read_double(*v, path + "/noise", 0.0, 10.0);
        if (const json* v = o.opt("dim"))
            if (read_long(*v, path + "/dim", 2, 2) != 2) fail(path + "/dim", "two_moons is 2-d");
        d.spec = DatasetSpec::make_two_moons(noise);
    } else if (kind == "ball" || kind == "cube") {
        const int dim = static_cast<int>(read_long(o.req("dim"), path + "/dim", 1, 4096));
        d.spec = DatasetSpec::make_body(
            kind == "ball" ? UniformBodySpec::Body::ball : UniformBodySpec::Body::cube, dim);
    } else {
        fail(path + "/kind",
             "unknown dataset '" + kind + "' (triangle, two_moons, ball, cube, csv)");
    }

    if (const json* v = o.opt("n_train")) d.n_train = read_long(*v, path + "/n_train", 1, 100000000);
    if (const json* v = o.opt("n_val")) d.n_val = read_long(*v, path + "/n_val", 1, 100000000);
    o.finish();
    return d;
}

// Benchmark-protocol defaults that vary with the dataset: component count,
// trunk widths, cross-entropy epochs, and learning rate.
struct ProtocolDefaults {
    int components = 16;
    std::vector<int> widths{500, 500};
    int base_epochs = 50;
    double lr = 1e-3;
};

ProtocolDefaults defaults_for(const DataConfig& d) {
    ProtocolDefaults p;
    if (!d.synthetic) return p;
    switch (d.spec.kind) {
        case DatasetSpec::Kind::two_moons:
            p.components = 8;
            break;
        case DatasetSpec::Kind::triangle:
            p.components = 16;
            break;
        case DatasetSpec::Kind::ball:
            p.components = 1;
            p.widths = {200, 200};
            p.base_epochs = 10;
            break;
        case DatasetSpec::Kind::cube:
            p.components = 1;
            p.widths = {1000, 1000, 500};
            p.base_epochs = 10;
            p.lr = 1e-4;
            break;
    }
    return p;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: ") + e.what());
    }

    ObjectReader o(root, "");
    ExperimentConfig cfg;
    cfg.data = parse_dataset(o.req("dataset"), "/dataset");
    const ProtocolDefaults proto = defaults_for(cfg.data);
    cfg.base.components = proto.components;
    cfg.base.epochs = proto.base_epochs;
    cfg.correction.net.widths = proto.widths;
    cfg.adam.lr = proto.lr;
    cfg.adam.weight_decay = 1e-4;

    if (const json* v = o.opt("name")) {
        cfg.name = read_string(*v, "/name");
        if (cfg.name.empty()) fail("/name", "must be nonempty");
        // The name is spliced into run ids, file names, and CSV cells.
        if (cfg.name.find_first_not_of(
                "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-") !=
            std::string::npos)
            fail("/name", "may contain only letters, digits, '.', '_', and '-'");
    }

    if (const json* v = o.opt("base")) {
        ObjectReader b(*v, "/base");
        if (const json* x = b.opt("components"))
            cfg.base.components = static_cast<int>(read_long(*x, "/base/components", 1, 4096));
        if (const json* x = b.opt("covariance")) {
            const std::string s = read_string(*x, "/base/covariance");
            if (s == "diag")
                cfg.base.diagonal = true;
            else if (s == "full")
                cfg.base.diagonal = false;
            else
                fail("/base/covariance", "must be 'full' or 'diag'");
        }
        if (const json* x = b.opt("init")) {
            cfg.base.init = read_string(*x, "/base/init");
            if (cfg.base.init != "data" && cfg.base.init != "zero")
                fail("/base/init", "must be 'data' or 'zero'");
        }
        if (const json* x = b.opt("epochs"))
            cfg.base.epochs = static_cast<int>(read_long(*x, "/base/epochs", 0, 1000000));
        b.finish();
    }

    if (const json* v = o.opt("correction")) {
        ObjectReader c(*v, "/correction");
        if (const json* x = c.opt("variant")) {
            const std::string s = read_string(*x, "/correction/variant");
            if (s == "plain")
                cfg.correction.net.variant = CorrectionConfig::Variant::plain;
            else if (s == "mixture")
                cfg.correction.net.variant = CorrectionConfig::Variant::mixture;
            else
                fail("/correction/variant", "must be 'plain' or 'mixture'");
        }
        if (const json* x = c.opt("widths")) {
            if (!x->is_array() || x->empty())
                fail("/correction/widths", "expected a nonempty array");
            cfg.correction.net.widths.clear();
            for (size_t i = 0; i < x->size(); ++i)
                cfg.correction.net.widths.push_back(static_cast<int>(
                    read_long((*x)[i], "/correction/widths/" + std::to_string(i), 1, 100000)));
        }
        if (const json* x = c.opt("epsilon"))
            cfg.correction.net.epsilon = read_double(*x, "/correction/epsilon", 1e-300, 1.0);
        if (const json* x = c.opt("relevance_cutoff"))
            cfg.correction.net.relevance_cutoff =
                read_double(*x, "/correction/relevance_cutoff", 0.0, 0.5);
        if (const json* x = c.opt("relevance_det_term"))
            cfg.correction.net.relevance_det_term =
                read_bool(*x, "/correction/relevance_det_term");
        if (const json* x = c.opt("epochs"))
            cfg.correction.epochs = static_cast<int>(read_long(*x, "/correction/epochs", 0, 1000000));
        if (const json* x = c.opt("q_samples"))
            cfg.correction.q_samples = read_long(*x, "/correction/q_samples", 0, 1000000000);
        if (const json* x = c.opt("ema_decay"))
            cfg.correction.ema_decay = read_double(*x, "/correction/ema_decay", 0.0, 0.999999);
        if (const json* x = c.opt("resample_q"))
            cfg.correction.resample_q = read_bool(*x, "/correction/resample_q");
        if (const json* x = c.opt("curve_eval"))
            cfg.correction.curve_eval = read_long(*x, "/correction/curve_eval", -1, 1000000000);
        c.finish();
    }

    if (const json* v = o.opt("optimizer")) {
        ObjectReader p(*v, "/optimizer");
        if (const json* x = p.opt("learning_rate"))
            cfg.adam.lr = read_double(*x, "/optimizer/learning_rate", 1e-12, 10.0);
        if (const json* x = p.opt("weight_decay"))
            cfg.adam.weight_decay = read_double(*x, "/optimizer/weight_decay", 0.0, 10.0);
        if (const json* x = p.opt("batch_size"))
            cfg.batch_size = read_long(*x, "/optimizer/batch_size", 1, 10000000);
        p.finish();
    }

    if (const json* v = o.opt("evaluation")) {
        ObjectReader e(*v, "/evaluation");
        if (const json* x = e.opt("knn_k"))
            cfg.eval.knn_k = static_cast<int>(read_long(*x, "/evaluation/knn_k", 0, 10000));
        if (const json* x = e.opt("kde_h"))
            cfg.eval.kde_h = read_double(*x, "/evaluation/kde_h", 0.0, 1e6);
        if (const json* x = e.opt("mc_oracle"))
            cfg.eval.mc_oracle = read_bool(*x, "/evaluation/mc_oracle");
        e.finish();
    }
    if (cfg.eval.mc_oracle && !cfg.data.synthetic)
        fail("/evaluation/mc_oracle", "needs a synthetic dataset with an exact density");

    if (const json* v = o.opt("seeds")) {
        if (!v->is_array() || v->empty()) fail("/seeds", "expected a nonempty array");
        cfg.seeds.clear();
        for (size_t i = 0; i < v->size(); ++i) {
            const json& s = (*v)[i];
            const std::string spath = "/seeds/" + std::to_string(i);
            if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() &&
                                           s.get<long long>() < 0))
                fail(spath, "seeds must be nonnegative integers");
            cfg.seeds.push_back(s.get<uint64_t>());
        }
    }
    if (const json* v = o.opt("threads"))
        cfg.threads = static_cast<int>(read_long(*v, "/threads", 1, 1024));
    if (const json* v = o.opt("output_dir")) cfg.output_dir = read_string(*v, "/output_dir");
    o.finish();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

json canonical(const ExperimentConfig& c) {
    json d;
    if (c.data.synthetic) {
        switch (c.data.spec.kind) {
            case DatasetSpec::Kind::triangle: {
                d["kind"] = "triangle";
                d["dim"] = c.data.spec.dim;
                json comps = json::array();
                for (const TriangleComponent& tc : c.data.spec.triangle.marginal)
                    comps.push_back(
                        {{"center", tc.center}, {"width", tc.width}, {"weight", tc.weight}});
                d["marginal"] = comps;
                break;
            }
            case DatasetSpec::Kind::two_moons:
                d["kind"] = "two_moons";
                d["noise"] = c.data.spec.moons.noise;
                break;
            case DatasetSpec::Kind::ball:
            case DatasetSpec::Kind::cube:
                d["kind"] = c.data.spec.kind == DatasetSpec::Kind::ball ? "ball" : "cube";
                d["dim"] = c.data.spec.dim;
                break;
        }
        d["n_train"] = c.data.n_train;
        d["n_val"] = c.data.n_val;
    } else {
        d["kind"] = "csv";
        d["train"] = c.data.train_path;
        d["val"] = c.data.val_path;
        d["delimiter"] = std::string(1, c.data.delimiter);
        d["header"] = c.data.header;
    }

    json j;
    j["name"] = c.name;
    j["dataset"] = d;
    j["base"] = {{"components", c.base.components},
                 {"covariance", c.base.diagonal ? "diag" : "full"},
                 {"init", c.base.init},
                 {"epochs", c.base.epochs}};
    j["correction"] = {
        {"variant",
         c.correction.net.variant == CorrectionConfig::Variant::plain ? "plain" : "mixture"},
        {"widths", c.correction.net.widths},
        {"epsilon", c.correction.net.epsilon},
        {"relevance_cutoff", c.correction.net.relevance_cutoff},
        {"relevance_det_term", c.correction.net.relevance_det_term},
        {"epochs", c.correction.epochs},
        {"q_samples", c.correction.q_samples},
        {"ema_decay", c.correction.ema_decay},
        {"resample_q", c.correction.resample_q},
        {"curve_eval", c.correction.curve_eval}};
    j["optimizer"] = {{"learning_rate", c.adam.lr},
                      {"weight_decay", c.adam.weight_decay},
                      {"batch_size", c.batch_size}};
    j["evaluation"] =
        {{"knn_k", c.eval.knn_k}, {"kde_h", c.eval.kde_h}, {"mc_oracle", c.eval.mc_oracle}};
    j["seeds"] = c.seeds;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir;
    return j;
}

}  // namespace

std::string config_canonical_json(const ExperimentConfig& cfg) { return canonical(cfg).dump(2); }

uint64_t config_hash(const ExperimentConfig& cfg) {
    // The hash identifies what the run computes, so the presentation-only
    // fields (label, destination directory) stay out of it: relabeling an
    // experiment or redirecting its output must not change its identity.
    json j = canonical(cfg);
    j.erase("name");
    j.erase("output_dir");
    const std::string s = j.dump();
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    return buf;
}

}  // namespace mixent
