#include "mixent/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mixent {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_params(std::ostringstream& out, const ParameterStore& store) {
    for (long i = 0; i < store.count(); ++i) {
        const Tensor& t = store.value(i);
        for (long k = 0; k < t.size(); ++k)
            if (!std::isfinite(t.at(k)))
                throw std::runtime_error("cannot save non-finite parameter '" + store.name(i) +
                                         "'");
        out << "param " << store.name(i) << ' ' << t.rank();
        if (t.rank() == 1)
            out << ' ' << t.size();
        else if (t.rank() == 2)
            out << ' ' << t.rows() << ' ' << t.cols();
        out << '\n';
        if (t.rank() == 2) {
            for (long r = 0; r < t.rows(); ++r) {
                for (long c = 0; c < t.cols(); ++c)
                    out << (c ? " " : "") << fmt_double(t.at(r, c));
                out << '\n';
            }
        } else {
            for (long k = 0; k < t.size(); ++k) out << (k ? " " : "") << fmt_double(t.at(k));
            out << '\n';
        }
    }
}

void write_gmm_section(std::ostringstream& out, const GaussianMixture& gmm) {
    out << "section gmm " << gmm.components() << ' ' << gmm.dim() << ' '
        << (gmm.diagonal() ? "diag" : "full") << '\n';
    write_params(out, gmm.params());
    out << "end\n";
}

void write_correction_section(std::ostringstream& out, const CorrectionNetwork& net) {
    const CorrectionConfig& cfg = net.config();
    out << "section correction "
        << (cfg.variant == CorrectionConfig::Variant::plain ? "plain" : "mixture") << ' '
        << net.dim() << ' ' << net.components() << '\n';
    out << "config epsilon " << fmt_double(cfg.epsilon) << '\n';
    out << "config relevance_cutoff " << fmt_double(cfg.relevance_cutoff) << '\n';
    out << "config relevance_det_term " << (cfg.relevance_det_term ? 1 : 0) << '\n';
    out << "config widths";
    for (int w : cfg.widths) out << ' ' << w;
    out << '\n';
    write_params(out, net.params());
    out << "end\n";
}

void write_header(std::ostringstream& out, const ModelMeta& meta) {
    out << "mixent-model 1\n";
    for (const auto& [key, value] : meta.entries) {
        if (key.empty() || key.find_first_of(" \t") != std::string::npos)
            throw std::runtime_error("meta key '" + key + "' must be a single token");
        out << "meta " << key << ' ' << value << '\n';
    }
}

// Line-oriented reader that keeps enough position context for useful errors.
struct Reader {
    std::istream& in;
    const std::string& path;
    long line_no = 0;
    std::string line;

    bool next() {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    }
    std::runtime_error fail(const std::string& msg) const {
        return std::runtime_error(path + ": line " + std::to_string(line_no) + ": " + msg);
    }
};

double parse_double(const std::string& tok, const Reader& r) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size()) throw r.fail("bad number '" + tok + "'");
    return v;
}

long parse_long(const std::string& tok, const Reader& r) {
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (tok.empty() || end != tok.c_str() + tok.size()) throw r.fail("bad integer '" + tok + "'");
    return v;
}

// Reads one whitespace-separated line of exactly `n` doubles into dst[0..n).
void read_value_line(Reader& r, double* dst, long n) {
    if (!r.next()) throw r.fail("unexpected end of file inside a value block");
    std::istringstream ls(r.line);
    std::string tok;
    for (long k = 0; k < n; ++k) {
        if (!(ls >> tok)) throw r.fail("expected " + std::to_string(n) + " values");
        dst[k] = parse_double(tok, r);
    }
    if (ls >> tok) throw r.fail("trailing values past the expected " + std::to_string(n));
}

// Fills every slot of `store` from "param" blocks until the matching "end".
void read_params(Reader& r, ParameterStore& store, const std::string& what) {
    std::set<std::string> filled;
    while (true) {
        if (!r.next()) throw r.fail("unexpected end of file in " + what + " section");
        std::istringstream ls(r.line);
        std::string tag;
        ls >> tag;
        if (tag == "end") {
            if (static_cast<long>(filled.size()) != store.count())
                for (long i = 0; i < store.count(); ++i)
                    if (!filled.count(store.name(i)))
                        throw r.fail(what + " section is missing parameter '" + store.name(i) +
                                     "'");
            return;
        }
        if (tag != "param") throw r.fail("expected param or end, got '" + tag + "'");
        std::string name, tok;
        ls >> name >> tok;
        if (!store.has(name)) throw r.fail("unknown " + what + " parameter '" + name + "'");
        if (!filled.insert(name).second) throw r.fail("duplicate parameter '" + name + "'");
        Tensor& dst = store.value(name);
        const long rank = parse_long(tok, r);
        if (rank != dst.rank())
            throw r.fail("parameter '" + name + "' has rank " + std::to_string(rank) +
                         ", expected " + std::to_string(dst.rank()));
        if (rank == 1) {
            if (!(ls >> tok) || parse_long(tok, r) != dst.size())
                throw r.fail("parameter '" + name + "' has the wrong length");
            read_value_line(r, &dst.at(0), dst.size());
        } else if (rank == 2) {
            std::string tok2;
            if (!(ls >> tok >> tok2) || parse_long(tok, r) != dst.rows() ||
                parse_long(tok2, r) != dst.cols())
                throw r.fail("parameter '" + name + "' has the wrong shape");
            for (long row = 0; row < dst.rows(); ++row)
                read_value_line(r, &dst.at(row, 0), dst.cols());
        } else {
            read_value_line(r, &dst.at(0), 1);
        }
    }
}

std::string render_model(const GaussianMixture& base, const CorrectionNetwork* correction,
                         double log_normalizer, long normalizer_samples, const ModelMeta& meta) {
    std::ostringstream out;
    write_header(out, meta);
    out << "kind " << (correction != nullptr ? "gibbs" : "gmm") << '\n';
    if (correction != nullptr)
        out << "normalizer " << fmt_double(log_normalizer) << ' ' << normalizer_samples << '\n';
    write_gmm_section(out, base);
    if (correction != nullptr) write_correction_section(out, *correction);
    return out.str();
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code dir_ec;
        fs::create_directories(target.parent_path(), dir_ec);
        if (dir_ec)
            throw std::runtime_error("cannot create directory " + target.parent_path().string() +
                                     ": " + dir_ec.message());
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out.good()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec)
        throw std::runtime_error("cannot move " + tmp.string() + " into place: " + ec.message());
}

void save_model(const std::string& path, const GaussianMixture& gmm, const ModelMeta& meta) {
    atomic_write_text(path, render_model(gmm, nullptr, 0.0, 0, meta));
}

void save_model(const std::string& path, const GibbsBundle& bundle, const ModelMeta& meta) {
    const CorrectionNetwork* net = bundle.correction ? &*bundle.correction : nullptr;
    atomic_write_text(
        path, render_model(bundle.base, net, bundle.log_normalizer, bundle.normalizer_samples,
                           meta));
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    Reader r{in, path};

    if (!r.next()) throw r.fail("empty model file");
    {
        std::istringstream ls(r.line);
        std::string magic;
        int version = 0;
        ls >> magic >> version;
        if (magic != "mixent-model") throw r.fail("not a model file");
        if (version != 1) throw r.fail("unsupported format version " + std::to_string(version));
    }

    ModelMeta meta;
    std::string kind;
    while (true) {
        if (!r.next()) throw r.fail("missing kind line");
        std::istringstream ls(r.line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key;
            ls >> key;
            if (key.empty()) throw r.fail("meta line needs a key");
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            meta.entries.emplace_back(key, value);
        } else if (tag == "kind") {
            ls >> kind;
            if (kind != "gmm" && kind != "gibbs") throw r.fail("unknown kind '" + kind + "'");
            break;
        } else {
            throw r.fail("expected meta or kind, got '" + tag + "'");
        }
    }

    double log_normalizer = 0.0;
    long normalizer_samples = 0;
    if (kind == "gibbs") {
        if (!r.next()) throw r.fail("missing normalizer line");
        std::istringstream ls(r.line);
        std::string tag, v1, v2;
        ls >> tag >> v1 >> v2;
        if (tag != "normalizer") throw r.fail("expected normalizer, got '" + tag + "'");
        log_normalizer = parse_double(v1, r);
        normalizer_samples = parse_long(v2, r);
    }

    if (!r.next()) throw r.fail("missing gmm section");
    int M = 0, d = 0;
    bool diagonal = false;
    {
        std::istringstream ls(r.line);
        std::string tag, sec, cov;
        std::string m_tok, d_tok;
        ls >> tag >> sec >> m_tok >> d_tok >> cov;
        if (tag != "section" || sec != "gmm") throw r.fail("expected the gmm section");
        M = static_cast<int>(parse_long(m_tok, r));
        d = static_cast<int>(parse_long(d_tok, r));
        if (M < 1 || d < 1) throw r.fail("gmm shape must be positive");
        if (cov == "diag")
            diagonal = true;
        else if (cov == "full")
            diagonal = false;
        else
            throw r.fail("covariance must be diag or full, got '" + cov + "'");
    }
    GaussianMixture gmm(M, d, diagonal);
    read_params(r, gmm.params(), "gmm");

    std::optional<CorrectionNetwork> correction;
    if (kind == "gibbs") {
        if (!r.next()) throw r.fail("missing correction section");
        CorrectionConfig cfg;
        int cdim = 0, ccomp = 0;
        {
            std::istringstream ls(r.line);
            std::string tag, sec, variant, d_tok, m_tok;
            ls >> tag >> sec >> variant >> d_tok >> m_tok;
            if (tag != "section" || sec != "correction")
                throw r.fail("expected the correction section");
            if (variant == "plain")
                cfg.variant = CorrectionConfig::Variant::plain;
            else if (variant == "mixture")
                cfg.variant = CorrectionConfig::Variant::mixture;
            else
                throw r.fail("unknown correction variant '" + variant + "'");
            cdim = static_cast<int>(parse_long(d_tok, r));
            ccomp = static_cast<int>(parse_long(m_tok, r));
        }
        if (cdim != d || ccomp != M)
            throw r.fail("correction shape [" + std::to_string(cdim) + ", " +
                         std::to_string(ccomp) + " components] does not match the base");

        auto config_line = [&](const std::string& want) -> std::istringstream {
            if (!r.next()) throw r.fail("missing config " + want);
            std::istringstream ls(r.line);
            std::string tag, key;
            ls >> tag >> key;
            if (tag != "config" || key != want)
                throw r.fail("expected 'config " + want + "', got '" + r.line + "'");
            return ls;
        };
        std::string tok;
        {
            auto ls = config_line("epsilon");
            ls >> tok;
            cfg.epsilon = parse_double(tok, r);
        }
        {
            auto ls = config_line("relevance_cutoff");
            ls >> tok;
            cfg.relevance_cutoff = parse_double(tok, r);
        }
        {
            auto ls = config_line("relevance_det_term");
            ls >> tok;
            cfg.relevance_det_term = parse_long(tok, r) != 0;
        }
        {
            auto ls = config_line("widths");
            cfg.widths.clear();
            while (ls >> tok) cfg.widths.push_back(static_cast<int>(parse_long(tok, r)));
            if (cfg.widths.empty()) throw r.fail("widths list is empty");
        }
        Rng scratch(0);  // every weight is overwritten by the param blocks
        correction.emplace(cdim, ccomp, cfg, scratch);
        read_params(r, correction->params(), "correction");
    }

    if (r.next()) throw r.fail("unexpected trailing content '" + r.line + "'");
    return LoadedModel{kind,
                       GibbsBundle{std::move(gmm), std::move(correction), log_normalizer,
                                   normalizer_samples},
                       meta};
}

}  // namespace mixent
