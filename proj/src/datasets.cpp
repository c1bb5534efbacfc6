#include "mixent/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <cctype>
#include <sstream>
#include <stdexcept>

#include "mixent/special.hpp"

namespace mixent {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

void TriangleMixtureSpec::validate() const {
    if (dim < 1) throw std::runtime_error("triangle spec: dimension must be at least 1");
    if (marginal.empty()) throw std::runtime_error("triangle spec: no components");
    double wsum = 0.0;
    for (size_t i = 0; i < marginal.size(); ++i) {
        if (marginal[i].width <= 0.0)
            throw std::runtime_error("triangle spec: component " + std::to_string(i) +
                                     " has nonpositive width");
        if (marginal[i].weight <= 0.0)
            throw std::runtime_error("triangle spec: component " + std::to_string(i) +
                                     " has nonpositive weight");
        wsum += marginal[i].weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::runtime_error("triangle spec: weights sum to " + std::to_string(wsum));
    // Disjoint supports (touching endpoints allowed): sort by center.
    std::vector<size_t> order(marginal.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return marginal[a].center < marginal[b].center; });
    for (size_t i = 0; i + 1 < order.size(); ++i) {
        const TriangleComponent& a = marginal[order[i]];
        const TriangleComponent& b = marginal[order[i + 1]];
        if (a.center + a.width / 2.0 > b.center - b.width / 2.0 + 1e-12)
            throw std::runtime_error("triangle spec: components " + std::to_string(order[i]) +
                                     " and " + std::to_string(order[i + 1]) + " overlap");
    }
}

double TriangleMixtureSpec::marginal_entropy() const {
    // Disjoint supports: H = Shannon entropy of the weights plus the
    // weight-averaged triangle entropies 1/2 + log(width/2).
    double h = 0.0;
    for (const TriangleComponent& c : marginal)
        h += c.weight * (-std::log(c.weight) + 0.5 + std::log(c.width / 2.0));
    return h;
}

TriangleMixtureSpec TriangleMixtureSpec::product_bimodal(int dim) {
    // Width solving log 2 + 1/2 + log(w/2) = 2.5852 / 8 per marginal.
    const double w = 2.0 * std::exp(2.5852 / 8.0 - 0.5 - std::log(2.0));
    TriangleMixtureSpec spec;
    spec.dim = dim;
    spec.marginal = {{-1.0, w, 0.5}, {1.0, w, 0.5}};
    spec.validate();
    return spec;
}

TriangleMixtureSpec TriangleMixtureSpec::ten_component_1d() {
    TriangleMixtureSpec spec;
    spec.dim = 1;
    for (int k = 1; k <= 10; ++k) {
        TriangleComponent c;
        c.width = 0.1;
        c.center = 0.05 + 0.1 * static_cast<double>(k - 1);
        c.weight = static_cast<double>(k) / 55.0;
        spec.marginal.push_back(c);
    }
    spec.validate();
    return spec;
}

double UniformBodySpec::ball_radius() const {
    return std::exp(-unit_ball_log_volume(dim) / static_cast<double>(dim));
}

DatasetSpec DatasetSpec::make_triangle(TriangleMixtureSpec spec) {
    spec.validate();
    DatasetSpec d;
    d.kind = Kind::triangle;
    d.dim = spec.dim;
    d.triangle = std::move(spec);
    return d;
}

DatasetSpec DatasetSpec::make_two_moons(double noise) {
    if (noise < 0.0) throw std::runtime_error("two moons: noise must be nonnegative");
    DatasetSpec d;
    d.kind = Kind::two_moons;
    d.dim = 2;
    d.moons.noise = noise;
    return d;
}

DatasetSpec DatasetSpec::make_body(UniformBodySpec::Body body, int dim) {
    if (dim < 1) throw std::runtime_error("uniform body: dimension must be at least 1");
    DatasetSpec d;
    d.kind = body == UniformBodySpec::Body::ball ? Kind::ball : Kind::cube;
    d.dim = dim;
    return d;
}

namespace {

// Arc parameterizations behind the two-moons generator: the first is the
// upper unit half-circle, the second its reflection shifted by (1, -0.5).
void moon_point(int arc, double t, double& x, double& y) {
    if (arc == 0) {
        x = std::cos(t);
        y = std::sin(t);
    } else {
        x = 1.0 - std::cos(t);
        y = 0.5 - std::sin(t);
    }
}

double triangle_marginal_log_density(const TriangleMixtureSpec& spec, double x) {
    for (const TriangleComponent& c : spec.marginal) {
        const double half = c.width / 2.0;
        const double dist = std::abs(x - c.center);
        if (dist < half) {
            const double dens = c.weight * (2.0 / c.width) * (1.0 - dist / half);
            return dens > 0.0 ? std::log(dens) : kNegInf;
        }
    }
    return kNegInf;
}

double sample_triangle_marginal(const TriangleMixtureSpec& spec, Rng& rng) {
    // Component by cumulative weight, then center + (width/2)(U1 + U2 - 1):
    // the sum of two uniforms has exactly the triangular shape.
    const double u = rng.uniform();
    double cum = 0.0;
    size_t pick = spec.marginal.size() - 1;
    for (size_t i = 0; i < spec.marginal.size(); ++i) {
        cum += spec.marginal[i].weight;
        if (u < cum) {
            pick = i;
            break;
        }
    }
    const TriangleComponent& c = spec.marginal[pick];
    return c.center + (c.width / 2.0) * (rng.uniform() + rng.uniform() - 1.0);
}

}  // namespace

Tensor generate(const DatasetSpec& spec, long n, Rng& rng) {
    if (n < 1) throw std::runtime_error("generate: need at least one sample");
    Tensor out = Tensor::zeros(n, spec.dim);
    switch (spec.kind) {
        case DatasetSpec::Kind::triangle: {
            spec.triangle.validate();
            for (long i = 0; i < n; ++i)
                for (int j = 0; j < spec.dim; ++j)
                    out.at(i, j) = sample_triangle_marginal(spec.triangle, rng);
            break;
        }
        case DatasetSpec::Kind::two_moons: {
            const long first = (n + 1) / 2;
            for (long i = 0; i < n; ++i) {
                const double t = kPi * rng.uniform();
                double x, y;
                moon_point(i < first ? 0 : 1, t, x, y);
                out.at(i, 0) = x + spec.moons.noise * rng.normal();
                out.at(i, 1) = y + spec.moons.noise * rng.normal();
            }
            break;
        }
        case DatasetSpec::Kind::ball: {
            // Direction from a normalized Gaussian, radius from the U^(1/d)
            // law, scaled to the unit-volume radius.
            const UniformBodySpec body{UniformBodySpec::Body::ball, spec.dim};
            const double r = body.ball_radius();
            std::vector<double> z(spec.dim);
            for (long i = 0; i < n; ++i) {
                double norm2 = 0.0;
                for (int j = 0; j < spec.dim; ++j) {
                    z[j] = rng.normal();
                    norm2 += z[j] * z[j];
                }
                const double norm = std::sqrt(norm2);
                const double radial =
                    r * std::pow(rng.uniform(), 1.0 / static_cast<double>(spec.dim));
                for (int j = 0; j < spec.dim; ++j) out.at(i, j) = radial * z[j] / norm;
            }
            break;
        }
        case DatasetSpec::Kind::cube: {
            for (long i = 0; i < n; ++i)
                for (int j = 0; j < spec.dim; ++j) out.at(i, j) = rng.uniform() - 0.5;
            break;
        }
    }
    return out;
}

Tensor true_log_density(const DatasetSpec& spec, const Tensor& X) {
    if (X.rank() != 2 || X.cols() != spec.dim)
        throw std::runtime_error("true_log_density: expected [n, " + std::to_string(spec.dim) +
                                 "], got " + X.shape_str());
    const long n = X.rows();
    Tensor out = Tensor::zeros_vec(n);
    switch (spec.kind) {
        case DatasetSpec::Kind::triangle: {
            for (long i = 0; i < n; ++i) {
                double lp = 0.0;
                for (int j = 0; j < spec.dim; ++j)
                    lp += triangle_marginal_log_density(spec.triangle, X.at(i, j));
                out.at(i) = lp;
            }
            break;
        }
        case DatasetSpec::Kind::two_moons: {
            const double sigma = spec.moons.noise;
            if (sigma <= 0.0)
                throw std::runtime_error("two moons density: noise must be positive");
            // p(x) = (1/(2 pi_arcs)) sum_arcs (1/pi) int_0^pi phi_sigma(x - arc(t)) dt,
            // by Simpson over the arc parameter; terms more than ~9 sigma
            // from the closest node vanish at double precision.
            const long segments = 1024;
            const double h = kPi / static_cast<double>(segments);
            static thread_local std::vector<double> nodes_x, nodes_y, logw;
            if (nodes_x.size() != 2 * (segments + 1)) {
                nodes_x.assign(2 * (segments + 1), 0.0);
                nodes_y.assign(2 * (segments + 1), 0.0);
                logw.assign(2 * (segments + 1), 0.0);
                for (int arc = 0; arc < 2; ++arc)
                    for (long s = 0; s <= segments; ++s) {
                        const long idx = arc * (segments + 1) + s;
                        moon_point(arc, h * static_cast<double>(s), nodes_x[idx], nodes_y[idx]);
                        const double simpson = (s == 0 || s == segments) ? 1.0 : (s % 2 == 1 ? 4.0 : 2.0);
                        logw[idx] = std::log(simpson * h / 3.0);
                    }
            }
            const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
            // 1/2 mixture * 1/pi arc measure * Gaussian normalizer
            const double log_pref = -std::log(2.0) - std::log(kPi) - std::log(2.0 * kPi * sigma * sigma);
            std::vector<double> expo(nodes_x.size());
            for (long i = 0; i < n; ++i) {
                const double px = X.at(i, 0), py = X.at(i, 1);
                double best = kNegInf;
                for (size_t s = 0; s < nodes_x.size(); ++s) {
                    const double dx = px - nodes_x[s], dy = py - nodes_y[s];
                    expo[s] = logw[s] - (dx * dx + dy * dy) * inv2s2;
                    best = std::max(best, expo[s]);
                }
                double acc = 0.0;
                for (size_t s = 0; s < expo.size(); ++s) {
                    const double e = expo[s] - best;
                    if (e > -40.0) acc += std::exp(e);
                }
                out.at(i) = log_pref + best + std::log(acc);
            }
            break;
        }
        case DatasetSpec::Kind::ball: {
            const UniformBodySpec body{UniformBodySpec::Body::ball, spec.dim};
            const double r2 = body.ball_radius() * body.ball_radius();
            for (long i = 0; i < n; ++i) {
                double s = 0.0;
                for (int j = 0; j < spec.dim; ++j) s += X.at(i, j) * X.at(i, j);
                out.at(i) = s <= r2 ? 0.0 : kNegInf;
            }
            break;
        }
        case DatasetSpec::Kind::cube: {
            for (long i = 0; i < n; ++i) {
                bool inside = true;
                for (int j = 0; j < spec.dim; ++j)
                    inside = inside && std::abs(X.at(i, j)) <= 0.5;
                out.at(i) = inside ? 0.0 : kNegInf;
            }
            break;
        }
    }
    return out;
}

std::optional<double> true_entropy(const DatasetSpec& spec) {
    switch (spec.kind) {
        case DatasetSpec::Kind::triangle:
            return spec.triangle.entropy();
        case DatasetSpec::Kind::ball:
        case DatasetSpec::Kind::cube:
            return 0.0;  // unit volume, density 1 on the support
        case DatasetSpec::Kind::two_moons:
            return std::nullopt;
    }
    return std::nullopt;
}

Tensor load_delimited(const std::string& path, char delimiter, bool skip_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_delimited: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    long cols = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && skip_header) continue;
        if (line.empty()) continue;
        std::vector<double> row;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t next = line.find(delimiter, pos);
            if (next == std::string::npos) next = line.size();
            const std::string field = line.substr(pos, next - pos);
            size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(field, &used);
            } catch (const std::exception&) {
                throw std::runtime_error("load_delimited: " + path + " line " +
                                         std::to_string(line_no) + ": non-numeric field '" + field +
                                         "'");
            }
            while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used])))
                ++used;
            if (used != field.size())
                throw std::runtime_error("load_delimited: " + path + " line " +
                                         std::to_string(line_no) + ": non-numeric field '" + field +
                                         "'");
            row.push_back(v);
            pos = next + 1;
            if (next == line.size()) break;
        }
        if (cols < 0) cols = static_cast<long>(row.size());
        if (static_cast<long>(row.size()) != cols)
            throw std::runtime_error("load_delimited: " + path + " line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(cols) + " fields, got " +
                                     std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("load_delimited: " + path + " has no data rows");
    Tensor out = Tensor::zeros(static_cast<long>(rows.size()), cols);
    for (long i = 0; i < out.rows(); ++i)
        for (long j = 0; j < cols; ++j) out.at(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return out;
}

}  // namespace mixent
