#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mixent/correction.hpp"
#include "mixent/gmm.hpp"

namespace mixent {

// Writes `content` to a sibling temp file and renames it into place, so a
// crash can never leave a truncated file at `path`. Parent directories are
// created as needed.
void atomic_write_text(const std::string& path, const std::string& content);

// Free-form key/value lines echoed into the model header (config hash, code
// version, ...). Keys are single tokens; values run to the end of the line.
struct ModelMeta {
    std::vector<std::pair<std::string, std::string>> entries;
};

// A base density plus, optionally, its trained correction together with the
// estimated log normalizer log mean_Q e^T and the sample count behind it.
struct GibbsBundle {
    GaussianMixture base;
    std::optional<CorrectionNetwork> correction;
    double log_normalizer = 0.0;
    long normalizer_samples = 0;
};

// Versioned structured-text model files: named fields, shapes, and flat value
// arrays printed at 17 significant digits, so a reload is bit-exact. A file
// holds either a bare mixture (kind "gmm") or a full bundle (kind "gibbs");
// saving a bundle without a correction writes the bare-mixture kind.
void save_model(const std::string& path, const GaussianMixture& gmm, const ModelMeta& meta = {});
void save_model(const std::string& path, const GibbsBundle& bundle, const ModelMeta& meta = {});

struct LoadedModel {
    std::string kind;  // "gmm" or "gibbs"
    GibbsBundle bundle;
    ModelMeta meta;
};
LoadedModel load_model(const std::string& path);

}  // namespace mixent
