#pragma once

#include "minbal/basis.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace minbal {

struct Truth {
    Vector propensity;     // P(z = 1 | X_i), strictly inside (0, 1)
    double mean = 0.0;     // population mean outcome
    Vector y0;             // potential outcomes under control (effect designs)
    Vector y1;             // potential outcomes under treatment, or the full outcome vector
    double sample_ate = 0.0;
    double sample_att = 0.0;
};

/// Units with covariates, an indicator (response or treatment) and outcomes.
/// In missing-data designs y is NaN exactly where z = 0.
struct Dataset {
    Matrix x;
    std::vector<std::string> covariate_names;
    Indicator z;
    Vector y;
    bool has_outcome = true;
    std::optional<Truth> truth;

    Eigen::Index size() const noexcept { return z.size(); }
    int count_z() const { return static_cast<int>(z.sum()); }
};

enum class Overlap { Good, Bad };
enum class OutcomeModel { A, B };

std::string_view to_string(Overlap overlap) noexcept;
std::string_view to_string(OutcomeModel model) noexcept;
Overlap parse_overlap(std::string_view tag);
OutcomeModel parse_outcome_model(std::string_view tag);

// Missing-outcome design with four latent Gaussians. Per unit the stream
// yields U1..U4, the outcome noise, then the uniform for z.
Dataset gen_kang_schafer(int n, Overlap overlap, std::uint64_t seed);

// Treatment design with ten latent Gaussians; both potential outcomes are kept
// in the truth record. Per unit the stream yields Z1..Z10, the noise, then the
// uniform for the treatment draw.
Dataset gen_wong_chan(int n, OutcomeModel model, std::uint64_t seed);

struct CsvSchema {
    std::string z_column = "z";
    std::optional<std::string> y_column;
    // Empty: every column except z, y and columns prefixed "truth_".
    std::vector<std::string> covariate_columns;
};

// Comma-separated, header row required, '.' decimals. Empty, "NA" or "nan"
// outcome cells become NaN. Throws DataError with a distinct code per failure.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

// Writes covariates, z, y (blank where missing) and truth_* columns; the
// output reads back through load_csv with the default schema.
void write_csv(const Dataset& data, const std::string& path);

} // namespace minbal
