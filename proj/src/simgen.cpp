#include "minbal/simgen.hpp"

#include "minbal/errors.hpp"
#include "minbal/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace minbal {

std::string_view to_string(Overlap overlap) noexcept { return overlap == Overlap::Good ? "good" : "bad"; }
std::string_view to_string(OutcomeModel model) noexcept { return model == OutcomeModel::A ? "A" : "B"; }

Overlap parse_overlap(std::string_view tag) {
    if (tag == "good") return Overlap::Good;
    if (tag == "bad") return Overlap::Bad;
    throw UsageError("unknown overlap '" + std::string(tag) + "' (expected good|bad)");
}

OutcomeModel parse_outcome_model(std::string_view tag) {
    if (tag == "A" || tag == "a") return OutcomeModel::A;
    if (tag == "B" || tag == "b") return OutcomeModel::B;
    throw UsageError("unknown outcome model '" + std::string(tag) + "' (expected A|B)");
}

namespace {

double logistic(double eta) {
    return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

// Keeps generated propensities strictly inside (0, 1).
double clamp_open(double p) {
    constexpr double lo = std::numeric_limits<double>::min();
    return std::clamp(p, lo, std::nextafter(1.0, 0.0));
}

void require_size(int n) {
    if (n < 2) throw UsageError("simulation needs n >= 2");
}

} // namespace

Dataset gen_kang_schafer(int n, Overlap overlap, std::uint64_t seed) {
    require_size(n);
    RandomStream stream(split_seed(seed, 0));
    const double u2_coef = overlap == Overlap::Good ? -2.0 : -0.5;

    Dataset d;
    d.x.resize(n, 4);
    d.covariate_names = {"x1", "x2", "x3", "x4"};
    d.z.resize(n);
    d.y.resize(n);
    Truth truth;
    truth.propensity.resize(n);
    truth.y1.resize(n);
    truth.mean = 210.0;

    for (int i = 0; i < n; ++i) {
        const double u1 = stream.normal();
        const double u2 = stream.normal();
        const double u3 = stream.normal();
        const double u4 = stream.normal();
        const double noise = stream.normal();
        d.x(i, 0) = std::exp(u1 / 2.0);
        d.x(i, 1) = u2 / (1.0 + std::exp(u1)) + 10.0;
        d.x(i, 2) = std::pow(u1 * u3 / 25.0 + 0.6, 3);
        d.x(i, 3) = std::pow(u2 + u4 + 20.0, 2);
        const double y = 210.0 + 27.4 * u1 + 13.7 * u2 + 13.7 * u3 + 13.7 * u4 + noise;
        const double p = clamp_open(logistic(-u1 + u2_coef * u2 - 0.25 * u3 - 0.1 * u4));
        const bool respond = stream.uniform() < p;
        d.z[i] = respond ? 1 : 0;
        d.y[i] = respond ? y : std::numeric_limits<double>::quiet_NaN();
        truth.propensity[i] = p;
        truth.y1[i] = y;
    }
    d.has_outcome = true;
    d.truth = std::move(truth);
    return d;
}

Dataset gen_wong_chan(int n, OutcomeModel model, std::uint64_t seed) {
    require_size(n);
    RandomStream stream(split_seed(seed, 0));

    Dataset d;
    d.x.resize(n, 10);
    for (int j = 1; j <= 10; ++j) d.covariate_names.push_back("x" + std::to_string(j));
    d.z.resize(n);
    d.y.resize(n);
    Truth truth;
    truth.propensity.resize(n);
    truth.y0.resize(n);
    truth.y1.resize(n);
    truth.mean = std::numeric_limits<double>::quiet_NaN();

    double ate_sum = 0.0, att_sum = 0.0;
    int treated = 0;
    double latent[10];
    for (int i = 0; i < n; ++i) {
        for (double& v : latent) v = stream.normal();
        const double noise = stream.normal();
        const double z1 = latent[0], z2 = latent[1], z3 = latent[2], z4 = latent[3];
        d.x(i, 0) = std::exp(z1 / 2.0);
        d.x(i, 1) = z2 / (1.0 + std::exp(z1));
        d.x(i, 2) = std::pow(z1 * z3 / 25.0 + 0.6, 3);
        d.x(i, 3) = std::pow(z2 + z4 + 20.0, 2);
        for (int j = 4; j < 10; ++j) d.x(i, j) = latent[j];

        const double p = clamp_open(logistic(-z1 - 0.1 * z4));
        const bool t = stream.uniform() < p;

        double y0, y1;
        if (model == OutcomeModel::A) {
            const double signal = 27.4 * z1 + 13.7 * z2 + 13.7 * z3 + 13.7 * z4;
            y0 = 210.0 - 0.5 * signal + noise;
            y1 = 210.0 + 1.0 * signal + noise;
        } else {
            y0 = z1 * std::pow(z2, 3) * z3 * z3 * z4 + z4 * std::sqrt(std::abs(z1)) + noise;
            y1 = y0;
        }
        d.z[i] = t ? 1 : 0;
        d.y[i] = t ? y1 : y0;
        truth.propensity[i] = p;
        truth.y0[i] = y0;
        truth.y1[i] = y1;
        ate_sum += y1 - y0;
        if (t) {
            att_sum += y1 - y0;
            ++treated;
        }
    }
    truth.sample_ate = ate_sum / n;
    truth.sample_att = treated > 0 ? att_sum / treated : std::numeric_limits<double>::quiet_NaN();
    d.has_outcome = true;
    d.truth = std::move(truth);
    return d;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

bool parse_number(const std::string& cell, double& value) {
    if (cell.empty()) return false;
    const char* first = cell.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), value);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN";
}

std::string where(std::size_t row, const std::string& column) {
    return "row " + std::to_string(row) + ", column '" + column + "'";
}

} // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError(DataError::Code::FileNotFound, "cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw DataError(DataError::Code::EmptyFile, "'" + path + "' is empty");
    const std::vector<std::string> header = split_fields(line);

    auto column_index = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(DataError::Code::MissingColumn, "column '" + name + "' not found in '" + path + "'");
        return static_cast<std::size_t>(it - header.begin());
    };

    const std::size_t z_col = column_index(schema.z_column);
    std::optional<std::size_t> y_col;
    if (schema.y_column) y_col = column_index(*schema.y_column);

    std::vector<std::string> cov_names = schema.covariate_columns;
    if (cov_names.empty()) {
        for (const auto& h : header) {
            if (h == schema.z_column || (schema.y_column && h == *schema.y_column) || h.rfind("truth_", 0) == 0) continue;
            if (!schema.y_column && h == "y") continue;
            cov_names.push_back(h);
        }
    }
    if (cov_names.empty()) throw DataError(DataError::Code::MissingColumn, "no covariate columns in '" + path + "'");
    std::vector<std::size_t> cov_cols;
    for (const auto& c : cov_names) cov_cols.push_back(column_index(c));

    std::vector<double> xs;
    std::vector<int> zs;
    std::vector<double> ys;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw DataError(DataError::Code::ParseFailure, "row " + std::to_string(row) + ": expected " +
                                                               std::to_string(header.size()) + " fields, got " +
                                                               std::to_string(fields.size()));
        const std::string& zcell = fields[z_col];
        if (zcell == "0")
            zs.push_back(0);
        else if (zcell == "1")
            zs.push_back(1);
        else
            throw DataError(DataError::Code::InvalidIndicator,
                            where(row, schema.z_column) + ": indicator must be 0 or 1, got '" + zcell + "'");

        for (std::size_t c = 0; c < cov_cols.size(); ++c) {
            double v = 0.0;
            if (!parse_number(fields[cov_cols[c]], v))
                throw DataError(DataError::Code::ParseFailure,
                                where(row, cov_names[c]) + ": cannot parse '" + fields[cov_cols[c]] + "'");
            if (!std::isfinite(v))
                throw DataError(DataError::Code::NonFiniteValue, where(row, cov_names[c]) + ": non-finite covariate");
            xs.push_back(v);
        }
        if (y_col) {
            const std::string& cell = fields[*y_col];
            double v = std::numeric_limits<double>::quiet_NaN();
            if (!is_missing(cell) && !parse_number(cell, v))
                throw DataError(DataError::Code::ParseFailure, where(row, *schema.y_column) + ": cannot parse '" + cell + "'");
            ys.push_back(v);
        }
    }
    if (row == 0) throw DataError(DataError::Code::EmptyFile, "'" + path + "' has a header but no data rows");

    Dataset d;
    const auto n = static_cast<Eigen::Index>(row);
    const auto p = static_cast<Eigen::Index>(cov_cols.size());
    d.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, p);
    d.covariate_names = cov_names;
    d.z = Eigen::Map<const Indicator>(zs.data(), n);
    d.has_outcome = y_col.has_value();
    d.y = d.has_outcome ? Vector(Eigen::Map<const Vector>(ys.data(), n))
                        : Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    return d;
}

namespace {

std::string format_double(double v) {
    if (std::isnan(v)) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError(DataError::Code::FileNotFound, "cannot write '" + path + "'");
    const Eigen::Index n = data.size();
    for (const auto& name : data.covariate_names) out << name << ',';
    out << "z,y";
    const bool has_truth = data.truth.has_value();
    const bool has_potential = has_truth && data.truth->y0.size() == n;
    if (has_truth) out << ",truth_propensity";
    if (has_potential) out << ",truth_y0,truth_y1";
    out << '\n';
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << format_double(data.x(i, j)) << ',';
        out << data.z[i] << ',' << (data.has_outcome ? format_double(data.y[i]) : std::string());
        if (has_truth) out << ',' << format_double(data.truth->propensity[i]);
        if (has_potential) out << ',' << format_double(data.truth->y0[i]) << ',' << format_double(data.truth->y1[i]);
        out << '\n';
    }
    if (!out) throw DataError(DataError::Code::Generic, "failed writing '" + path + "'");
}

} // namespace minbal
