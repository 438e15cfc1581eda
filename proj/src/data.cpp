#include "wigp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "wigp/error.hpp"
#include "wigp/keyvalue.hpp"
#include "wigp/log.hpp"

namespace wigp {

void TimeSeries::validate() const {
    if (inputs.size() != outputs.size())
        throw DataError(fmt::format("time series has {} inputs but {} outputs", inputs.size(), outputs.size()));
    for (Eigen::Index i = 0; i < inputs.size(); ++i) {
        if (!std::isfinite(inputs[i]) || !std::isfinite(outputs[i]))
            throw DataError(fmt::format("time series has a non-finite value at index {}", i));
        if (i > 0 && !(inputs[i] > inputs[i - 1]))
            throw DataError(fmt::format("time series inputs are not strictly increasing at index {}", i));
    }
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw DataError(fmt::format("cannot create '{}': {}", path.parent_path().string(), ec.message()));
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(fmt::format("cannot write '{}'", tmp.string()));
        out << content;
        if (!out) throw DataError(fmt::format("write to '{}' failed", tmp.string()));
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError(fmt::format("cannot rename '{}' to '{}': {}", tmp.string(), path.string(), ec.message()));
}

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    s = s.substr(first, last - first + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        if (c == delimiter && !quoted) {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(trim(field));
    return fields;
}

std::size_t resolve_column(const std::vector<std::string>& header, const std::string& column,
                           const std::filesystem::path& path) {
    auto it = std::find(header.begin(), header.end(), column);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
    if (!column.empty() && std::all_of(column.begin(), column.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        const std::size_t index = std::stoul(column);
        if (index < header.size()) return index;
    }
    throw DataError(fmt::format("'{}': no column '{}'", path.string(), column));
}

}  // namespace

TimeSeries load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));

    std::string line;
    if (!std::getline(in, line)) throw DataError(fmt::format("'{}' is empty", path.string()));
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line = line.substr(3);
    const auto header = split_fields(line, options.delimiter);
    const std::size_t in_col = resolve_column(header, options.input_column, path);
    const std::size_t out_col = resolve_column(header, options.output_column, path);

    std::vector<std::pair<double, double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line, options.delimiter);
        auto cell = [&](std::size_t col) {
            if (col >= fields.size())
                throw DataError(fmt::format("'{}' row {}: missing column '{}'", path.string(), line_no, header[col]));
            const std::string& text = fields[col];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v))
                throw DataError(fmt::format("'{}' row {} column '{}': not a number: '{}'", path.string(), line_no,
                                            header[col], text));
            return v;
        };
        rows.emplace_back(cell(in_col), cell(out_col));
    }
    if (rows.size() < 2) throw DataError(fmt::format("'{}': need at least 2 data rows, found {}", path.string(), rows.size()));

    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    const double range = rows.back().first - rows.front().first;
    TimeSeries series;
    series.inputs.resize(static_cast<Eigen::Index>(rows.size()));
    series.outputs.resize(static_cast<Eigen::Index>(rows.size()));
    std::size_t perturbed = 0;
    int repeat = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        repeat = (i > 0 && rows[i].first == rows[i - 1].first) ? repeat + 1 : 0;
        double x = rows[i].first;
        if (repeat > 0) {
            x += repeat * 1e-9 * (range > 0.0 ? range : 1.0);
            ++perturbed;
        }
        series.inputs[static_cast<Eigen::Index>(i)] = x;
        series.outputs[static_cast<Eigen::Index>(i)] = rows[i].second;
    }
    if (perturbed > 0)
        log().info("'{}': shifted {} duplicate input value(s) by multiples of 1e-9 * range", path.string(), perturbed);
    series.validate();
    return series;
}

void write_csv(const std::filesystem::path& path, const TimeSeries& series, const std::string& input_name,
               const std::string& output_name) {
    std::string out = input_name + "," + output_name + "\n";
    for (Eigen::Index i = 0; i < series.size(); ++i)
        out += format_real(series.inputs[i]) + "," + format_real(series.outputs[i]) + "\n";
    write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Standardization

Standardization fit_standardization(const TimeSeries& series) {
    const Eigen::Index n = series.size();
    if (n < 2) throw DataError("standardize needs at least 2 observations");
    Standardization t;
    t.output_mean = series.outputs.mean();
    const double var = (series.outputs.array() - t.output_mean).square().mean();
    if (!(var > 0.0)) throw DataError("standardize: outputs have zero variance");
    t.output_scale = std::sqrt(var);
    t.input_offset = series.inputs[0];
    const double range = series.inputs[n - 1] - series.inputs[0];
    if (!(range > 0.0)) throw DataError("standardize: inputs have zero range");
    t.input_scale = static_cast<double>(n - 1) / range;
    return t;
}

TimeSeries apply_standardization(const TimeSeries& series, const Standardization& transform) {
    TimeSeries out;
    out.inputs = ((series.inputs.array() - transform.input_offset) * transform.input_scale).matrix();
    out.outputs = ((series.outputs.array() - transform.output_mean) / transform.output_scale).matrix();
    out.standardization = transform;
    return out;
}

TimeSeries standardize(const TimeSeries& series) {
    const Standardization fresh = fit_standardization(series);
    TimeSeries out = apply_standardization(series, fresh);
    if (series.standardization) {
        // Compose so the record still maps back to the original raw units.
        const auto& old = *series.standardization;
        Standardization combined;
        combined.output_mean = old.output_mean + old.output_scale * fresh.output_mean;
        combined.output_scale = old.output_scale * fresh.output_scale;
        combined.input_offset = old.input_offset + fresh.input_offset / old.input_scale;
        combined.input_scale = old.input_scale * fresh.input_scale;
        out.standardization = combined;
    }
    return out;
}

TimeSeries destandardize(const TimeSeries& series) {
    if (!series.standardization) return series;
    const auto& t = *series.standardization;
    TimeSeries out;
    out.inputs = (series.inputs.array() / t.input_scale + t.input_offset).matrix();
    out.outputs = (series.outputs.array() * t.output_scale + t.output_mean).matrix();
    return out;
}

std::pair<TimeSeries, TimeSeries> split_forecast(const TimeSeries& series, double holdout_fraction) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw InvalidArgument(fmt::format("holdout fraction must lie in (0, 1), got {}", holdout_fraction));
    const Eigen::Index n = series.size();
    // Guard against 0.2 * 10 landing a hair above 2.
    const auto test = static_cast<Eigen::Index>(std::ceil(holdout_fraction * static_cast<double>(n) - 1e-9));
    const Eigen::Index train = n - test;
    if (test < 1 || train < 1)
        throw InvalidArgument(
            fmt::format("holdout fraction {} leaves {} training and {} test points", holdout_fraction, train, test));
    TimeSeries a{series.inputs.head(train), series.outputs.head(train), series.standardization};
    TimeSeries b{series.inputs.tail(test), series.outputs.tail(test), series.standardization};
    return {std::move(a), std::move(b)};
}

}  // namespace wigp
