#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace wigp {

/// Affine maps applied by standardize(): outputs to zero mean and unit
/// population sd, inputs onto [0, n-1].
struct Standardization {
    double output_mean = 0.0;
    double output_scale = 1.0;
    double input_offset = 0.0;
    double input_scale = 1.0;

    double input(double raw) const { return (raw - input_offset) * input_scale; }
    double raw_input(double standardized) const { return standardized / input_scale + input_offset; }
    double output(double raw) const { return (raw - output_mean) / output_scale; }
    double raw_output(double standardized) const { return standardized * output_scale + output_mean; }
    double raw_variance(double standardized) const { return standardized * output_scale * output_scale; }
};

/// Ordered observations with strictly increasing inputs.
struct TimeSeries {
    Eigen::VectorXd inputs;
    Eigen::VectorXd outputs;
    /// Present when the values are in standardized units.
    std::optional<Standardization> standardization;

    Eigen::Index size() const { return inputs.size(); }
    /// Throws DataError on unequal lengths, non-finite values or non-increasing inputs.
    void validate() const;
};

struct CsvOptions {
    /// Column header name, or a 0-based column index written as digits.
    std::string input_column = "0";
    std::string output_column = "1";
    char delimiter = ',';
};

/// Reads a headered CSV. Rows are sorted by input; the k-th repeat of an input
/// value is shifted by k * 1e-9 * (input range).
TimeSeries load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes `input,output` rows (17 significant digits) via temp file + rename.
void write_csv(const std::filesystem::path& path, const TimeSeries& series, const std::string& input_name = "x",
               const std::string& output_name = "y");

/// Writes `content` to `path` atomically (temp file + rename), creating
/// missing parent directories.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

Standardization fit_standardization(const TimeSeries& series);
TimeSeries standardize(const TimeSeries& series);
/// Maps a raw series through an existing transform (e.g. held-out points
/// through the training set's transform).
TimeSeries apply_standardization(const TimeSeries& series, const Standardization& transform);
TimeSeries destandardize(const TimeSeries& series);

/// Suffix holdout: the last ceil(fraction * n) points form the test set.
std::pair<TimeSeries, TimeSeries> split_forecast(const TimeSeries& series, double holdout_fraction);

enum class TrendKind { matern52, matern52_periodic };

std::string to_string(TrendKind kind);
TrendKind parse_trend_kind(const std::string& text);

/// Knobs of the synthetic non-stationary generator. Lengths and periods are in
/// grid steps except `warp_length_fraction`, which is relative to the range.
struct SynthConfig {
    int instances = 100;
    int points = 100;
    TrendKind kind = TrendKind::matern52;
    double warp_length_fraction = 0.1;
    double warp_amplitude = 0.5;
    double trend_length_scale = 10.0;
    double trend_amplitude = 1.0;
    double period = 10.0;
    double periodic_shape = 1.0;
    double periodic_amplitude = 1.0;
    double noise = 0.1;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument when a knob is out of range.
    void validate() const;
    /// key=value lines, one per field.
    std::string to_text() const;
    static SynthConfig from_text(const std::string& text);
};

/// Every stage of one generated instance, for inspection and tests.
struct SynthComponents {
    Eigen::VectorXd grid;          // equidistant observation inputs
    Eigen::VectorXd log_distance;  // g, one value per grid point
    Eigen::VectorXd warped_grid;   // latent inputs of the trend
    Eigen::VectorXd trend;
    Eigen::VectorXd periodic;  // zeros unless seasonal
    Eigen::VectorXd noise;
    TimeSeries series;
};

/// Generates instance `index`; all randomness derives from seed + index.
SynthComponents synth_components(const SynthConfig& config, int index);
TimeSeries synth_instance(const SynthConfig& config, int index);

}  // namespace wigp
