#include <cmath>
#include <random>

#include <fmt/format.h>

#include "wigp/data.hpp"
#include "wigp/error.hpp"
#include "wigp/gp.hpp"
#include "wigp/kernels.hpp"
#include "wigp/keyvalue.hpp"

namespace wigp {

std::string to_string(TrendKind kind) {
    return kind == TrendKind::matern52 ? "matern52" : "matern52+periodic";
}

TrendKind parse_trend_kind(const std::string& text) {
    if (text == "matern52") return TrendKind::matern52;
    if (text == "matern52+periodic") return TrendKind::matern52_periodic;
    throw InvalidArgument(fmt::format("unknown synthetic kernel '{}' (expected matern52 or matern52+periodic)", text));
}

void SynthConfig::validate() const {
    if (instances < 1) throw InvalidArgument("synth: instances must be at least 1");
    if (points < 10) throw InvalidArgument("synth: points must be at least 10");
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(fmt::format("synth: {} must be positive", name));
    };
    positive(warp_length_fraction, "warp_length_fraction");
    positive(trend_length_scale, "trend_length_scale");
    positive(trend_amplitude, "trend_amplitude");
    positive(period, "period");
    positive(periodic_shape, "periodic_shape");
    positive(periodic_amplitude, "periodic_amplitude");
    // Zero is allowed for these two: it switches the warp or the noise off.
    if (!(warp_amplitude >= 0.0) || !std::isfinite(warp_amplitude))
        throw InvalidArgument("synth: warp_amplitude must be non-negative");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidArgument("synth: noise must be non-negative");
}

std::string SynthConfig::to_text() const {
    std::string out;
    out += "instances = " + std::to_string(instances) + "\n";
    out += "points = " + std::to_string(points) + "\n";
    out += "kernel = " + to_string(kind) + "\n";
    out += "warp_length_fraction = " + format_real(warp_length_fraction) + "\n";
    out += "warp_amplitude = " + format_real(warp_amplitude) + "\n";
    out += "trend_length_scale = " + format_real(trend_length_scale) + "\n";
    out += "trend_amplitude = " + format_real(trend_amplitude) + "\n";
    out += "period = " + format_real(period) + "\n";
    out += "periodic_shape = " + format_real(periodic_shape) + "\n";
    out += "periodic_amplitude = " + format_real(periodic_amplitude) + "\n";
    out += "noise = " + format_real(noise) + "\n";
    out += "seed = " + std::to_string(seed) + "\n";
    return out;
}

SynthConfig SynthConfig::from_text(const std::string& text) {
    SynthConfig c;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "instances")
            c.instances = static_cast<int>(parse_integer(key, value));
        else if (key == "points")
            c.points = static_cast<int>(parse_integer(key, value));
        else if (key == "kernel")
            c.kind = parse_trend_kind(value);
        else if (key == "warp_length_fraction")
            c.warp_length_fraction = parse_real(key, value);
        else if (key == "warp_amplitude")
            c.warp_amplitude = parse_real(key, value);
        else if (key == "trend_length_scale")
            c.trend_length_scale = parse_real(key, value);
        else if (key == "trend_amplitude")
            c.trend_amplitude = parse_real(key, value);
        else if (key == "period")
            c.period = parse_real(key, value);
        else if (key == "periodic_shape")
            c.periodic_shape = parse_real(key, value);
        else if (key == "periodic_amplitude")
            c.periodic_amplitude = parse_real(key, value);
        else if (key == "noise")
            c.noise = parse_real(key, value);
        else if (key == "seed")
            c.seed = static_cast<std::uint64_t>(parse_integer(key, value));
        else
            throw DataError(fmt::format("synth config: unknown key '{}'", key));
    }
    c.validate();
    return c;
}

namespace {

// Independent stream per (instance seed, component) so that switching the
// seasonal term on leaves every other component untouched.
enum class Stream : std::uint32_t { warp = 1, trend = 2, periodic = 3, noise = 4 };

std::uint64_t stream_seed(std::uint64_t instance_seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(instance_seed & 0xffffffffu),
                      static_cast<std::uint32_t>(instance_seed >> 32), static_cast<std::uint32_t>(stream)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Eigen::VectorXd sample_kernel(const std::string& expr, const std::vector<std::pair<std::string, double>>& values,
                              const InputPoints& points, std::uint64_t seed) {
    const KernelExpr kernel = KernelExpr::parse(expr);
    HyperVector theta = kernel.make_hyper(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kernel.num_params())));
    for (const auto& [name, v] : values) theta.set_value(name, v);
    return sample_prior(points, kernel, theta, seed);
}

}  // namespace

SynthComponents synth_components(const SynthConfig& config, int index) {
    config.validate();
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(index);
    const Eigen::Index n = config.points;
    const double range = static_cast<double>(n - 1);

    SynthComponents c;
    c.grid = Eigen::VectorXd::LinSpaced(n, 0.0, range);
    const InputPoints grid_points = single_channel(c.grid);

    // (2) log distances from a GP with an RBF kernel.
    if (config.warp_amplitude > 0.0) {
        const double amp2 = config.warp_amplitude * config.warp_amplitude;
        c.log_distance = sample_kernel("a * rbf(l)", {{"a", amp2}, {"l", config.warp_length_fraction * range}},
                                       grid_points, stream_seed(seed, Stream::warp));
    } else {
        c.log_distance = Eigen::VectorXd::Zero(n);
    }

    // (3) cumulative distances, rescaled to span the grid's range.
    c.warped_grid.resize(n);
    c.warped_grid[0] = c.grid[0];
    for (Eigen::Index i = 1; i < n; ++i) c.warped_grid[i] = c.warped_grid[i - 1] + std::exp(c.log_distance[i]);
    const double span = c.warped_grid[n - 1] - c.warped_grid[0];
    c.warped_grid = (c.grid[0] + (c.warped_grid.array() - c.grid[0]) * (range / span)).matrix();
    if (config.warp_amplitude == 0.0) c.warped_grid = c.grid;

    // (4) trend on the warped grid.
    const double trend_amp2 = config.trend_amplitude * config.trend_amplitude;
    c.trend = sample_kernel("a * matern52(l)", {{"a", trend_amp2}, {"l", config.trend_length_scale}},
                            single_channel(c.warped_grid), stream_seed(seed, Stream::trend));

    // (5) seasonality on the equidistant grid.
    c.periodic = Eigen::VectorXd::Zero(n);
    if (config.kind == TrendKind::matern52_periodic) {
        const double amp2 = config.periodic_amplitude * config.periodic_amplitude;
        c.periodic =
            sample_kernel("a * periodic(p, s)", {{"a", amp2}, {"p", config.period}, {"s", config.periodic_shape}},
                          grid_points, stream_seed(seed, Stream::periodic));
    }

    // (6) observation noise.
    c.noise.resize(n);
    std::mt19937_64 rng(stream_seed(seed, Stream::noise));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) c.noise[i] = config.noise * normal(rng);

    c.series.inputs = c.grid;
    c.series.outputs = c.trend + c.noise;
    if (config.kind == TrendKind::matern52_periodic) c.series.outputs += c.periodic;
    c.series.validate();
    return c;
}

TimeSeries synth_instance(const SynthConfig& config, int index) { return synth_components(config, index).series; }

}  // namespace wigp
