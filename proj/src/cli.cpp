#include "wigp/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string_view>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wigp/data.hpp"
#include "wigp/error.hpp"
#include "wigp/keyvalue.hpp"
#include "wigp/log.hpp"
#include "wigp/warp.hpp"

namespace wigp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr const char* kModelHeader = "wigp-model 1";

std::string join_reals(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_real(v[i]);
    }
    return out;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

Eigen::VectorXd parse_reals(const std::string& key, const std::string& text) {
    const auto toks = split_ws(text);
    Eigen::VectorXd v(static_cast<Eigen::Index>(toks.size()));
    for (std::size_t i = 0; i < toks.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_real(key, toks[i]);
    return v;
}

}  // namespace

std::string serialize_model(const ModelFile& file) {
    const TrainedModel& m = file.model;
    std::string out = std::string(kModelHeader) + "\n";
    out += "variant " + to_string(file.variant) + "\n";
    out += "kernel " + m.kernel_source + "\n";
    for (std::size_t i = 0; i < m.theta.size(); ++i)
        out += "param " + m.theta.names()[i] + " " + format_real(m.theta.log_values()[static_cast<Eigen::Index>(i)]) + "\n";
    out += "log_stretch " + join_reals(m.warp.log_stretch) + "\n";
    out += "train_input " + join_reals(m.train.inputs) + "\n";
    out += "train_output " + join_reals(m.train.outputs) + "\n";
    if (m.train.standardization) {
        const auto& s = *m.train.standardization;
        out += fmt::format("standardization {} {} {} {}\n", format_real(s.output_mean), format_real(s.output_scale),
                           format_real(s.input_offset), format_real(s.input_scale));
    } else {
        out += "standardization none\n";
    }
    out += "objective " + format_real(m.objective) + "\n";
    out += fmt::format("converged {}\n", m.converged ? 1 : 0);
    out += "gradient_norm " + format_real(m.gradient_norm) + "\n";
    out += fmt::format("iterations {}\nevaluations {}\nrestart {}\nfailed_restarts {}\n", m.iterations, m.evaluations,
                       m.restart, m.failed_restarts);
    out += "jitter " + format_real(m.jitter) + "\n";
    out += "sigma_d " + format_real(m.sigma_d) + "\n";
    out += "hyperprior_scale " + format_real(m.hyperprior_scale) + "\n";
    return out;
}

ModelFile parse_model(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kModelHeader)
        throw DataError(fmt::format("not a model file (expected first line '{}')", kModelHeader));

    ModelFile file;
    TrainedModel& m = file.model;
    std::vector<std::string> names;
    std::vector<double> values;
    std::map<std::string, std::string> fields;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto space = line.find(' ');
        const std::string key = line.substr(0, space);
        const std::string rest = space == std::string::npos ? std::string() : line.substr(space + 1);
        if (key == "param") {
            const auto toks = split_ws(rest);
            if (toks.size() != 2) throw DataError(fmt::format("model file line {}: expected 'param <name> <log value>'", line_no));
            names.push_back(toks[0]);
            values.push_back(parse_real(toks[0], toks[1]));
        } else if (!fields.emplace(key, rest).second) {
            throw DataError(fmt::format("model file line {}: duplicate key '{}'", line_no, key));
        }
    }
    auto take = [&](const char* key) {
        auto it = fields.find(key);
        if (it == fields.end()) throw DataError(fmt::format("model file: missing '{}'", key));
        std::string v = it->second;
        fields.erase(it);
        return v;
    };
    auto take_int = [&](const char* key) { return static_cast<int>(parse_integer(key, take(key))); };

    file.variant = parse_variant(take("variant"));
    m.kind = model_kind(file.variant);
    m.kernel_source = take("kernel");
    const KernelExpr kernel = KernelExpr::parse(m.kernel_source);
    if (names != kernel.param_names())
        throw DataError("model file: parameter names do not match the kernel expression");
    m.theta = HyperVector(names, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    m.train.inputs = parse_reals("train_input", take("train_input"));
    m.train.outputs = parse_reals("train_output", take("train_output"));
    m.train.validate();
    const Eigen::VectorXd u = parse_reals("log_stretch", take("log_stretch"));
    if (u.size() != std::max<Eigen::Index>(m.train.size() - 1, 0))
        throw DataError("model file: log_stretch length does not match the training data");
    m.warp = WarpState::from_log_stretch(m.train.inputs, u);
    const std::string st = take("standardization");
    if (st != "none") {
        const Eigen::VectorXd s = parse_reals("standardization", st);
        if (s.size() != 4) throw DataError("model file: standardization needs 4 values");
        m.train.standardization = Standardization{s[0], s[1], s[2], s[3]};
    }
    m.objective = parse_real("objective", take("objective"));
    m.converged = take_int("converged") != 0;
    m.gradient_norm = parse_real("gradient_norm", take("gradient_norm"));
    m.iterations = take_int("iterations");
    m.evaluations = take_int("evaluations");
    m.restart = take_int("restart");
    m.failed_restarts = take_int("failed_restarts");
    m.jitter = parse_real("jitter", take("jitter"));
    m.sigma_d = parse_real("sigma_d", take("sigma_d"));
    m.hyperprior_scale = parse_real("hyperprior_scale", take("hyperprior_scale"));
    if (!fields.empty()) throw DataError(fmt::format("model file: unknown key '{}'", fields.begin()->first));
    return file;
}

std::string default_kernel(Variant variant, double period) {
    if (variant == Variant::wgp_seasonal)
        return fmt::format("c1 * matern52(l) + c2 * periodic({}, lp)@orig + noise(s)", format_real(period));
    return "c * matern52(l) + noise(s)";
}

// ---------------------------------------------------------------------------
// Commands

namespace {

// Records every effective setting so the run can be replayed.
class EffectiveConfig {
  public:
    explicit EffectiveConfig(std::string command) : line_("wigp " + std::move(command)) {}
    template <typename T>
    void add(const std::string& flag, const T& value) {
        line_ += " --" + flag + " " + quote(fmt::format("{}", value));
    }
    void add_real(const std::string& flag, double value) { line_ += " --" + flag + " " + format_real(value); }
    const std::string& line() const { return line_; }

  private:
    static std::string quote(const std::string& s) {
        const bool plain = !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) ||
                   std::string_view("-_./,:=+@%").find(c) != std::string_view::npos;
        });
        if (plain) return s;
        std::string q = "'";
        for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
        return q + "'";
    }
    std::string line_;
};

struct CsvFlags {
    std::string input_column = "0";
    std::string output_column = "1";
    std::string delimiter = ",";

    void attach(CLI::App* app) {
        app->add_option("--input-column", input_column, "Input column name or 0-based index")->capture_default_str();
        app->add_option("--output-column", output_column, "Output column name or 0-based index")->capture_default_str();
        app->add_option("--delimiter", delimiter, "CSV field delimiter (one character)")->capture_default_str();
    }
    CsvOptions options() const {
        if (delimiter.size() != 1) throw InvalidArgument("--delimiter must be a single character");
        return {input_column, output_column, delimiter[0]};
    }
    void record(EffectiveConfig& c) const {
        c.add("input-column", input_column);
        c.add("output-column", output_column);
        c.add("delimiter", delimiter);
    }
};

struct FitFlags {
    std::string config_path;
    std::optional<int> restarts;
    std::optional<std::uint64_t> seed;
    std::optional<double> sigma_d;
    std::optional<int> max_iterations;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "Fit configuration file (key = value lines)");
        app->add_option("--restarts", restarts, "Optimizer restarts (>= 1)");
        app->add_option("--seed", seed, "Base seed for restarts");
        app->add_option("--sigma-d", sigma_d, "Log-scale of the stretch prior");
        app->add_option("--max-iterations", max_iterations, "L-BFGS iteration cap");
    }
    FitConfig resolve() const {
        FitConfig c = config_path.empty() ? FitConfig{} : FitConfig::from_text(read_file(config_path));
        if (restarts) c.restarts = *restarts;
        if (seed) c.seed = *seed;
        if (sigma_d) c.sigma_d = *sigma_d;
        if (max_iterations) c.max_iterations = *max_iterations;
        c.validate();
        return c;
    }
    static void record(EffectiveConfig& e, const FitConfig& c) {
        e.add("restarts", c.restarts);
        e.add("seed", c.seed);
        e.add_real("sigma-d", c.sigma_d);
        e.add("max-iterations", c.max_iterations);
    }
};

std::string instance_file_name(int index, int count) {
    const int width = std::max(3, static_cast<int>(std::to_string(std::max(count - 1, 0)).size()));
    return fmt::format("instance_{:0{}d}.csv", index, width);
}

// instance_<id>.csv files of a directory, ordered by id.
std::vector<BenchmarkInstance> load_instance_dir(const fs::path& dir, const CsvOptions& csv) {
    if (!fs::is_directory(dir)) throw DataError(fmt::format("'{}' is not a directory", dir.string()));
    std::vector<BenchmarkInstance> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (!name.starts_with("instance_") || entry.path().extension() != ".csv") continue;
        const std::string digits = name.substr(9, name.size() - 9 - 4);
        int id = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
        if (ec != std::errc() || ptr != digits.data() + digits.size()) continue;
        out.push_back({id, load_csv(entry.path(), csv)});
    }
    if (out.empty()) throw DataError(fmt::format("'{}' contains no instance_<n>.csv files", dir.string()));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    return out;
}

int cmd_synth(const SynthConfig& config, const fs::path& out_dir, std::ostream& out) {
    config.validate();
    fs::create_directories(out_dir);
    for (int i = 0; i < config.instances; ++i)
        write_csv(out_dir / instance_file_name(i, config.instances), synth_instance(config, i));
    write_file_atomic(out_dir / "synth.conf", config.to_text());
    out << fmt::format("wrote {} instance(s) and synth.conf to {}\n", config.instances, out_dir.string());
    return exit_ok;
}

int cmd_fit(const fs::path& data, const CsvOptions& csv, Variant variant, const std::string& kernel_text,
            const FitConfig& config, const fs::path& model_path, std::ostream& out) {
    const KernelExpr kernel = KernelExpr::parse(kernel_text);
    const TimeSeries series = standardize(load_csv(data, csv));
    ModelFile file;
    file.variant = variant;
    file.model = model_kind(variant) == ModelKind::wgp ? fit_wgp(series, kernel, config) : fit_gp(series, kernel, config);
    write_file_atomic(model_path, serialize_model(file));

    const TrainedModel& m = file.model;
    out << fmt::format("objective {}  converged {}  iterations {}  restart {}\n", format_real(m.objective),
                       m.converged ? "yes" : "no", m.iterations, m.restart);
    for (std::size_t i = 0; i < m.theta.size(); ++i)
        out << fmt::format("  {} = {}\n", m.theta.names()[i], format_real(m.theta.value(m.theta.names()[i])));
    if (m.kind == ModelKind::wgp && m.warp.log_stretch.size() > 0)
        out << fmt::format("  log stretch: min {} max {}\n", format_real(m.warp.log_stretch.minCoeff()),
                           format_real(m.warp.log_stretch.maxCoeff()));
    if (!m.converged) log().warn("optimizer stopped before reaching the gradient tolerance");
    return exit_ok;
}

int cmd_forecast(const fs::path& model_path, int steps, const std::string& at, const fs::path& out_path,
                 std::ostream& out) {
    const ModelFile file = parse_model(read_file(model_path));
    const TrainedModel& m = file.model;
    const KernelExpr kernel = KernelExpr::parse(m.kernel_source);
    const Standardization st = m.train.standardization.value_or(Standardization{});
    const Eigen::Index n = m.train.size();

    std::vector<double> raw;
    if (!at.empty()) {
        for (const auto& tok : split_list(at)) raw.push_back(parse_real("--at", tok));
    } else {
        if (steps < 1) throw InvalidArgument("--steps must be at least 1");
        std::vector<double> gaps;
        for (Eigen::Index i = 1; i < n; ++i) gaps.push_back(st.raw_input(m.train.inputs[i]) - st.raw_input(m.train.inputs[i - 1]));
        std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2), gaps.end());
        const double spacing = gaps.empty() ? 1.0 : gaps[gaps.size() / 2];
        const double last = st.raw_input(m.train.inputs[n - 1]);
        for (int k = 1; k <= steps; ++k) raw.push_back(last + k * spacing);
    }
    Eigen::VectorXd query(static_cast<Eigen::Index>(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) {
        query[static_cast<Eigen::Index>(i)] = st.input(raw[i]);
        if (!(query[static_cast<Eigen::Index>(i)] > m.train.inputs[n - 1]))
            throw InvalidArgument(fmt::format("forecast input {} is not after the last training input {}",
                                              format_real(raw[i]), format_real(st.raw_input(m.train.inputs[n - 1]))));
    }

    const PredictiveDistribution p = forecast(m, kernel, query);
    std::string csv = "input,mean,variance,lower95,upper95\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        const double mean = st.raw_output(p.mean[j]);
        const double var = st.raw_variance(p.variance[j]);
        const double sd = std::sqrt(var);
        csv += fmt::format("{},{},{},{},{}\n", format_real(raw[i]), format_real(mean), format_real(var),
                           format_real(mean - 1.96 * sd), format_real(mean + 1.96 * sd));
    }
    if (out_path.empty())
        out << csv;
    else
        write_file_atomic(out_path, csv);
    return exit_ok;
}

struct EvalRequest {
    std::string data;
    std::string dir;
    CsvOptions csv;
    std::vector<Variant> variants;
    std::string kernel;
    std::string seasonal_kernel;
    double holdout = 0.2;
    FitConfig config;
    std::vector<std::string> external;
    std::string out_dir;
};

int cmd_eval(const EvalRequest& req, std::ostream& out) {
    if (!(req.holdout > 0.0 && req.holdout < 1.0))
        throw InvalidArgument(fmt::format("--holdout must lie in (0, 1), got {}", format_real(req.holdout)));
    std::vector<BenchmarkInstance> instances;
    std::string dataset;
    if (!req.data.empty()) {
        instances.push_back({0, load_csv(req.data, req.csv)});
        dataset = fs::path(req.data).stem().string();
    } else {
        instances = load_instance_dir(req.dir, req.csv);
        dataset = fs::path(req.dir).lexically_normal().filename().string();
        if (dataset.empty()) dataset = fs::path(req.dir).lexically_normal().parent_path().filename().string();
    }
    std::vector<VariantSpec> specs;
    for (Variant v : req.variants)
        specs.push_back({to_string(v), v, v == Variant::wgp_seasonal ? req.seasonal_kernel : req.kernel});
    for (const auto& s : specs) KernelExpr::parse(s.kernel);  // fail early on syntax

    ExperimentReport report = run_benchmark(dataset, instances, specs, req.config, req.holdout);
    for (const auto& ext : req.external) report.merge_external(read_file(ext), fs::path(ext).stem().string());

    const std::string table = format_table({report});
    out << table;
    if (!req.out_dir.empty()) {
        fs::create_directories(req.out_dir);
        write_file_atomic(fs::path(req.out_dir) / "report.csv", report.to_csv());
        write_file_atomic(fs::path(req.out_dir) / "report.txt", table);
    }
    return exit_ok;
}

int cmd_report(const std::vector<std::string>& inputs, const std::vector<std::string>& external, const std::string& out_path,
               std::ostream& out) {
    std::vector<ExperimentReport> reports;
    for (const auto& path : inputs) {
        const fs::path p(path);
        std::string name = p.stem().string();
        if (name == "report" && p.has_parent_path()) name = p.parent_path().filename().string();
        reports.push_back(ExperimentReport::from_csv(read_file(p), name));
    }
    for (const auto& ext : external) {
        if (reports.size() != 1) throw InvalidArgument("--external needs exactly one --in report");
        reports[0].merge_external(read_file(ext), fs::path(ext).stem().string());
    }
    const std::string table = format_table(reports);
    out << table;
    if (!out_path.empty()) write_file_atomic(out_path, table);
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Warped-input Gaussian processes for time-series forecasting", "wigp"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic non-stationary series");
    std::string synth_out, synth_config_path, synth_kind;
    std::optional<int> synth_instances, synth_points;
    std::optional<std::uint64_t> synth_seed;
    std::optional<double> synth_trend_length, synth_noise, synth_warp_amp;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Generator seed (required)");
    synth->add_option("--instances", synth_instances, "Number of series");
    synth->add_option("--points", synth_points, "Points per series (>= 10)");
    synth->add_option("--kernel", synth_kind, "matern52 or matern52+periodic");
    synth->add_option("--trend-length-scale", synth_trend_length, "Trend Matern length scale in grid steps");
    synth->add_option("--warp-amplitude", synth_warp_amp, "Std. dev. of the sampled log distances");
    synth->add_option("--noise", synth_noise, "Observation noise std. dev.");
    synth->add_option("--config", synth_config_path, "Generator settings file (as written to synth.conf)");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a GP or warped GP to a CSV series");
    std::string fit_data, fit_kernel, fit_variant = "wgp", fit_out;
    CsvFlags fit_csv;
    FitFlags fit_flags;
    fit->add_option("--data", fit_data, "Input CSV")->required();
    fit->add_option("--variant", fit_variant, "gp, wgp or wgp-seasonal")->capture_default_str();
    fit->add_option("--kernel", fit_kernel, "Kernel expression (default depends on the variant)");
    fit->add_option("--out", fit_out, "Model file to write")->required();
    fit_csv.attach(fit);
    fit_flags.attach(fit);

    // forecast
    auto* fc = app.add_subcommand("forecast", "Predict beyond the training data of a fitted model");
    std::string fc_model, fc_at, fc_out;
    int fc_steps = 10;
    fc->add_option("--model", fc_model, "Model file from 'fit'")->required();
    fc->add_option("--steps", fc_steps, "Number of future points at the median input spacing")->capture_default_str();
    fc->add_option("--at", fc_at, "Comma-separated future inputs (overrides --steps)");
    fc->add_option("--out", fc_out, "CSV to write (default: stdout)");

    // eval
    auto* ev = app.add_subcommand("eval", "Score variants by held-out NLPD");
    std::string ev_data, ev_dir, ev_variants = "gp,wgp,wgp-seasonal", ev_kernel, ev_seasonal_kernel, ev_out;
    double ev_holdout = 0.2;
    std::vector<std::string> ev_external;
    CsvFlags ev_csv;
    FitFlags ev_flags;
    auto* ev_data_opt = ev->add_option("--data", ev_data, "Single CSV series");
    auto* ev_dir_opt = ev->add_option("--dir", ev_dir, "Directory of instance_<n>.csv files");
    ev_data_opt->excludes(ev_dir_opt);
    ev->add_option("--variants", ev_variants, "Comma-separated variants")->capture_default_str();
    ev->add_option("--kernel", ev_kernel, "Kernel for gp and wgp");
    ev->add_option("--seasonal-kernel", ev_seasonal_kernel, "Kernel for wgp-seasonal");
    ev->add_option("--holdout", ev_holdout, "Fraction of each series held out at the end")->capture_default_str();
    ev->add_option("--external", ev_external, "Per-instance NLPD CSV from another model (repeatable)");
    ev->add_option("--out", ev_out, "Directory for report.csv and report.txt");
    ev_csv.attach(ev);
    ev_flags.attach(ev);

    // report
    auto* rep = app.add_subcommand("report", "Render report CSVs as a table");
    std::vector<std::string> rep_in, rep_external;
    std::string rep_out;
    rep->add_option("--in", rep_in, "report.csv from 'eval' (repeatable)")->required();
    rep->add_option("--external", rep_external, "Extra per-instance NLPD CSV");
    rep->add_option("--out", rep_out, "Text file for the table");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "wigp: " << e.what() << "\n";
        if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands()[0]) err << sub->help();
        return exit_usage;
    }

    try {
        if (synth->parsed()) {
            if (!synth_seed) throw InvalidArgument("synth needs an explicit --seed for reproducibility");
            SynthConfig c = synth_config_path.empty() ? SynthConfig{} : SynthConfig::from_text(read_file(synth_config_path));
            c.seed = *synth_seed;
            if (synth_instances) c.instances = *synth_instances;
            if (synth_points) c.points = *synth_points;
            if (!synth_kind.empty()) c.kind = parse_trend_kind(synth_kind);
            if (synth_trend_length) c.trend_length_scale = *synth_trend_length;
            if (synth_warp_amp) c.warp_amplitude = *synth_warp_amp;
            if (synth_noise) c.noise = *synth_noise;
            c.validate();
            EffectiveConfig e("synth");
            e.add("out", synth_out);
            e.add("seed", c.seed);
            e.add("instances", c.instances);
            e.add("points", c.points);
            e.add("kernel", to_string(c.kind));
            e.add_real("trend-length-scale", c.trend_length_scale);
            e.add_real("warp-amplitude", c.warp_amplitude);
            e.add_real("noise", c.noise);
            if (!synth_config_path.empty()) e.add("config", synth_config_path);
            err << "effective config: " << e.line() << "\n";
            return cmd_synth(c, synth_out, out);
        }
        if (fit->parsed()) {
            const Variant variant = parse_variant(fit_variant);
            const std::string kernel = fit_kernel.empty() ? default_kernel(variant) : fit_kernel;
            const FitConfig config = fit_flags.resolve();
            EffectiveConfig e("fit");
            e.add("data", fit_data);
            e.add("variant", to_string(variant));
            e.add("kernel", kernel);
            fit_csv.record(e);
            FitFlags::record(e, config);
            e.add("out", fit_out);
            err << "effective config: " << e.line() << "\n";
            return cmd_fit(fit_data, fit_csv.options(), variant, kernel, config, fit_out, out);
        }
        if (fc->parsed()) {
            EffectiveConfig e("forecast");
            e.add("model", fc_model);
            if (fc_at.empty())
                e.add("steps", fc_steps);
            else
                e.add("at", fc_at);
            if (!fc_out.empty()) e.add("out", fc_out);
            err << "effective config: " << e.line() << "\n";
            return cmd_forecast(fc_model, fc_steps, fc_at, fc_out, out);
        }
        if (ev->parsed()) {
            if (ev_data.empty() == ev_dir.empty()) throw InvalidArgument("eval needs exactly one of --data or --dir");
            EvalRequest req;
            req.data = ev_data;
            req.dir = ev_dir;
            req.csv = ev_csv.options();
            for (const auto& v : split_list(ev_variants)) req.variants.push_back(parse_variant(v));
            if (req.variants.empty()) throw InvalidArgument("--variants is empty");
            req.kernel = ev_kernel.empty() ? default_kernel(Variant::wgp) : ev_kernel;
            req.seasonal_kernel = ev_seasonal_kernel.empty() ? default_kernel(Variant::wgp_seasonal) : ev_seasonal_kernel;
            req.holdout = ev_holdout;
            req.config = ev_flags.resolve();
            req.external = ev_external;
            req.out_dir = ev_out;

            EffectiveConfig e("eval");
            if (!req.data.empty()) e.add("data", req.data);
            if (!req.dir.empty()) e.add("dir", req.dir);
            std::string names;
            for (Variant v : req.variants) names += (names.empty() ? "" : ",") + to_string(v);
            e.add("variants", names);
            e.add("kernel", req.kernel);
            e.add("seasonal-kernel", req.seasonal_kernel);
            e.add_real("holdout", req.holdout);
            ev_csv.record(e);
            FitFlags::record(e, req.config);
            for (const auto& x : req.external) e.add("external", x);
            if (!req.out_dir.empty()) e.add("out", req.out_dir);
            err << "effective config: " << e.line() << "\n";
            return cmd_eval(req, out);
        }
        if (rep->parsed()) {
            EffectiveConfig e("report");
            for (const auto& x : rep_in) e.add("in", x);
            for (const auto& x : rep_external) e.add("external", x);
            if (!rep_out.empty()) e.add("out", rep_out);
            err << "effective config: " << e.line() << "\n";
            return cmd_report(rep_in, rep_external, rep_out, out);
        }
    } catch (const ParseError& e) {
        err << "wigp: kernel expression: " << e.what() << "\n";
        return exit_usage;
    } catch (const InvalidArgument& e) {
        err << "wigp: " << e.what() << "\n";
        return exit_usage;
    } catch (const MissingChannel& e) {
        err << "wigp: " << e.what() << "\n";
        return exit_usage;
    } catch (const DataError& e) {
        err << "wigp: " << e.what() << "\n";
        return exit_data;
    } catch (const fs::filesystem_error& e) {
        err << "wigp: " << e.what() << "\n";
        return exit_data;
    } catch (const Error& e) {
        // NotPositiveDefinite, AllRestartsFailed, BenchmarkFailed
        err << "wigp: numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }
    return exit_usage;
}

}  // namespace wigp
