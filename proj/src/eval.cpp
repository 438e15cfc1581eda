#include "wigp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "wigp/error.hpp"
#include "wigp/keyvalue.hpp"
#include "wigp/log.hpp"
#include "wigp/warp.hpp"

namespace wigp {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::gp: return "gp";
        case Variant::wgp: return "wgp";
        case Variant::wgp_seasonal: return "wgp-seasonal";
    }
    return "?";
}

Variant parse_variant(const std::string& text) {
    if (text == "gp") return Variant::gp;
    if (text == "wgp") return Variant::wgp;
    if (text == "wgp-seasonal") return Variant::wgp_seasonal;
    throw InvalidArgument(fmt::format("unknown variant '{}' (expected gp, wgp or wgp-seasonal)", text));
}

ModelKind model_kind(Variant v) { return v == Variant::gp ? ModelKind::gp : ModelKind::wgp; }

double nlpd(const PredictiveDistribution& pred, const Eigen::VectorXd& actual) {
    if (pred.mean.size() != actual.size() || pred.variance.size() != actual.size())
        throw InvalidArgument(fmt::format("nlpd: {} predictions for {} observations", pred.mean.size(), actual.size()));
    if (actual.size() == 0) throw InvalidArgument("nlpd: no observations");
    double total = 0.0;
    for (Eigen::Index i = 0; i < actual.size(); ++i) {
        const double var = pred.variance[i];
        if (!(var > 0.0)) throw InvalidArgument(fmt::format("nlpd: non-positive predictive variance at point {}", i));
        const double r = actual[i] - pred.mean[i];
        total += 0.5 * std::log(2.0 * std::numbers::pi * var) + 0.5 * r * r / var;
    }
    return total / static_cast<double>(actual.size());
}

PredictiveDistribution forecast(const TrainedModel& model, const KernelExpr& kernel, const Eigen::VectorXd& query) {
    const Eigen::VectorXd& x = model.train.inputs;
    const InputPoints train = combine_inputs(model.warp.warped, x);
    Eigen::VectorXd warped_query = query;
    if (model.kind == ModelKind::wgp) warped_query = extrapolate_warp(x, model.warp.warped, query);
    return posterior(train, model.train.outputs, combine_inputs(warped_query, query), kernel, model.theta);
}

VariantEvaluation evaluate_variant_detail(const TimeSeries& series, Variant variant, const KernelExpr& kernel,
                                          const FitConfig& config, double holdout) {
    auto [train_raw, test_raw] = split_forecast(series, holdout);
    VariantEvaluation out;
    out.train = standardize(train_raw);
    const Standardization transform = *out.train.standardization;
    out.test = apply_standardization(test_raw, transform);

    out.model = model_kind(variant) == ModelKind::gp ? fit_gp(out.train, kernel, config)
                                                     : fit_wgp(out.train, kernel, config);
    out.prediction = forecast(out.model, kernel, out.test.inputs);
    out.nlpd = nlpd(out.prediction, out.test.outputs);
    out.nlpd_raw = out.nlpd + std::log(transform.output_scale);
    return out;
}

double evaluate_variant(const TimeSeries& series, Variant variant, const KernelExpr& kernel, const FitConfig& config,
                        double holdout) {
    return evaluate_variant_detail(series, variant, kernel, config, holdout).nlpd;
}

// ---------------------------------------------------------------------------
// Reports

int VariantReport::failures() const {
    return static_cast<int>(std::count_if(instances.begin(), instances.end(), [](const auto& r) { return !r.nlpd; }));
}

namespace {

Aggregate aggregate_of(const std::vector<double>& v) {
    Aggregate a;
    a.count = static_cast<int>(v.size());
    if (v.empty()) return a;
    double sum = 0.0;
    for (double x : v) sum += x;
    a.mean = sum / a.count;
    if (a.count > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - a.mean) * (x - a.mean);
        a.stderr_ = std::sqrt(ss / (a.count - 1)) / std::sqrt(static_cast<double>(a.count));
    }
    return a;
}

}  // namespace

std::vector<double> VariantReport::values() const {
    std::vector<double> v;
    for (const auto& r : instances)
        if (r.nlpd) v.push_back(*r.nlpd);
    return v;
}

Aggregate VariantReport::aggregate() const { return aggregate_of(values()); }

Aggregate VariantReport::aggregate_raw() const {
    std::vector<double> v;
    for (const auto& r : instances)
        if (r.nlpd_raw) v.push_back(*r.nlpd_raw);
    return aggregate_of(v);
}

double pooled_stderr(const Aggregate& a, const Aggregate& b) {
    return std::sqrt(0.5 * (a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_));
}

const VariantReport& ExperimentReport::variant(const std::string& name) const {
    for (const auto& v : variants)
        if (v.name == name) return v;
    throw InvalidArgument(fmt::format("report '{}' has no variant '{}'", dataset, name));
}

bool ExperimentReport::has_variant(const std::string& name) const {
    return std::any_of(variants.begin(), variants.end(), [&](const auto& v) { return v.name == name; });
}

std::string ExperimentReport::to_csv() const {
    std::string out = "variant,instance,nlpd,nlpd_raw\n";
    for (const auto& v : variants) {
        for (const auto& r : v.instances) {
            out += v.name + "," + std::to_string(r.id) + ",";
            out += r.nlpd ? format_real(*r.nlpd) : std::string("failed");
            out += ",";
            out += r.nlpd_raw ? format_real(*r.nlpd_raw) : std::string("failed");
            out += "\n";
        }
    }
    return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        out.push_back(field);
    }
    return out;
}

std::optional<double> parse_cell(const std::string& key, const std::string& text) {
    if (text == "failed" || text.empty()) return std::nullopt;
    return parse_real(key, text);
}

void insert_sorted(VariantReport& v, InstanceResult r) {
    auto it = std::lower_bound(v.instances.begin(), v.instances.end(), r.id,
                               [](const InstanceResult& a, int id) { return a.id < id; });
    if (it != v.instances.end() && it->id == r.id)
        throw DataError(fmt::format("variant '{}' lists instance {} twice", v.name, r.id));
    v.instances.insert(it, std::move(r));
}

VariantReport& variant_slot(std::vector<VariantReport>& variants, const std::string& name) {
    for (auto& v : variants)
        if (v.name == name) return v;
    variants.push_back(VariantReport{name, {}});
    return variants.back();
}

}  // namespace

ExperimentReport ExperimentReport::from_csv(const std::string& text, const std::string& dataset) {
    ExperimentReport report;
    report.dataset = dataset;
    report.merge_external(text, "external");
    return report;
}

void ExperimentReport::merge_external(const std::string& csv_text, const std::string& fallback_name) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("external NLPD file is empty");
    const auto header = split(line, ',');
    auto column = [&](const std::string& name) -> int {
        auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int c_variant = column("variant");
    const int c_instance = column("instance");
    const int c_nlpd = column("nlpd");
    const int c_raw = column("nlpd_raw");
    if (c_instance < 0 || c_nlpd < 0) throw DataError("external NLPD file needs 'instance' and 'nlpd' columns");

    std::vector<VariantReport> added;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split(line, ',');
        const auto need = static_cast<std::size_t>(std::max({c_variant, c_instance, c_nlpd, c_raw}));
        if (f.size() <= need) throw DataError(fmt::format("external NLPD file line {}: too few fields", line_no));
        const std::string name = c_variant >= 0 ? f[c_variant] : fallback_name;
        if (has_variant(name)) throw DataError(fmt::format("variant '{}' is already in the report", name));
        InstanceResult r;
        r.id = static_cast<int>(parse_integer("instance", f[c_instance]));
        r.nlpd = parse_cell("nlpd", f[c_nlpd]);
        r.nlpd_raw = c_raw >= 0 ? parse_cell("nlpd_raw", f[c_raw]) : std::nullopt;
        if (!r.nlpd) r.error = "failed";
        insert_sorted(variant_slot(added, name), std::move(r));
    }
    for (auto& v : added) variants.push_back(std::move(v));
}

std::string format_table(const std::vector<ExperimentReport>& reports) {
    std::vector<std::string> columns;
    for (const auto& r : reports)
        for (const auto& v : r.variants)
            if (std::find(columns.begin(), columns.end(), v.name) == columns.end()) columns.push_back(v.name);

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"dataset"});
    for (const auto& c : columns) rows.front().push_back(c);
    std::vector<std::string> notes;
    for (const auto& r : reports) {
        std::vector<std::string> row{r.dataset};
        for (const auto& c : columns) {
            if (!r.has_variant(c)) {
                row.push_back("-");
                continue;
            }
            const auto& v = r.variant(c);
            const Aggregate a = v.aggregate();
            if (a.count == 0)
                row.push_back("failed");
            else if (a.count == 1)
                row.push_back(fmt::format("{:.4f}", a.mean));
            else
                row.push_back(fmt::format("{:.4f} +- {:.4f}", a.mean, a.stderr_));
            if (v.failures() > 0)
                notes.push_back(fmt::format("{} / {}: {} of {} instance(s) failed and are excluded", r.dataset, c,
                                            v.failures(), v.instances.size()));
        }
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> width(columns.size() + 1, 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());

    std::string out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::string line;
        for (std::size_t i = 0; i < rows[r].size(); ++i) {
            if (i > 0) line += "  ";
            line += fmt::format("{:<{}}", rows[r][i], width[i]);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
        if (r == 0) out += std::string(line.size(), '-') + "\n";
    }
    out += "NLPD per test point in standardized output units (mean +- stderr over instances)\n";
    for (const auto& n : notes) out += "note: " + n + "\n";
    return out;
}

ExperimentReport run_benchmark(const std::string& dataset, const std::vector<BenchmarkInstance>& instances,
                               const std::vector<VariantSpec>& variants, const FitConfig& config, double holdout) {
    if (instances.empty()) throw InvalidArgument("run_benchmark needs at least one instance");
    ExperimentReport report;
    report.dataset = dataset;
    report.config = config.to_text() + "holdout = " + format_real(holdout) + "\n";

    for (const auto& spec : variants) {
        const KernelExpr kernel = KernelExpr::parse(spec.kernel);
        report.config += "kernel." + spec.name + " = " + spec.kernel + "\n";
        VariantReport vr{spec.name, {}};
        for (const auto& inst : instances) {
            FitConfig c = config;
            c.seed = config.seed + static_cast<std::uint64_t>(inst.id);
            InstanceResult r;
            r.id = inst.id;
            try {
                const auto e = evaluate_variant_detail(inst.series, spec.variant, kernel, c, holdout);
                if (std::isfinite(e.nlpd)) {
                    r.nlpd = e.nlpd;
                    r.nlpd_raw = e.nlpd_raw;
                } else {
                    r.error = "non-finite NLPD";
                }
            } catch (const Error& e) {
                r.error = e.what();
            }
            if (!r.nlpd) log().warn("{} / {} instance {}: {}", dataset, spec.name, inst.id, r.error);
            insert_sorted(vr, std::move(r));
        }
        if (vr.failures() == static_cast<int>(vr.instances.size()))
            throw BenchmarkFailed(fmt::format("{} / {}: every instance failed", dataset, spec.name));
        report.variants.push_back(std::move(vr));
    }
    return report;
}

}  // namespace wigp
