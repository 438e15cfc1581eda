#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wigp/data.hpp"
#include "wigp/gp.hpp"
#include "wigp/kernels.hpp"
#include "wigp/train.hpp"

namespace wigp {

enum class Variant { gp, wgp, wgp_seasonal };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);
ModelKind model_kind(Variant v);

/// Mean negative log Gaussian density of `actual` under `pred`.
double nlpd(const PredictiveDistribution& pred, const Eigen::VectorXd& actual);

/// Predictive distribution of a fitted model at inputs in the model's units.
/// Warped models require every query to lie after the last training input.
PredictiveDistribution forecast(const TrainedModel& model, const KernelExpr& kernel, const Eigen::VectorXd& query);

struct VariantEvaluation {
    double nlpd = 0.0;      // standardized output units
    double nlpd_raw = 0.0;  // original output units
    TrainedModel model;
    TimeSeries train;  // standardized
    TimeSeries test;   // standardized with the training transform
    PredictiveDistribution prediction;
};

/// split -> standardize on the training part -> fit -> forecast -> score.
VariantEvaluation evaluate_variant_detail(const TimeSeries& series, Variant variant, const KernelExpr& kernel,
                                          const FitConfig& config, double holdout = 0.2);
double evaluate_variant(const TimeSeries& series, Variant variant, const KernelExpr& kernel, const FitConfig& config,
                        double holdout = 0.2);

struct BenchmarkInstance {
    int id = 0;
    TimeSeries series;
};

struct VariantSpec {
    std::string name;
    Variant variant = Variant::gp;
    std::string kernel;
};

struct InstanceResult {
    int id = 0;
    std::optional<double> nlpd;
    std::optional<double> nlpd_raw;
    std::string error;
};

struct Aggregate {
    double mean = 0.0;
    double stderr_ = 0.0;  // sample sd / sqrt(count); 0 for one instance
    int count = 0;
};

struct VariantReport {
    std::string name;
    std::vector<InstanceResult> instances;  // sorted by id

    int failures() const;
    Aggregate aggregate() const;
    Aggregate aggregate_raw() const;
    /// NLPD per successful instance, in id order.
    std::vector<double> values() const;
};

struct ExperimentReport {
    std::string dataset;
    std::string config;
    std::vector<VariantReport> variants;

    const VariantReport& variant(const std::string& name) const;
    bool has_variant(const std::string& name) const;

    /// variant,instance,nlpd,nlpd_raw rows; failed instances carry "failed".
    std::string to_csv() const;
    static ExperimentReport from_csv(const std::string& text, const std::string& dataset);

    /// Adds per-instance NLPD computed elsewhere. Accepts either the to_csv
    /// layout or `instance,nlpd` rows, in which case `fallback_name` names the
    /// variant.
    void merge_external(const std::string& csv_text, const std::string& fallback_name);
};

/// Aligned table, one row per report, one column per variant (mean +- stderr).
std::string format_table(const std::vector<ExperimentReport>& reports);

/// Fits every variant on every instance. Instance `id` uses seed
/// config.seed + id, so results do not depend on instance order.
ExperimentReport run_benchmark(const std::string& dataset, const std::vector<BenchmarkInstance>& instances,
                               const std::vector<VariantSpec>& variants, const FitConfig& config,
                               double holdout = 0.2);

/// Mean difference threshold used by the ordering checks:
/// sqrt((se_a^2 + se_b^2) / 2).
double pooled_stderr(const Aggregate& a, const Aggregate& b);

}  // namespace wigp
