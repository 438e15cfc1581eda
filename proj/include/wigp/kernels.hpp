#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace wigp {

/// Which coordinate of an input point a kernel leaf reads. Trend terms read the
/// warped time; seasonal terms are tagged `@orig` and read the original time.
enum class Channel { warped, original };

/// A point in input space. Single-channel points carry only the warped
/// coordinate; two-channel points pair (warped, original).
struct InputPoint {
    double warped = 0.0;
    std::optional<double> original;

    static InputPoint single(double x) { return {x, std::nullopt}; }
    static InputPoint paired(double warped, double original) { return {warped, original}; }
};

using InputPoints = std::vector<InputPoint>;

/// Wraps a plain input vector as single-channel points.
InputPoints single_channel(const Eigen::VectorXd& x);

enum class LeafKind { rbf, matern32, matern52, periodic, constant, noise };

/// What a hyperparameter means; drives initialization heuristics.
enum class ParamRole { length_scale, period, periodic_shape, scale, noise };

std::string_view to_string(LeafKind kind);
std::string_view to_string(ParamRole role);

/// Flat vector of log-domain hyperparameters, each entry named. Shared names in
/// a kernel expression refer to a single entry.
class HyperVector {
  public:
    HyperVector() = default;
    HyperVector(std::vector<std::string> names, Eigen::VectorXd log_values);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const Eigen::VectorXd& log_values() const { return log_values_; }
    Eigen::VectorXd& log_values() { return log_values_; }

    /// Index of `name`, throws InvalidArgument if absent.
    std::size_t index_of(std::string_view name) const;
    /// Positive-domain value.
    double value(std::string_view name) const;
    void set_value(std::string_view name, double positive_value);

    Eigen::VectorXd flatten() const { return log_values_; }
    static HyperVector unflatten(std::vector<std::string> names, const Eigen::VectorXd& flat);

    bool operator==(const HyperVector& other) const;

  private:
    std::vector<std::string> names_;
    Eigen::VectorXd log_values_;
};

/// Slot for a leaf or scale parameter: a free entry of the HyperVector, or a
/// fixed positive constant written as a number in the expression.
struct ParamRef {
    int index = -1;
    double fixed = 1.0;

    bool is_free() const { return index >= 0; }
};

/// Immutable covariance-function expression tree.
///
/// Leaves: rbf(l), matern32(l), matern52(l), periodic(p, l), constant(c),
/// noise(s). Inner nodes: sum, product, and scale(c) applied to one child.
/// Nodes are stored children-first so evaluation is a single forward sweep.
class KernelExpr {
  public:
    enum class NodeKind { leaf, sum, product, scale };

    struct Node {
        NodeKind kind = NodeKind::leaf;
        LeafKind leaf = LeafKind::constant;
        Channel channel = Channel::warped;
        std::array<ParamRef, 2> params{};  // leaf params, or params[0] for scale
        std::vector<int> children;
    };

    /// Parses the textual grammar documented in docs/kernel_grammar.md.
    static KernelExpr parse(std::string_view source);

    const std::vector<Node>& nodes() const { return nodes_; }
    int root() const { return static_cast<int>(nodes_.size()) - 1; }

    std::size_t num_params() const { return param_names_.size(); }
    const std::vector<std::string>& param_names() const { return param_names_; }
    const std::vector<ParamRole>& param_roles() const { return param_roles_; }

    /// Source text as given to parse().
    const std::string& source() const { return source_; }
    /// Canonical rendering; parses back to an equivalent tree.
    std::string to_string() const;

    bool uses_original_channel() const;
    bool has_noise() const;

    /// HyperVector with these parameter names and the given log values.
    HyperVector make_hyper(const Eigen::VectorXd& log_values) const;

  private:
    friend class KernelParser;

    std::vector<Node> nodes_;
    std::vector<std::string> param_names_;
    std::vector<ParamRole> param_roles_;
    std::string source_;
};

/// Evaluates one kernel at fixed hyperparameters, reusing scratch buffers.
/// Not thread-safe; create one per thread.
class KernelEvaluator {
  public:
    KernelEvaluator(const KernelExpr& kernel, const HyperVector& theta);

    /// k(a, b). `same_index` is true only when a and b are the same training
    /// observation; noise leaves are zero otherwise.
    double value(const InputPoint& a, const InputPoint& b, bool same_index = false);

    /// k(a, b) plus log-domain hyperparameter gradient (written into `dtheta`,
    /// length num_params) and the derivative with respect to a.warped.
    double value_and_grad(const InputPoint& a, const InputPoint& b, bool same_index,
                          std::span<double> dtheta, double& dwarped);

    std::size_t num_params() const { return num_params_; }

  private:
    double param(const ParamRef& p) const { return p.is_free() ? values_[p.index] : p.fixed; }
    double coordinate(const KernelExpr::Node& node, const InputPoint& p) const;

    const KernelExpr* kernel_;
    std::size_t num_params_;
    std::vector<double> values_;  // positive-domain hyperparameters
    std::vector<double> node_value_;
    std::vector<double> node_dinput_;
    std::vector<double> node_grad_;  // nodes x params, row-major
};

double eval_kernel(const KernelExpr& kernel, const InputPoint& a, const InputPoint& b,
                   const HyperVector& theta, bool same_index = false);

/// d k / d log(theta_j) for every hyperparameter.
Eigen::VectorXd grad_kernel_hyper(const KernelExpr& kernel, const InputPoint& a, const InputPoint& b,
                                  const HyperVector& theta, bool same_index = false);

/// d k / d a.warped. Original-channel leaves contribute nothing.
double grad_kernel_input(const KernelExpr& kernel, const InputPoint& a, const InputPoint& b,
                         const HyperVector& theta);

}  // namespace wigp
