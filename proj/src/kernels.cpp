#include "wigp/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "wigp/error.hpp"

namespace wigp {

InputPoints single_channel(const Eigen::VectorXd& x) {
    InputPoints points;
    points.reserve(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) points.push_back(InputPoint::single(x[i]));
    return points;
}

std::string_view to_string(LeafKind kind) {
    switch (kind) {
        case LeafKind::rbf: return "rbf";
        case LeafKind::matern32: return "matern32";
        case LeafKind::matern52: return "matern52";
        case LeafKind::periodic: return "periodic";
        case LeafKind::constant: return "constant";
        case LeafKind::noise: return "noise";
    }
    return "?";
}

std::string_view to_string(ParamRole role) {
    switch (role) {
        case ParamRole::length_scale: return "length_scale";
        case ParamRole::period: return "period";
        case ParamRole::periodic_shape: return "periodic_shape";
        case ParamRole::scale: return "scale";
        case ParamRole::noise: return "noise";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// HyperVector

HyperVector::HyperVector(std::vector<std::string> names, Eigen::VectorXd log_values)
    : names_(std::move(names)), log_values_(std::move(log_values)) {
    if (static_cast<Eigen::Index>(names_.size()) != log_values_.size())
        throw InvalidArgument(fmt::format("hyperparameter names ({}) and values ({}) differ in length",
                                          names_.size(), log_values_.size()));
}

std::size_t HyperVector::index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw InvalidArgument(fmt::format("unknown hyperparameter '{}'", name));
    return static_cast<std::size_t>(it - names_.begin());
}

double HyperVector::value(std::string_view name) const { return std::exp(log_values_[index_of(name)]); }

void HyperVector::set_value(std::string_view name, double positive_value) {
    if (!(positive_value > 0.0) || !std::isfinite(positive_value))
        throw InvalidArgument(fmt::format("hyperparameter '{}' must be positive and finite", name));
    log_values_[index_of(name)] = std::log(positive_value);
}

HyperVector HyperVector::unflatten(std::vector<std::string> names, const Eigen::VectorXd& flat) {
    return HyperVector(std::move(names), flat);
}

bool HyperVector::operator==(const HyperVector& other) const {
    return names_ == other.names_ && log_values_.size() == other.log_values_.size() &&
           log_values_ == other.log_values_;
}

// ---------------------------------------------------------------------------
// Parser

class KernelParser {
  public:
    explicit KernelParser(std::string_view src) : src_(src) {}

    KernelExpr run() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("empty kernel expression", pos_);
        parse_expr();
        skip_space();
        if (pos_ != src_.size()) throw ParseError(fmt::format("unexpected '{}'", src_[pos_]), pos_);
        expr_.source_ = std::string(src_);
        return std::move(expr_);
    }

  private:
    // A factor is either a kernel subtree (node index) or a bare scalar.
    struct Factor {
        int node = -1;
        ParamRef scalar;
        std::size_t pos = 0;
    };

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= src_.size()) throw ParseError(fmt::format("expected '{}' but input ended", c), pos_);
            throw ParseError(fmt::format("expected '{}' but found '{}'", c, src_[pos_]), pos_);
        }
    }

    int push(KernelExpr::Node node) {
        expr_.nodes_.push_back(std::move(node));
        return static_cast<int>(expr_.nodes_.size()) - 1;
    }

    int parse_expr() {
        std::vector<int> terms{parse_term()};
        while (accept('+')) terms.push_back(parse_term());
        if (terms.size() == 1) return terms.front();
        KernelExpr::Node node;
        node.kind = KernelExpr::NodeKind::sum;
        node.children = std::move(terms);
        return push(std::move(node));
    }

    int parse_term() {
        std::vector<Factor> factors{parse_factor()};
        while (accept('*')) factors.push_back(parse_factor());

        std::vector<int> kernels;
        std::vector<ParamRef> scalars;
        for (const auto& f : factors) {
            if (f.node >= 0)
                kernels.push_back(f.node);
            else
                scalars.push_back(f.scalar);
        }

        int node_index = -1;
        std::size_t first_scale = 0;
        if (kernels.empty()) {
            KernelExpr::Node leaf;
            leaf.leaf = LeafKind::constant;
            leaf.params[0] = scalars.front();
            node_index = push(std::move(leaf));
            first_scale = 1;
        } else if (kernels.size() == 1) {
            node_index = kernels.front();
        } else {
            KernelExpr::Node prod;
            prod.kind = KernelExpr::NodeKind::product;
            prod.children = std::move(kernels);
            node_index = push(std::move(prod));
        }
        for (std::size_t i = first_scale; i < scalars.size(); ++i) {
            KernelExpr::Node scale;
            scale.kind = KernelExpr::NodeKind::scale;
            scale.params[0] = scalars[i];
            scale.children = {node_index};
            node_index = push(std::move(scale));
        }
        return node_index;
    }

    Factor parse_factor() {
        skip_space();
        Factor factor;
        factor.pos = pos_;
        if (pos_ >= src_.size()) throw ParseError("expected a kernel term but input ended", pos_);

        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            const std::size_t first = expr_.nodes_.size();
            factor.node = parse_expr();
            expect(')');
            apply_channel(first);
            return factor;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            factor.scalar = parse_number_param();
            return factor;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t ident_pos = pos_;
            std::string ident = parse_ident();
            skip_space();
            if (pos_ < src_.size() && src_[pos_] == '(') {
                const std::size_t first = expr_.nodes_.size();
                factor.node = parse_leaf(ident, ident_pos);
                apply_channel(first);
            } else {
                factor.scalar = free_param(ident, ParamRole::scale);
            }
            return factor;
        }
        throw ParseError(fmt::format("unexpected '{}'", c), pos_);
    }

    // Optional `@orig` / `@warped` suffix applied to every leaf created since `first`.
    void apply_channel(std::size_t first) {
        skip_space();
        if (pos_ >= src_.size() || src_[pos_] != '@') return;
        ++pos_;
        const std::size_t tag_pos = pos_;
        std::string tag = parse_ident();
        Channel channel;
        if (tag == "orig" || tag == "original")
            channel = Channel::original;
        else if (tag == "warped")
            channel = Channel::warped;
        else
            throw ParseError(fmt::format("unknown channel '@{}' (expected @orig or @warped)", tag), tag_pos);
        for (std::size_t i = first; i < expr_.nodes_.size(); ++i)
            if (expr_.nodes_[i].kind == KernelExpr::NodeKind::leaf) expr_.nodes_[i].channel = channel;
    }

    int parse_leaf(const std::string& name, std::size_t name_pos) {
        struct Spec {
            const char* name;
            LeafKind kind;
            std::vector<ParamRole> roles;
        };
        static const std::vector<Spec> specs = {
            {"rbf", LeafKind::rbf, {ParamRole::length_scale}},
            {"matern32", LeafKind::matern32, {ParamRole::length_scale}},
            {"matern52", LeafKind::matern52, {ParamRole::length_scale}},
            {"periodic", LeafKind::periodic, {ParamRole::period, ParamRole::periodic_shape}},
            {"constant", LeafKind::constant, {ParamRole::scale}},
            {"noise", LeafKind::noise, {ParamRole::noise}},
        };
        auto it = std::find_if(specs.begin(), specs.end(), [&](const Spec& s) { return name == s.name; });
        if (it == specs.end()) throw ParseError(fmt::format("unknown kernel '{}'", name), name_pos);

        expect('(');
        KernelExpr::Node leaf;
        leaf.leaf = it->kind;
        for (std::size_t i = 0; i < it->roles.size(); ++i) {
            if (i > 0) expect(',');
            skip_space();
            leaf.params[i] = parse_param(it->roles[i]);
        }
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == ',')
            throw ParseError(fmt::format("{} takes {} argument(s)", name, it->roles.size()), pos_);
        expect(')');
        return push(std::move(leaf));
    }

    ParamRef parse_param(ParamRole role) {
        if (pos_ >= src_.size()) throw ParseError("expected a parameter but input ended", pos_);
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number_param();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return free_param(parse_ident(), role);
        throw ParseError(fmt::format("expected a parameter name or number but found '{}'", c), pos_);
    }

    ParamRef parse_number_param() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' || src_[pos_] == 'e' ||
                src_[pos_] == 'E' ||
                ((src_[pos_] == '-' || src_[pos_] == '+') && pos_ > start &&
                 (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
            ++pos_;
        const std::string text(src_.substr(start, pos_ - start));
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(text, &used);
        } catch (const std::exception&) {
            throw ParseError(fmt::format("malformed number '{}'", text), start);
        }
        if (used != text.size()) throw ParseError(fmt::format("malformed number '{}'", text), start);
        if (!(value > 0.0) || !std::isfinite(value))
            throw ParseError(fmt::format("fixed parameter must be positive, got {}", text), start);
        ParamRef ref;
        ref.fixed = value;
        return ref;
    }

    std::string parse_ident() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        if (pos_ == start) throw ParseError("expected an identifier", pos_);
        return std::string(src_.substr(start, pos_ - start));
    }

    ParamRef free_param(const std::string& name, ParamRole role) {
        static const std::vector<std::string> reserved = {"rbf",      "matern32", "matern52",
                                                          "periodic", "constant", "noise"};
        if (std::find(reserved.begin(), reserved.end(), name) != reserved.end())
            throw ParseError(fmt::format("'{}' is a kernel name and needs an argument list", name), pos_);
        auto& names = expr_.param_names_;
        auto it = std::find(names.begin(), names.end(), name);
        ParamRef ref;
        if (it == names.end()) {
            names.push_back(name);
            expr_.param_roles_.push_back(role);
            ref.index = static_cast<int>(names.size()) - 1;
        } else {
            ref.index = static_cast<int>(it - names.begin());
        }
        return ref;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    KernelExpr expr_;
};

KernelExpr KernelExpr::parse(std::string_view source) { return KernelParser(source).run(); }

// ---------------------------------------------------------------------------
// KernelExpr

namespace {

std::string param_text(const KernelExpr& k, const ParamRef& p) {
    if (p.is_free()) return k.param_names()[p.index];
    return fmt::format("{}", p.fixed);
}

std::string render(const KernelExpr& k, int index) {
    const auto& node = k.nodes()[index];
    auto child_text = [&](int child, bool wrap_sums) {
        std::string s = render(k, child);
        if (wrap_sums && k.nodes()[child].kind == KernelExpr::NodeKind::sum) return "(" + s + ")";
        return s;
    };
    switch (node.kind) {
        case KernelExpr::NodeKind::leaf: {
            std::string s(to_string(node.leaf));
            s += "(" + param_text(k, node.params[0]);
            if (node.leaf == LeafKind::periodic) s += ", " + param_text(k, node.params[1]);
            s += ")";
            if (node.channel == Channel::original) s += "@orig";
            return s;
        }
        case KernelExpr::NodeKind::sum: {
            std::string s;
            for (std::size_t i = 0; i < node.children.size(); ++i) {
                if (i > 0) s += " + ";
                s += child_text(node.children[i], false);
            }
            return s;
        }
        case KernelExpr::NodeKind::product: {
            std::string s;
            for (std::size_t i = 0; i < node.children.size(); ++i) {
                if (i > 0) s += " * ";
                s += child_text(node.children[i], true);
            }
            return s;
        }
        case KernelExpr::NodeKind::scale:
            return param_text(k, node.params[0]) + " * " + child_text(node.children.front(), true);
    }
    return {};
}

}  // namespace

std::string KernelExpr::to_string() const { return render(*this, root()); }

bool KernelExpr::uses_original_channel() const {
    return std::any_of(nodes_.begin(), nodes_.end(), [](const Node& n) {
        return n.kind == NodeKind::leaf && n.channel == Channel::original && n.leaf != LeafKind::constant &&
               n.leaf != LeafKind::noise;
    });
}

bool KernelExpr::has_noise() const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [](const Node& n) { return n.kind == NodeKind::leaf && n.leaf == LeafKind::noise; });
}

HyperVector KernelExpr::make_hyper(const Eigen::VectorXd& log_values) const {
    return HyperVector(param_names_, log_values);
}

// ---------------------------------------------------------------------------
// Evaluation

KernelEvaluator::KernelEvaluator(const KernelExpr& kernel, const HyperVector& theta)
    : kernel_(&kernel), num_params_(kernel.num_params()) {
    if (theta.size() != num_params_)
        throw InvalidArgument(fmt::format("kernel '{}' has {} hyperparameters but {} were given", kernel.source(),
                                          num_params_, theta.size()));
    values_.resize(num_params_);
    for (std::size_t i = 0; i < num_params_; ++i) values_[i] = std::exp(theta.log_values()[i]);
    const std::size_t n = kernel.nodes().size();
    node_value_.resize(n);
    node_dinput_.resize(n);
    node_grad_.resize(n * num_params_);
}

double KernelEvaluator::coordinate(const KernelExpr::Node& node, const InputPoint& p) const {
    if (node.channel == Channel::warped) return p.warped;
    if (!p.original)
        throw MissingChannel(fmt::format("{} leaf reads the original channel but the input is single-channel",
                                         to_string(node.leaf)));
    return *p.original;
}

double KernelEvaluator::value(const InputPoint& a, const InputPoint& b, bool same_index) {
    double dwarped = 0.0;
    return value_and_grad(a, b, same_index, {}, dwarped);
}

double KernelEvaluator::value_and_grad(const InputPoint& a, const InputPoint& b, bool same_index,
                                       std::span<double> dtheta, double& dwarped) {
    const bool want_grad = !dtheta.empty();
    if (want_grad && dtheta.size() != num_params_)
        throw InvalidArgument("gradient buffer does not match the number of hyperparameters");

    const auto& nodes = kernel_->nodes();
    const std::size_t m = num_params_;

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& node = nodes[i];
        double* grad = want_grad ? node_grad_.data() + i * m : nullptr;
        if (grad) std::fill(grad, grad + m, 0.0);
        auto add_grad = [&](const ParamRef& p, double g) {
            if (grad && p.is_free()) grad[p.index] += g;
        };

        double v = 0.0;
        double dv = 0.0;  // d/d a.warped
        switch (node.kind) {
            case KernelExpr::NodeKind::leaf: {
                const bool on_warped = node.channel == Channel::warped;
                switch (node.leaf) {
                    case LeafKind::rbf: {
                        const double l = param(node.params[0]);
                        const double d = coordinate(node, a) - coordinate(node, b);
                        const double z = d * d / (l * l);
                        v = std::exp(-0.5 * z);
                        if (on_warped) dv = -d / (l * l) * v;
                        add_grad(node.params[0], v * z);
                        break;
                    }
                    case LeafKind::matern32: {
                        const double l = param(node.params[0]);
                        const double d = coordinate(node, a) - coordinate(node, b);
                        const double s = std::sqrt(3.0) * std::abs(d) / l;
                        const double e = std::exp(-s);
                        v = (1.0 + s) * e;
                        if (on_warped) dv = -3.0 * d / (l * l) * e;
                        add_grad(node.params[0], s * s * e);
                        break;
                    }
                    case LeafKind::matern52: {
                        const double l = param(node.params[0]);
                        const double d = coordinate(node, a) - coordinate(node, b);
                        const double s = std::sqrt(5.0) * std::abs(d) / l;
                        const double e = std::exp(-s);
                        v = (1.0 + s + s * s / 3.0) * e;
                        if (on_warped) dv = -5.0 / 3.0 * d / (l * l) * (1.0 + s) * e;
                        add_grad(node.params[0], s * s / 3.0 * (1.0 + s) * e);
                        break;
                    }
                    case LeafKind::periodic: {
                        const double p = param(node.params[0]);
                        const double l = param(node.params[1]);
                        const double d = coordinate(node, a) - coordinate(node, b);
                        const double u = std::numbers::pi * d / p;
                        const double sn = std::sin(u);
                        v = std::exp(-2.0 * sn * sn / (l * l));
                        if (on_warped) dv = -v * 2.0 * std::numbers::pi / (p * l * l) * std::sin(2.0 * u);
                        add_grad(node.params[0], v * 2.0 * u * std::sin(2.0 * u) / (l * l));
                        add_grad(node.params[1], v * 4.0 * sn * sn / (l * l));
                        break;
                    }
                    case LeafKind::constant: {
                        v = param(node.params[0]);
                        add_grad(node.params[0], v);
                        break;
                    }
                    case LeafKind::noise: {
                        v = same_index ? param(node.params[0]) : 0.0;
                        add_grad(node.params[0], v);
                        break;
                    }
                }
                break;
            }
            case KernelExpr::NodeKind::sum: {
                for (int c : node.children) {
                    v += node_value_[c];
                    dv += node_dinput_[c];
                    if (grad) {
                        const double* cg = node_grad_.data() + c * m;
                        for (std::size_t j = 0; j < m; ++j) grad[j] += cg[j];
                    }
                }
                break;
            }
            case KernelExpr::NodeKind::product: {
                v = 1.0;
                for (int c : node.children) {
                    const double cv = node_value_[c];
                    if (grad) {
                        const double* cg = node_grad_.data() + c * m;
                        for (std::size_t j = 0; j < m; ++j) grad[j] = grad[j] * cv + v * cg[j];
                    }
                    dv = dv * cv + v * node_dinput_[c];
                    v *= cv;
                }
                break;
            }
            case KernelExpr::NodeKind::scale: {
                const int c = node.children.front();
                const double scale = param(node.params[0]);
                v = scale * node_value_[c];
                dv = scale * node_dinput_[c];
                if (grad) {
                    const double* cg = node_grad_.data() + c * m;
                    for (std::size_t j = 0; j < m; ++j) grad[j] = scale * cg[j];
                }
                add_grad(node.params[0], v);
                break;
            }
        }
        node_value_[i] = v;
        node_dinput_[i] = dv;
    }

    const int root = kernel_->root();
    if (want_grad) std::copy_n(node_grad_.data() + root * m, m, dtheta.begin());
    dwarped = node_dinput_[root];
    return node_value_[root];
}

double eval_kernel(const KernelExpr& kernel, const InputPoint& a, const InputPoint& b, const HyperVector& theta,
                   bool same_index) {
    KernelEvaluator eval(kernel, theta);
    return eval.value(a, b, same_index);
}

Eigen::VectorXd grad_kernel_hyper(const KernelExpr& kernel, const InputPoint& a, const InputPoint& b,
                                  const HyperVector& theta, bool same_index) {
    KernelEvaluator eval(kernel, theta);
    Eigen::VectorXd g(static_cast<Eigen::Index>(kernel.num_params()));
    double dwarped = 0.0;
    if (g.size() > 0)
        eval.value_and_grad(a, b, same_index, std::span<double>(g.data(), g.size()), dwarped);
    return g;
}

double grad_kernel_input(const KernelExpr& kernel, const InputPoint& a, const InputPoint& b,
                         const HyperVector& theta) {
    KernelEvaluator eval(kernel, theta);
    double dwarped = 0.0;
    eval.value_and_grad(a, b, false, {}, dwarped);
    return dwarped;
}

}  // namespace wigp
