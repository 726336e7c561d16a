#include "odmn/nn.hpp"

#include <algorithm>
#include <cmath>

namespace odmn {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softmax") return Activation::Softmax;
    throw ConfigError("unknown activation '" + name + "'");
}

Tensor2 forward(const DenseLayer& layer, const Tensor2& input) {
    if (input.cols() != layer.weights.rows())
        throw ShapeError("DenseLayer forward: input " + shape_str(input) + " does not match weights " +
                         shape_str(layer.weights));
    Tensor2 out = matmul_plain(input, layer.weights);
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) out.at(i, j) += layer.biases.at(0, j);
    switch (layer.activation) {
        case Activation::Identity: break;
        case Activation::Relu:
            for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
            break;
        case Activation::Sigmoid:
            for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
            break;
        case Activation::Softmax:
            for (int i = 0; i < out.rows(); ++i) {
                double mx = out.at(i, 0);
                for (int j = 1; j < out.cols(); ++j) mx = std::max(mx, out.at(i, j));
                double sum = 0.0;
                for (int j = 0; j < out.cols(); ++j) {
                    out.at(i, j) = std::exp(out.at(i, j) - mx);
                    sum += out.at(i, j);
                }
                for (int j = 0; j < out.cols(); ++j) out.at(i, j) /= sum;
            }
            break;
    }
    return out;
}

int forward(Tape& tape, int input, int weights, int biases, Activation act) {
    int z = tape.add_rowvec(tape.matmul(input, weights), biases);
    switch (act) {
        case Activation::Identity: return z;
        case Activation::Relu: return tape.relu(z);
        case Activation::Sigmoid: return tape.sigmoid(z);
        case Activation::Softmax: return tape.softmax_rows(z);
    }
    return z;
}

int ParamSet::add(std::string name, Tensor2 value, bool nonnegative, bool embedding) {
    params_.push_back(Param{std::move(name), std::move(value), nonnegative, embedding});
    return static_cast<int>(params_.size()) - 1;
}

int ParamSet::find(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (params_[i].name == name) return i;
    return -1;
}

std::vector<int> ParamSet::bind(Tape& tape) const {
    std::vector<int> ids;
    ids.reserve(params_.size());
    for (const Param& p : params_) ids.push_back(tape.leaf(p.value));
    return ids;
}

Tensor2 init_tensor(int rows, int cols, uint64_t seed, const std::string& name, bool nonnegative) {
    Rng rng(mix64(seed, fnv1a(name)));
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor2 t(rows, cols);
    for (size_t i = 0; i < t.size(); ++i)
        t[i] = nonnegative ? rng.uniform(0.0, bound) : rng.uniform(-bound, bound);
    return t;
}

AdamOptimizer::AdamOptimizer(const ParamSet& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (int i = 0; i < params.size(); ++i) {
        m_.emplace_back(params[i].value.rows(), params[i].value.cols());
        v_.emplace_back(params[i].value.rows(), params[i].value.cols());
    }
}

void AdamOptimizer::step(ParamSet& params, const std::vector<Tensor2>& grads, double lr,
                         double lr_embedding) {
    if (static_cast<int>(grads.size()) != params.size())
        throw ShapeError("AdamOptimizer::step: got " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (int i = 0; i < params.size(); ++i) {
        Param& p = params[i];
        const Tensor2& g = grads[i];
        if (!g.same_shape(p.value))
            throw ShapeError("AdamOptimizer::step: gradient shape " + shape_str(g) + " for '" + p.name +
                             "' " + shape_str(p.value));
        if (!g.all_finite()) throw NumericError("non-finite gradient for parameter '" + p.name + "'");
        Tensor2& m = m_[i];
        Tensor2& v = v_[i];
        const double rate = p.embedding ? lr_embedding : lr;
        for (size_t k = 0; k < g.size(); ++k) {
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p.value[k] -= rate * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        if (p.nonnegative)
            for (size_t k = 0; k < p.value.size(); ++k) p.value[k] = std::max(p.value[k], 0.0);
    }
}

void AdamOptimizer::restore(int64_t step, std::vector<Tensor2> m, std::vector<Tensor2> v) {
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
}

std::vector<Tensor2> analytic_gradients(const ParamSet& params, const LossBuilder& build) {
    Tape tape;
    std::vector<int> ids = params.bind(tape);
    const int loss = build(tape, ids);
    tape.backward(loss);
    std::vector<Tensor2> grads;
    grads.reserve(ids.size());
    for (int id : ids) grads.push_back(tape.grad(id));
    return grads;
}

namespace {
double eval_loss(const ParamSet& params, const LossBuilder& build,
                 const std::vector<Tensor2>& stops) {
    Tape tape;
    tape.begin_replay(stops);
    std::vector<int> ids = params.bind(tape);
    const int loss = build(tape, ids);
    return tape.val(loss).at(0, 0);
}
}  // namespace

std::vector<Tensor2> fd_gradients(const ParamSet& params, const LossBuilder& build, double h) {
    // Capture the stop-gradient values once at the base point; perturbed
    // evaluations replay them so stopped branches stay constant.
    std::vector<Tensor2> stops;
    {
        Tape tape;
        std::vector<int> ids = params.bind(tape);
        build(tape, ids);
        stops = tape.captured_stops();
    }
    ParamSet work;
    for (int i = 0; i < params.size(); ++i) {
        const Param& p = params[i];
        work.add(p.name, p.value, p.nonnegative, p.embedding);
    }
    std::vector<Tensor2> grads;
    grads.reserve(params.size());
    for (int i = 0; i < params.size(); ++i) {
        Tensor2 g(work[i].value.rows(), work[i].value.cols());
        for (size_t k = 0; k < g.size(); ++k) {
            const double original = work[i].value[k];
            work[i].value[k] = original + h;
            const double up = eval_loss(work, build, stops);
            work[i].value[k] = original - h;
            const double down = eval_loss(work, build, stops);
            work[i].value[k] = original;
            g[k] = (up - down) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

GradCheckReport compare_gradients(const ParamSet& params, const std::vector<Tensor2>& analytic,
                                  const std::vector<Tensor2>& fd) {
    GradCheckReport report;
    for (int i = 0; i < params.size(); ++i) {
        GradCheckReport::Entry e;
        e.name = params[i].name;
        for (size_t k = 0; k < analytic[i].size(); ++k) {
            const double ga = analytic[i][k];
            const double gf = fd[i][k];
            const double denom = std::max({std::abs(ga), std::abs(gf), 1e-8});
            e.max_rel_err = std::max(e.max_rel_err, std::abs(ga - gf) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
        report.tensors.push_back(std::move(e));
    }
    return report;
}

GradCheckReport finite_diff_check(const ParamSet& params, const LossBuilder& build, double h) {
    return compare_gradients(params, analytic_gradients(params, build), fd_gradients(params, build, h));
}

}  // namespace odmn
