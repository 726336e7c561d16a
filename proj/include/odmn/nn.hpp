#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "odmn/rng.hpp"
#include "odmn/tape.hpp"
#include "odmn/tensor.hpp"

namespace odmn {

enum class Activation { Identity, Relu, Sigmoid, Softmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// One affine layer: out = act(input * weights + biases).
/// weights is (in-dim x out-dim), biases 1 x out-dim.
/// When `nonnegative` is set, the optimizer projects weights to >= 0 after
/// every step (biases stay unconstrained).
struct DenseLayer {
    Tensor2 weights;
    Tensor2 biases;
    Activation activation = Activation::Identity;
    bool nonnegative = false;
};

Tensor2 forward(const DenseLayer& layer, const Tensor2& input);
int forward(Tape& tape, int input, int weights, int biases, Activation act);

// ---- parameters ----------------------------------------------------------

struct Param {
    std::string name;
    Tensor2 value;
    bool nonnegative = false;
    bool embedding = false;  // selects the embedding learning-rate group
};

class ParamSet {
  public:
    int add(std::string name, Tensor2 value, bool nonnegative = false, bool embedding = false);
    Param& operator[](int i) { return params_[i]; }
    const Param& operator[](int i) const { return params_[i]; }
    int size() const { return static_cast<int>(params_.size()); }
    int find(const std::string& name) const;  // -1 if absent

    /// Insert every parameter as a tape leaf; returns node ids parallel to
    /// the parameter indices.
    std::vector<int> bind(Tape& tape) const;

  private:
    std::vector<Param> params_;
};

/// Fan-based uniform init; nonnegative tensors draw from [0, bound).
/// The stream is keyed by (seed, name) so init is independent of
/// construction order.
Tensor2 init_tensor(int rows, int cols, uint64_t seed, const std::string& name, bool nonnegative);

// ---- optimizer ------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with per-parameter moment tensors and a projection step: after each
/// update, nonnegative-flagged tensors are clamped elementwise to >= 0.
class AdamOptimizer {
  public:
    AdamOptimizer() = default;
    AdamOptimizer(const ParamSet& params, AdamConfig cfg = {});

    /// One update over all parameters. grads must be congruent to params.
    /// lr applies to ordinary parameters, lr_embedding to embedding tables.
    void step(ParamSet& params, const std::vector<Tensor2>& grads, double lr, double lr_embedding);

    int64_t step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

    // exposed for checkpointing
    std::vector<Tensor2>& first_moments() { return m_; }
    std::vector<Tensor2>& second_moments() { return v_; }
    const std::vector<Tensor2>& first_moments() const { return m_; }
    const std::vector<Tensor2>& second_moments() const { return v_; }
    void restore(int64_t step, std::vector<Tensor2> m, std::vector<Tensor2> v);

  private:
    AdamConfig cfg_;
    int64_t step_ = 0;
    std::vector<Tensor2> m_;
    std::vector<Tensor2> v_;
};

// ---- gradient checking -----------------------------------------------------

/// Builds a 1x1 loss node on the tape from bound parameter ids.
using LossBuilder = std::function<int(Tape&, const std::vector<int>& param_ids)>;

struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_err = 0.0;
    };
    std::vector<Entry> tensors;
    double max_rel_err = 0.0;
    bool passed(double tolerance) const { return max_rel_err < tolerance; }
};

/// Backward-pass gradients of the loss for every parameter tensor.
std::vector<Tensor2> analytic_gradients(const ParamSet& params, const LossBuilder& build);

/// Central finite differences with step h. Stop-gradient values captured on
/// the base tape are replayed during the perturbed evaluations so numeric and
/// analytic differentiation agree on what is held constant.
std::vector<Tensor2> fd_gradients(const ParamSet& params, const LossBuilder& build, double h = 1e-5);

/// Per-tensor max relative error |ga - gf| / max(|ga|, |gf|, 1e-8).
GradCheckReport compare_gradients(const ParamSet& params, const std::vector<Tensor2>& analytic,
                                  const std::vector<Tensor2>& fd);

GradCheckReport finite_diff_check(const ParamSet& params, const LossBuilder& build, double h = 1e-5);

}  // namespace odmn
