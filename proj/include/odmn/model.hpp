#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "odmn/bucketing.hpp"
#include "odmn/data.hpp"
#include "odmn/discretizer.hpp"
#include "odmn/nn.hpp"

namespace odmn {

struct ModelDims {
    int embedding_dim = 8;
    std::vector<int> bottom = {64, 32};
    int tower_hidden = 16;
    int mono_hidden_min = 4;
};

/// Shared embedding tables plus the shared-bottom MLP. Used by both the main
/// model and the MSE baseline.
class EmbeddingTrunk {
  public:
    EmbeddingTrunk() = default;
    EmbeddingTrunk(const FeatureSchema& schema, const ModelDims& dims, uint64_t seed, ParamSet& params);

    /// Gather + concat + bottom layers for the given encoded rows.
    int forward(Tape& tape, const std::vector<int>& bound,
                const std::vector<std::vector<int>>& rows, const std::vector<int64_t>& batch) const;

    int output_dim() const { return output_dim_; }

  private:
    SlotLayout layout_;
    std::vector<int> tables_;  // param index per slot
    struct LayerRef {
        int w = -1, b = -1;
    };
    std::vector<LayerRef> bottom_;
    int output_dim_ = 0;
};

/// The multi-horizon network: per task a distribution segmentation module
/// (classification + ordinal towers over sub-distributions) and per
/// sub-distribution the bucket classification/ordinal/bias towers, with Mono
/// Units feeding each downstream classification tower from the upstream
/// normalized bucket distribution. Mono weights carry the nonnegative flag.
class OdmnModel {
  public:
    OdmnModel(const FeatureSchema& schema, const BucketingScheme& scheme, const ModelDims& dims,
              bool mono_enabled, uint64_t seed);

    struct TaskNodes {
        int pc = -1;                // softmax over sub-distributions
        int po = -1;                // sigmoid ordinal outputs, same size
        std::vector<int> qc;        // per sub-dist bucket softmax
        std::vector<int> qo;        // per sub-dist bucket ordinal sigmoids
        std::vector<int> qb;        // per sub-dist bias sigmoids; -1 when r_s == 0
        int o = -1;                 // normalized bucket multinomial, length M_t
        int o_stopped = -1;         // stop_gradient(o), input to the next task
    };
    struct ForwardNodes {
        int v = -1;
        std::vector<TaskNodes> tasks;
    };

    ForwardNodes forward(Tape& tape, const std::vector<int>& bound,
                         const std::vector<std::vector<int>>& rows,
                         const std::vector<int64_t>& batch) const;

    /// Differentiable expected-value estimate under the normalized bucket
    /// distribution; agrees with the hard decode as it approaches one-hot.
    int soft_estimate(Tape& tape, const TaskNodes& task_nodes, int task, DecodeMode mode) const;

    /// Hard decode (argmax path) for every task over the given rows.
    std::vector<std::vector<double>> predict(const std::vector<std::vector<int>>& rows,
                                             DecodeMode mode, int chunk_rows = 2048) const;

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const BucketingScheme& scheme() const { return scheme_; }
    bool mono_enabled() const { return mono_enabled_; }
    void set_mono_enabled(bool on) { mono_enabled_ = on; }
    const ModelDims& dims() const { return dims_; }

    /// Parameter indices of the Mono Units (for ablation tooling/tests).
    std::vector<int> mono_param_indices() const;

    /// Evaluate one Mono Unit on upstream distributions: task >= 1, tower -1
    /// for the DCT unit or the BCT index otherwise. Rows of o_prev are
    /// independent inputs.
    Tensor2 mono_offset(int task, int tower, const Tensor2& o_prev) const;

  private:
    struct MlpRef {
        int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
    };
    struct TaskRef {
        MlpRef dct, dot;
        std::vector<MlpRef> bct, bot;
        std::vector<std::optional<MlpRef>> bbt;
        std::optional<MlpRef> mono_dct;       // absent for the first task
        std::vector<std::optional<MlpRef>> mono_bct;
    };

    MlpRef make_mlp(const std::string& name, int in, int hidden, int out, bool nonneg_weights,
                    uint64_t seed);
    int apply_mlp(Tape& tape, const std::vector<int>& bound, const MlpRef& mlp, int input) const;

    FeatureSchema schema_;
    BucketingScheme scheme_;
    ModelDims dims_;
    bool mono_enabled_ = true;
    ParamSet params_;
    EmbeddingTrunk trunk_;
    std::vector<TaskRef> tasks_;
};

/// Normalized bucket multinomial distribution: the sub-distribution
/// probabilities weight each sub-distribution's bucket distribution,
/// concatenated in global bucket order. Sums to 1.
std::vector<double> normalized_bucket_distribution(std::span<const double> p_c,
                                                   const std::vector<std::vector<double>>& q_c);

/// Plain direct-regression baseline: same trunk, one linear head per task,
/// trained with MSE on the raw labels.
class BaselineModel {
  public:
    BaselineModel(const FeatureSchema& schema, const ModelDims& dims, int task_count, uint64_t seed);

    struct ForwardNodes {
        int v = -1;
        std::vector<int> estimates;  // Bx1 per task
    };
    ForwardNodes forward(Tape& tape, const std::vector<int>& bound,
                         const std::vector<std::vector<int>>& rows,
                         const std::vector<int64_t>& batch) const;

    std::vector<std::vector<double>> predict(const std::vector<std::vector<int>>& rows,
                                             int chunk_rows = 2048) const;

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

  private:
    FeatureSchema schema_;
    ModelDims dims_;
    ParamSet params_;
    EmbeddingTrunk trunk_;
    std::vector<std::pair<int, int>> heads_;  // (w, b) per task
};

}  // namespace odmn
