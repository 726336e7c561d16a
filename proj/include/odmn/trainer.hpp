#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "odmn/bucketing.hpp"
#include "odmn/data.hpp"
#include "odmn/discretizer.hpp"
#include "odmn/losses.hpp"
#include "odmn/metrics.hpp"
#include "odmn/model.hpp"

namespace odmn {

struct AblationFlags {
    bool mono = true;
    bool calibration = true;
    bool distillation = true;
    bool bias_tower = true;
};

struct RunConfig {
    std::string dataset_path;
    std::string schema_path;
    std::string scheme_path;  // optional; fitted from training labels when empty
    std::string out_dir;

    ModelDims dims;
    LossWeights weights;           // alpha=1, beta=gamma=0.5
    AblationFlags flags;
    BucketConfig buckets;

    int batch_size = 512;
    double lr = 0.05;
    double lr_embedding = 0.1;
    int epochs = 5;
    uint64_t seed = 1;
    bool baseline = false;
    double validation_fraction = 0.10;

    DecodeMode decode_mode() const {
        return flags.bias_tower ? DecodeMode::Bias : DecodeMode::Midpoint;
    }
    LossFlags loss_flags() const {
        return LossFlags{flags.distillation, flags.bias_tower, flags.calibration};
    }
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    uint64_t hash() const;
};

RunConfig load_run_config(const std::string& path);

/// NM/NMB/NMO/MDME switch distillation and the bias tower; S/SM/SC/ODMN
/// switch the Mono Units and the calibration loss.
void apply_ablation_preset(RunConfig& config, const std::string& name);

struct Checkpoint {
    RunConfig config;
    FeatureSchema schema;
    Discretizer discretizer;
    BucketingScheme scheme;
    int epoch = 0;

    // parameter and optimizer state, keyed by parameter name
    std::vector<Param> params;
    int64_t adam_step = 0;
    std::vector<Tensor2> adam_m;
    std::vector<Tensor2> adam_v;

    std::string to_json() const;
    static Checkpoint from_json(const std::string& text);
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct EpochLog {
    int epoch = 0;
    std::map<std::string, double> losses;  // batch-averaged components
    EvalReport validation;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
    int64_t train_rows = 0;
    int64_t validation_rows = 0;
    int64_t encode_clamps = 0;  // must be 0 on training data
};

std::string train_log_to_json(const TrainResult& result);

/// Deterministic 90/10-style split keyed by (seed, row index).
void split_rows(uint64_t seed, size_t n, double validation_fraction, std::vector<int64_t>& train,
                std::vector<int64_t>& validation);

/// Joint training per the run config (or the MSE baseline when
/// config.baseline). Resuming from a checkpoint continues bit-identically
/// with the uninterrupted run.
TrainResult train(const RunConfig& config, const Dataset& dataset, const FeatureSchema& schema,
                  const Checkpoint* resume = nullptr);

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& dataset);

/// Per-task estimates for feature rows (labels not required).
std::vector<std::vector<double>> predict_rows(const Checkpoint& ckpt,
                                              const std::vector<FeatureRow>& rows);

/// Rebuild the model (structure + parameter values) from a checkpoint.
std::unique_ptr<OdmnModel> model_from_checkpoint(const Checkpoint& ckpt);
std::unique_ptr<BaselineModel> baseline_from_checkpoint(const Checkpoint& ckpt);

}  // namespace odmn
