#pragma once

#include <span>
#include <string>
#include <vector>

#include "odmn/bucketing.hpp"
#include "odmn/model.hpp"
#include "odmn/tape.hpp"

namespace odmn {

struct LossWeights {
    double alpha = 1.0;  // ordered-dependency calibration strength
    double beta = 0.5;   // segmentation-level distillation weight
    double gamma = 0.5;  // bucket-level distillation weight
};

struct LossFlags {
    bool distillation = true;
    bool bias_tower = true;
    bool calibration = true;
};

// ---- tape builders ---------------------------------------------------------
// probs/P are node ids; targets and masks are constants. All losses average
// over the unmasked samples (empty mask contributes 0) and floor
// probabilities at 1e-12 before any log.

int ce_loss_node(Tape& tape, int probs, const std::vector<int>& targets,
                 const std::vector<double>& sample_mask);
int ordinal_loss_node(Tape& tape, int P, const std::vector<int>& targets,
                      const std::vector<double>& sample_mask);
int distill_loss_node(Tape& tape, int student_probs, const Tensor2& teacher,
                      const std::vector<double>& sample_mask);
int bias_loss_node(Tape& tape, int q_b, const Tensor2& targets, const Tensor2& element_mask);
int calibration_loss_node(Tape& tape, const std::vector<int>& estimates_per_task);

// ---- plain wrappers (the spec-facing operations) ----------------------------

double ce_loss(const Tensor2& probs, const std::vector<int>& targets,
               const std::vector<double>& sample_mask);
double ordinal_loss(const Tensor2& P, const std::vector<int>& targets,
                    const std::vector<double>& sample_mask);
/// Eq-style point estimate: number of entries with P^u >= 0.5.
int ordinal_point_estimate(std::span<const double> P);
/// First-differences transform of P(l > u) into a categorical soft label:
/// pi_0 = 1 - P^0, pi_u = P^{u-1} - P^u, pi_{U-1} = P^{U-2}; negatives clamp
/// to 0 and the vector renormalizes (uniform fallback if it degenerates).
std::vector<double> soft_label_from_ordinal(std::span<const double> P);
double distill_loss(const Tensor2& student, const Tensor2& teacher,
                    const std::vector<double>& sample_mask);
double bias_loss(const Tensor2& q_b, const Tensor2& targets, const Tensor2& element_mask);
double calibration_loss(const std::vector<std::vector<double>>& estimates_per_task);

// ---- the joint objective ----------------------------------------------------

struct LossNodes {
    int total = -1;
    std::vector<std::pair<std::string, int>> components;  // name -> 1x1 node
};

/// Joint loss over one batch: per task the segmentation-level CE, ordinal and
/// distillation losses over all samples, per sub-distribution the bucket CE,
/// ordinal, distillation and bias losses over that sub-distribution's samples
/// only, plus the calibration penalty over adjacent soft estimates.
LossNodes total_loss(Tape& tape, const OdmnModel& model, const OdmnModel::ForwardNodes& fwd,
                     const std::vector<std::vector<EncodedTarget>>& targets_by_task,
                     const std::vector<int64_t>& batch, const LossWeights& weights,
                     const LossFlags& flags, DecodeMode decode_mode);

}  // namespace odmn
