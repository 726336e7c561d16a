#include "odmn/losses.hpp"

#include <algorithm>
#include <cmath>

namespace odmn {

namespace {
constexpr double kProbFloor = 1e-12;

Tensor2 one_hot(const std::vector<int>& targets, int classes) {
    Tensor2 t(static_cast<int>(targets.size()), classes);
    for (size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] < 0 || targets[i] >= classes)
            throw ShapeError("one_hot: target " + std::to_string(targets[i]) + " out of range [0," +
                             std::to_string(classes) + ")");
        t.at(static_cast<int>(i), targets[i]) = 1.0;
    }
    return t;
}

Tensor2 mask_col(const std::vector<double>& mask) {
    Tensor2 m(static_cast<int>(mask.size()), 1);
    for (size_t i = 0; i < mask.size(); ++i) m.at(static_cast<int>(i), 0) = mask[i];
    return m;
}
}  // namespace

int ce_loss_node(Tape& tape, int probs, const std::vector<int>& targets,
                 const std::vector<double>& sample_mask) {
    const Tensor2& p = tape.val(probs);
    const int hot = tape.leaf(one_hot(targets, p.cols()));
    const int picked = tape.rowsum(tape.mul(hot, tape.log_floored(probs, kProbFloor)));
    return tape.scale(tape.masked_mean(picked, mask_col(sample_mask)), -1.0);
}

int ordinal_loss_node(Tape& tape, int P, const std::vector<int>& targets,
                      const std::vector<double>& sample_mask) {
    const Tensor2& p = tape.val(P);
    const int U = p.cols();
    Tensor2 tgt(p.rows(), U);
    for (size_t i = 0; i < targets.size(); ++i) {
        const std::vector<double> row = ordinal_targets(targets[i], U);
        for (int u = 0; u < U; ++u) tgt.at(static_cast<int>(i), u) = row[static_cast<size_t>(u)];
    }
    Tensor2 inv = tgt;
    for (size_t k = 0; k < inv.size(); ++k) inv[k] = 1.0 - inv[k];
    const int pos = tape.mul(tape.leaf(std::move(tgt)), tape.log_floored(P, kProbFloor));
    const int neg = tape.mul(tape.leaf(std::move(inv)), tape.log_floored(tape.one_minus(P), kProbFloor));
    const int per_sample = tape.rowsum(tape.add(pos, neg));
    return tape.scale(tape.masked_mean(per_sample, mask_col(sample_mask)), -1.0);
}

int distill_loss_node(Tape& tape, int student_probs, const Tensor2& teacher,
                      const std::vector<double>& sample_mask) {
    const int cross = tape.rowsum(tape.mul(tape.leaf(teacher), tape.log_floored(student_probs, kProbFloor)));
    return tape.scale(tape.masked_mean(cross, mask_col(sample_mask)), -1.0);
}

int bias_loss_node(Tape& tape, int q_b, const Tensor2& targets, const Tensor2& element_mask) {
    const int diff = tape.sub(q_b, tape.leaf(targets));
    return tape.masked_mean(tape.mul(diff, diff), element_mask);
}

int calibration_loss_node(Tape& tape, const std::vector<int>& estimates_per_task) {
    if (estimates_per_task.size() < 2) return tape.leaf(Tensor2(1, 1));
    std::vector<int> penalties;
    for (size_t t = 0; t + 1 < estimates_per_task.size(); ++t)
        penalties.push_back(tape.relu(tape.sub(estimates_per_task[t], estimates_per_task[t + 1])));
    return tape.mean_all(tape.add_many(penalties));
}

// ---- plain wrappers ---------------------------------------------------------

double ce_loss(const Tensor2& probs, const std::vector<int>& targets,
               const std::vector<double>& sample_mask) {
    Tape tape;
    return tape.val(ce_loss_node(tape, tape.leaf(probs), targets, sample_mask)).at(0, 0);
}

double ordinal_loss(const Tensor2& P, const std::vector<int>& targets,
                    const std::vector<double>& sample_mask) {
    Tape tape;
    return tape.val(ordinal_loss_node(tape, tape.leaf(P), targets, sample_mask)).at(0, 0);
}

int ordinal_point_estimate(std::span<const double> P) {
    int count = 0;
    for (double p : P)
        if (p >= 0.5) ++count;
    return count;
}

std::vector<double> soft_label_from_ordinal(std::span<const double> P) {
    const size_t U = P.size();
    if (U == 0) throw ShapeError("soft_label_from_ordinal: empty input");
    std::vector<double> pi(U, 0.0);
    if (U == 1) {
        pi[0] = 1.0;
        return pi;
    }
    pi[0] = 1.0 - P[0];
    for (size_t u = 1; u + 1 < U; ++u) pi[u] = P[u - 1] - P[u];
    pi[U - 1] = P[U - 2];
    double sum = 0.0;
    for (double& x : pi) {
        x = std::max(x, 0.0);
        sum += x;
    }
    if (sum <= 0.0) {
        std::fill(pi.begin(), pi.end(), 1.0 / static_cast<double>(U));
        return pi;
    }
    for (double& x : pi) x /= sum;
    return pi;
}

double distill_loss(const Tensor2& student, const Tensor2& teacher,
                    const std::vector<double>& sample_mask) {
    Tape tape;
    return tape.val(distill_loss_node(tape, tape.leaf(student), teacher, sample_mask)).at(0, 0);
}

double bias_loss(const Tensor2& q_b, const Tensor2& targets, const Tensor2& element_mask) {
    Tape tape;
    return tape.val(bias_loss_node(tape, tape.leaf(q_b), targets, element_mask)).at(0, 0);
}

double calibration_loss(const std::vector<std::vector<double>>& estimates_per_task) {
    Tape tape;
    std::vector<int> ids;
    for (const std::vector<double>& est : estimates_per_task) ids.push_back(tape.leaf(Tensor2::col(est)));
    return tape.val(calibration_loss_node(tape, ids)).at(0, 0);
}

// ---- joint objective ---------------------------------------------------------

namespace {
/// Teacher soft labels from the current ordinal outputs, one row per sample.
Tensor2 teacher_from(const Tensor2& P) {
    Tensor2 t(P.rows(), P.cols());
    std::vector<double> row(static_cast<size_t>(P.cols()));
    for (int i = 0; i < P.rows(); ++i) {
        for (int j = 0; j < P.cols(); ++j) row[static_cast<size_t>(j)] = P.at(i, j);
        const std::vector<double> pi = soft_label_from_ordinal(row);
        for (int j = 0; j < P.cols(); ++j) t.at(i, j) = pi[static_cast<size_t>(j)];
    }
    return t;
}
}  // namespace

LossNodes total_loss(Tape& tape, const OdmnModel& model, const OdmnModel::ForwardNodes& fwd,
                     const std::vector<std::vector<EncodedTarget>>& targets_by_task,
                     const std::vector<int64_t>& batch, const LossWeights& weights,
                     const LossFlags& flags, DecodeMode decode_mode) {
    const BucketingScheme& scheme = model.scheme();
    const size_t T = scheme.tasks.size();
    if (targets_by_task.size() != T) throw ShapeError("total_loss: target task count mismatch");
    const size_t B = batch.size();
    const std::vector<double> all_ones(B, 1.0);

    LossNodes out;
    std::vector<int> terms;
    auto component = [&](const std::string& name, int node, double weight) {
        out.components.emplace_back(name, node);
        terms.push_back(weight == 1.0 ? node : tape.scale(node, weight));
    };

    for (size_t t = 0; t < T; ++t) {
        const TaskScheme& task = scheme.tasks[t];
        const OdmnModel::TaskNodes& nodes = fwd.tasks[t];
        const std::string stem = "task" + std::to_string(t);

        std::vector<int> sub_targets(B);
        for (size_t i = 0; i < B; ++i)
            sub_targets[i] = targets_by_task[t][static_cast<size_t>(batch[i])].sub_dist;

        component(stem + "/dct_ce", ce_loss_node(tape, nodes.pc, sub_targets, all_ones), 1.0);
        component(stem + "/dot_ord", ordinal_loss_node(tape, nodes.po, sub_targets, all_ones), 1.0);
        if (flags.distillation)
            component(stem + "/dct_dis",
                      distill_loss_node(tape, nodes.pc, teacher_from(tape.val(nodes.po)), all_ones),
                      weights.beta);

        for (int s = 0; s < task.subdist_count(); ++s) {
            const SubDist& sd = task.subdists[static_cast<size_t>(s)];
            const std::string sub = stem + "/sub" + std::to_string(s);
            std::vector<double> mask(B, 0.0);
            std::vector<int> bucket_targets(B, 0);
            for (size_t i = 0; i < B; ++i) {
                const EncodedTarget& e = targets_by_task[t][static_cast<size_t>(batch[i])];
                if (e.sub_dist == s) {
                    mask[i] = 1.0;
                    bucket_targets[i] = e.bucket;
                }
            }
            component(sub + "/bct_ce",
                      ce_loss_node(tape, nodes.qc[static_cast<size_t>(s)], bucket_targets, mask), 1.0);
            component(sub + "/bot_ord",
                      ordinal_loss_node(tape, nodes.qo[static_cast<size_t>(s)], bucket_targets, mask),
                      1.0);
            if (flags.distillation)
                component(sub + "/bct_dis",
                          distill_loss_node(tape, nodes.qc[static_cast<size_t>(s)],
                                            teacher_from(tape.val(nodes.qo[static_cast<size_t>(s)])),
                                            mask),
                          weights.gamma);
            const int r = sd.bias_count();
            if (flags.bias_tower && r > 0) {
                Tensor2 bias_targets(static_cast<int>(B), r);
                Tensor2 bias_mask(static_cast<int>(B), r);
                for (size_t i = 0; i < B; ++i) {
                    const EncodedTarget& e = targets_by_task[t][static_cast<size_t>(batch[i])];
                    if (e.sub_dist == s && e.bias.has_value()) {
                        const int slot = sd.buckets[static_cast<size_t>(e.bucket)].bias_slot;
                        bias_targets.at(static_cast<int>(i), slot) = *e.bias;
                        bias_mask.at(static_cast<int>(i), slot) = 1.0;
                    }
                }
                component(sub + "/bbt_mse",
                          bias_loss_node(tape, nodes.qb[static_cast<size_t>(s)], bias_targets,
                                         bias_mask),
                          1.0);
            }
        }
    }

    if (flags.calibration && T >= 2) {
        std::vector<int> estimates;
        for (size_t t = 0; t < T; ++t)
            estimates.push_back(model.soft_estimate(tape, fwd.tasks[t], static_cast<int>(t), decode_mode));
        component("cali", calibration_loss_node(tape, estimates), weights.alpha);
    }

    out.total = tape.add_many(terms);
    out.components.emplace_back("total", out.total);
    return out;
}

}  // namespace odmn
