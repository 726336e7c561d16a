#include "odmn/model.hpp"

#include <algorithm>
#include <cmath>

namespace odmn {

EmbeddingTrunk::EmbeddingTrunk(const FeatureSchema& schema, const ModelDims& dims, uint64_t seed,
                               ParamSet& params) {
    layout_ = slot_layout(schema);
    for (const SlotLayout::Slot& slot : layout_.slots) {
        const std::string name = "embed/" + slot.name;
        tables_.push_back(params.add(name, init_tensor(slot.table_rows, dims.embedding_dim, seed, name,
                                                       false),
                                     false, true));
    }
    int in = layout_.total_lookups * dims.embedding_dim;
    for (size_t i = 0; i < dims.bottom.size(); ++i) {
        const int out = dims.bottom[i];
        const std::string stem = "bottom/" + std::to_string(i);
        LayerRef ref;
        ref.w = params.add(stem + "/w", init_tensor(in, out, seed, stem + "/w", false));
        ref.b = params.add(stem + "/b", Tensor2(1, out));
        bottom_.push_back(ref);
        in = out;
    }
    output_dim_ = in;
}

int EmbeddingTrunk::forward(Tape& tape, const std::vector<int>& bound,
                            const std::vector<std::vector<int>>& rows,
                            const std::vector<int64_t>& batch) const {
    std::vector<int> parts;
    std::vector<int> ids(batch.size());
    int pos = 0;
    for (size_t s = 0; s < layout_.slots.size(); ++s) {
        for (int k = 0; k < layout_.slots[s].lookups; ++k) {
            for (size_t i = 0; i < batch.size(); ++i)
                ids[i] = rows[static_cast<size_t>(batch[i])][static_cast<size_t>(pos)];
            parts.push_back(tape.gather_rows(bound[tables_[s]], ids, layout_.slots[s].name));
            ++pos;
        }
    }
    int x = tape.concat_cols(parts);
    for (const LayerRef& layer : bottom_)
        x = odmn::forward(tape, x, bound[layer.w], bound[layer.b], Activation::Relu);
    return x;
}

OdmnModel::MlpRef OdmnModel::make_mlp(const std::string& name, int in, int hidden, int out,
                                      bool nonneg_weights, uint64_t seed) {
    MlpRef ref;
    ref.w1 = params_.add(name + "/0/w", init_tensor(in, hidden, seed, name + "/0/w", nonneg_weights),
                         nonneg_weights);
    ref.b1 = params_.add(name + "/0/b", Tensor2(1, hidden));
    ref.w2 = params_.add(name + "/1/w", init_tensor(hidden, out, seed, name + "/1/w", nonneg_weights),
                         nonneg_weights);
    ref.b2 = params_.add(name + "/1/b", Tensor2(1, out));
    return ref;
}

int OdmnModel::apply_mlp(Tape& tape, const std::vector<int>& bound, const MlpRef& mlp,
                         int input) const {
    const int h = odmn::forward(tape, input, bound[mlp.w1], bound[mlp.b1], Activation::Relu);
    return odmn::forward(tape, h, bound[mlp.w2], bound[mlp.b2], Activation::Identity);
}

OdmnModel::OdmnModel(const FeatureSchema& schema, const BucketingScheme& scheme, const ModelDims& dims,
                     bool mono_enabled, uint64_t seed)
    : schema_(schema), scheme_(scheme), dims_(dims), mono_enabled_(mono_enabled) {
    schema_.validate();
    if (scheme_.tasks.size() != schema_.horizons.size())
        throw ConfigError("OdmnModel: scheme has " + std::to_string(scheme_.tasks.size()) +
                          " tasks but schema has " + std::to_string(schema_.horizons.size()) +
                          " horizons");
    trunk_ = EmbeddingTrunk(schema_, dims_, seed, params_);
    const int v_dim = trunk_.output_dim();

    for (size_t t = 0; t < scheme_.tasks.size(); ++t) {
        const TaskScheme& task = scheme_.tasks[t];
        const int S = task.subdist_count();
        const std::string stem = "task" + std::to_string(t);
        TaskRef ref;
        ref.dct = make_mlp(stem + "/dct", v_dim, dims_.tower_hidden, S, false, seed);
        ref.dot = make_mlp(stem + "/dot", v_dim, dims_.tower_hidden, S, false, seed);
        const int m_prev = t > 0 ? scheme_.tasks[t - 1].total_buckets : 0;
        const int mono_hidden = std::max(dims_.mono_hidden_min, m_prev);
        if (t > 0)
            ref.mono_dct = make_mlp(stem + "/mono_dct", m_prev, mono_hidden, S, true, seed);
        for (int s = 0; s < S; ++s) {
            const SubDist& sd = task.subdists[static_cast<size_t>(s)];
            const int m = sd.bucket_count();
            const int r = sd.bias_count();
            const std::string sub = stem + "/sub" + std::to_string(s);
            ref.bct.push_back(make_mlp(sub + "/bct", v_dim, dims_.tower_hidden, m, false, seed));
            ref.bot.push_back(make_mlp(sub + "/bot", v_dim, dims_.tower_hidden, m, false, seed));
            if (r > 0) {
                ref.bbt.push_back(make_mlp(sub + "/bbt", v_dim, dims_.tower_hidden, r, false, seed));
            } else {
                ref.bbt.push_back(std::nullopt);
            }
            if (t > 0) {
                ref.mono_bct.push_back(
                    make_mlp(sub + "/mono_bct", m_prev, mono_hidden, m, true, seed));
            } else {
                ref.mono_bct.push_back(std::nullopt);
            }
        }
        tasks_.push_back(std::move(ref));
    }
}

OdmnModel::ForwardNodes OdmnModel::forward(Tape& tape, const std::vector<int>& bound,
                                           const std::vector<std::vector<int>>& rows,
                                           const std::vector<int64_t>& batch) const {
    ForwardNodes out;
    out.v = trunk_.forward(tape, bound, rows, batch);
    int o_prev = -1;
    for (size_t t = 0; t < tasks_.size(); ++t) {
        const TaskRef& ref = tasks_[t];
        const TaskScheme& task = scheme_.tasks[t];
        TaskNodes nodes;

        int dct_logits = apply_mlp(tape, bound, ref.dct, out.v);
        if (mono_enabled_ && ref.mono_dct)
            dct_logits = tape.add(dct_logits, apply_mlp(tape, bound, *ref.mono_dct, o_prev));
        nodes.pc = tape.softmax_rows(dct_logits);
        nodes.po = tape.sigmoid(apply_mlp(tape, bound, ref.dot, out.v));

        std::vector<int> blocks;
        for (int s = 0; s < task.subdist_count(); ++s) {
            int bct_logits = apply_mlp(tape, bound, ref.bct[static_cast<size_t>(s)], out.v);
            if (mono_enabled_ && ref.mono_bct[static_cast<size_t>(s)])
                bct_logits = tape.add(
                    bct_logits, apply_mlp(tape, bound, *ref.mono_bct[static_cast<size_t>(s)], o_prev));
            nodes.qc.push_back(tape.softmax_rows(bct_logits));
            nodes.qo.push_back(
                tape.sigmoid(apply_mlp(tape, bound, ref.bot[static_cast<size_t>(s)], out.v)));
            if (ref.bbt[static_cast<size_t>(s)]) {
                nodes.qb.push_back(
                    tape.sigmoid(apply_mlp(tape, bound, *ref.bbt[static_cast<size_t>(s)], out.v)));
            } else {
                nodes.qb.push_back(-1);
            }
            blocks.push_back(tape.mul_colvec(nodes.qc.back(), tape.take_col(nodes.pc, s)));
        }
        nodes.o = tape.concat_cols(blocks);
        nodes.o_stopped = tape.stop_gradient(nodes.o);
        o_prev = nodes.o_stopped;
        out.tasks.push_back(std::move(nodes));
    }
    return out;
}

int OdmnModel::soft_estimate(Tape& tape, const TaskNodes& task_nodes, int task,
                             DecodeMode mode) const {
    const TaskScheme& ts = scheme_.tasks[static_cast<size_t>(task)];
    const int M = ts.total_buckets;
    Tensor2 base(1, M);
    Tensor2 width(1, M);
    int g = 0;
    for (const SubDist& sd : ts.subdists) {
        for (const Bucket& b : sd.buckets) {
            if (b.singleton) {
                base.at(0, g) = b.train_min;
            } else if (mode == DecodeMode::Midpoint) {
                base.at(0, g) = 0.5 * (b.train_min + b.train_max);
            } else {
                base.at(0, g) = b.train_min;
                width.at(0, g) = b.train_max - b.train_min;
            }
            ++g;
        }
    }
    if (mode == DecodeMode::Midpoint) {
        return tape.rowsum(tape.mul_rowvec_const(task_nodes.o, base));
    }
    // Per-bucket value rows: base + predicted_bias * width, biases taken from
    // the owning sub-distribution's bias tower columns.
    const int batch = tape.val(task_nodes.o).rows();
    std::vector<int> bias_cols;
    int zero_col = -1;
    for (int s = 0; s < ts.subdist_count(); ++s) {
        const SubDist& sd = ts.subdists[static_cast<size_t>(s)];
        for (const Bucket& b : sd.buckets) {
            if (b.singleton) {
                if (zero_col < 0) zero_col = tape.leaf(Tensor2(batch, 1));
                bias_cols.push_back(zero_col);
            } else {
                bias_cols.push_back(tape.take_col(task_nodes.qb[static_cast<size_t>(s)], b.bias_slot));
            }
        }
    }
    const int bias_full = tape.concat_cols(bias_cols);
    const int values = tape.add_rowvec_const(tape.mul_rowvec_const(bias_full, width), base);
    return tape.rowsum(tape.mul(task_nodes.o, values));
}

std::vector<std::vector<double>> OdmnModel::predict(const std::vector<std::vector<int>>& rows,
                                                    DecodeMode mode, int chunk_rows) const {
    const size_t n = rows.size();
    const size_t tasks = scheme_.tasks.size();
    std::vector<std::vector<double>> out(tasks, std::vector<double>(n, 0.0));
    for (size_t begin = 0; begin < n; begin += static_cast<size_t>(chunk_rows)) {
        const size_t end = std::min(n, begin + static_cast<size_t>(chunk_rows));
        std::vector<int64_t> batch(end - begin);
        for (size_t i = begin; i < end; ++i) batch[i - begin] = static_cast<int64_t>(i);
        Tape tape;
        const std::vector<int> bound = params_.bind(tape);
        const ForwardNodes nodes = forward(tape, bound, rows, batch);
        for (size_t t = 0; t < tasks; ++t) {
            const TaskScheme& ts = scheme_.tasks[t];
            const Tensor2& pc = tape.val(nodes.tasks[t].pc);
            for (size_t i = 0; i < batch.size(); ++i) {
                std::vector<double> p(static_cast<size_t>(pc.cols()));
                for (int j = 0; j < pc.cols(); ++j) p[static_cast<size_t>(j)] = pc.at(static_cast<int>(i), j);
                std::vector<std::vector<double>> qc, qb;
                for (int s = 0; s < ts.subdist_count(); ++s) {
                    const Tensor2& q = tape.val(nodes.tasks[t].qc[static_cast<size_t>(s)]);
                    std::vector<double> qrow(static_cast<size_t>(q.cols()));
                    for (int j = 0; j < q.cols(); ++j) qrow[static_cast<size_t>(j)] = q.at(static_cast<int>(i), j);
                    qc.push_back(std::move(qrow));
                    if (nodes.tasks[t].qb[static_cast<size_t>(s)] >= 0) {
                        const Tensor2& qbv = tape.val(nodes.tasks[t].qb[static_cast<size_t>(s)]);
                        std::vector<double> brow(static_cast<size_t>(qbv.cols()));
                        for (int j = 0; j < qbv.cols(); ++j)
                            brow[static_cast<size_t>(j)] = qbv.at(static_cast<int>(i), j);
                        qb.push_back(std::move(brow));
                    } else {
                        qb.emplace_back();
                    }
                }
                out[t][begin + i] = decode(p, qc, qb, ts, mode);
            }
        }
    }
    return out;
}

std::vector<int> OdmnModel::mono_param_indices() const {
    std::vector<int> ids;
    auto push_mlp = [&](const std::optional<MlpRef>& mlp) {
        if (!mlp) return;
        ids.push_back(mlp->w1);
        ids.push_back(mlp->b1);
        ids.push_back(mlp->w2);
        ids.push_back(mlp->b2);
    };
    for (const TaskRef& t : tasks_) {
        push_mlp(t.mono_dct);
        for (const auto& m : t.mono_bct) push_mlp(m);
    }
    return ids;
}

Tensor2 OdmnModel::mono_offset(int task, int tower, const Tensor2& o_prev) const {
    if (task < 1 || task >= static_cast<int>(tasks_.size()))
        throw ShapeError("mono_offset: task " + std::to_string(task) + " has no Mono Units");
    const TaskRef& ref = tasks_[static_cast<size_t>(task)];
    const MlpRef& mlp = tower < 0 ? *ref.mono_dct : *ref.mono_bct[static_cast<size_t>(tower)];
    Tape tape;
    const std::vector<int> bound = params_.bind(tape);
    return tape.val(apply_mlp(tape, bound, mlp, tape.leaf(o_prev)));
}

std::vector<double> normalized_bucket_distribution(std::span<const double> p_c,
                                                   const std::vector<std::vector<double>>& q_c) {
    if (p_c.size() != q_c.size())
        throw ShapeError("normalized_bucket_distribution: " + std::to_string(p_c.size()) +
                         " sub-distribution probabilities for " + std::to_string(q_c.size()) +
                         " bucket distributions");
    std::vector<double> o;
    for (size_t s = 0; s < q_c.size(); ++s)
        for (double q : q_c[s]) o.push_back(p_c[s] * q);
    return o;
}

BaselineModel::BaselineModel(const FeatureSchema& schema, const ModelDims& dims, int task_count,
                             uint64_t seed)
    : schema_(schema), dims_(dims) {
    schema_.validate();
    trunk_ = EmbeddingTrunk(schema_, dims_, seed, params_);
    for (int t = 0; t < task_count; ++t) {
        const std::string stem = "head" + std::to_string(t);
        const int w = params_.add(stem + "/w",
                                  init_tensor(trunk_.output_dim(), 1, seed, stem + "/w", false));
        const int b = params_.add(stem + "/b", Tensor2(1, 1));
        heads_.emplace_back(w, b);
    }
}

BaselineModel::ForwardNodes BaselineModel::forward(Tape& tape, const std::vector<int>& bound,
                                                   const std::vector<std::vector<int>>& rows,
                                                   const std::vector<int64_t>& batch) const {
    ForwardNodes out;
    out.v = trunk_.forward(tape, bound, rows, batch);
    for (const auto& [w, b] : heads_)
        out.estimates.push_back(odmn::forward(tape, out.v, bound[w], bound[b], Activation::Identity));
    return out;
}

std::vector<std::vector<double>> BaselineModel::predict(const std::vector<std::vector<int>>& rows,
                                                        int chunk_rows) const {
    const size_t n = rows.size();
    std::vector<std::vector<double>> out(heads_.size(), std::vector<double>(n, 0.0));
    for (size_t begin = 0; begin < n; begin += static_cast<size_t>(chunk_rows)) {
        const size_t end = std::min(n, begin + static_cast<size_t>(chunk_rows));
        std::vector<int64_t> batch(end - begin);
        for (size_t i = begin; i < end; ++i) batch[i - begin] = static_cast<int64_t>(i);
        Tape tape;
        const std::vector<int> bound = params_.bind(tape);
        const ForwardNodes nodes = forward(tape, bound, rows, batch);
        for (size_t t = 0; t < heads_.size(); ++t) {
            const Tensor2& est = tape.val(nodes.estimates[t]);
            for (size_t i = 0; i < batch.size(); ++i) out[t][begin + i] = est.at(static_cast<int>(i), 0);
        }
    }
    return out;
}

}  // namespace odmn
