#include "odmn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "odmn/rng.hpp"

namespace odmn {

using nlohmann::json;

// ---- config -----------------------------------------------------------------

std::string RunConfig::to_json() const {
    json root;
    root["version"] = 1;
    root["kind"] = "odmn-config";
    root["dataset"] = dataset_path;
    root["schema"] = schema_path;
    root["scheme"] = scheme_path;
    root["out_dir"] = out_dir;
    root["model"] = {{"embedding_dim", dims.embedding_dim},
                     {"bottom", dims.bottom},
                     {"tower_hidden", dims.tower_hidden},
                     {"mono_hidden_min", dims.mono_hidden_min}};
    root["weights"] = {{"alpha", weights.alpha}, {"beta", weights.beta}, {"gamma", weights.gamma}};
    root["flags"] = {{"mono", flags.mono},
                     {"calibration", flags.calibration},
                     {"distillation", flags.distillation},
                     {"bias_tower", flags.bias_tower}};
    root["buckets"] = {{"singleton_values", buckets.singleton_values},
                       {"buckets_per_subdist", buckets.buckets_per_subdist},
                       {"cut_points", buckets.cut_points}};
    root["batch_size"] = batch_size;
    root["lr"] = lr;
    root["lr_embedding"] = lr_embedding;
    root["epochs"] = epochs;
    root["seed"] = seed;
    root["baseline"] = baseline;
    root["validation_fraction"] = validation_fraction;
    return root.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json root = json::parse(text);
    if (root.contains("kind") && root["kind"] != "odmn-config")
        throw ConfigError("RunConfig: wrong file kind");
    RunConfig c;
    auto get = [&](const char* key, auto& out) {
        if (root.contains(key)) out = root[key].get<std::decay_t<decltype(out)>>();
    };
    get("dataset", c.dataset_path);
    get("schema", c.schema_path);
    get("scheme", c.scheme_path);
    get("out_dir", c.out_dir);
    if (root.contains("model")) {
        const json& m = root["model"];
        if (m.contains("embedding_dim")) c.dims.embedding_dim = m["embedding_dim"].get<int>();
        if (m.contains("bottom")) c.dims.bottom = m["bottom"].get<std::vector<int>>();
        if (m.contains("tower_hidden")) c.dims.tower_hidden = m["tower_hidden"].get<int>();
        if (m.contains("mono_hidden_min")) c.dims.mono_hidden_min = m["mono_hidden_min"].get<int>();
    }
    if (root.contains("weights")) {
        const json& w = root["weights"];
        if (w.contains("alpha")) c.weights.alpha = w["alpha"].get<double>();
        if (w.contains("beta")) c.weights.beta = w["beta"].get<double>();
        if (w.contains("gamma")) c.weights.gamma = w["gamma"].get<double>();
    }
    if (root.contains("flags")) {
        const json& f = root["flags"];
        if (f.contains("mono")) c.flags.mono = f["mono"].get<bool>();
        if (f.contains("calibration")) c.flags.calibration = f["calibration"].get<bool>();
        if (f.contains("distillation")) c.flags.distillation = f["distillation"].get<bool>();
        if (f.contains("bias_tower")) c.flags.bias_tower = f["bias_tower"].get<bool>();
    }
    if (root.contains("buckets")) {
        const json& b = root["buckets"];
        if (b.contains("singleton_values"))
            c.buckets.singleton_values = b["singleton_values"].get<std::vector<double>>();
        if (b.contains("buckets_per_subdist"))
            c.buckets.buckets_per_subdist = b["buckets_per_subdist"].get<int>();
        if (b.contains("cut_points")) c.buckets.cut_points = b["cut_points"].get<std::vector<double>>();
    }
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("lr_embedding", c.lr_embedding);
    get("epochs", c.epochs);
    get("seed", c.seed);
    get("baseline", c.baseline);
    get("validation_fraction", c.validation_fraction);
    if (c.batch_size < 1) throw ConfigError("RunConfig: batch_size must be >= 1");
    if (c.epochs < 0) throw ConfigError("RunConfig: epochs must be >= 0");
    if (c.validation_fraction < 0.0 || c.validation_fraction >= 1.0)
        throw ConfigError("RunConfig: validation_fraction must be in [0, 1)");
    return c;
}

uint64_t RunConfig::hash() const { return fnv1a(to_json()); }

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return RunConfig::from_json(text);
}

void apply_ablation_preset(RunConfig& config, const std::string& name) {
    if (name == "NM") {
        config.flags.distillation = false;
        config.flags.bias_tower = false;
    } else if (name == "NMB") {
        config.flags.distillation = false;
        config.flags.bias_tower = true;
    } else if (name == "NMO") {
        config.flags.distillation = true;
        config.flags.bias_tower = false;
    } else if (name == "MDME") {
        config.flags.distillation = true;
        config.flags.bias_tower = true;
    } else if (name == "S") {
        config.flags.mono = false;
        config.flags.calibration = false;
    } else if (name == "SM") {
        config.flags.mono = true;
        config.flags.calibration = false;
    } else if (name == "SC") {
        config.flags.mono = false;
        config.flags.calibration = true;
    } else if (name == "ODMN") {
        config.flags.mono = true;
        config.flags.calibration = true;
    } else {
        throw ConfigError("unknown ablation preset '" + name +
                          "' (want NM|NMB|NMO|MDME|S|SM|SC|ODMN)");
    }
}

// ---- checkpoint ---------------------------------------------------------------

namespace {
json tensor_to_json(const Tensor2& t) {
    std::vector<double> values(t.data(), t.data() + t.size());
    return json{{"rows", t.rows()}, {"cols", t.cols()}, {"values", std::move(values)}};
}

Tensor2 tensor_from_json(const json& j) {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    const std::vector<double> values = j.at("values").get<std::vector<double>>();
    if (static_cast<size_t>(rows) * static_cast<size_t>(cols) != values.size())
        throw DataError("checkpoint tensor: value count does not match shape");
    Tensor2 t(rows, cols);
    std::copy(values.begin(), values.end(), t.data());
    return t;
}
}  // namespace

std::string Checkpoint::to_json() const {
    json root;
    root["version"] = 1;
    root["kind"] = "odmn-checkpoint";
    root["config"] = json::parse(config.to_json());
    root["config_hash"] = config.hash();
    root["schema"] = json::parse(schema_to_json(schema));
    root["schema_hash"] = schema_hash(schema);
    root["discretizer"] = json::parse(discretizer.to_json());
    root["scheme"] = json::parse(scheme_to_json(scheme));
    root["scheme_hash"] = scheme_hash(scheme);
    root["epoch"] = epoch;
    json jp = json::array();
    for (const Param& p : params) {
        json e = tensor_to_json(p.value);
        e["name"] = p.name;
        e["nonnegative"] = p.nonnegative;
        e["embedding"] = p.embedding;
        jp.push_back(std::move(e));
    }
    root["params"] = std::move(jp);
    root["adam"] = {{"step", adam_step}, {"m", json::array()}, {"v", json::array()}};
    for (const Tensor2& t : adam_m) root["adam"]["m"].push_back(tensor_to_json(t));
    for (const Tensor2& t : adam_v) root["adam"]["v"].push_back(tensor_to_json(t));
    return root.dump();
}

Checkpoint Checkpoint::from_json(const std::string& text) {
    json root = json::parse(text);
    if (!root.contains("kind") || root["kind"] != "odmn-checkpoint")
        throw DataError("Checkpoint: not a checkpoint file");
    if (root.at("version").get<int>() != 1) throw DataError("Checkpoint: unsupported version");
    Checkpoint c;
    c.config = RunConfig::from_json(root.at("config").dump());
    c.schema = schema_from_json(root.at("schema").dump());
    c.discretizer = Discretizer::from_json(root.at("discretizer").dump());
    c.scheme = scheme_from_json(root.at("scheme").dump());
    c.epoch = root.at("epoch").get<int>();
    for (const json& e : root.at("params")) {
        Param p;
        p.name = e.at("name").get<std::string>();
        p.value = tensor_from_json(e);
        p.nonnegative = e.at("nonnegative").get<bool>();
        p.embedding = e.at("embedding").get<bool>();
        c.params.push_back(std::move(p));
    }
    c.adam_step = root.at("adam").at("step").get<int64_t>();
    for (const json& e : root.at("adam").at("m")) c.adam_m.push_back(tensor_from_json(e));
    for (const json& e : root.at("adam").at("v")) c.adam_v.push_back(tensor_from_json(e));
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_checkpoint: cannot open '" + path + "' for writing");
    out << ckpt.to_json();
    if (!out) throw DataError("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Checkpoint::from_json(text);
}

// ---- training -------------------------------------------------------------------

void split_rows(uint64_t seed, size_t n, double validation_fraction, std::vector<int64_t>& train,
                std::vector<int64_t>& validation) {
    train.clear();
    validation.clear();
    const uint64_t threshold = static_cast<uint64_t>(validation_fraction * 1e6);
    for (size_t i = 0; i < n; ++i) {
        if (mix64(seed ^ 0x76616C6964ULL, i) % 1000000ULL < threshold) {
            validation.push_back(static_cast<int64_t>(i));
        } else {
            train.push_back(static_cast<int64_t>(i));
        }
    }
}

namespace {

std::vector<std::vector<int>> encode_rows(const Dataset& dataset, const FeatureSchema& schema,
                                          const Discretizer& disc) {
    std::vector<std::vector<int>> out;
    out.reserve(dataset.rows.size());
    for (const FeatureRow& row : dataset.rows) out.push_back(disc.encode(row, schema));
    return out;
}

std::vector<std::vector<double>> labels_by_task(const Dataset& dataset, size_t task_count) {
    std::vector<std::vector<double>> out(task_count);
    for (size_t t = 0; t < task_count; ++t) {
        out[t].reserve(dataset.rows.size());
        for (const FeatureRow& row : dataset.rows) out[t].push_back(row.labels[t]);
    }
    return out;
}

std::vector<int64_t> epoch_order(uint64_t seed, int epoch, const std::vector<int64_t>& train_idx) {
    std::vector<int64_t> order = train_idx;
    Rng rng(mix64(seed ^ 0x736875666CULL, static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    return order;
}

EvalReport validation_report(const OdmnModel* model, const BaselineModel* baseline,
                             const std::vector<std::vector<int>>& encoded,
                             const std::vector<std::vector<double>>& labels,
                             const std::vector<int64_t>& val_idx, const BucketingScheme& scheme,
                             DecodeMode mode) {
    std::vector<std::vector<int>> val_rows;
    val_rows.reserve(val_idx.size());
    for (int64_t i : val_idx) val_rows.push_back(encoded[static_cast<size_t>(i)]);
    std::vector<std::vector<double>> val_labels(labels.size());
    for (size_t t = 0; t < labels.size(); ++t) {
        val_labels[t].reserve(val_idx.size());
        for (int64_t i : val_idx) val_labels[t].push_back(labels[t][static_cast<size_t>(i)]);
    }
    const std::vector<std::vector<double>> preds =
        model ? model->predict(val_rows, mode) : baseline->predict(val_rows);
    return evaluate_predictions(val_labels, preds, scheme);
}

}  // namespace

TrainResult train(const RunConfig& config, const Dataset& dataset, const FeatureSchema& schema,
                  const Checkpoint* resume) {
    schema.validate();
    if (dataset.rows.empty()) throw DataError("train: empty dataset");
    const size_t task_count = schema.horizons.size();

    std::vector<int64_t> train_idx, val_idx;
    split_rows(config.seed, dataset.rows.size(), config.validation_fraction, train_idx, val_idx);
    if (train_idx.empty()) throw DataError("train: no training rows after split");

    // Fit (or reuse) the preprocessing state on the training split only.
    Discretizer disc;
    BucketingScheme scheme;
    if (resume) {
        disc = resume->discretizer;
        scheme = resume->scheme;
    } else {
        Dataset train_view;
        train_view.rows.reserve(train_idx.size());
        for (int64_t i : train_idx) train_view.rows.push_back(dataset.rows[static_cast<size_t>(i)]);
        disc = Discretizer::fit(train_view, schema);
        if (config.scheme_path.empty()) {
            scheme = fit_bucketing(labels_by_task(train_view, task_count), schema.horizons,
                                   config.buckets);
        } else {
            scheme = load_scheme(config.scheme_path);
        }
        if (scheme.tasks.size() != task_count)
            throw ConfigError("train: scheme task count " + std::to_string(scheme.tasks.size()) +
                              " does not match schema horizons " + std::to_string(task_count));
    }

    const std::vector<std::vector<int>> encoded = encode_rows(dataset, schema, disc);
    const std::vector<std::vector<double>> labels = labels_by_task(dataset, task_count);

    // Encode training targets; clamps must not occur on training data.
    int64_t clamps = 0;
    std::vector<std::vector<EncodedTarget>> targets(task_count);
    if (!config.baseline) {
        for (size_t t = 0; t < task_count; ++t) {
            targets[t].reserve(dataset.rows.size());
            for (const FeatureRow& row : dataset.rows)
                targets[t].push_back(encode_label(row.labels[t], scheme.tasks[t]));
        }
        for (size_t t = 0; t < task_count; ++t)
            for (int64_t i : train_idx)
                if (targets[t][static_cast<size_t>(i)].clamped) ++clamps;
    }

    std::unique_ptr<OdmnModel> model;
    std::unique_ptr<BaselineModel> baseline;
    if (config.baseline) {
        baseline = std::make_unique<BaselineModel>(schema, config.dims,
                                                   static_cast<int>(task_count), config.seed);
    } else {
        model = std::make_unique<OdmnModel>(schema, scheme, config.dims, config.flags.mono,
                                            config.seed);
    }
    ParamSet& params = config.baseline ? baseline->params() : model->params();
    AdamOptimizer adam(params);
    int start_epoch = 0;
    if (resume) {
        if (static_cast<int>(resume->params.size()) != params.size())
            throw DataError("train: checkpoint parameter count mismatch");
        for (int i = 0; i < params.size(); ++i) {
            if (resume->params[static_cast<size_t>(i)].name != params[i].name)
                throw DataError("train: checkpoint parameter '" +
                                resume->params[static_cast<size_t>(i)].name +
                                "' does not match model parameter '" + params[i].name + "'");
            params[i].value = resume->params[static_cast<size_t>(i)].value;
        }
        adam.restore(resume->adam_step, resume->adam_m, resume->adam_v);
        start_epoch = resume->epoch;
    }

    const LossFlags loss_flags = config.loss_flags();
    const DecodeMode mode = config.decode_mode();

    TrainResult result;
    result.train_rows = static_cast<int64_t>(train_idx.size());
    result.validation_rows = static_cast<int64_t>(val_idx.size());
    result.encode_clamps = clamps;

    std::vector<Tensor2> grads(static_cast<size_t>(params.size()));
    for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
        const std::vector<int64_t> order = epoch_order(config.seed, epoch, train_idx);
        std::map<std::string, double> sums;
        int64_t batches = 0;
        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
            const std::vector<int64_t> batch(order.begin() + static_cast<int64_t>(begin),
                                             order.begin() + static_cast<int64_t>(end));
            Tape tape;
            const std::vector<int> bound = params.bind(tape);
            int loss_node = -1;
            std::vector<std::pair<std::string, int>> components;
            if (config.baseline) {
                const BaselineModel::ForwardNodes fwd = baseline->forward(tape, bound, encoded, batch);
                std::vector<int> terms;
                for (size_t t = 0; t < task_count; ++t) {
                    Tensor2 y(static_cast<int>(batch.size()), 1);
                    for (size_t i = 0; i < batch.size(); ++i)
                        y.at(static_cast<int>(i), 0) = labels[t][static_cast<size_t>(batch[i])];
                    const int d = tape.sub(fwd.estimates[t], tape.leaf(std::move(y)));
                    const int mse = tape.mean_all(tape.mul(d, d));
                    components.emplace_back("task" + std::to_string(t) + "/mse", mse);
                    terms.push_back(mse);
                }
                loss_node = tape.add_many(terms);
                components.emplace_back("total", loss_node);
            } else {
                const OdmnModel::ForwardNodes fwd = model->forward(tape, bound, encoded, batch);
                LossNodes nodes = total_loss(tape, *model, fwd, targets, batch, config.weights,
                                             loss_flags, mode);
                loss_node = nodes.total;
                components = std::move(nodes.components);
            }
            tape.backward(loss_node);
            for (int i = 0; i < params.size(); ++i) grads[static_cast<size_t>(i)] = tape.grad(bound[i]);
            adam.step(params, grads, config.lr, config.lr_embedding);
            for (const auto& [name, node] : components) sums[name] += tape.val(node).at(0, 0);
            ++batches;
        }

        EpochLog log;
        log.epoch = epoch + 1;
        for (auto& [name, total] : sums)
            log.losses[name] = total / static_cast<double>(std::max<int64_t>(batches, 1));
        if (!val_idx.empty())
            log.validation = validation_report(model.get(), baseline.get(), encoded, labels, val_idx,
                                               scheme, mode);
        result.log.push_back(std::move(log));
    }

    Checkpoint ckpt;
    ckpt.config = config;
    ckpt.schema = schema;
    ckpt.discretizer = disc;
    ckpt.scheme = scheme;
    ckpt.epoch = config.epochs;
    for (int i = 0; i < params.size(); ++i) ckpt.params.push_back(params[i]);
    ckpt.adam_step = adam.step_count();
    ckpt.adam_m = adam.first_moments();
    ckpt.adam_v = adam.second_moments();
    result.checkpoint = std::move(ckpt);
    return result;
}

std::unique_ptr<OdmnModel> model_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.config.baseline) throw StateError("model_from_checkpoint: checkpoint is a baseline run");
    auto model = std::make_unique<OdmnModel>(ckpt.schema, ckpt.scheme, ckpt.config.dims,
                                             ckpt.config.flags.mono, ckpt.config.seed);
    ParamSet& params = model->params();
    if (static_cast<int>(ckpt.params.size()) != params.size())
        throw DataError("checkpoint parameter count mismatch");
    for (int i = 0; i < params.size(); ++i) {
        if (ckpt.params[static_cast<size_t>(i)].name != params[i].name)
            throw DataError("checkpoint parameter order mismatch at '" + params[i].name + "'");
        params[i].value = ckpt.params[static_cast<size_t>(i)].value;
    }
    return model;
}

std::unique_ptr<BaselineModel> baseline_from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.config.baseline) throw StateError("baseline_from_checkpoint: checkpoint is not a baseline");
    auto model = std::make_unique<BaselineModel>(ckpt.schema, ckpt.config.dims,
                                                 static_cast<int>(ckpt.schema.horizons.size()),
                                                 ckpt.config.seed);
    ParamSet& params = model->params();
    if (static_cast<int>(ckpt.params.size()) != params.size())
        throw DataError("checkpoint parameter count mismatch");
    for (int i = 0; i < params.size(); ++i) {
        if (ckpt.params[static_cast<size_t>(i)].name != params[i].name)
            throw DataError("checkpoint parameter order mismatch at '" + params[i].name + "'");
        params[i].value = ckpt.params[static_cast<size_t>(i)].value;
    }
    return model;
}

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& dataset) {
    if (dataset.rows.empty()) throw DataError("evaluate: empty dataset");
    const size_t task_count = ckpt.schema.horizons.size();
    for (const FeatureRow& row : dataset.rows)
        if (row.labels.size() != task_count)
            throw DataError("evaluate: dataset rows lack the label columns");
    const std::vector<std::vector<int>> encoded = encode_rows(dataset, ckpt.schema, ckpt.discretizer);
    const std::vector<std::vector<double>> labels = labels_by_task(dataset, task_count);
    std::vector<std::vector<double>> preds;
    if (ckpt.config.baseline) {
        preds = baseline_from_checkpoint(ckpt)->predict(encoded);
    } else {
        preds = model_from_checkpoint(ckpt)->predict(encoded, ckpt.config.decode_mode());
    }
    return evaluate_predictions(labels, preds, ckpt.scheme);
}

std::vector<std::vector<double>> predict_rows(const Checkpoint& ckpt,
                                              const std::vector<FeatureRow>& rows) {
    std::vector<std::vector<int>> encoded;
    encoded.reserve(rows.size());
    for (const FeatureRow& row : rows) encoded.push_back(ckpt.discretizer.encode(row, ckpt.schema));
    if (ckpt.config.baseline) return baseline_from_checkpoint(ckpt)->predict(encoded);
    return model_from_checkpoint(ckpt)->predict(encoded, ckpt.config.decode_mode());
}

std::string train_log_to_json(const TrainResult& result) {
    json root;
    root["version"] = 1;
    root["kind"] = "odmn-train-log";
    root["train_rows"] = result.train_rows;
    root["validation_rows"] = result.validation_rows;
    root["encode_clamps"] = result.encode_clamps;
    json epochs = json::array();
    for (const EpochLog& e : result.log) {
        json je;
        je["epoch"] = e.epoch;
        je["losses"] = e.losses;
        je["validation"] = json::parse(e.validation.tasks.empty() ? std::string("null")
                                                                  : e.validation.to_json());
        epochs.push_back(std::move(je));
    }
    root["epochs"] = std::move(epochs);
    return root.dump(2);
}

}  // namespace odmn
