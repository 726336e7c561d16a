#include "odmn/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "odmn/synthetic.hpp"
#include "odmn/trainer.hpp"

namespace odmn {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t pos = s.find(',', start);
        const std::string part = s.substr(start, pos == std::string::npos ? pos : pos - start);
        if (!part.empty()) out.push_back(std::stoi(part));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t pos = s.find(',', start);
        const std::string part = s.substr(start, pos == std::string::npos ? pos : pos - start);
        if (!part.empty()) out.push_back(std::stod(part));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

void export_lorenz(const EvalReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const TaskMetrics& t : report.tasks) {
        save_lorenz(t.curve_true, dir + "/lorenz_ltv" + std::to_string(t.horizon) + "_true.csv");
        save_lorenz(t.curve_model, dir + "/lorenz_ltv" + std::to_string(t.horizon) + "_model.csv");
    }
}

void print_report(const EvalReport& report) {
    std::printf("%-8s %10s %10s %10s %12s %10s %10s %10s\n", "task", "nrmse", "nmae", "ambe",
                "mutual_gini", "gini*", "gini_true", "viol_next");
    for (const TaskMetrics& t : report.tasks) {
        std::printf("ltv%-5d %10.4f %10.4f %10.4f %12.4f %10.4f %10.4f %10.4f\n", t.horizon, t.nrmse,
                    t.nmae, t.ambe, t.mutual_gini, t.gini_model, t.gini_true,
                    t.violation_rate_vs_next);
    }
    std::printf("monotonicity violation rate (any adjacent pair): %.4f over %lld rows\n",
                report.violation_rate, static_cast<long long>(report.rows));
}

int run_generate(const std::string& out, const std::string& schema_out, SyntheticConfig config,
                 const std::string& horizons) {
    if (!horizons.empty()) config.horizons = parse_int_list(horizons);
    const FeatureSchema schema = synthetic_schema(config);
    const Dataset ds = generate_synthetic(config);
    save_delimited(ds, schema, out);
    if (!schema_out.empty()) save_schema(schema, schema_out);
    std::printf("wrote %zu rows to %s\n", ds.rows.size(), out.c_str());
    return 0;
}

int run_fit_buckets(const std::string& data, const std::string& schema_path, const std::string& out,
                    const std::string& singletons, int buckets, const std::string& cuts) {
    const FeatureSchema schema = load_schema(schema_path);
    const Dataset ds = load_delimited(data, schema);
    BucketConfig config;
    if (!singletons.empty()) config.singleton_values = parse_double_list(singletons);
    config.buckets_per_subdist = buckets;
    if (!cuts.empty()) config.cut_points = parse_double_list(cuts);
    std::vector<std::vector<double>> labels(schema.horizons.size());
    for (size_t t = 0; t < schema.horizons.size(); ++t)
        for (const FeatureRow& row : ds.rows) labels[t].push_back(row.labels[t]);
    const BucketingScheme scheme = fit_bucketing(labels, schema.horizons, config);
    for (const std::string& w : scheme.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    save_scheme(scheme, out);
    std::printf("wrote scheme for %zu tasks to %s\n", scheme.tasks.size(), out.c_str());
    return 0;
}

int run_train(const std::string& config_path, uint64_t seed, bool seed_set, int epochs,
              const std::string& out_dir, const std::string& ablation, bool baseline,
              const std::string& data_override, const std::string& resume_path) {
    RunConfig config = load_run_config(config_path);
    if (seed_set) config.seed = seed;
    if (epochs >= 0) config.epochs = epochs;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (!ablation.empty()) apply_ablation_preset(config, ablation);
    if (baseline) config.baseline = true;
    if (!data_override.empty()) config.dataset_path = data_override;
    if (config.dataset_path.empty()) throw ConfigError("train: no dataset configured");
    if (config.schema_path.empty()) throw ConfigError("train: no schema configured");
    if (config.out_dir.empty()) throw ConfigError("train: no output directory configured");

    const FeatureSchema schema = load_schema(config.schema_path);
    const Dataset dataset = load_delimited(config.dataset_path, schema);

    Checkpoint resume;
    const Checkpoint* resume_ptr = nullptr;
    if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        resume_ptr = &resume;
    }

    const TrainResult result = train(config, dataset, schema, resume_ptr);
    if (result.encode_clamps > 0)
        std::fprintf(stderr, "warning: %lld training labels clamped during encoding\n",
                     static_cast<long long>(result.encode_clamps));
    for (const EpochLog& e : result.log) {
        const auto it = e.losses.find("total");
        std::printf("epoch %d: total loss %.6f", e.epoch,
                    it == e.losses.end() ? 0.0 : it->second);
        if (!e.validation.tasks.empty())
            std::printf(", val mutual_gini[last] %.4f, violation rate %.4f",
                        e.validation.tasks.back().mutual_gini, e.validation.violation_rate);
        std::printf("\n");
    }

    std::filesystem::create_directories(config.out_dir);
    save_checkpoint(result.checkpoint, config.out_dir + "/checkpoint.json");
    std::ofstream log(config.out_dir + "/train_log.json", std::ios::binary);
    log << train_log_to_json(result);
    std::printf("wrote %s/checkpoint.json\n", config.out_dir.c_str());
    return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& data, const std::string& out,
             const std::string& lorenz_dir) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const FeatureSchema schema = ckpt.schema;
    const Dataset dataset = load_delimited(data, schema);
    const EvalReport report = evaluate(ckpt, dataset);
    print_report(report);
    if (!out.empty()) save_report(report, out);
    if (!lorenz_dir.empty()) export_lorenz(report, lorenz_dir);
    return 0;
}

int run_predict(const std::string& checkpoint_path, const std::string& data, const std::string& out) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    bool had_labels = false;
    const Dataset dataset = load_features_only(data, ckpt.schema, &had_labels);
    const std::vector<std::vector<double>> preds = predict_rows(ckpt, dataset.rows);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw DataError("predict: cannot open '" + out + "' for writing");
    for (size_t t = 0; t < ckpt.schema.horizons.size(); ++t)
        os << (t ? "," : "") << "pred_ltv" << ckpt.schema.horizons[t];
    os << '\n';
    char buf[40];
    for (size_t i = 0; i < dataset.rows.size(); ++i) {
        for (size_t t = 0; t < preds.size(); ++t) {
            std::snprintf(buf, sizeof(buf), "%.17g", preds[t][i]);
            os << (t ? "," : "") << buf;
        }
        os << '\n';
    }
    std::printf("wrote %zu prediction rows to %s\n", dataset.rows.size(), out.c_str());
    return 0;
}

int run_lorenz_export(const std::string& checkpoint_path, const std::string& data,
                      const std::string& out_dir) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const Dataset dataset = load_delimited(data, ckpt.schema);
    const EvalReport report = evaluate(ckpt, dataset);
    export_lorenz(report, out_dir);
    std::printf("wrote Lorenz curves for %zu tasks to %s\n", report.tasks.size(), out_dir.c_str());
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"ODMN: multi-horizon LTV prediction with MDME modules"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "write a synthetic zero-inflated dataset");
    std::string gen_out, gen_schema_out, gen_horizons;
    SyntheticConfig gen_config;
    generate->add_option("--out", gen_out, "output dataset csv")->required();
    generate->add_option("--schema-out", gen_schema_out, "also write the schema json");
    generate->add_option("--n", gen_config.n_users, "number of users");
    generate->add_option("--zero-rate", gen_config.zero_rate, "inactive point-mass probability");
    generate->add_option("--cap-fraction", gen_config.cap_fraction, "per-horizon cap fraction");
    generate->add_option("--horizons", gen_horizons, "comma-separated horizons, e.g. 30,90,180,365");
    generate->add_option("--seed", gen_config.seed, "rng seed");

    // fit-buckets
    auto* fitb = app.add_subcommand("fit-buckets", "fit a bucketing scheme from dataset labels");
    std::string fb_data, fb_schema, fb_out, fb_singletons, fb_cuts;
    int fb_buckets = 10;
    fitb->add_option("--data", fb_data, "dataset csv")->required();
    fitb->add_option("--schema", fb_schema, "schema json")->required();
    fitb->add_option("--out", fb_out, "output scheme json")->required();
    fitb->add_option("--singletons", fb_singletons, "comma-separated singleton values (default 0)");
    fitb->add_option("--buckets", fb_buckets, "buckets per sub-distribution");
    fitb->add_option("--cuts", fb_cuts, "comma-separated sub-distribution cut points");

    // train
    auto* tr = app.add_subcommand("train", "train a model per the run config");
    std::string tr_config, tr_out, tr_ablation, tr_data, tr_resume;
    uint64_t tr_seed = 0;
    int tr_epochs = -1;
    bool tr_baseline = false;
    tr->add_option("--config", tr_config, "run config json")->required();
    auto* seed_opt = tr->add_option("--seed", tr_seed, "override seed");
    tr->add_option("--epochs", tr_epochs, "override epoch count");
    tr->add_option("--out", tr_out, "override output directory");
    tr->add_option("--ablation", tr_ablation, "NM|NMB|NMO|MDME|S|SM|SC|ODMN");
    tr->add_flag("--baseline", tr_baseline, "train the plain MSE baseline");
    tr->add_option("--data", tr_data, "override dataset path");
    tr->add_option("--resume", tr_resume, "resume from checkpoint");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_ckpt, ev_data, ev_out, ev_lorenz;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint json")->required();
    ev->add_option("--data", ev_data, "dataset csv")->required();
    ev->add_option("--out", ev_out, "write the report json here");
    ev->add_option("--lorenz-dir", ev_lorenz, "also export Lorenz curves");

    // predict
    auto* pr = app.add_subcommand("predict", "write per-horizon estimates for feature rows");
    std::string pr_ckpt, pr_data, pr_out;
    pr->add_option("--checkpoint", pr_ckpt, "checkpoint json")->required();
    pr->add_option("--data", pr_data, "feature csv (labels optional)")->required();
    pr->add_option("--out", pr_out, "output csv")->required();

    // lorenz-export
    auto* lz = app.add_subcommand("lorenz-export", "export Lorenz curves for a checkpoint");
    std::string lz_ckpt, lz_data, lz_out;
    lz->add_option("--checkpoint", lz_ckpt, "checkpoint json")->required();
    lz->add_option("--data", lz_data, "dataset csv")->required();
    lz->add_option("--out-dir", lz_out, "output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (generate->parsed())
            return run_generate(gen_out, gen_schema_out, gen_config, gen_horizons);
        if (fitb->parsed())
            return run_fit_buckets(fb_data, fb_schema, fb_out, fb_singletons, fb_buckets, fb_cuts);
        if (tr->parsed())
            return run_train(tr_config, tr_seed, seed_opt->count() > 0, tr_epochs, tr_out, tr_ablation,
                             tr_baseline, tr_data, tr_resume);
        if (ev->parsed()) return run_eval(ev_ckpt, ev_data, ev_out, ev_lorenz);
        if (pr->parsed()) return run_predict(pr_ckpt, pr_data, pr_out);
        if (lz->parsed()) return run_lorenz_export(lz_ckpt, lz_data, lz_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}

}  // namespace odmn
