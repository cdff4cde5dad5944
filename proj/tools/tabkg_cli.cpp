#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabkg/compressor.hpp"
#include "tabkg/evaluator.hpp"
#include "tabkg/fixtures.hpp"
#include "tabkg/generator.hpp"
#include "tabkg/proposer.hpp"
#include "tabkg/table.hpp"
#include "tabkg/validator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct StageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write file: " + path.string());
    out << text;
}

// Every stage drops a manifest next to its artifacts: seed + digest of
// the effective options, so identical runs are byte-identical and
// mismatched reruns are detectable.
void write_manifest(const fs::path& dir, const std::string& stage,
                    const json& effective, std::uint64_t seed) {
    json j;
    j["stage"] = stage;
    j["seed"] = seed;
    j["config_digest"] = fnv1a_hex(effective.dump());
    j["options"] = effective;
    write_text(dir / (stage + ".manifest.json"), j.dump(2) + "\n");
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw CLI::ValidationError("--config", e.what());
    }
}

// flag > config > default
template <typename T>
void apply(const CLI::Option* opt, const json& cfg, const char* key, T& value) {
    if (opt->count() > 0) return;
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

tabkg::EnsembleConfig default_ensemble(const std::string& truth_path,
                                       std::uint64_t seed) {
    tabkg::EnsembleConfig cfg;
    tabkg::EnsembleConfig::Entry perfect;
    perfect.id = "stub-perfect";
    perfect.type = "stub-perfect";
    perfect.truth_graph_path = truth_path;
    cfg.providers.push_back(perfect);
    for (int i = 0; i < 2; ++i) {
        tabkg::EnsembleConfig::Entry noisy;
        noisy.id = "stub-noisy-" + std::to_string(i);
        noisy.type = "stub-noisy";
        noisy.noise_p = 0.2;
        noisy.seed = seed + std::uint64_t(i) + 1;
        noisy.truth_graph_path = truth_path;
        cfg.providers.push_back(noisy);
    }
    return cfg;
}

struct ProposeOutputs {
    tabkg::EnsembleResult result;
};

ProposeOutputs do_propose(const tabkg::Table& table, const tabkg::EnsembleConfig& cfg,
                          const fs::path& out_dir) {
    tabkg::Prompt prompt = tabkg::serialize_prompt(table.metas());
    auto providers = tabkg::build_providers(cfg, table.metas());
    tabkg::EnsembleResult result =
        tabkg::run_ensemble(providers, prompt, table.metas(), cfg);

    write_text(out_dir / "prompt.txt", prompt.text);
    for (const auto& run : result.runs) {
        write_text(out_dir / ("response_" + run.provider_id + ".txt"),
                   run.failed ? "ERROR: " + run.error : run.raw_response);
    }
    result.candidate.save((out_dir / "candidate.json").string());
    return {std::move(result)};
}

struct CompressOutputs {
    tabkg::CompressionPlan plan;
    tabkg::Table compressed;
};

CompressOutputs do_compress(const tabkg::Table& table, const tabkg::Graph& validated,
                            const fs::path& out_dir) {
    tabkg::CompressionPlan plan = tabkg::build_plan(validated, table);
    tabkg::Table compressed = tabkg::compress(table, plan);
    plan.save((out_dir / "plan.json").string());
    tabkg::save_table_csv(compressed, (out_dir / "compressed.csv").string());
    tabkg::save_table_metadata(compressed,
                               (out_dir / "compressed.meta.json").string());
    return {std::move(plan), std::move(compressed)};
}

void print_report(const tabkg::EvalReport& report) { std::cout << report.to_text_table(); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph guided tabular synthesis pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override it")
        ->expected(1);

    // ---- fixture ----
    auto* cmd_fixture = app.add_subcommand("fixture", "generate a benchmark table");
    std::string fx_recipe = "mini-retail";
    std::size_t fx_rows = 5000;
    std::uint64_t fx_seed = 1;
    std::vector<std::string> fx_noise;
    std::string fx_out = ".";
    auto* fx_recipe_opt = cmd_fixture->add_option("--recipe", fx_recipe);
    auto* fx_rows_opt = cmd_fixture->add_option("--rows", fx_rows);
    auto* fx_seed_opt = cmd_fixture->add_option("--seed", fx_seed);
    cmd_fixture->add_option("--noise", fx_noise, "column=rate violation injection");
    auto* fx_out_opt = cmd_fixture->add_option("--out", fx_out);

    // ---- propose ----
    auto* cmd_propose = app.add_subcommand("propose", "run the provider ensemble");
    std::string pr_csv, pr_meta, pr_ensemble, pr_truth, pr_out = ".";
    std::uint64_t pr_seed = 1;
    cmd_propose->add_option("--csv", pr_csv)->required();
    cmd_propose->add_option("--meta", pr_meta)->required();
    cmd_propose->add_option("--ensemble", pr_ensemble, "ensemble config JSON");
    cmd_propose->add_option("--truth", pr_truth,
                            "ground-truth graph for the default stub ensemble");
    auto* pr_seed_opt = cmd_propose->add_option("--seed", pr_seed);
    auto* pr_out_opt = cmd_propose->add_option("--out", pr_out);

    // ---- validate ----
    auto* cmd_validate = app.add_subcommand("validate", "score and prune a graph");
    std::string va_csv, va_meta, va_graph, va_out = ".";
    double va_theta = 0.9;
    cmd_validate->add_option("--csv", va_csv)->required();
    cmd_validate->add_option("--meta", va_meta)->required();
    cmd_validate->add_option("--graph", va_graph)->required();
    auto* va_theta_opt = cmd_validate->add_option("--theta", va_theta);
    auto* va_out_opt = cmd_validate->add_option("--out", va_out);

    // ---- compress ----
    auto* cmd_compress = app.add_subcommand("compress", "project onto kept columns");
    std::string co_csv, co_meta, co_graph, co_out = ".";
    cmd_compress->add_option("--csv", co_csv)->required();
    cmd_compress->add_option("--meta", co_meta)->required();
    cmd_compress->add_option("--graph", co_graph)->required();
    auto* co_out_opt = cmd_compress->add_option("--out", co_out);

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "fit the diffusion model");
    std::string tr_csv, tr_meta, tr_out = ".";
    std::uint64_t tr_seed = 1;
    int tr_epochs = 100, tr_width = 256, tr_depth = 3, tr_batch = 128;
    double tr_lr = 1e-3;
    cmd_train->add_option("--csv", tr_csv)->required();
    cmd_train->add_option("--meta", tr_meta)->required();
    auto* tr_seed_opt = cmd_train->add_option("--seed", tr_seed);
    auto* tr_epochs_opt = cmd_train->add_option("--epochs", tr_epochs);
    auto* tr_width_opt = cmd_train->add_option("--width", tr_width);
    auto* tr_depth_opt = cmd_train->add_option("--depth", tr_depth);
    auto* tr_batch_opt = cmd_train->add_option("--batch", tr_batch);
    auto* tr_lr_opt = cmd_train->add_option("--lr", tr_lr);
    auto* tr_out_opt = cmd_train->add_option("--out", tr_out);

    // ---- generate ----
    auto* cmd_generate = app.add_subcommand("generate", "sample synthetic rows");
    std::string ge_model, ge_plan, ge_out = ".";
    std::size_t ge_n = 5000;
    std::uint64_t ge_seed = 1;
    cmd_generate->add_option("--model", ge_model)->required();
    cmd_generate->add_option("--plan", ge_plan, "decompress through this plan");
    auto* ge_n_opt = cmd_generate->add_option("--n", ge_n);
    auto* ge_seed_opt = cmd_generate->add_option("--seed", ge_seed);
    auto* ge_out_opt = cmd_generate->add_option("--out", ge_out);

    // ---- evaluate ----
    auto* cmd_evaluate = app.add_subcommand("evaluate", "score synth against real");
    std::string ev_real_csv, ev_real_meta, ev_synth_csv, ev_synth_meta, ev_graph;
    std::string ev_train_csv, ev_holdout_csv, ev_label, ev_out = ".";
    std::uint64_t ev_seed = 1;
    cmd_evaluate->add_option("--real-csv", ev_real_csv)->required();
    cmd_evaluate->add_option("--real-meta", ev_real_meta)->required();
    cmd_evaluate->add_option("--synth-csv", ev_synth_csv)->required();
    cmd_evaluate->add_option("--synth-meta", ev_synth_meta)->required();
    cmd_evaluate->add_option("--graph", ev_graph);
    cmd_evaluate->add_option("--train-csv", ev_train_csv);
    cmd_evaluate->add_option("--holdout-csv", ev_holdout_csv);
    auto* ev_label_opt = cmd_evaluate->add_option("--label", ev_label);
    auto* ev_seed_opt = cmd_evaluate->add_option("--seed", ev_seed);
    auto* ev_out_opt = cmd_evaluate->add_option("--out", ev_out);

    // ---- pipeline ----
    auto* cmd_pipeline = app.add_subcommand("pipeline", "fixture through evaluation");
    std::string pl_recipe = "mini-retail", pl_ensemble, pl_out = ".";
    std::size_t pl_rows = 5000, pl_n_synth = 0;
    std::uint64_t pl_seed = 1;
    double pl_theta = 0.9;
    int pl_epochs = 15;
    auto* pl_recipe_opt = cmd_pipeline->add_option("--recipe", pl_recipe);
    auto* pl_rows_opt = cmd_pipeline->add_option("--rows", pl_rows);
    auto* pl_seed_opt = cmd_pipeline->add_option("--seed", pl_seed);
    auto* pl_theta_opt = cmd_pipeline->add_option("--theta", pl_theta);
    auto* pl_epochs_opt = cmd_pipeline->add_option("--epochs", pl_epochs);
    auto* pl_n_opt = cmd_pipeline->add_option("--n-synth", pl_n_synth);
    cmd_pipeline->add_option("--ensemble", pl_ensemble);
    auto* pl_out_opt = cmd_pipeline->add_option("--out", pl_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        json cfg = load_config(config_path);

        if (*cmd_fixture) {
            apply(fx_recipe_opt, cfg, "recipe", fx_recipe);
            apply(fx_rows_opt, cfg, "rows", fx_rows);
            apply(fx_seed_opt, cfg, "seed", fx_seed);
            apply(fx_out_opt, cfg, "out", fx_out);

            tabkg::FixtureSpec spec;
            spec.recipe = fx_recipe;
            spec.n_rows = fx_rows;
            spec.seed = fx_seed;
            for (const auto& kv : fx_noise) {
                auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw CLI::ValidationError("--noise", "expected column=rate");
                spec.noise[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
            }
            if (cfg.contains("noise") && fx_noise.empty())
                for (const auto& [k, v] : cfg.at("noise").items())
                    spec.noise[k] = v.get<double>();

            fs::create_directories(fx_out);
            tabkg::FixtureResult fixture = tabkg::generate_fixture(spec);
            fs::path dir(fx_out);
            tabkg::save_table_csv(fixture.table, (dir / (fx_recipe + ".csv")).string());
            tabkg::save_table_metadata(fixture.table,
                                       (dir / (fx_recipe + ".meta.json")).string());
            fixture.truth.save((dir / (fx_recipe + ".truth.json")).string());
            write_manifest(dir, "fixture",
                           {{"recipe", fx_recipe},
                            {"rows", fx_rows},
                            {"noise", spec.noise}},
                           fx_seed);
            std::cout << "wrote " << fx_recipe << " fixture (" << fx_rows
                      << " rows) to " << fx_out << "\n";
        } else if (*cmd_propose) {
            apply(pr_seed_opt, cfg, "seed", pr_seed);
            apply(pr_out_opt, cfg, "out", pr_out);
            tabkg::Table table = tabkg::load_table(pr_csv, pr_meta);
            tabkg::EnsembleConfig ensemble;
            if (!pr_ensemble.empty()) {
                ensemble = tabkg::load_ensemble_config(pr_ensemble);
            } else if (!pr_truth.empty()) {
                ensemble = default_ensemble(pr_truth, pr_seed);
            } else {
                throw CLI::ValidationError("--ensemble",
                                           "need --ensemble or --truth");
            }
            fs::create_directories(pr_out);
            ProposeOutputs outputs = do_propose(table, ensemble, pr_out);
            write_manifest(pr_out, "propose",
                           {{"csv", pr_csv}, {"threshold", outputs.result.threshold}},
                           pr_seed);
            std::cout << "candidate graph: " << outputs.result.candidate.edges().size()
                      << " edges (vote threshold " << outputs.result.threshold
                      << ")\n";
        } else if (*cmd_validate) {
            apply(va_theta_opt, cfg, "theta", va_theta);
            apply(va_out_opt, cfg, "out", va_out);
            tabkg::Table table = tabkg::load_table(va_csv, va_meta);
            tabkg::Graph candidate = tabkg::Graph::load(va_graph);
            auto [validated, report] = tabkg::prune(candidate, table, va_theta);
            fs::create_directories(va_out);
            fs::path dir(va_out);
            validated.save((dir / "validated.json").string());
            report.save((dir / "validation_report.json").string());
            write_manifest(dir, "validate", {{"csv", va_csv}, {"theta", va_theta}}, 0);
            std::cout << "kept " << validated.edges().size() << " of "
                      << candidate.edges().size() << " edges (hallucination rate "
                      << report.hallucination_rate << ")\n";
        } else if (*cmd_compress) {
            apply(co_out_opt, cfg, "out", co_out);
            tabkg::Table table = tabkg::load_table(co_csv, co_meta);
            tabkg::Graph validated = tabkg::Graph::load(co_graph);
            fs::create_directories(co_out);
            CompressOutputs outputs = do_compress(table, validated, co_out);
            tabkg::RoundTripReport rt = tabkg::verify_roundtrip(table, outputs.plan);
            write_manifest(co_out, "compress",
                           {{"csv", co_csv}, {"roundtrip_pass", rt.pass}}, 0);
            std::cout << "kept " << outputs.plan.keep.size() << " of "
                      << outputs.plan.schema.size() << " columns; round trip "
                      << (rt.pass ? "lossless" : "LOSSY") << "\n";
            if (!rt.pass) return 2;
        } else if (*cmd_train) {
            apply(tr_seed_opt, cfg, "seed", tr_seed);
            apply(tr_epochs_opt, cfg, "epochs", tr_epochs);
            apply(tr_width_opt, cfg, "width", tr_width);
            apply(tr_depth_opt, cfg, "depth", tr_depth);
            apply(tr_batch_opt, cfg, "batch", tr_batch);
            apply(tr_lr_opt, cfg, "lr", tr_lr);
            apply(tr_out_opt, cfg, "out", tr_out);
            tabkg::Table table = tabkg::load_table(tr_csv, tr_meta);
            tabkg::DiffusionConfig dc;
            dc.epochs = tr_epochs;
            dc.hidden_width = tr_width;
            dc.hidden_depth = tr_depth;
            dc.batch_size = tr_batch;
            dc.learning_rate = tr_lr;
            dc.seed = tr_seed;
            tabkg::GeneratorModel model = tabkg::train_generator(table, dc);
            fs::create_directories(tr_out);
            model.save((fs::path(tr_out) / "model.json").string());
            write_manifest(tr_out, "train",
                           {{"csv", tr_csv},
                            {"epochs", tr_epochs},
                            {"width", tr_width},
                            {"depth", tr_depth}},
                           tr_seed);
            std::cout << "trained " << tr_epochs << " epochs; final loss "
                      << model.model.loss_curve().back() << "\n";
        } else if (*cmd_generate) {
            apply(ge_n_opt, cfg, "n_synth", ge_n);
            apply(ge_seed_opt, cfg, "seed", ge_seed);
            apply(ge_out_opt, cfg, "out", ge_out);
            tabkg::GeneratorModel model = tabkg::GeneratorModel::load(ge_model);
            tabkg::Table synth = model.generate(ge_n, ge_seed);
            fs::create_directories(ge_out);
            fs::path dir(ge_out);
            if (!ge_plan.empty()) {
                tabkg::CompressionPlan plan = tabkg::CompressionPlan::load(ge_plan);
                synth = tabkg::decompress(synth, plan);
            }
            tabkg::save_table_csv(synth, (dir / "synthetic.csv").string());
            tabkg::save_table_metadata(synth, (dir / "synthetic.meta.json").string());
            write_manifest(dir, "generate", {{"n", ge_n}, {"plan", ge_plan}}, ge_seed);
            std::cout << "sampled " << ge_n << " rows\n";
        } else if (*cmd_evaluate) {
            apply(ev_label_opt, cfg, "label", ev_label);
            apply(ev_seed_opt, cfg, "seed", ev_seed);
            apply(ev_out_opt, cfg, "out", ev_out);
            tabkg::Table real = tabkg::load_table(ev_real_csv, ev_real_meta);
            tabkg::Table synth = tabkg::load_table(ev_synth_csv, ev_synth_meta);
            tabkg::Graph graph;
            if (!ev_graph.empty()) graph = tabkg::Graph::load(ev_graph);
            std::optional<tabkg::Table> train, holdout;
            if (!ev_train_csv.empty())
                train = tabkg::load_table(ev_train_csv, ev_real_meta);
            if (!ev_holdout_csv.empty())
                holdout = tabkg::load_table(ev_holdout_csv, ev_real_meta);
            tabkg::EvalReport report = tabkg::evaluate_all(
                real, synth, graph, train ? &*train : nullptr,
                holdout ? &*holdout : nullptr, ev_label, ev_seed);
            fs::create_directories(ev_out);
            report.save((fs::path(ev_out) / "eval.json").string());
            write_manifest(ev_out, "evaluate",
                           {{"real", ev_real_csv}, {"synth", ev_synth_csv}}, ev_seed);
            print_report(report);
        } else if (*cmd_pipeline) {
            apply(pl_recipe_opt, cfg, "recipe", pl_recipe);
            apply(pl_rows_opt, cfg, "rows", pl_rows);
            apply(pl_seed_opt, cfg, "seed", pl_seed);
            apply(pl_theta_opt, cfg, "theta", pl_theta);
            apply(pl_epochs_opt, cfg, "epochs", pl_epochs);
            apply(pl_n_opt, cfg, "n_synth", pl_n_synth);
            apply(pl_out_opt, cfg, "out", pl_out);
            if (pl_n_synth == 0) pl_n_synth = pl_rows;

            fs::path dir(pl_out);
            fs::create_directories(dir);

            // stage 0: fixture + holdout split
            tabkg::FixtureSpec spec;
            spec.recipe = pl_recipe;
            spec.n_rows = pl_rows;
            spec.seed = pl_seed;
            tabkg::FixtureResult fixture = tabkg::generate_fixture(spec);
            tabkg::save_table_csv(fixture.table, (dir / "real.csv").string());
            tabkg::save_table_metadata(fixture.table, (dir / "real.meta.json").string());
            fixture.truth.save((dir / "truth.json").string());
            auto [train_table, holdout_table] =
                tabkg::split_holdout(fixture.table, 0.1, pl_seed);
            tabkg::save_table_csv(train_table, (dir / "train.csv").string());
            tabkg::save_table_csv(holdout_table, (dir / "holdout.csv").string());

            // stage 1+2: serialize metadata, propose, vote
            tabkg::EnsembleConfig ensemble =
                pl_ensemble.empty()
                    ? default_ensemble((dir / "truth.json").string(), pl_seed)
                    : tabkg::load_ensemble_config(pl_ensemble);
            ProposeOutputs proposed = do_propose(train_table, ensemble, dir);

            // stage 3: validate on real training data
            auto [validated, report] =
                tabkg::prune(proposed.result.candidate, train_table, pl_theta);
            validated.save((dir / "validated.json").string());
            report.save((dir / "validation_report.json").string());

            // stage 4: compress
            CompressOutputs compressed = do_compress(train_table, validated, dir);
            tabkg::RoundTripReport rt =
                tabkg::verify_roundtrip(train_table, compressed.plan);
            if (!rt.pass) throw StageError("compression round trip is lossy");

            // stage 4b: train + sample
            tabkg::DiffusionConfig dc;
            dc.epochs = pl_epochs;
            dc.seed = pl_seed;
            tabkg::GeneratorModel model =
                tabkg::train_generator(compressed.compressed, dc);
            model.save((dir / "model.json").string());
            tabkg::Table synth_compressed =
                model.generate(pl_n_synth, pl_seed ^ 0x5eedULL);

            // stage 5: decompress
            tabkg::Table synth =
                tabkg::decompress(synth_compressed, compressed.plan);
            tabkg::save_table_csv(synth, (dir / "synthetic.csv").string());
            tabkg::save_table_metadata(synth, (dir / "synthetic.meta.json").string());

            // baseline: independent column resampling
            tabkg::Table baseline =
                tabkg::independent_sample(train_table, pl_n_synth, pl_seed ^ 0xba5eULL);
            tabkg::save_table_csv(baseline, (dir / "baseline.csv").string());

            // evaluation
            std::string label =
                pl_recipe == "mini-retail" ? "late_flag" : "po_status";
            tabkg::EvalReport eval =
                tabkg::evaluate_all(train_table, synth, validated, &train_table,
                                    &holdout_table, label, pl_seed);
            eval.save((dir / "eval.json").string());
            tabkg::EvalReport eval_baseline =
                tabkg::evaluate_all(train_table, baseline, validated, &train_table,
                                    &holdout_table, label, pl_seed);
            eval_baseline.save((dir / "eval_baseline.json").string());

            write_manifest(dir, "pipeline",
                           {{"recipe", pl_recipe},
                            {"rows", pl_rows},
                            {"theta", pl_theta},
                            {"epochs", pl_epochs},
                            {"n_synth", pl_n_synth}},
                           pl_seed);
            std::cout << "pipeline (" << pl_recipe << ")\n";
            print_report(eval);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "stage failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
