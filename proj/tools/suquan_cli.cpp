// suquan command-line tool: simulate, normalize, train, evaluate,
// cross-validate, study.
//
// Exit codes: 0 success, 2 invalid input, 3 numeric failure, 4 I/O.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "suquan/harness.hpp"
#include "suquan/io.hpp"

namespace fs = std::filesystem;
using namespace suquan;
using io::json;

namespace {

constexpr int exit_invalid = 2;
constexpr int exit_numeric = 3;
constexpr int exit_io = 4;

// "gaussian", "median", "none" or "file:PATH".
QuantileSource parse_quantile_source(const std::string& text)
{
    if (text == "none" || text == "raw") return QuantileSource::raw();
    if (text == "median") return QuantileSource::median();
    if (text.rfind("file:", 0) == 0) {
        auto values = io::read_quantile_file(text.substr(5));
        const bool monotone = is_non_decreasing(values);
        return QuantileSource::fixed(TargetQuantile(std::move(values), monotone));
    }
    if (auto fam = parse_family(text)) return QuantileSource::from_family(*fam);
    throw InvalidInput("unknown quantile '" + text +
                       "' (expected gaussian|cauchy|exponential|uniform|bimodal-gaussian|median|none|file:PATH)");
}

// "a,b,c" or "lo:hi:count" in log10 exponents.
std::vector<double> parse_grid(const std::string& text)
{
    if (text.find(':') != std::string::npos) {
        double lo = 0, hi = 0;
        std::size_t count = 0;
        char c1 = 0, c2 = 0;
        std::istringstream in(text);
        if (!(in >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || count == 0 || !in.eof()) {
            throw InvalidInput("grid '" + text + "' must be LO:HI:COUNT (log10 exponents) or a comma list");
        }
        return log_grid(lo, hi, count);
    }
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto v = io::detail::parse_real(io::detail::trim(tok));
        if (!v) throw InvalidInput("grid '" + text + "': '" + tok + "' is not a number");
        out.push_back(*v);
    }
    if (out.empty()) throw InvalidInput("grid '" + text + "' is empty");
    return out;
}

std::optional<Family> parse_corruption(const std::string& text)
{
    if (text == "none") return std::nullopt;
    if (auto fam = parse_family(text)) return fam;
    throw InvalidInput("unknown corruption '" + text + "'");
}

LossKind parse_loss(const std::string& text)
{
    if (text == "logistic") return LossKind::logistic;
    if (text == "squared") return LossKind::squared;
    throw InvalidInput("unknown loss '" + text + "' (expected logistic|squared)");
}

void emit(const std::string& path, const std::string& content)
{
    if (path.empty() || path == "-") {
        std::cout << content;
        std::cout.flush();
    } else {
        io::write_atomic(path, content);
    }
}

json cv_summary(const CvResult& cv, const CvPlan& plan)
{
    json j;
    j["repeats"] = plan.repeats;
    j["folds"] = plan.folds;
    j["lambda_grid"] = plan.lambda_grid;
    j["gamma_grid"] = plan.gamma_grid;
    j["seed"] = plan.seed;
    j["best_lambda"] = cv.best_lambda;
    j["best_gamma"] = cv.best_gamma;
    j["best_mean_auc"] = cv.best_mean_auc;
    return j;
}

std::string cv_records_tsv(const CvResult& cv)
{
    std::ostringstream out;
    out << "lambda\tgamma\trepeat\tfold\tauc\tfailed\n";
    for (const auto& r : cv.records) {
        out << format_real(r.lambda) << '\t' << format_real(r.gamma) << '\t' << r.repeat << '\t' << r.fold << '\t'
            << format_real(r.auc) << '\t' << (r.failed ? 1 : 0) << '\n';
    }
    return out.str();
}

// Options shared by train and cross-validate.
struct LearnerFlags {
    std::string method = "logistic";
    std::string quantile;  // default depends on method
    std::string loss = "logistic";
    std::size_t rounds = 1;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--method", method, "logistic|suquan-svd|suquan-bnd|suquan-spav")->capture_default_str();
        cmd->add_option("--quantile", quantile,
                        "gaussian|cauchy|exponential|uniform|bimodal-gaussian|median|none|file:PATH "
                        "(logistic: fixed QN target, default none; bnd/spav: initial quantile, default median)");
        cmd->add_option("--loss", loss, "logistic|squared")->capture_default_str();
        cmd->add_option("--rounds", rounds, "alternating rounds for bnd/spav")->capture_default_str()->check(CLI::PositiveNumber);
    }

    LearnerSpec spec() const
    {
        LearnerSpec s;
        const auto m = parse_method(method);
        if (!m) throw InvalidInput("unknown method '" + method + "'");
        s.method = *m;
        s.loss = parse_loss(loss);
        s.alt.rounds = rounds;
        if (!quantile.empty()) {
            if (s.method == Method::suquan_svd) throw InvalidInput("suquan-svd learns its quantile; drop --quantile");
            s.quantile = parse_quantile_source(quantile);
            if ((s.method == Method::suquan_bnd || s.method == Method::suquan_spav) &&
                s.quantile.kind == QuantileSource::Kind::raw) {
                throw InvalidInput(method + " needs an initial quantile; 'none' is not allowed");
            }
        }
        return s;
    }

    std::string source_name() const
    {
        if (!quantile.empty()) return quantile;
        return method == "logistic" ? "none" : (method == "suquan-svd" ? "svd" : "median");
    }
};

struct CvFlags {
    std::size_t repeats = 5;
    std::size_t folds = 3;
    std::string lambda_grid = "-5:5:11";
    std::string gamma_grid = "0:4:5";

    void add(CLI::App* cmd)
    {
        cmd->add_option("--cv-repeats", repeats, "cross-validation repeats")->capture_default_str();
        cmd->add_option("--cv-folds", folds, "cross-validation folds")->capture_default_str();
        cmd->add_option("--lambda-grid", lambda_grid, "comma list or LO:HI:COUNT in log10")->capture_default_str();
        cmd->add_option("--gamma-grid", gamma_grid, "comma list or LO:HI:COUNT in log10 (spav only)")->capture_default_str();
    }

    CvPlan plan(std::uint64_t seed) const
    {
        CvPlan p;
        p.repeats = repeats;
        p.folds = folds;
        p.lambda_grid = parse_grid(lambda_grid);
        p.gamma_grid = parse_grid(gamma_grid);
        p.seed = seed;
        p.validate();
        return p;
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Supervised quantile normalization: learn a target quantile jointly with a linear model."};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "suquan 1.0.0");
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "master seed for every random choice")->capture_default_str();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "generate a corrupted simulation (train.csv, test.csv, truth.json)");
    SimulationSpec sim_spec;
    std::string corruption = "cauchy";
    std::string out_dir = ".";
    sim_cmd->add_option("--p", sim_spec.p, "features per sample")->capture_default_str();
    sim_cmd->add_option("--n-train", sim_spec.n_train, "training samples")->capture_default_str();
    sim_cmd->add_option("--n-test", sim_spec.n_test, "test samples")->capture_default_str();
    sim_cmd->add_option("--corruption", corruption, "none|gaussian|cauchy|exponential|uniform|bimodal-gaussian")
        ->capture_default_str();
    sim_cmd->add_option("--out-dir", out_dir, "output directory")->capture_default_str();

    // normalize
    auto* norm_cmd = app.add_subcommand("normalize", "quantile normalize every row of a CSV");
    std::string norm_input, norm_output, norm_quantile, norm_model;
    std::optional<std::string> label_col;
    norm_cmd->add_option("--input", norm_input, "input CSV")->required();
    norm_cmd->add_option("--output", norm_output, "output CSV (default stdout)");
    auto* nq = norm_cmd->add_option("--quantile", norm_quantile,
                                    "gaussian|cauchy|exponential|uniform|bimodal-gaussian|median|file:PATH");
    auto* nm = norm_cmd->add_option("--model", norm_model, "use the learned quantile of a model file");
    nq->excludes(nm);
    norm_cmd->add_option("--label-col", label_col, "label column (name or 0-based index), copied through");

    // train
    auto* train_cmd = app.add_subcommand("train", "fit a model and write a model file");
    std::string train_data, model_out = "model.json";
    double lambda = 1e-2, gamma = 1.0;
    bool use_cv = false;
    LearnerFlags train_flags;
    CvFlags train_cv;
    train_cmd->add_option("--data", train_data, "labeled training CSV")->required();
    train_cmd->add_option("--output", model_out, "model file")->capture_default_str();
    train_cmd->add_option("--lambda", lambda, "L2 penalty on w")->capture_default_str();
    train_cmd->add_option("--gamma", gamma, "smoothness penalty (suquan-spav)")->capture_default_str();
    train_cmd->add_flag("--cv", use_cv, "select lambda (and gamma) by repeated stratified k-fold CV first");
    train_cmd->add_option("--label-col", label_col, "label column (name or 0-based index)");
    train_flags.add(train_cmd);
    train_cv.add(train_cmd);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score a labeled CSV with a model file");
    std::string eval_model, eval_data, eval_output, eval_scores;
    eval_cmd->add_option("--model", eval_model, "model file")->required();
    eval_cmd->add_option("--data", eval_data, "labeled CSV")->required();
    eval_cmd->add_option("--output", eval_output, "metrics TSV (default stdout)");
    eval_cmd->add_option("--scores", eval_scores, "decision values TSV");
    eval_cmd->add_option("--label-col", label_col, "label column (name or 0-based index)");

    // cross-validate
    auto* cv_cmd = app.add_subcommand("cross-validate", "grid search by repeated stratified k-fold CV");
    std::string cv_data, cv_output;
    LearnerFlags cv_flags;
    CvFlags cv_plan_flags;
    cv_cmd->add_option("--data", cv_data, "labeled CSV")->required();
    cv_cmd->add_option("--output", cv_output, "per-fold TSV (default stdout)");
    cv_cmd->add_option("--label-col", label_col, "label column (name or 0-based index)");
    cv_flags.add(cv_cmd);
    cv_plan_flags.add(cv_cmd);

    // study
    auto* study_cmd = app.add_subcommand("study", "simulation study: metrics TSV and a JSON manifest");
    StudySpec study;
    std::string study_out = "metrics.tsv", study_manifest;
    std::vector<std::string> study_corruptions{"cauchy", "exponential", "uniform", "bimodal-gaussian"};
    CvFlags study_cv;
    bool full_scale = false;
    study_cmd->add_option("--p", study.p, "features")->capture_default_str();
    study_cmd->add_option("--n-train", study.n_train, "training sizes")->delimiter(',')->capture_default_str();
    study_cmd->add_option("--n-test", study.n_test, "test samples")->capture_default_str();
    study_cmd->add_option("--corruptions", study_corruptions, "corrupting families")->delimiter(',')->capture_default_str();
    study_cmd->add_option("--methods", study.methods, "oracle,logistic,qn-median,suquan-svd,suquan-bnd,suquan-spav")
        ->delimiter(',')
        ->capture_default_str();
    study_cmd->add_option("--repetitions", study.repetitions, "seeded repetitions per family")->capture_default_str();
    study_cmd->add_option("--output", study_out, "metrics TSV")->capture_default_str();
    study_cmd->add_option("--manifest", study_manifest, "run manifest JSON (default: <output>.json)");
    study_cmd->add_flag("--full", full_scale, "full scale: p=1000, n_train=100,500,1000,2000");
    study_cv.add(study_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_invalid;
    }

    try {
        if (sim_cmd->parsed()) {
            sim_spec.corruption = parse_corruption(corruption);
            sim_spec.seed = seed;
            const auto sim = simulate(sim_spec);
            fs::create_directories(out_dir);
            auto write_split = [&](const Dataset& d, const std::string& name) {
                io::write_atomic(fs::path(out_dir) / name, io::format_csv(d.features(), d.n(), d.p(), d.labels()));
            };
            write_split(sim.train, "train.csv");
            write_split(sim.test, "test.csv");
            json truth;
            truth["p"] = sim_spec.p;
            truth["n_train"] = sim_spec.n_train;
            truth["n_test"] = sim_spec.n_test;
            truth["corruption"] = corruption;
            truth["seed"] = seed;
            truth["f_true"] = std::vector<double>(sim.truth.f_true.values().begin(), sim.truth.f_true.values().end());
            truth["w_true"] = sim.truth.w_true;
            truth["corrupting_quantile"] =
                sim.truth.corrupting
                    ? json(std::vector<double>(sim.truth.corrupting->values().begin(), sim.truth.corrupting->values().end()))
                    : json(nullptr);
            io::write_atomic(fs::path(out_dir) / "truth.json", truth.dump(2) + "\n");
        } else if (norm_cmd->parsed()) {
            const auto table = io::read_csv(norm_input);
            const auto m = io::split_label(table, label_col, false);
            const Dataset data(m.features, m.n, m.p, std::vector<double>(m.n, 0.0), norm_input);
            TargetQuantile q;
            if (!norm_model.empty()) {
                const auto model = io::read_model(norm_model);
                if (!model.trained.quantile) throw InvalidInput(norm_model + ": model has no quantile");
                q = *model.trained.quantile;
            } else if (!norm_quantile.empty()) {
                const auto src = parse_quantile_source(norm_quantile);
                if (src.kind == QuantileSource::Kind::raw) throw InvalidInput("normalize needs a quantile");
                q = src.resolve(data);
            } else {
                throw InvalidInput("normalize needs --quantile or --model");
            }
            require_same_size("quantile length vs features", m.p, q.size());
            std::vector<double> out;
            out.reserve(m.n * m.p);
            for (std::size_t i = 0; i < m.n; ++i) {
                const auto z = quantile_normalize(data.row(i), q);
                out.insert(out.end(), z.begin(), z.end());
            }
            std::optional<std::span<const double>> labels;
            if (m.labels) labels = std::span<const double>(*m.labels);
            std::string text = io::format_csv(out, m.n, m.p, labels, m.feature_names, m.label_name);
            if (table.header.empty()) text.erase(0, text.find('\n') + 1);  // keep headerless input headerless
            emit(norm_output, text);
        } else if (train_cmd->parsed()) {
            const auto data = io::load_dataset(train_data, label_col);
            auto learner = train_flags.spec();
            io::ModelFile file;
            if (use_cv) {
                const auto plan = train_cv.plan(seed);
                const auto cv = cross_validate(data, learner, plan);
                lambda = cv.best_lambda;
                gamma = learner.method == Method::suquan_spav ? cv.best_gamma : gamma;
                file.metadata.cv = cv_summary(cv, plan);
                std::fprintf(stderr, "cv: lambda=%s gamma=%s mean AUC=%s\n", format_real(lambda).c_str(),
                             format_real(gamma).c_str(), format_real(cv.best_mean_auc).c_str());
            }
            file.trained = train(learner, data, lambda, gamma);
            file.metadata.seed = seed;
            file.metadata.dataset_hash = io::hex64(io::dataset_hash(data));
            file.metadata.quantile_source = train_flags.source_name();
            io::write_model(model_out, file);
            if (learner.loss == LossKind::logistic) {
                std::fprintf(stderr, "training AUC %s\n", format_real(auc(predict(file.trained, data), data.labels())).c_str());
            }
        } else if (eval_cmd->parsed()) {
            const auto model = io::read_model(eval_model);
            const auto data = io::load_dataset(eval_data, label_col);
            const auto scores = predict(model.trained, data);
            std::ostringstream metrics;
            metrics << "metric\tvalue\n";
            metrics << "n\t" << data.n() << '\n';
            if (model.trained.model.loss == LossKind::logistic) {
                metrics << "auc\t" << format_real(auc(scores, data.labels())) << '\n';
            } else {
                double mse = 0.0;
                for (std::size_t i = 0; i < data.n(); ++i) mse += std::pow(scores[i] - data.labels()[i], 2);
                metrics << "mse\t" << format_real(mse / static_cast<double>(data.n())) << '\n';
            }
            emit(eval_output, metrics.str());
            if (!eval_scores.empty()) {
                std::ostringstream s;
                s << "sample\tlabel\tscore\n";
                for (std::size_t i = 0; i < data.n(); ++i) {
                    s << i << '\t' << format_real(data.labels()[i]) << '\t' << format_real(scores[i]) << '\n';
                }
                io::write_atomic(eval_scores, s.str());
            }
        } else if (cv_cmd->parsed()) {
            const auto data = io::load_dataset(cv_data, label_col);
            const auto plan = cv_plan_flags.plan(seed);
            const auto cv = cross_validate(data, cv_flags.spec(), plan);
            emit(cv_output, cv_records_tsv(cv));
            std::fprintf(stderr, "best: lambda=%s gamma=%s mean AUC=%s\n", format_real(cv.best_lambda).c_str(),
                         format_real(cv.best_gamma).c_str(), format_real(cv.best_mean_auc).c_str());
        } else if (study_cmd->parsed()) {
            if (full_scale) {
                study.p = 1000;
                study.n_train = {100, 500, 1000, 2000};
            }
            study.corruptions.clear();
            for (const auto& c : study_corruptions) {
                const auto fam = parse_family(c);
                if (!fam) throw InvalidInput("unknown corruption '" + c + "'");
                study.corruptions.push_back(*fam);
            }
            study.seed = seed;
            study.plan = study_cv.plan(seed);
            std::ostringstream tsv;
            write_metrics_header(tsv);
            const auto rows = run_simulation_study(study, [](const MetricsRow& r) {
                std::fprintf(stderr, "%s %s n=%zu auc=%.4f distance=%.4f\n", r.method.c_str(), r.corruption.c_str(),
                             r.n_train, r.auc, r.quantile_distance);
            });
            for (const auto& r : rows) write_metrics_row(tsv, r);
            io::write_atomic(study_out, tsv.str());

            json manifest;
            manifest["tool"] = "suquan study";
            manifest["seed"] = seed;
            manifest["p"] = study.p;
            manifest["n_train"] = study.n_train;
            manifest["n_test"] = study.n_test;
            manifest["corruptions"] = study_corruptions;
            manifest["methods"] = study.methods;
            manifest["repetitions"] = study.repetitions;
            manifest["cv"] = {{"repeats", study.plan.repeats},
                              {"folds", study.plan.folds},
                              {"lambda_grid", study.plan.lambda_grid},
                              {"gamma_grid", study.plan.gamma_grid}};
            manifest["quantile_distance"] = "euclidean after project_F0 (center, shrink to rms <= 1) of both vectors";
            manifest["seed_rule"] = "cell seed = splitmix64 fold of (master, corruption index, repetition)";
            manifest["metrics"] = study_out;
            io::write_atomic(study_manifest.empty() ? study_out + ".json" : study_manifest, manifest.dump(2) + "\n");
        }
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_io;
    } catch (const InvalidInput& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_invalid;
    } catch (const DegenerateQuantile& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_numeric;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_numeric;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_io;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_invalid;
    }
    return 0;
}
