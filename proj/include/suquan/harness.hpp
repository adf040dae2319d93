#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "suquan/dataset.hpp"
#include "suquan/error.hpp"
#include "suquan/linmod.hpp"
#include "suquan/quantiles.hpp"
#include "suquan/random.hpp"
#include "suquan/suquan.hpp"

namespace suquan {

// ---------------------------------------------------------------------------
// Simulation

struct SimulationSpec {
    std::size_t p = 200;
    std::size_t n_train = 1000;
    std::size_t n_test = 1000;
    std::optional<Family> corruption;  ///< nullopt: observed features are the clean ones
    std::uint64_t seed = 0;
    BimodalParams bimodal{};
};

struct SimulationTruth {
    TargetQuantile f_true;
    std::vector<double> w_true;
    std::optional<TargetQuantile> corrupting;
};

struct Simulation {
    Dataset train;
    Dataset test;
    Dataset train_clean;
    Dataset test_clean;
    SimulationTruth truth;
};

namespace detail {

inline std::pair<Dataset, Dataset> simulate_split(const SimulationSpec& spec, const SimulationTruth& truth,
                                                  std::size_t n, std::uint64_t seed, const std::string& name)
{
    const std::size_t p = spec.p;
    Rng rng(seed);
    std::vector<double> clean(n * p), observed(n * p), labels(n);
    std::vector<index_t> perm(p);
    const auto f = truth.f_true.values();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) perm[j] = static_cast<index_t>(j);
        rng.shuffle(std::span<index_t>(perm));
        std::span<double> x(clean.data() + i * p, p);
        for (std::size_t j = 0; j < p; ++j) x[j] = f[perm[j]];
        double margin = 0.0;
        for (std::size_t j = 0; j < p; ++j) margin += truth.w_true[j] * x[j];
        labels[i] = rng.uniform() < sigmoid(margin) ? 1.0 : -1.0;
        std::span<double> z(observed.data() + i * p, p);
        if (truth.corrupting) {
            const auto g = quantile_normalize(x, *truth.corrupting);
            std::copy(g.begin(), g.end(), z.begin());
        } else {
            std::copy(x.begin(), x.end(), z.begin());
        }
    }
    return {Dataset(std::move(observed), n, p, labels, name), Dataset(std::move(clean), n, p, labels, name + "-clean")};
}

} // namespace detail

/**
 * Samples are random permutations of the gaussian quantile; labels follow
 * P(y = 1 | x) = 1 / (1 + exp(-w^T x)) on the clean samples with w standard
 * normal; the observed features are the clean samples quantile normalized to
 * the corrupting family. Train, test and w use independent seed streams.
 */
inline Simulation simulate(const SimulationSpec& spec)
{
    if (spec.p < 2) throw InvalidInput("simulate: p must be at least 2");
    if (spec.n_train == 0 || spec.n_test == 0) throw InvalidInput("simulate: sample counts must be positive");
    SimulationTruth truth;
    truth.f_true = make_distribution_quantile(Family::gaussian, spec.p);
    if (spec.corruption) truth.corrupting = make_distribution_quantile(*spec.corruption, spec.p, spec.bimodal);
    Rng wrng(derive_seed(spec.seed, {2}));
    truth.w_true.resize(spec.p);
    for (double& w : truth.w_true) w = wrng.normal();

    auto [train, train_clean] = detail::simulate_split(spec, truth, spec.n_train, derive_seed(spec.seed, {0}), "train");
    auto [test, test_clean] = detail::simulate_split(spec, truth, spec.n_test, derive_seed(spec.seed, {1}), "test");
    return {std::move(train), std::move(test), std::move(train_clean), std::move(test_clean), std::move(truth)};
}

/// Distance after aligning both quantiles with project_F0.
inline double quantile_distance(std::span<const double> a, std::span<const double> b)
{
    require_same_size("quantile_distance", a.size(), b.size());
    const auto pa = project_F0(a);
    const auto pb = project_F0(b);
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (pa.values()[j] - pb.values()[j]) * (pa.values()[j] - pb.values()[j]);
    return std::sqrt(s);
}

inline double quantile_distance(const TargetQuantile& a, const TargetQuantile& b)
{
    return quantile_distance(a.values(), b.values());
}

// ---------------------------------------------------------------------------
// Learners

enum class Method { logistic, suquan_svd, suquan_bnd, suquan_spav };

inline std::string_view method_name(Method m)
{
    switch (m) {
    case Method::logistic: return "logistic";
    case Method::suquan_svd: return "suquan-svd";
    case Method::suquan_bnd: return "suquan-bnd";
    case Method::suquan_spav: return "suquan-spav";
    }
    return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name)
{
    for (Method m : {Method::logistic, Method::suquan_svd, Method::suquan_bnd, Method::suquan_spav}) {
        if (method_name(m) == name) return m;
    }
    return std::nullopt;
}

/// Where the quantile for logistic (or the initial quantile for bnd/spav) comes from.
struct QuantileSource {
    enum class Kind { raw, family, median, fixed };
    Kind kind = Kind::raw;
    Family family = Family::gaussian;
    std::optional<TargetQuantile> values;
    BimodalParams bimodal{};

    static QuantileSource raw() { return {}; }
    static QuantileSource median() { return {Kind::median, Family::gaussian, std::nullopt, {}}; }
    static QuantileSource from_family(Family f, BimodalParams params = {}) { return {Kind::family, f, std::nullopt, params}; }
    static QuantileSource fixed(TargetQuantile q) { return {Kind::fixed, Family::gaussian, std::move(q), {}}; }

    TargetQuantile resolve(const Dataset& train) const
    {
        switch (kind) {
        case Kind::raw: throw InvalidInput("quantile source 'raw' has no quantile");
        case Kind::family: return make_distribution_quantile(family, train.p(), bimodal);
        case Kind::median: return median_quantile(train);
        case Kind::fixed:
            require_same_size("quantile file", train.p(), values->size());
            return *values;
        }
        throw InvalidInput("unknown quantile source");
    }

    std::string describe() const
    {
        switch (kind) {
        case Kind::raw: return "raw";
        case Kind::family: return std::string(family_name(family));
        case Kind::median: return "median";
        case Kind::fixed: return "file";
        }
        return "unknown";
    }
};

struct LearnerSpec {
    Method method = Method::logistic;
    QuantileSource quantile = QuantileSource::raw();
    LossKind loss = LossKind::logistic;
    AltOptions alt{};
    SvdOptions svd{};
    ProxGradientOptions fit{};
};

struct TrainedModel {
    Method method = Method::logistic;
    std::optional<TargetQuantile> quantile;  ///< nullopt: linear model on raw features
    LinearModel model;
    double gamma = 0.0;
    std::size_t rounds = 0;
    std::vector<double> objective_history;
    bool converged = true;
};

inline TrainedModel train(const LearnerSpec& spec, const Dataset& data, double lambda, double gamma = 0.0)
{
    TrainedModel out;
    out.method = spec.method;
    const LossSpec loss{spec.loss, std::vector<double>(data.labels().begin(), data.labels().end())};
    switch (spec.method) {
    case Method::logistic: {
        FitReport fit;
        if (spec.quantile.kind == QuantileSource::Kind::raw) {
            fit = fit_linear(DenseDesign(data.features(), data.n(), data.p()), loss, lambda, spec.fit);
        } else {
            out.quantile = spec.quantile.resolve(data);
            fit = fit_linear(QuantileDesign(data.sorted(), out.quantile->values()), loss, lambda, spec.fit);
        }
        out.model = std::move(fit.model);
        out.converged = fit.converged;
        out.rounds = 0;
        out.objective_history = {fit.objective};
        return out;
    }
    case Method::suquan_svd: {
        auto m = suquan_svd_model(data, lambda, spec.loss, spec.svd, spec.fit);
        out.quantile = std::move(m.quantile);
        out.model = std::move(m.model);
        out.rounds = m.rounds;
        out.objective_history = std::move(m.objective_history);
        out.converged = m.converged;
        return out;
    }
    case Method::suquan_bnd:
    case Method::suquan_spav: {
        const auto init = spec.quantile.kind == QuantileSource::Kind::raw ? median_quantile(data)
                                                                           : spec.quantile.resolve(data);
        const Variant variant = spec.method == Method::suquan_bnd ? Variant::bnd : Variant::spav;
        auto m = suquan_alt(data, init, lambda, variant == Variant::spav ? gamma : 0.0, variant, spec.loss, spec.alt);
        out.quantile = std::move(m.quantile);
        out.model = std::move(m.model);
        out.gamma = m.gamma;
        out.rounds = m.rounds;
        out.objective_history = std::move(m.objective_history);
        out.converged = m.converged;
        return out;
    }
    }
    throw InvalidInput("unknown method");
}

/// Decision values w^T z_i + b, with z_i the quantile-normalized row when the model carries a quantile.
inline std::vector<double> predict(const TrainedModel& m, const Dataset& data)
{
    if (m.quantile) {
        require_same_size("model quantile vs data", m.quantile->size(), data.p());
        return decision_values(m.model, QuantileDesign(data.sorted(), m.quantile->values()));
    }
    return decision_values(m.model, DenseDesign(data.features(), data.n(), data.p()));
}

// ---------------------------------------------------------------------------
// Cross-validation

inline std::vector<double> log_grid(double lo_exp, double hi_exp, std::size_t count)
{
    std::vector<double> g(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double e = count == 1 ? lo_exp : lo_exp + (hi_exp - lo_exp) * static_cast<double>(k) / static_cast<double>(count - 1);
        g[k] = std::pow(10.0, e);
    }
    return g;
}

struct CvPlan {
    std::size_t repeats = 5;
    std::size_t folds = 3;
    std::vector<double> lambda_grid = log_grid(-5, 5, 11);
    std::vector<double> gamma_grid = log_grid(0, 4, 5);
    std::uint64_t seed = 0;

    void validate() const
    {
        if (repeats == 0) throw InvalidInput("cv plan: repeats must be positive");
        if (folds < 2) throw InvalidInput("cv plan: folds must be at least 2");
        if (lambda_grid.empty() || gamma_grid.empty()) throw InvalidInput("cv plan: empty grid");
        for (double v : lambda_grid) {
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("cv plan: lambda grid must be positive");
        }
        for (double v : gamma_grid) {
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("cv plan: gamma grid must be positive");
        }
    }
};

/// Fold index per sample. Each class is shuffled and dealt round-robin, so
/// per-fold class counts differ by at most one.
inline std::vector<std::size_t> stratified_folds(std::span<const double> labels, std::size_t folds, std::uint64_t seed)
{
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
    if (pos.size() < folds || neg.size() < folds) {
        throw InvalidInput("cross-validation: a class has fewer samples (" + std::to_string(std::min(pos.size(), neg.size())) +
                           ") than folds (" + std::to_string(folds) + "); cannot stratify");
    }
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(pos));
    rng.shuffle(std::span<std::size_t>(neg));
    std::vector<std::size_t> fold(labels.size());
    for (std::size_t k = 0; k < pos.size(); ++k) fold[pos[k]] = k % folds;
    // Continue the deal where the positives stopped so fold sizes stay balanced.
    for (std::size_t k = 0; k < neg.size(); ++k) fold[neg[k]] = (folds - 1 - k % folds);
    return fold;
}

/// Worker count from SUQUAN_THREADS (default 1).
inline std::size_t thread_count()
{
    if (const char* env = std::getenv("SUQUAN_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

/// Runs fn(0..count-1); results must not depend on scheduling.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, std::size_t threads = thread_count())
{
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

struct CvRecord {
    double lambda = 0.0;
    double gamma = 0.0;
    std::size_t repeat = 0;
    std::size_t fold = 0;
    double auc = 0.0;
    bool failed = false;  ///< learner raised a degenerate-quantile/label error; auc recorded as 0.5
};

struct CvResult {
    double best_lambda = 0.0;
    double best_gamma = 0.0;
    double best_mean_auc = 0.0;
    std::vector<CvRecord> records;
};

/**
 * Repeated stratified k-fold grid search. Selection by mean validation AUC;
 * ties go to the larger lambda, then the larger gamma. gamma is only
 * searched for suquan-spav.
 */
inline CvResult cross_validate(const Dataset& data, const LearnerSpec& learner, const CvPlan& plan)
{
    plan.validate();
    const std::vector<double> gammas = learner.method == Method::suquan_spav ? plan.gamma_grid : std::vector<double>{0.0};

    struct Split {
        Dataset train, valid;
    };
    std::vector<Split> splits;
    for (std::size_t r = 0; r < plan.repeats; ++r) {
        const auto fold = stratified_folds(data.labels(), plan.folds, derive_seed(plan.seed, {r}));
        for (std::size_t k = 0; k < plan.folds; ++k) {
            std::vector<std::size_t> tr, va;
            for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == k ? va : tr).push_back(i);
            splits.push_back({data.subset(tr), data.subset(va)});
        }
    }

    const std::size_t per_point = splits.size();
    const std::size_t points = plan.lambda_grid.size() * gammas.size();
    std::vector<CvRecord> records(points * per_point);
    parallel_for(records.size(), [&](std::size_t task) {
        const std::size_t point = task / per_point;
        const std::size_t s = task % per_point;
        CvRecord& rec = records[task];
        rec.lambda = plan.lambda_grid[point / gammas.size()];
        rec.gamma = gammas[point % gammas.size()];
        rec.repeat = s / plan.folds;
        rec.fold = s % plan.folds;
        try {
            const auto model = train(learner, splits[s].train, rec.lambda, rec.gamma);
            rec.auc = auc(predict(model, splits[s].valid), splits[s].valid.labels());
        } catch (const DegenerateQuantile&) {
            rec.auc = 0.5;
            rec.failed = true;
        }
    });

    CvResult out;
    out.records = std::move(records);
    bool have = false;
    for (std::size_t point = 0; point < points; ++point) {
        double mean = 0.0;
        for (std::size_t s = 0; s < per_point; ++s) mean += out.records[point * per_point + s].auc;
        mean /= static_cast<double>(per_point);
        const double lambda = plan.lambda_grid[point / gammas.size()];
        const double gamma = gammas[point % gammas.size()];
        const bool better = !have || mean > out.best_mean_auc ||
                            (mean == out.best_mean_auc &&
                             (lambda > out.best_lambda || (lambda == out.best_lambda && gamma > out.best_gamma)));
        if (better) {
            out.best_mean_auc = mean;
            out.best_lambda = lambda;
            out.best_gamma = gamma;
            have = true;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation study

struct MetricsRow {
    std::string method;
    std::string corruption;
    std::size_t n_train = 0;
    std::string fold;
    double auc = 0.0;
    double quantile_distance = 0.0;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double gamma = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
};

/// Study methods: "oracle" (logistic on clean data), "logistic" (on corrupted
/// data), "qn-median" (logistic after median QN), and the suquan-* learners.
struct StudySpec {
    std::size_t p = 200;
    std::vector<std::size_t> n_train{100, 500, 1000};
    std::size_t n_test = 1000;
    std::vector<Family> corruptions{Family::cauchy, Family::exponential, Family::uniform, Family::bimodal_gaussian};
    std::vector<std::string> methods{"oracle", "logistic", "suquan-bnd", "suquan-spav"};
    CvPlan plan{};
    std::uint64_t seed = 0;
    std::size_t repetitions = 1;
    AltOptions alt{};
};

inline std::vector<MetricsRow> run_simulation_study(const StudySpec& spec,
                                                    const std::function<void(const MetricsRow&)>& progress = {})
{
    std::vector<MetricsRow> rows;
    for (std::size_t ni = 0; ni < spec.n_train.size(); ++ni) {
        std::map<std::string, std::pair<double, double>> sums;  // method -> (auc, distance)
        std::map<std::string, std::size_t> counts;
        for (std::size_t ci = 0; ci < spec.corruptions.size(); ++ci) {
            for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
                SimulationSpec sim_spec;
                sim_spec.p = spec.p;
                sim_spec.n_train = spec.n_train[ni];
                sim_spec.n_test = spec.n_test;
                sim_spec.corruption = spec.corruptions[ci];
                // Seeds depend on the corruption and repetition only: for a given family
                // the smaller training sets are prefixes of the larger ones and the
                // test set and w are shared.
                sim_spec.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(ci), rep});
                const auto sim = simulate(sim_spec);

                for (const auto& name : spec.methods) {
                    LearnerSpec learner;
                    learner.alt = spec.alt;
                    const Dataset* train_set = &sim.train;
                    const Dataset* test_set = &sim.test;
                    std::optional<TargetQuantile> fixed;
                    if (name == "oracle") {
                        train_set = &sim.train_clean;
                        test_set = &sim.test_clean;
                        fixed = sim.truth.f_true;
                    } else if (name == "logistic") {
                        fixed = sim.truth.corrupting;
                    } else if (name == "qn-median") {
                        learner.quantile = QuantileSource::median();
                    } else if (auto m = parse_method(name); m && *m != Method::logistic) {
                        learner.method = *m;
                        learner.quantile = QuantileSource::median();
                    } else {
                        throw InvalidInput("unknown study method '" + name + "'");
                    }
                    CvPlan plan = spec.plan;
                    plan.seed = derive_seed(sim_spec.seed, {0xC5});
                    const auto cv = cross_validate(*train_set, learner, plan);
                    const auto model = train(learner, *train_set, cv.best_lambda, cv.best_gamma);

                    MetricsRow row;
                    row.method = name;
                    row.corruption = std::string(family_name(spec.corruptions[ci]));
                    row.n_train = spec.n_train[ni];
                    row.fold = "test";
                    row.auc = auc(predict(model, *test_set), test_set->labels());
                    const TargetQuantile& learned = model.quantile ? *model.quantile : *fixed;
                    row.quantile_distance = quantile_distance(learned, sim.truth.f_true);
                    row.lambda = cv.best_lambda;
                    row.gamma = learner.method == Method::suquan_spav ? cv.best_gamma : std::numeric_limits<double>::quiet_NaN();
                    row.seed = sim_spec.seed;
                    if (progress) progress(row);
                    sums[name].first += row.auc;
                    sums[name].second += row.quantile_distance;
                    ++counts[name];
                    rows.push_back(std::move(row));
                }
            }
        }
        for (const auto& name : spec.methods) {
            MetricsRow row;
            row.method = name;
            row.corruption = "mean";
            row.n_train = spec.n_train[ni];
            row.fold = "test";
            row.auc = sums[name].first / static_cast<double>(counts[name]);
            row.quantile_distance = sums[name].second / static_cast<double>(counts[name]);
            row.seed = spec.seed;
            if (progress) progress(row);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

/// 17 significant digits: every double round-trips.
inline std::string format_real(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_metrics_header(std::ostream& out)
{
    out << "method\tcorruption\tn_train\tfold\tauc\tquantile_distance\tlambda\tgamma\tseed\n";
}

inline void write_metrics_row(std::ostream& out, const MetricsRow& r)
{
    out << r.method << '\t' << r.corruption << '\t' << r.n_train << '\t' << r.fold << '\t' << format_real(r.auc) << '\t'
        << format_real(r.quantile_distance) << '\t' << format_real(r.lambda) << '\t' << format_real(r.gamma) << '\t'
        << r.seed << '\n';
}

inline void write_metrics_tsv(std::ostream& out, std::span<const MetricsRow> rows)
{
    write_metrics_header(out);
    for (const auto& r : rows) write_metrics_row(out, r);
}

} // namespace suquan
