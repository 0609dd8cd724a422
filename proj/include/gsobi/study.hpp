#pragma once

// Monte-Carlo study runner: simulate sources, mix, estimate, score with the
// minimum distance index and optionally test and order the estimated
// components. Each replicate draws from its own derived seed, so results do
// not depend on the number of worker threads.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gsobi/diagnostics.hpp"
#include "gsobi/error.hpp"
#include "gsobi/estimators.hpp"
#include "gsobi/io.hpp"
#include "gsobi/metrics.hpp"
#include "gsobi/sim.hpp"

namespace gsobi {

enum class BuiltinModel { I = 1, II = 2, III = 3, IV = 4 };

inline std::string to_string(BuiltinModel m) {
    switch (m) {
        case BuiltinModel::I:
            return "i";
        case BuiltinModel::II:
            return "ii";
        case BuiltinModel::III:
            return "iii";
        case BuiltinModel::IV:
            return "iv";
    }
    return "unknown";
}

inline BuiltinModel parse_model(std::string_view name) {
    if (name == "i") {
        return BuiltinModel::I;
    }
    if (name == "ii") {
        return BuiltinModel::II;
    }
    if (name == "iii") {
        return BuiltinModel::III;
    }
    if (name == "iv") {
        return BuiltinModel::IV;
    }
    throw ValidationError("unknown model '" + std::string(name) + "' (expected i, ii, iii or iv)");
}

struct BuiltinSourceRow {
    double alpha, beta, omega, phi, theta;
};

inline constexpr BuiltinSourceRow kBuiltinSources[3] = {
    {0.15, 0.7, 0.15, 0.5, -0.1},
    {0.1, 0.8, 0.1, 0.2, 0.8},
    {0.05, 0.9, 0.05, 0.1, 0.1},
};

/// Source components of the built-in models: (i) ARMA(1,1)-GARCH(1,1),
/// (ii) pure ARMA(1,1), (iii) pure GARCH(1,1), (iv) two ARMA and two GARCH.
inline std::vector<SourceComponent> model_components(BuiltinModel model) {
    auto arma = [](const BuiltinSourceRow& r) { return ArmaParams{{r.phi}, {r.theta}}; };
    auto garch = [](const BuiltinSourceRow& r) { return GarchParams{r.alpha, r.beta, r.omega}; };
    std::vector<SourceComponent> out;
    switch (model) {
        case BuiltinModel::I:
            for (const auto& r : kBuiltinSources) {
                out.push_back({arma(r), garch(r)});
            }
            break;
        case BuiltinModel::II:
            for (const auto& r : kBuiltinSources) {
                out.push_back({arma(r), std::nullopt});
            }
            break;
        case BuiltinModel::III:
            for (const auto& r : kBuiltinSources) {
                out.push_back({std::nullopt, garch(r)});
            }
            break;
        case BuiltinModel::IV:
            out.push_back({arma(kBuiltinSources[0]), std::nullopt});
            out.push_back({arma(kBuiltinSources[1]), std::nullopt});
            out.push_back({std::nullopt, garch(kBuiltinSources[0])});
            out.push_back({std::nullopt, garch(kBuiltinSources[1])});
            break;
    }
    return out;
}

/// Population value of the volatility ordering criterion for the innovations
/// of a source: sum over lags of (E[z_t^2 z_{t+tau}^2] / E[z^2]^2 - 1)^2. Zero
/// for Gaussian innovations.
inline double population_volatility_criterion(const SourceComponent& c, std::span<const Eigen::Index> lags) {
    if (!c.garch) {
        return 0.0;
    }
    const double m2 = c.garch->unconditional_variance();
    double total = 0.0;
    for (Eigen::Index tau : lags) {
        const double d = garch_z_moment(*c.garch, ZMoment::Cross22, static_cast<int>(tau)) / (m2 * m2) - 1.0;
        total += d * d;
    }
    return total;
}

/// Source indices by descending population criterion, or nothing when two values coincide.
inline std::optional<std::vector<Eigen::Index>> expected_volatility_order(const std::vector<SourceComponent>& comps,
                                                                          std::span<const Eigen::Index> lags) {
    Eigen::VectorXd score(static_cast<Eigen::Index>(comps.size()));
    for (std::size_t j = 0; j < comps.size(); ++j) {
        score[static_cast<Eigen::Index>(j)] = population_volatility_criterion(comps[j], lags);
    }
    for (Eigen::Index a = 0; a < score.size(); ++a) {
        for (Eigen::Index b = a + 1; b < score.size(); ++b) {
            if (std::abs(score[a] - score[b]) <= 1e-12 * std::max(1.0, std::abs(score[a]))) {
                return std::nullopt;
            }
        }
    }
    return descending_order(score);
}

struct MethodConfig {
    Method method = Method::GSobi;
    LagSets lags{{1, 2, 3}, {1, 2, 3}, 0.9};  ///< b is used by gSOBI only; SOBI/AMUSE use `linear`, vSOBI `quadratic`
    Eigen::Index m = 5;  ///< PVC
    bool diagnostics = false;
    std::string label;

    [[nodiscard]] std::string display_name() const {
        if (!label.empty()) {
            return label;
        }
        std::string name(to_string(method));
        if (method == Method::GSobi) {
            std::ostringstream b;
            b << lags.b;
            name += "(b=" + b.str() + ")";
        }
        return name;
    }
};

struct DiagnosticsConfig {
    std::vector<Eigen::Index> lags{1, 2, 3};  ///< lag set of the L and Q tests
    double level = 0.05;
    int k_max = kDefaultVarianceTruncation;
};

struct StudyConfig {
    std::optional<BuiltinModel> model = BuiltinModel::III;
    std::vector<SourceComponent> custom;  ///< used when model is empty
    std::vector<Eigen::Index> sample_sizes{400, 1600, 6400};
    int replicates = 200;
    std::vector<MethodConfig> methods{MethodConfig{Method::GSobi, {{1, 2, 3}, {1, 2, 3}, 0.9}, 5, true, {}}};
    std::uint64_t seed = 1;
    Eigen::Index burn_in = kDefaultBurnIn;
    std::optional<Eigen::MatrixXd> mixing;  ///< identity when empty
    DiagnosticsConfig diagnostics;
    int threads = 0;  ///< 0: GSOBI_THREADS or hardware concurrency

    [[nodiscard]] std::vector<SourceComponent> components() const {
        return model ? model_components(*model) : custom;
    }

    [[nodiscard]] std::string model_name() const { return model ? to_string(*model) : "custom"; }

    void validate() const {
        const auto comps = components();
        if (comps.empty()) {
            throw ValidationError("study needs a built-in model or custom components");
        }
        SourceSpec{comps, 100, burn_in, seed}.validate();
        if (model == BuiltinModel::IV && comps.size() != 4) {
            throw ValidationError("model (iv) has four components");
        }
        if (replicates < 1) {
            throw ValidationError("replicates must be at least 1");
        }
        if (sample_sizes.empty()) {
            throw ValidationError("at least one sample size is required");
        }
        for (Eigen::Index n : sample_sizes) {
            if (n < 100) {
                throw ValidationError("sample sizes must be at least 100");
            }
        }
        if (methods.empty()) {
            throw ValidationError("at least one method is required");
        }
        for (const auto& mc : methods) {
            if (mc.m < 1) {
                throw ValidationError("PVC lag count m must be positive");
            }
            const Eigen::Index n_min = *std::min_element(sample_sizes.begin(), sample_sizes.end());
            switch (mc.method) {
                case Method::GSobi:
                    mc.lags.validate(n_min);
                    break;
                case Method::Sobi:
                case Method::Amuse:
                    LagSets{mc.lags.linear, {}, 1.0}.validate(n_min);
                    break;
                case Method::VSobi:
                    LagSets{{}, mc.lags.quadratic, 0.0}.validate(n_min);
                    break;
                case Method::Pvc:
                    if (mc.m >= n_min) {
                        throw LagTooLargeError("PVC lag count m must be smaller than every sample size");
                    }
                    break;
            }
        }
        if (mixing) {
            const auto p = static_cast<Eigen::Index>(comps.size());
            if (mixing->rows() != p || mixing->cols() != p) {
                throw ValidationError("mixing matrix must be " + std::to_string(p) + " x " + std::to_string(p));
            }
        }
        if (comps.size() < 2) {
            throw ValidationError("the minimum distance index needs at least two components");
        }
        detail::check_lags(diagnostics.lags);
        if (!(diagnostics.level > 0.0 && diagnostics.level < 1.0)) {
            throw ValidationError("test level must lie in (0, 1)");
        }
    }
};

struct ReplicateRecord {
    bool ok = false;
    std::string error;
    bool converged = true;
    double mdi = 0.0;
    double scaled_mdi = 0.0;
    bool diagnosed = false;
    std::vector<char> l_modified_reject;  ///< by true source index
    std::vector<char> l_classical_reject;
    std::vector<char> q_reject;
    std::optional<bool> ordering_correct;
};

struct CellResult {
    Eigen::Index n = 0;
    std::string method;
    int replicates = 0;
    int failures = 0;
    int not_converged = 0;
    double mean_scaled_mdi = 0.0;
    double mean_mdi = 0.0;
    int diagnosed = 0;
    int diagnostic_failures = 0;
    std::vector<double> l_modified_rate;  ///< by true source index
    std::vector<double> l_classical_rate;
    std::vector<double> q_rate;
    std::optional<double> ordering_correct;  ///< proportion; empty when the expected order is not unique
    std::vector<std::string> errors;  ///< distinct failure messages
    std::vector<ReplicateRecord> records;
};

struct StudyResult {
    std::string model;
    Eigen::Index p = 0;
    std::optional<std::vector<Eigen::Index>> expected_order;
    std::vector<CellResult> cells;  ///< sample size major, method minor
};

inline UnmixingEstimate run_method(const MethodConfig& mc, const TimeSeriesMatrix& x, std::uint64_t seed) {
    switch (mc.method) {
        case Method::Amuse:
            return amuse(x, mc.lags.linear.empty() ? 1 : mc.lags.linear.front());
        case Method::Sobi:
            return sobi(x, mc.lags.linear);
        case Method::VSobi: {
            GsobiOptions opt;
            opt.seed = seed;
            return vsobi(x, mc.lags.quadratic, opt);
        }
        case Method::GSobi: {
            GsobiOptions opt;
            opt.seed = seed;
            return gsobi(x, mc.lags, opt);
        }
        case Method::Pvc:
            return pvc(x, mc.m);
    }
    throw ValidationError("unknown method");
}

namespace detail {

inline int study_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("GSOBI_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) {
            return v;
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

template <typename F>
void parallel_for(int count, int threads, F&& body) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                body(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

inline void diagnose_replicate(ReplicateRecord& rec, const TimeSeriesMatrix& estimated,
                               const std::vector<Eigen::Index>& source_of, const DiagnosticsConfig& cfg,
                               const std::optional<std::vector<Eigen::Index>>& expected) {
    const auto p = static_cast<std::size_t>(estimated.p());
    rec.l_modified_reject.assign(p, 0);
    rec.l_classical_reject.assign(p, 0);
    rec.q_reject.assign(p, 0);
    OrderingOptions opt;
    opt.linear_lags = cfg.lags;
    opt.volatility_lags = cfg.lags;
    opt.level = cfg.level;
    opt.k_max = cfg.k_max;
    const VolatilityOrdering ordering = order_by_volatility(estimated, opt);
    for (std::size_t i = 0; i < p; ++i) {
        const ComponentReport& rep = ordering.reports[i];
        const auto j = static_cast<std::size_t>(source_of[i]);
        if (!rep.linear || !rep.volatility) {
            throw NumericalError("component " + std::to_string(i + 1) + ": " + rep.error.value_or("test failed"));
        }
        rec.l_modified_reject[j] = rep.linear->rejects(cfg.level);
        rec.l_classical_reject[j] =
            ljung_box_classical(estimated.column(static_cast<Eigen::Index>(i)), cfg.lags).rejects(cfg.level);
        rec.q_reject[j] = rep.volatility->rejects(cfg.level);
    }
    if (expected) {
        bool correct = true;
        for (std::size_t k = 0; k < p; ++k) {
            correct = correct && source_of[static_cast<std::size_t>(ordering.order[k])] == (*expected)[k];
        }
        rec.ordering_correct = correct;
    }
    rec.diagnosed = true;
}

inline CellResult aggregate(Eigen::Index n, const std::string& method, Eigen::Index p,
                            std::vector<ReplicateRecord> records, bool keep_records) {
    CellResult cell;
    cell.n = n;
    cell.method = method;
    cell.replicates = static_cast<int>(records.size());
    const auto ps = static_cast<std::size_t>(p);
    cell.l_modified_rate.assign(ps, 0.0);
    cell.l_classical_rate.assign(ps, 0.0);
    cell.q_rate.assign(ps, 0.0);
    int ok = 0;
    int ordered = 0;
    int ordered_correct = 0;
    for (const auto& r : records) {
        if (!r.ok) {
            ++cell.failures;
            if (std::find(cell.errors.begin(), cell.errors.end(), r.error) == cell.errors.end()) {
                cell.errors.push_back(r.error);
            }
            continue;
        }
        ++ok;
        if (!r.error.empty()) {
            ++cell.diagnostic_failures;
            if (std::find(cell.errors.begin(), cell.errors.end(), r.error) == cell.errors.end()) {
                cell.errors.push_back(r.error);
            }
        }
        cell.not_converged += r.converged ? 0 : 1;
        cell.mean_scaled_mdi += r.scaled_mdi;
        cell.mean_mdi += r.mdi;
        if (r.diagnosed) {
            ++cell.diagnosed;
            for (std::size_t j = 0; j < ps; ++j) {
                cell.l_modified_rate[j] += r.l_modified_reject[j];
                cell.l_classical_rate[j] += r.l_classical_reject[j];
                cell.q_rate[j] += r.q_reject[j];
            }
            if (r.ordering_correct) {
                ++ordered;
                ordered_correct += *r.ordering_correct ? 1 : 0;
            }
        }
    }
    if (ok > 0) {
        cell.mean_scaled_mdi /= ok;
        cell.mean_mdi /= ok;
    }
    if (cell.diagnosed > 0) {
        for (std::size_t j = 0; j < ps; ++j) {
            cell.l_modified_rate[j] /= cell.diagnosed;
            cell.l_classical_rate[j] /= cell.diagnosed;
            cell.q_rate[j] /= cell.diagnosed;
        }
    }
    if (ordered > 0) {
        cell.ordering_correct = static_cast<double>(ordered_correct) / ordered;
    }
    if (keep_records) {
        cell.records = std::move(records);
    }
    return cell;
}

}  // namespace detail

/// Runs every (sample size, method) cell. Replicate r at sample size n uses
/// sources simulated from derive_seed(seed, model, n, r), shared by all methods.
inline StudyResult run_study(const StudyConfig& config, bool keep_records = false) {
    config.validate();
    const std::vector<SourceComponent> comps = config.components();
    const auto p = static_cast<Eigen::Index>(comps.size());
    const Eigen::MatrixXd omega = config.mixing.value_or(Eigen::MatrixXd::Identity(p, p));
    const int model_id = config.model ? static_cast<int>(*config.model) : 0;

    StudyResult result;
    result.model = config.model_name();
    result.p = p;
    result.expected_order = expected_volatility_order(comps, config.diagnostics.lags);
    const int threads = detail::study_threads(config.threads);
    const std::size_t n_methods = config.methods.size();

    for (Eigen::Index n : config.sample_sizes) {
        // records[method][replicate]
        std::vector<std::vector<ReplicateRecord>> records(
            n_methods, std::vector<ReplicateRecord>(static_cast<std::size_t>(config.replicates)));
        detail::parallel_for(config.replicates, threads, [&](int rep) {
            const std::uint64_t rep_seed = derive_seed(config.seed, model_id, n, rep);
            std::optional<TimeSeriesMatrix> x;
            std::string sim_error;
            try {
                const TimeSeriesMatrix s = armagarch_simulate(SourceSpec{comps, n, config.burn_in, rep_seed});
                x = mix(s, omega);
            } catch (const Error& e) {
                sim_error = std::string("simulation: ") + e.what();
            }
            for (std::size_t k = 0; k < n_methods; ++k) {
                ReplicateRecord& rec = records[k][static_cast<std::size_t>(rep)];
                if (!x) {
                    rec.error = sim_error;
                    continue;
                }
                const MethodConfig& mc = config.methods[k];
                Eigen::MatrixXd est_gain;
                std::optional<TimeSeriesMatrix> est_sources_storage;
                try {
                    const UnmixingEstimate est = run_method(mc, *x, derive_seed(rep_seed, k));
                    const Eigen::MatrixXd gain = est.gamma * omega;
                    est_gain = gain;
                    if (mc.diagnostics) {
                        est_sources_storage = est.apply(*x);
                    }
                    rec.converged = est.converged;
                    rec.mdi = mdi(gain);
                    rec.scaled_mdi = static_cast<double>(n) * static_cast<double>(p - 1) * rec.mdi * rec.mdi;
                    rec.ok = true;
                } catch (const Error& e) {
                    rec.ok = false;
                    rec.error = e.what();
                    continue;
                }
                if (mc.diagnostics) {
                    const TimeSeriesMatrix& est_sources = *est_sources_storage;
                    try {
                        const std::vector<Eigen::Index> source_of = match_components(est_gain);
                        detail::diagnose_replicate(rec, est_sources, source_of, config.diagnostics,
                                                   result.expected_order);
                    } catch (const Error& e) {
                        rec.diagnosed = false;
                        rec.error = std::string("diagnostics: ") + e.what();
                    }
                }
            }
        });
        for (std::size_t k = 0; k < n_methods; ++k) {
            result.cells.push_back(detail::aggregate(n, config.methods[k].display_name(), p, std::move(records[k]),
                                                     keep_records));
        }
    }
    return result;
}

}  // namespace gsobi
