#pragma once

// Command-line front end. Commands write results to the given streams and
// return the process exit code: 0 success, 1 usage error, 2 data error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gsobi/gsobi.hpp"

namespace gsobi::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// ---------------------------------------------------------------- parsing

/// "1,2,3", "1:12" or combinations such as "1:3,6".
inline std::vector<Eigen::Index> parse_lags(const std::string& text) {
    std::vector<Eigen::Index> out;
    auto parse_int = [&](std::string_view s) {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
            throw ValidationError("invalid lag '" + std::string(s) + "' in '" + text + "'");
        }
        return static_cast<Eigen::Index>(v);
    };
    for (std::string_view part : detail::split_commas(text)) {
        const auto colon = part.find(':');
        if (colon == std::string_view::npos) {
            out.push_back(parse_int(part));
            continue;
        }
        const Eigen::Index lo = parse_int(part.substr(0, colon));
        const Eigen::Index hi = parse_int(part.substr(colon + 1));
        if (hi < lo) {
            throw ValidationError("empty lag range '" + std::string(part) + "'");
        }
        for (Eigen::Index k = lo; k <= hi; ++k) {
            out.push_back(k);
        }
    }
    return out;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j.front().is_array()) {
        throw ValidationError(what + " must be a nonempty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError(what + " has ragged rows");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            const json& cell = row[static_cast<std::size_t>(k)];
            if (!cell.is_number()) {
                throw ValidationError(what + " has a non-numeric entry at row " + std::to_string(i + 1) + ", column " +
                                      std::to_string(k + 1));
            }
            m(i, k) = cell.get<double>();
        }
    }
    return m;
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ValidationError(where + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ValidationError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("key '") + key + "' has the wrong type");
    }
}

inline std::vector<Eigen::Index> lags_from_json(const json& j, const char* key, std::vector<Eigen::Index> fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const json& v = j.at(key);
    if (v.is_string()) {
        return parse_lags(v.get<std::string>());
    }
    std::vector<Eigen::Index> out;
    for (const json& e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 1) {
            throw ValidationError(std::string("key '") + key + "' must list positive integers");
        }
        out.push_back(e.get<Eigen::Index>());
    }
    return out;
}

inline SourceComponent component_from_json(const json& j) {
    check_keys(j, {"arma", "garch"}, "component");
    SourceComponent c;
    if (j.contains("arma")) {
        const json& a = j.at("arma");
        check_keys(a, {"phi", "theta"}, "arma");
        c.arma = ArmaParams{get_or<std::vector<double>>(a, "phi", {}), get_or<std::vector<double>>(a, "theta", {})};
    }
    if (j.contains("garch")) {
        const json& g = j.at("garch");
        check_keys(g, {"alpha", "beta", "omega"}, "garch");
        const double alpha = get_or<double>(g, "alpha", 0.0);
        const double beta = get_or<double>(g, "beta", 0.0);
        c.garch = GarchParams{alpha, beta, get_or<double>(g, "omega", 1.0 - alpha - beta)};
    }
    return c;
}

inline json component_to_json(const SourceComponent& c) {
    json j = json::object();
    if (c.arma) {
        j["arma"] = {{"phi", c.arma->phi}, {"theta", c.arma->theta}};
    }
    if (c.garch) {
        j["garch"] = {{"alpha", c.garch->alpha}, {"beta", c.garch->beta}, {"omega", c.garch->omega}};
    }
    return j;
}

/// Simulation spec document: {"model": "iii"} or {"components": [...]}, plus optional
/// "n", "seed", "burn_in" and "mixing".
struct SimulationDocument {
    std::vector<SourceComponent> components;
    std::optional<Eigen::Index> n;
    std::optional<std::uint64_t> seed;
    Eigen::Index burn_in = kDefaultBurnIn;
    std::optional<Eigen::MatrixXd> mixing;
};

inline SimulationDocument simulation_from_json(const json& j) {
    check_keys(j, {"model", "components", "n", "seed", "burn_in", "mixing"}, "simulation spec");
    SimulationDocument doc;
    if (j.contains("model") == j.contains("components")) {
        throw ValidationError("simulation spec needs exactly one of 'model' and 'components'");
    }
    if (j.contains("model")) {
        doc.components = model_components(parse_model(get_or<std::string>(j, "model", "")));
    } else {
        for (const json& c : j.at("components")) {
            doc.components.push_back(component_from_json(c));
        }
    }
    if (j.contains("n")) {
        doc.n = get_or<Eigen::Index>(j, "n", 0);
    }
    if (j.contains("seed")) {
        doc.seed = get_or<std::uint64_t>(j, "seed", 0);
    }
    doc.burn_in = get_or<Eigen::Index>(j, "burn_in", kDefaultBurnIn);
    if (j.contains("mixing")) {
        doc.mixing = matrix_from_json(j.at("mixing"), "mixing");
    }
    return doc;
}

inline MethodConfig method_from_json(const json& j) {
    check_keys(j, {"method", "b", "lags1", "lags2", "m", "diagnostics", "label"}, "method");
    MethodConfig mc;
    mc.method = parse_method(get_or<std::string>(j, "method", "gsobi"));
    mc.lags.linear = lags_from_json(j, "lags1", {1, 2, 3});
    mc.lags.quadratic = lags_from_json(j, "lags2", {1, 2, 3});
    mc.lags.b = get_or<double>(j, "b", mc.method == Method::Sobi || mc.method == Method::Amuse ? 1.0
                                       : mc.method == Method::VSobi                           ? 0.0
                                                                                              : 0.9);
    mc.m = get_or<Eigen::Index>(j, "m", 5);
    mc.diagnostics = get_or<bool>(j, "diagnostics", false);
    mc.label = get_or<std::string>(j, "label", "");
    return mc;
}

inline json method_to_json(const MethodConfig& mc) {
    return {{"method", std::string(to_string(mc.method))},
            {"b", mc.lags.b},
            {"lags1", mc.lags.linear},
            {"lags2", mc.lags.quadratic},
            {"m", mc.m},
            {"diagnostics", mc.diagnostics},
            {"label", mc.display_name()}};
}

inline StudyConfig study_from_json(const json& j) {
    check_keys(j,
               {"model", "components", "sample_sizes", "replicates", "methods", "seed", "burn_in", "mixing",
                "diagnostics", "threads", "output"},
               "study config");
    StudyConfig cfg;
    if (j.contains("model") && j.contains("components")) {
        throw ValidationError("study config takes 'model' or 'components', not both");
    }
    if (j.contains("components")) {
        cfg.model.reset();
        for (const json& c : j.at("components")) {
            cfg.custom.push_back(component_from_json(c));
        }
    } else {
        cfg.model = parse_model(get_or<std::string>(j, "model", "iii"));
    }
    cfg.sample_sizes = lags_from_json(j, "sample_sizes", cfg.sample_sizes);
    cfg.replicates = get_or<int>(j, "replicates", cfg.replicates);
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const json& m : j.at("methods")) {
            cfg.methods.push_back(method_from_json(m));
        }
    }
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.burn_in = get_or<Eigen::Index>(j, "burn_in", cfg.burn_in);
    if (j.contains("mixing")) {
        cfg.mixing = matrix_from_json(j.at("mixing"), "mixing");
    }
    if (j.contains("diagnostics")) {
        const json& d = j.at("diagnostics");
        check_keys(d, {"lags", "level", "k_max"}, "diagnostics");
        cfg.diagnostics.lags = lags_from_json(d, "lags", cfg.diagnostics.lags);
        cfg.diagnostics.level = get_or<double>(d, "level", cfg.diagnostics.level);
        cfg.diagnostics.k_max = get_or<int>(d, "k_max", cfg.diagnostics.k_max);
    }
    cfg.threads = get_or<int>(j, "threads", 0);
    return cfg;
}

/// Configuration with every default made explicit (thread count omitted: it does not affect results).
inline json study_to_json(const StudyConfig& cfg) {
    json j;
    if (cfg.model) {
        j["model"] = to_string(*cfg.model);
    } else {
        j["components"] = json::array();
        for (const auto& c : cfg.custom) {
            j["components"].push_back(component_to_json(c));
        }
    }
    j["sample_sizes"] = cfg.sample_sizes;
    j["replicates"] = cfg.replicates;
    j["methods"] = json::array();
    for (const auto& m : cfg.methods) {
        j["methods"].push_back(method_to_json(m));
    }
    j["seed"] = cfg.seed;
    j["burn_in"] = cfg.burn_in;
    const auto p = static_cast<Eigen::Index>(cfg.components().size());
    j["mixing"] = matrix_to_json(cfg.mixing.value_or(Eigen::MatrixXd::Identity(p, p)));
    j["diagnostics"] = {{"lags", cfg.diagnostics.lags}, {"level", cfg.diagnostics.level}, {"k_max", cfg.diagnostics.k_max}};
    return j;
}

inline json test_to_json(const TestResult& t) {
    json j = {{"statistic", t.statistic}, {"df", t.df}, {"p_value", t.p_value}, {"per_lag", t.per_lag},
              {"variant", to_string(t.variant)}};
    if (!t.variance_fallback_lags.empty()) {
        j["variance_fallback_lags"] = t.variance_fallback_lags;
    }
    return j;
}

inline json cell_to_json(const CellResult& c) {
    json j = {{"n", c.n},
              {"method", c.method},
              {"replicates", c.replicates},
              {"failures", c.failures},
              {"not_converged", c.not_converged},
              {"mean_scaled_mdi", c.mean_scaled_mdi},
              {"mean_mdi", c.mean_mdi},
              {"diagnosed", c.diagnosed},
              {"diagnostic_failures", c.diagnostic_failures},
              {"errors", c.errors}};
    if (c.diagnosed > 0) {
        j["l_modified_rate"] = c.l_modified_rate;
        j["l_classical_rate"] = c.l_classical_rate;
        j["q_rate"] = c.q_rate;
    }
    j["ordering_correct"] = c.ordering_correct ? json(*c.ordering_correct) : json(nullptr);
    if (!c.records.empty()) {
        json recs = json::array();
        for (const auto& r : c.records) {
            json rj = {{"ok", r.ok}, {"converged", r.converged}, {"mdi", r.mdi}, {"scaled_mdi", r.scaled_mdi}};
            if (!r.error.empty()) {
                rj["error"] = r.error;
            }
            if (r.diagnosed) {
                auto bools = [](const std::vector<char>& v) { return std::vector<bool>(v.begin(), v.end()); };
                rj["l_modified_reject"] = bools(r.l_modified_reject);
                rj["l_classical_reject"] = bools(r.l_classical_reject);
                rj["q_reject"] = bools(r.q_reject);
            }
            if (r.ordering_correct) {
                rj["ordering_correct"] = *r.ordering_correct;
            }
            recs.push_back(std::move(rj));
        }
        j["records"] = std::move(recs);
    }
    return j;
}

// --------------------------------------------------------------- helpers

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "' for reading");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
    if (path.empty() || path == "-") {
        fallback << text;
        return;
    }
    std::ofstream out(path);
    if (!out || !(out << text)) {
        throw DataError("cannot write '" + path + "'");
    }
}

inline void write_csv_to(const std::string& path, const std::vector<std::string>& header, const Eigen::MatrixXd& m,
                         std::ostream& fallback) {
    if (path.empty() || path == "-") {
        write_csv(fallback, header, m);
    } else {
        write_csv_file(path, header, m);
    }
}

inline Eigen::MatrixXd read_square_csv(const std::string& path, const std::string& what) {
    const Table t = read_csv_file(path);
    if (t.values.rows() != t.values.cols()) {
        throw DataError(what + " in '" + path + "' must be square, got " + std::to_string(t.values.rows()) + " x " +
                        std::to_string(t.values.cols()));
    }
    return t.values;
}

// -------------------------------------------------------------- commands

struct SimulateArgs {
    std::string spec;
    std::string model;
    Eigen::Index n = 0;
    std::optional<std::uint64_t> seed;
    std::optional<Eigen::Index> burn_in;
    std::string mix;
    std::string out;
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    SimulationDocument doc;
    if (!a.spec.empty() == !a.model.empty()) {
        throw CLI::ValidationError("simulate", "give exactly one of --spec and --model");
    }
    if (!a.spec.empty()) {
        doc = simulation_from_json(read_json_file(a.spec));
    } else {
        doc.components = model_components(parse_model(a.model));
    }
    SourceSpec spec{doc.components, a.n > 0 ? a.n : doc.n.value_or(0), a.burn_in.value_or(doc.burn_in),
                    a.seed.value_or(doc.seed.value_or(0))};
    if (spec.n == 0) {
        throw CLI::ValidationError("simulate", "sample size missing: pass --n or set 'n' in the spec");
    }
    const TimeSeriesMatrix s = armagarch_simulate(spec);
    const auto p = s.p();
    std::optional<Eigen::MatrixXd> omega = doc.mixing;
    if (!a.mix.empty()) {
        omega = a.mix == "identity" ? Eigen::MatrixXd::Identity(p, p) : read_square_csv(a.mix, "mixing matrix");
    }
    if (omega) {
        write_csv_to(a.out, numbered_header("x", p), mix(s, *omega).data(), out);
    } else {
        write_csv_to(a.out, numbered_header("s", p), s.data(), out);
    }
    return kOk;
}

struct EstimateArgs {
    std::string input;
    std::string method = "gsobi";
    std::optional<double> b;
    std::string lags1 = "1:12";
    std::string lags2 = "1,2,3";
    Eigen::Index m = 5;
    std::uint64_t seed = 0;
    double tol = 1e-6;
    int max_iter = 1000;
    std::string out_components;
    std::string out_unmixing;
};

inline json estimate_to_json(const UnmixingEstimate& est, Eigen::Index n) {
    json j = {{"method", std::string(to_string(est.method))},
              {"gamma", matrix_to_json(est.gamma)},
              {"mean", vector_to_json(est.mean)},
              {"iterations", est.iterations},
              {"restarts", est.restarts},
              {"converged", est.converged},
              {"criterion", finite_or_null(est.criterion)},
              {"equation_residual", finite_or_null(est.equation_residual)},
              {"identifiability_gap", finite_or_null(est.identifiability_gap)},
              {"near_unidentifiable", est.near_unidentifiable},
              {"n", n},
              {"p", est.gamma.rows()}};
    j["eigenvalues"] = est.eigenvalues ? vector_to_json(*est.eigenvalues) : json(nullptr);
    return j;
}

inline int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
    const Method method = parse_method(a.method);
    const Table table = read_csv_file(a.input);
    const TimeSeriesMatrix x(table.values);
    GsobiOptions opt;
    opt.seed = a.seed;
    opt.tol = a.tol;
    opt.max_iter = a.max_iter;
    LagSets lags{parse_lags(a.lags1), parse_lags(a.lags2), a.b.value_or(0.9)};
    UnmixingEstimate est;
    json params = {{"seed", a.seed}};
    switch (method) {
        case Method::Amuse:
            est = amuse(x, lags.linear.front());
            params["lag"] = lags.linear.front();
            break;
        case Method::Sobi:
            est = sobi(x, lags.linear);
            params["lags1"] = lags.linear;
            break;
        case Method::VSobi:
            est = vsobi(x, lags.quadratic, opt);
            params["lags2"] = lags.quadratic;
            params["tol"] = a.tol;
            break;
        case Method::GSobi:
            est = gsobi::gsobi(x, lags, opt);
            params["b"] = lags.b;
            params["lags1"] = lags.linear;
            params["lags2"] = lags.quadratic;
            params["tol"] = a.tol;
            break;
        case Method::Pvc:
            est = pvc(x, a.m);
            params["m"] = a.m;
            break;
    }
    json doc = estimate_to_json(est, x.n());
    doc["parameters"] = params;
    doc["columns"] = table.header;
    if (!a.out_components.empty()) {
        write_csv_to(a.out_components, numbered_header("c", x.p()), est.apply(x).data(), out);
    }
    write_text(a.out_unmixing, doc.dump(2) + "\n", out);
    return kOk;
}

struct DiagnoseArgs {
    std::string input;
    std::string lags = "1:5";
    std::string qlags;
    double level = 0.05;
    std::string order;
    std::string out_components;
    std::string out;
};

inline int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
    const Table table = read_csv_file(a.input);
    const TimeSeriesMatrix x(table.values);
    OrderingOptions opt;
    opt.linear_lags = parse_lags(a.lags);
    opt.volatility_lags = a.qlags.empty() ? opt.linear_lags : parse_lags(a.qlags);
    opt.level = a.level;
    if (!(a.level > 0.0 && a.level < 1.0)) {
        throw CLI::ValidationError("--level", "must lie in (0, 1)");
    }
    const VolatilityOrdering ordering = order_by_volatility(x, opt);

    json comps = json::array();
    Eigen::MatrixXd volatility(x.n(), x.p());
    bool have_all_volatility = true;
    for (const ComponentReport& rep : ordering.reports) {
        json c = {{"index", rep.index + 1}, {"name", table.header[static_cast<std::size_t>(rep.index)]}};
        c["L"] = rep.linear ? test_to_json(*rep.linear) : json(nullptr);
        c["Q"] = rep.volatility ? test_to_json(*rep.volatility) : json(nullptr);
        c["criterion"] = rep.volatility ? json(rep.criterion) : json(nullptr);
        if (rep.arma) {
            c["arma"] = {{"p", rep.arma->p},
                         {"q", rep.arma->q},
                         {"phi", rep.arma->params.phi},
                         {"theta", rep.arma->params.theta},
                         {"mean", rep.arma->mean},
                         {"sigma2", rep.arma->sigma2},
                         {"aic", rep.arma->aic},
                         {"converged", rep.arma->converged}};
        } else {
            c["arma"] = nullptr;
        }
        std::vector<std::string> errors;
        if (rep.error) {
            errors.push_back(*rep.error);
        }
        std::vector<double> resid = rep.residuals;
        const double mean = std::accumulate(resid.begin(), resid.end(), 0.0) / static_cast<double>(resid.size());
        for (double& v : resid) {
            v -= mean;
        }
        try {
            const GarchFit g = garch11_fit(resid);
            c["garch"] = {{"omega", g.params.omega}, {"alpha", g.params.alpha}, {"beta", g.params.beta},
                          {"loglik", g.loglik},      {"converged", g.converged}, {"boundary", g.boundary}};
            volatility.col(rep.index) = Eigen::Map<const Eigen::VectorXd>(g.volatility.data(), x.n());
        } catch (const Error& e) {
            c["garch"] = nullptr;
            errors.push_back(std::string("GARCH fit: ") + e.what());
            have_all_volatility = false;
        }
        c["errors"] = errors;
        comps.push_back(std::move(c));
    }
    std::vector<Eigen::Index> order1;
    std::vector<std::string> header;
    for (Eigen::Index j : ordering.order) {
        order1.push_back(j + 1);
        header.push_back(table.header[static_cast<std::size_t>(j)]);
    }
    const json report = {{"components", comps},
                         {"order", order1},
                         {"lags", opt.linear_lags},
                         {"q_lags", opt.volatility_lags},
                         {"level", opt.level},
                         {"n", x.n()}};
    if (!a.order.empty()) {
        if (!have_all_volatility) {
            throw NumericalError("volatility series unavailable: a GARCH(1,1) fit failed (see report)");
        }
        write_csv_file(a.order, header, permute_rows(volatility.transpose(), ordering.order).transpose());
    }
    if (!a.out_components.empty()) {
        write_csv_file(a.out_components, header, permute_rows(x.data().transpose(), ordering.order).transpose());
    }
    write_text(a.out, report.dump(2) + "\n", out);
    return kOk;
}

struct StudyArgs {
    std::string config;
    std::string out;
    std::string csv;
    int threads = 0;
    bool records = false;
};

inline std::string study_csv(const StudyResult& r) {
    std::ostringstream s;
    s << "model,n,method,replicates,failures,not_converged,mean_scaled_mdi,mean_mdi,diagnosed,ordering_correct";
    for (const char* name : {"l_modified", "l_classical", "q"}) {
        for (Eigen::Index j = 1; j <= r.p; ++j) {
            s << ',' << name << "_s" << j;
        }
    }
    s << '\n';
    for (const CellResult& c : r.cells) {
        s << r.model << ',' << c.n << ',' << c.method << ',' << c.replicates << ',' << c.failures << ','
          << c.not_converged << ',' << detail::format_double(c.mean_scaled_mdi) << ','
          << detail::format_double(c.mean_mdi) << ',' << c.diagnosed << ','
          << (c.ordering_correct ? detail::format_double(*c.ordering_correct) : "NA");
        for (const auto* rates : {&c.l_modified_rate, &c.l_classical_rate, &c.q_rate}) {
            for (double v : *rates) {
                s << ',' << (c.diagnosed ? detail::format_double(v) : "NA");
            }
        }
        s << '\n';
    }
    return s.str();
}

inline int cmd_study(const StudyArgs& a, std::ostream& out) {
    const json doc = read_json_file(a.config);
    StudyConfig cfg = study_from_json(doc);
    if (a.threads > 0) {
        cfg.threads = a.threads;
    }
    const StudyResult r = run_study(cfg, a.records);
    json results = json::array();
    for (const auto& c : r.cells) {
        results.push_back(cell_to_json(c));
    }
    const json report = {{"config", study_to_json(cfg)},
                         {"p", r.p},
                         {"expected_order", r.expected_order ? json(*r.expected_order) : json(nullptr)},
                         {"results", results}};
    std::string path = a.out;
    if (path.empty() && doc.contains("output")) {
        path = doc.at("output").get<std::string>();
    }
    write_text(path, report.dump(2) + "\n", out);
    if (!a.csv.empty()) {
        write_text(a.csv, study_csv(r), out);
    }
    return kOk;
}

struct MdiArgs {
    std::string gamma;
    std::string omega;
    std::string gain;
    Eigen::Index n = 0;
};

inline int cmd_mdi(const MdiArgs& a, std::ostream& out) {
    Eigen::MatrixXd g;
    if (!a.gain.empty()) {
        if (!a.gamma.empty() || !a.omega.empty()) {
            throw CLI::ValidationError("mdi", "--gain excludes --gamma/--omega");
        }
        g = read_square_csv(a.gain, "gain matrix");
    } else {
        if (a.gamma.empty()) {
            throw CLI::ValidationError("mdi", "give --gain or --gamma (with optional --omega)");
        }
        g = read_square_csv(a.gamma, "unmixing matrix");
        if (!a.omega.empty()) {
            const Eigen::MatrixXd omega = read_square_csv(a.omega, "mixing matrix");
            if (omega.rows() != g.cols()) {
                throw DataError("unmixing and mixing matrices have different sizes");
            }
            g = g * omega;
        }
    }
    json j = {{"mdi", mdi(g)}, {"p", g.rows()}};
    if (a.n > 0) {
        j["n"] = a.n;
        j["scaled_mdi"] = scaled_mdi(g, a.n);
    }
    out << j.dump(2) << "\n";
    return kOk;
}

// ------------------------------------------------------------------ main

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Blind source separation with linear and quadratic autocovariances"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "simulate ARMA-GARCH sources (optionally mixed) to CSV");
    simulate->add_option("--spec", sim.spec, "JSON spec: {\"model\": \"iii\"} or {\"components\": [...]}");
    simulate->add_option("--model", sim.model, "built-in model i, ii, iii or iv");
    simulate->add_option("--n", sim.n, "number of observations")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "random seed");
    simulate->add_option("--burn-in", sim.burn_in, "discarded warm-up draws")->check(CLI::NonNegativeNumber);
    simulate->add_option("--mix", sim.mix, "'identity' or CSV file with a square mixing matrix");
    simulate->add_option("--out", sim.out, "output CSV (default stdout)");

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "estimate an unmixing matrix");
    estimate->add_option("input", est.input, "input CSV")->required();
    estimate->add_option("--method", est.method, "amuse, sobi, vsobi, gsobi or pvc")
        ->check(CLI::IsMember({"amuse", "sobi", "vsobi", "gsobi", "pvc"}));
    estimate->add_option("--b", est.b, "weight of the linear part (gsobi)")->check(CLI::Range(0.0, 1.0));
    estimate->add_option("--lags1", est.lags1, "linear lags, e.g. 1:12 or 1,2,3");
    estimate->add_option("--lags2", est.lags2, "quadratic lags");
    estimate->add_option("--m", est.m, "number of lags (pvc)")->check(CLI::PositiveNumber);
    estimate->add_option("--seed", est.seed, "seed for random restarts");
    estimate->add_option("--tol", est.tol, "convergence tolerance")->check(CLI::PositiveNumber);
    estimate->add_option("--max-iter", est.max_iter, "iteration limit")->check(CLI::PositiveNumber);
    estimate->add_option("--out-components", est.out_components, "estimated components CSV");
    estimate->add_option("--out-unmixing", est.out_unmixing, "unmixing JSON (default stdout)");

    DiagnoseArgs diag;
    auto* diagnose = app.add_subcommand("diagnose", "test and order components by volatility clustering");
    diagnose->add_option("input", diag.input, "component CSV")->required();
    diagnose->add_option("--lags", diag.lags, "lags of the tests");
    diagnose->add_option("--qlags", diag.qlags, "lags of the volatility test (default: --lags)");
    diagnose->add_option("--level", diag.level, "significance level");
    diagnose->add_option("--order", diag.order, "write GARCH(1,1) volatility series, ordered, to this CSV");
    diagnose->add_option("--out-components", diag.out_components, "write the reordered components to this CSV");
    diagnose->add_option("--out", diag.out, "report JSON (default stdout)");

    StudyArgs st;
    auto* study = app.add_subcommand("study", "run a simulation study from a JSON config");
    study->add_option("config", st.config, "study config JSON")->required();
    study->add_option("--out", st.out, "result JSON (default: config 'output' or stdout)");
    study->add_option("--csv", st.csv, "aggregate CSV");
    study->add_option("--threads", st.threads, "worker threads (default GSOBI_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
    study->add_flag("--records", st.records, "include per-replicate records");

    MdiArgs md;
    auto* mdi_cmd = app.add_subcommand("mdi", "minimum distance index of an estimate");
    mdi_cmd->add_option("--gamma", md.gamma, "unmixing matrix CSV");
    mdi_cmd->add_option("--omega", md.omega, "mixing matrix CSV");
    mdi_cmd->add_option("--gain", md.gain, "gain matrix CSV");
    mdi_cmd->add_option("--n", md.n, "sample size for the scaled index")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return e.get_exit_code() == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate) {
            return cmd_simulate(sim, out);
        }
        if (*estimate) {
            return cmd_estimate(est, out);
        }
        if (*diagnose) {
            return cmd_diagnose(diag, out);
        }
        if (*study) {
            return cmd_study(st, out);
        }
        return cmd_mdi(md, out);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    } catch (const json::exception& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    }
}

}  // namespace gsobi::cli
