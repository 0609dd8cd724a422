#include <gtest/gtest.h>

#include "gsobi_cli.hpp"
#include "test_support.hpp"

using namespace gsobi;
using nlohmann::json;
using testing_support::slurp;
using testing_support::temp_dir;

namespace {

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "gsobi");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path) << text;
}

}  // namespace

TEST(CliLags, Parsing) {
    EXPECT_EQ(cli::parse_lags("1,2,3"), (std::vector<Eigen::Index>{1, 2, 3}));
    EXPECT_EQ(cli::parse_lags("1:4"), (std::vector<Eigen::Index>{1, 2, 3, 4}));
    EXPECT_EQ(cli::parse_lags("1:2, 6"), (std::vector<Eigen::Index>{1, 2, 6}));
    EXPECT_THROW(cli::parse_lags("0"), ValidationError);
    EXPECT_THROW(cli::parse_lags("3:1"), ValidationError);
    EXPECT_THROW(cli::parse_lags("a"), ValidationError);
    EXPECT_THROW(cli::parse_lags(""), ValidationError);
}

TEST(CliSimulate, DeterministicAndMixIdentity) {
    const auto dir = temp_dir("cli_sim");
    const auto a = run_cli({"simulate", "--model", "iii", "--n", "1000", "--seed", "42", "--out", (dir / "a.csv").string()});
    const auto b = run_cli({"simulate", "--model", "iii", "--n", "1000", "--seed", "42", "--out", (dir / "b.csv").string()});
    const auto m = run_cli({"simulate", "--model", "iii", "--n", "1000", "--seed", "42", "--mix", "identity", "--out",
                            (dir / "m.csv").string()});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0);
    ASSERT_EQ(m.code, 0);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    const Table ta = read_csv_file((dir / "a.csv").string());
    const Table tm = read_csv_file((dir / "m.csv").string());
    EXPECT_EQ(ta.header, (std::vector<std::string>{"s1", "s2", "s3"}));
    EXPECT_EQ(tm.header, (std::vector<std::string>{"x1", "x2", "x3"}));
    EXPECT_EQ(ta.values.rows(), 1000);
    EXPECT_EQ(ta.values, tm.values);
    // printed values round-trip exactly
    const TimeSeriesMatrix s = testing_support::simulate_model(BuiltinModel::III, 1000, 42);
    EXPECT_EQ(ta.values, s.data());
}

TEST(CliSimulate, SpecErrors) {
    const auto dir = temp_dir("cli_spec");
    write_file(dir / "bad.json", R"({"model": "iii", "colour": 1})");
    write_file(dir / "garch.json", R"({"components": [{"garch": {"alpha": 0.6, "beta": 0.6, "omega": 1}}]})");
    write_file(dir / "broken.json", "{");
    for (const char* f : {"bad.json", "garch.json", "broken.json"}) {
        const auto r = run_cli({"simulate", "--spec", (dir / f).string(), "--n", "100"});
        EXPECT_EQ(r.code, 2) << f;
        EXPECT_FALSE(r.err.empty());
    }
    EXPECT_EQ(run_cli({"simulate", "--model", "iii"}).code, 1);
    EXPECT_EQ(run_cli({"simulate", "--model", "iii", "--n", "-5"}).code, 1);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
    EXPECT_EQ(run_cli({}).code, 1);
}

TEST(CliEstimate, RoundTripFromComponentSpec) {
    const auto dir = temp_dir("cli_roundtrip");
    json spec = {{"components", json::array()}, {"n", 10000}, {"seed", 7}};
    const double rows[3][5] = {{0.15, 0.7, 0.15, 0.5, -0.1}, {0.1, 0.8, 0.1, 0.2, 0.8}, {0.05, 0.9, 0.05, 0.1, 0.1}};
    for (const auto& r : rows) {
        spec["components"].push_back({{"arma", {{"phi", {r[3]}}, {"theta", {r[4]}}}},
                                      {"garch", {{"alpha", r[0]}, {"beta", r[1]}, {"omega", r[2]}}}});
    }
    Eigen::MatrixXd omega(3, 3);
    omega << 1.0, 0.4, -0.3, 0.2, 1.0, 0.5, -0.6, 0.1, 1.0;
    spec["mixing"] = cli::matrix_to_json(omega);
    write_file(dir / "spec.json", spec.dump());
    ASSERT_EQ(run_cli({"simulate", "--spec", (dir / "spec.json").string(), "--out", (dir / "x.csv").string()}).code, 0);
    const auto r = run_cli({"estimate", (dir / "x.csv").string(), "--out-components", (dir / "c.csv").string(),
                            "--out-unmixing", (dir / "u.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json u = json::parse(slurp(dir / "u.json"));
    const Eigen::MatrixXd gamma = cli::matrix_from_json(u.at("gamma"), "gamma");
    EXPECT_LT(mdi(gamma * omega), 0.1);
    const Table c = read_csv_file((dir / "c.csv").string());
    EXPECT_EQ(c.header, (std::vector<std::string>{"c1", "c2", "c3"}));
    const Eigen::MatrixXd centered = c.values.rowwise() - c.values.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(c.values.rows());
    EXPECT_LE((cov - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-6);

    write_file(dir / "omega.csv", "a,b,c\n1,0.4,-0.3\n0.2,1,0.5\n-0.6,0.1,1\n");
    write_file(dir / "gamma.csv", "a,b,c\n" + [&] {
        std::ostringstream s;
        for (Eigen::Index i = 0; i < 3; ++i) {
            s << detail::format_double(gamma(i, 0)) << ',' << detail::format_double(gamma(i, 1)) << ','
              << detail::format_double(gamma(i, 2)) << '\n';
        }
        return s.str();
    }());
    const auto m = run_cli({"mdi", "--gamma", (dir / "gamma.csv").string(), "--omega", (dir / "omega.csv").string(),
                            "--n", "10000"});
    ASSERT_EQ(m.code, 0) << m.err;
    const json mj = json::parse(m.out);
    EXPECT_NEAR(mj.at("mdi").get<double>(), mdi(gamma * omega), 1e-12);
    EXPECT_NEAR(mj.at("scaled_mdi").get<double>(), scaled_mdi(gamma * omega, 10000), 1e-8);
}

TEST(CliEstimate, DefaultsAreEchoed) {
    const auto dir = temp_dir("cli_defaults");
    ASSERT_EQ(run_cli({"simulate", "--model", "iii", "--n", "2000", "--seed", "3", "--out", (dir / "x.csv").string()}).code, 0);
    const auto g = run_cli({"estimate", (dir / "x.csv").string()});
    ASSERT_EQ(g.code, 0) << g.err;
    const json gj = json::parse(g.out);
    EXPECT_EQ(gj.at("method"), "gsobi");
    EXPECT_EQ(gj.at("parameters").at("b").get<double>(), 0.9);
    EXPECT_EQ(gj.at("parameters").at("lags1").get<std::vector<int>>(), (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));
    EXPECT_EQ(gj.at("parameters").at("lags2").get<std::vector<int>>(), (std::vector<int>{1, 2, 3}));
    EXPECT_TRUE(gj.at("converged").is_boolean());
    const auto p = run_cli({"estimate", (dir / "x.csv").string(), "--method", "pvc"});
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_EQ(json::parse(p.out).at("parameters").at("m"), 5);
    for (const char* m : {"amuse", "sobi", "vsobi"}) {
        const auto r = run_cli({"estimate", (dir / "x.csv").string(), "--method", m});
        EXPECT_EQ(r.code, 0) << m << r.err;
        EXPECT_EQ(json::parse(r.out).at("method"), m);
    }
    EXPECT_EQ(run_cli({"estimate", (dir / "x.csv").string(), "--method", "ica"}).code, 1);
    EXPECT_EQ(run_cli({"estimate", (dir / "x.csv").string(), "--b", "2"}).code, 1);
}

TEST(CliEstimate, NonConvergenceStillSucceeds) {
    const auto dir = temp_dir("cli_noconv");
    ASSERT_EQ(run_cli({"simulate", "--model", "iii", "--n", "400", "--seed", "5", "--out", (dir / "x.csv").string()}).code, 0);
    const auto r = run_cli({"estimate", (dir / "x.csv").string(), "--max-iter", "1", "--tol", "1e-15"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(json::parse(r.out).at("converged").get<bool>());
}

TEST(CliEstimate, SingleColumn) {
    const auto dir = temp_dir("cli_single");
    std::ostringstream s;
    s << "y\n";
    for (double v : testing_support::iid_normal(300, 9)) {
        s << 3.0 * v + 1.0 << '\n';
    }
    write_file(dir / "y.csv", s.str());
    const auto r = run_cli({"estimate", (dir / "y.csv").string(), "--out-components", (dir / "c.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    ASSERT_EQ(j.at("gamma").size(), 1u);
    const Table c = read_csv_file((dir / "c.csv").string());
    const double mean = c.values.col(0).mean();
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR((c.values.col(0).array() - mean).square().mean(), 1.0, 1e-10);
}

TEST(CliEstimate, MalformedCsv) {
    const auto dir = temp_dir("cli_malformed");
    write_file(dir / "cell.csv", "a,b\n1,2\n3,x\n");
    write_file(dir / "ragged.csv", "a,b\n1,2\n3\n");
    write_file(dir / "na.csv", "a,b\n1,NA\n3,4\n");
    const auto cell = run_cli({"estimate", (dir / "cell.csv").string()});
    EXPECT_EQ(cell.code, 2);
    EXPECT_NE(cell.err.find("line 3"), std::string::npos) << cell.err;
    EXPECT_NE(cell.err.find("column 2"), std::string::npos) << cell.err;
    const auto ragged = run_cli({"estimate", (dir / "ragged.csv").string()});
    EXPECT_EQ(ragged.code, 2);
    EXPECT_NE(ragged.err.find("line 3"), std::string::npos) << ragged.err;
    EXPECT_EQ(run_cli({"estimate", (dir / "na.csv").string()}).code, 2);
    EXPECT_EQ(run_cli({"estimate", (dir / "missing.csv").string()}).code, 2);
}

TEST(CliDiagnose, ModelOneComponents) {
    const auto dir = temp_dir("cli_diag");
    ASSERT_EQ(run_cli({"simulate", "--model", "i", "--n", "6400", "--seed", "11", "--out", (dir / "s.csv").string()}).code, 0);
    const auto r = run_cli({"diagnose", (dir / "s.csv").string(), "--order", (dir / "vol.csv").string(),
                            "--out-components", (dir / "ordered.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j.at("lags").get<std::vector<int>>(), (std::vector<int>{1, 2, 3, 4, 5}));
    ASSERT_EQ(j.at("components").size(), 3u);
    std::vector<double> q;
    for (const json& c : j.at("components")) {
        EXPECT_LT(c.at("Q").at("p_value").get<double>(), 0.05);
        EXPECT_TRUE(c.at("arma").is_object());  // ARMA dynamics are detected
        EXPECT_TRUE(c.at("garch").is_object());
        q.push_back(c.at("Q").at("statistic").get<double>());
    }
    const auto order = j.at("order").get<std::vector<int>>();
    ASSERT_EQ(order.size(), 3u);
    EXPECT_GE(q[static_cast<std::size_t>(order[0] - 1)], q[static_cast<std::size_t>(order[1] - 1)]);
    EXPECT_GE(q[static_cast<std::size_t>(order[1] - 1)], q[static_cast<std::size_t>(order[2] - 1)]);
    const Table vol = read_csv_file((dir / "vol.csv").string());
    EXPECT_EQ(vol.values.rows(), 6400);
    EXPECT_GT(vol.values.minCoeff(), 0.0);
    const Table ordered = read_csv_file((dir / "ordered.csv").string());
    EXPECT_EQ(ordered.header[0], "s" + std::to_string(order[0]));
}

TEST(CliDiagnose, WhiteNoiseSkipsArma) {
    const auto dir = temp_dir("cli_diag_iid");
    std::ostringstream s;
    s << "a,b,c,d\n";
    const auto z = testing_support::iid_normal(4 * 1000, 12);
    for (std::size_t t = 0; t < 1000; ++t) {
        s << z[4 * t] << ',' << z[4 * t + 1] << ',' << z[4 * t + 2] << ',' << z[4 * t + 3] << '\n';
    }
    write_file(dir / "z.csv", s.str());
    const auto r = run_cli({"diagnose", (dir / "z.csv").string(), "--level", "0.01"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const json& c : json::parse(r.out).at("components")) {
        EXPECT_TRUE(c.at("arma").is_null());
    }
    EXPECT_EQ(run_cli({"diagnose", (dir / "z.csv").string(), "--level", "1.5"}).code, 1);
}

TEST(CliDiagnose, ConstantColumnIsReportedNotFatal) {
    const auto dir = temp_dir("cli_diag_const");
    std::ostringstream s;
    s << "a,b\n";
    const auto z = testing_support::iid_normal(500, 13);
    for (double v : z) {
        s << v << ",1\n";
    }
    write_file(dir / "z.csv", s.str());
    const auto r = run_cli({"diagnose", (dir / "z.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_FALSE(j.at("components")[1].at("errors").empty());
    EXPECT_TRUE(j.at("components")[0].at("Q").is_object());
}

TEST(CliStudy, ConfigRoundTripAndOutputs) {
    const auto dir = temp_dir("cli_study");
    write_file(dir / "cfg.json", R"({"model": "iii", "sample_sizes": [400], "replicates": 3, "seed": 9,
        "methods": [{"method": "gsobi", "diagnostics": true}, {"method": "sobi"}]})");
    const auto a = run_cli({"study", (dir / "cfg.json").string(), "--threads", "1", "--csv", (dir / "r.csv").string()});
    const auto b = run_cli({"study", (dir / "cfg.json").string(), "--threads", "2", "--out", (dir / "r.json").string()});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(a.out, slurp(dir / "r.json"));
    const json j = json::parse(a.out);
    const json& cfg = j.at("config");
    EXPECT_EQ(cfg.at("burn_in"), kDefaultBurnIn);
    EXPECT_EQ(cfg.at("methods")[0].at("b"), 0.9);
    EXPECT_EQ(cfg.at("methods")[1].at("label"), "sobi");
    EXPECT_EQ(cfg.at("diagnostics").at("level"), 0.05);
    EXPECT_EQ(j.at("expected_order").get<std::vector<int>>(), (std::vector<int>{0, 1, 2}));
    ASSERT_EQ(j.at("results").size(), 2u);
    EXPECT_EQ(j.at("results")[0].at("replicates"), 3);
    // the echoed config reproduces the run
    write_file(dir / "echo.json", cfg.dump());
    const auto c = run_cli({"study", (dir / "echo.json").string()});
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(json::parse(c.out).at("results"), j.at("results"));
    const std::string csv = slurp(dir / "r.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_EQ(csv.rfind("model,n,method", 0), 0u);
}

TEST(CliStudy, BadConfigs) {
    const auto dir = temp_dir("cli_study_bad");
    write_file(dir / "unknown.json", R"({"model": "iii", "replicate": 3})");
    write_file(dir / "zero.json", R"({"model": "iii", "replicates": 0})");
    write_file(dir / "type.json", R"({"model": "iii", "replicates": "many"})");
    write_file(dir / "small.json", R"({"model": "iii", "sample_sizes": [50]})");
    for (const char* f : {"unknown.json", "zero.json", "type.json", "small.json"}) {
        const auto r = run_cli({"study", (dir / f).string()});
        EXPECT_EQ(r.code, 2) << f;
        EXPECT_FALSE(r.err.empty());
    }
}

TEST(CliMdi, GainAndErrors) {
    const auto dir = temp_dir("cli_mdi");
    write_file(dir / "perm.csv", "a,b\n0,2\n-1,0\n");
    write_file(dir / "rect.csv", "a,b\n0,2\n");
    const auto r = run_cli({"mdi", "--gain", (dir / "perm.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out).at("mdi").get<double>(), 0.0);
    EXPECT_EQ(run_cli({"mdi", "--gain", (dir / "rect.csv").string()}).code, 2);
    EXPECT_EQ(run_cli({"mdi"}).code, 1);
}
