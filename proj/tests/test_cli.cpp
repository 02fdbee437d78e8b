#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "osl/osl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
    int code = -1;
    std::string err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("osl_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    Outcome run(const std::string& args) const {
        const fs::path err = dir_ / "stderr.txt";
        const std::string cmd = std::string(OSL_CLI_PATH) + " " + args + " 2> " + err.string();
        const int status = std::system(cmd.c_str());
        Outcome o;
        o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        o.err = slurp(err);
        return o;
    }

    fs::path write_config(const std::string& name, const std::string& text) const {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }

    static json read_json(const fs::path& p) { return json::parse(slurp(p)); }

    static std::string config(const std::string& name) { return std::string(OSL_CONFIG_DIR) + "/" + name; }

    fs::path dir_;
};

TEST_F(CliTest, FitPlmOracleMatchesNormalEquations) {
    const fs::path out = dir_ / "fit";
    const Outcome o = run("fit --quiet --config " + config("plm.yaml") + " --out " + out.string());
    ASSERT_EQ(o.code, 0) << o.err;
    const json j = read_json(out / "fit.json");
    EXPECT_EQ(j["termination"], "converged");
    EXPECT_EQ(j["n"], 4000);

    // independent oracle: residual-on-residual least squares over the first half
    const osl::PlmDgp dgp = osl::PlmDgp::make_default(5, 2, 7, 1.0, 0.3, 0.5);
    const osl::SampleBatch batch = osl::sample(dgp, 8000, 17);
    const osl::SampleBatch d1 = batch.slice(0, 4000);
    const osl::RowMatrix g = dgp.reduced_form_nuisance().evaluate_all(d1.covariates());
    const osl::Vector ry = d1.outcomes() - g.col(0);
    const osl::Matrix ru = d1.targets() - g.rightCols(5);
    const osl::Vector expected = (ru.transpose() * ru).ldlt().solve(ru.transpose() * ry);

    ASSERT_EQ(j["theta_hat"].size(), 5u);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(j["theta_hat"][k].get<double>(), expected[k], 1e-8) << k;
    EXPECT_GE(j["excess_risk"].get<double>(), 0.0);
    EXPECT_EQ(j["config"]["dgp"]["d"], 5);
    EXPECT_EQ(j["config"]["seed"], 17);
}

TEST_F(CliTest, RerunIsByteIdentical) {
    const std::string cfg = config("plm.yaml");
    ASSERT_EQ(run("fit --quiet --config " + cfg + " --out " + (dir_ / "a").string()).code, 0);
    ASSERT_EQ(run("fit --quiet --config " + cfg + " --out " + (dir_ / "b").string()).code, 0);
    EXPECT_EQ(slurp(dir_ / "a" / "fit.json"), slurp(dir_ / "b" / "fit.json"));
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
    ASSERT_EQ(run("fit --quiet --seed 99 --config " + config("plm.yaml") + " --out " + (dir_ / "s").string()).code, 0);
    EXPECT_EQ(read_json(dir_ / "s" / "fit.json")["config"]["seed"], 99);
}

TEST_F(CliTest, OddSampleSizeIsConfigError) {
    const fs::path cfg = write_config("odd.yaml", "model: plm\nfit:\n  n: 4001\n");
    const fs::path out = dir_ / "odd_out";
    const Outcome o = run("fit --config " + cfg.string() + " --out " + out.string());
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("fit.n"), std::string::npos) << o.err;
    EXPECT_FALSE(fs::exists(out / "fit.json"));
}

TEST_F(CliTest, UnknownKeyNamesField) {
    const fs::path cfg = write_config("bad.yaml", "model: plm\ndgp:\n  x_bound: 1.0\nfit:\n  n: 10\n");
    const Outcome o = run("fit --config " + cfg.string() + " --out " + (dir_ / "o").string());
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("dgp.x_bound"), std::string::npos) << o.err;
}

TEST_F(CliTest, WrongTypeNamesField) {
    const fs::path cfg = write_config("bad.yaml", "model: plm\nsolver:\n  max_iterations: many\nfit:\n  n: 10\n");
    const Outcome o = run("fit --config " + cfg.string() + " --out " + (dir_ / "o").string());
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("solver.max_iterations"), std::string::npos) << o.err;
}

TEST_F(CliTest, MissingConfigFileIsConfigError) {
    EXPECT_EQ(run("fit --config " + (dir_ / "nope.yaml").string() + " --out " + (dir_ / "o").string()).code, 2);
}

TEST_F(CliTest, SweepWithZeroReplicationsIsConfigError) {
    const fs::path cfg = write_config("zero.yaml", "model: plm\nsweep:\n  replications: 0\n");
    const fs::path out = dir_ / "sweep_out";
    const Outcome o = run("sweep --config " + cfg.string() + " --out " + out.string());
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("sweep.replications"), std::string::npos) << o.err;
    EXPECT_FALSE(fs::exists(out / "records.csv"));
    EXPECT_FALSE(fs::exists(out / "summary.json"));
}

TEST_F(CliTest, SmallSweepWritesSchema) {
    const fs::path cfg = write_config("small.yaml",
                                      "model: plm\nseed: 4\ndgp:\n  d: 2\n  oracle_draws: 1000\n"
                                      "sweep:\n  n_grid: [100, 200, 400]\n  replications: 3\n");
    const fs::path out = dir_ / "sweep_out";
    const Outcome o = run("sweep --quiet --jobs 2 --config " + cfg.string() + " --out " + out.string());
    ASSERT_EQ(o.code, 0) << o.err;
    const std::string records = slurp(out / "records.csv");
    EXPECT_EQ(records.rfind("n,rep,excess_risk,nuisance_distance,iterations\n", 0), 0u);
    EXPECT_EQ(std::count(records.begin(), records.end(), '\n'), 10);
    EXPECT_EQ(records.find('\r'), std::string::npos);
    const json s = read_json(out / "summary.json");
    for (const char* key : {"slope", "slope_stderr", "intercept", "q90_slope", "failure_count", "config"})
        EXPECT_TRUE(s.contains(key)) << key;
    EXPECT_EQ(s["failure_count"], 0);
}

TEST_F(CliTest, EffdimExpPolyIsFlat) {
    const fs::path cfg = write_config("ep.yaml", "effdim:\n  d_grid: [50, 100, 200, 400]\n  regimes:\n"
                                                 "    - {kind: exp_poly, g_rate: 1, h_rate: 2}\n");
    const fs::path out = dir_ / "effdim_out";
    const Outcome o = run("effdim --quiet --check --config " + cfg.string() + " --out " + out.string());
    ASSERT_EQ(o.code, 0) << o.err;
    std::istringstream csv(slurp(out / "effdim.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "regime,g_rate,h_rate,d,d_star,d_prime,ratio,log_d_star,log_d_prime");
    double lo = INFINITY, hi = -INFINITY;
    int rows = 0;
    while (std::getline(csv, line)) {
        std::istringstream cells(line);
        std::string kind, d_star;
        std::getline(cells, kind, ',');
        EXPECT_EQ(kind, "exp_poly");
        for (int k = 0; k < 4; ++k) std::getline(cells, d_star, ',');
        lo = std::min(lo, std::stod(d_star));
        hi = std::max(hi, std::stod(d_star));
        ++rows;
    }
    EXPECT_EQ(rows, 4);
    EXPECT_LT(hi / lo - 1.0, 0.05);
    EXPECT_TRUE(fs::exists(out / "effdim.svg"));
}

TEST_F(CliTest, EffdimCheckReportsTableMismatch) {
    // the tabulated poly-exp d_star order is looser than the computed growth
    const fs::path cfg = write_config("pe.yaml", "effdim:\n  svg: false\n  regimes:\n"
                                                 "    - {kind: poly_exp, g_rate: 1, h_rate: 1}\n");
    const fs::path out = dir_ / "effdim_out";
    EXPECT_EQ(run("effdim --quiet --check --config " + cfg.string() + " --out " + out.string()).code, 4);
    const json j = read_json(out / "effdim.json");
    EXPECT_FALSE(j["regimes"][0]["d_star"]["pass"].get<bool>());
    EXPECT_TRUE(j["regimes"][0]["d_prime"]["pass"].get<bool>());
    EXPECT_FALSE(fs::exists(out / "effdim.svg"));
}

TEST_F(CliTest, OrthcheckPlm) {
    const fs::path out = dir_ / "orth";
    const Outcome o = run("orthcheck --quiet --check --config " + config("plm.yaml") + " --out " + out.string());
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_LE(read_json(out / "orthcheck.json")["defect"].get<double>(), 1e-6);
}

TEST_F(CliTest, OrthcheckLogit) {
    const fs::path out = dir_ / "orth";
    const Outcome o = run("orthcheck --quiet --check --config " + config("logit.yaml") + " --out " + out.string());
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_GE(read_json(out / "orthcheck.json")["defect"].get<double>(), 0.01);
}

TEST_F(CliTest, CheckViolationExitsFour) {
    const fs::path cfg = write_config("strict.yaml", "model: plm\ncheck:\n  defect_min: 1.0\n");
    const fs::path out = dir_ / "orth";
    EXPECT_EQ(run("orthcheck --quiet --check --config " + cfg.string() + " --out " + out.string()).code, 4);
    EXPECT_FALSE(read_json(out / "orthcheck.json")["check"]["pass"].get<bool>());
    // without --check the same thresholds are only recorded
    EXPECT_EQ(run("orthcheck --quiet --config " + cfg.string() + " --out " + out.string()).code, 0);
}

TEST_F(CliTest, StabilityLogitAutoRadius) {
    const fs::path out = dir_ / "stab";
    const Outcome o = run("stability --quiet --check --config " + config("logit.yaml") + " --out " + out.string());
    ASSERT_EQ(o.code, 0) << o.err;
    const json j = read_json(out / "stability.json");
    EXPECT_GE(j["kappa_hat"].get<double>(), 0.70);
    EXPECT_LE(j["K_hat"].get<double>(), 1.30);
    EXPECT_NEAR(j["r2"].get<double>(), j["lambda_min_h_star"].get<double>() / 4.0, 1e-12);
}

TEST_F(CliTest, StabilityAutoRadiusRejectedForPlm) {
    const fs::path cfg = write_config("s.yaml", "model: plm\nstability:\n  r2: auto\n");
    const Outcome o = run("stability --config " + cfg.string() + " --out " + (dir_ / "o").string());
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("stability.r2"), std::string::npos) << o.err;
}

TEST_F(CliTest, FitFromDataFileMatchesLibrary) {
    const osl::PlmDgp dgp = osl::PlmDgp::make_default(2, 1);
    const osl::SampleBatch batch = osl::sample(dgp, 2000, 8);
    {
        std::ofstream os(dir_ / "batch.csv");
        os << "y,t1,t2,x1\n";
        for (osl::Index i = 0; i < batch.n(); ++i)
            os << osl::io::format_double(batch.outcomes()[i]) << ',' << osl::io::format_double(batch.targets()(i, 0))
               << ',' << osl::io::format_double(batch.targets()(i, 1)) << ','
               << osl::io::format_double(batch.covariates()(i, 0)) << '\n';
    }
    const fs::path cfg = write_config("data.yaml", "model: plm\ndgp:\n  d: 2\n  covariate_dim: 1\n"
                                                   "nuisance:\n  mode: fitted\nfit:\n  data: batch.csv\n");
    const fs::path out = dir_ / "fit";
    const Outcome o = run("fit --quiet --config " + cfg.string() + " --out " + out.string());
    ASSERT_EQ(o.code, 0) << o.err;
    const json j = read_json(out / "fit.json");
    EXPECT_EQ(j["n"], 1000);
    EXPECT_TRUE(j["excess_risk"].is_null());

    const osl::PartiallyLinearModel model(2);
    const osl::NuisanceFn g_hat = osl::fit_first_stage(osl::ModelKind::plm, batch.slice(1000, 1000), {});
    const osl::SampleBatch d1 = batch.slice(0, 1000);
    const osl::EmpiricalObjective obj(model, g_hat, d1);
    const osl::FitReport rep = osl::newton_minimize(obj, osl::Vector::Zero(2));
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(j["theta_hat"][k].get<double>(), rep.theta_hat[k], 1e-12);
}

TEST_F(CliTest, DataFileWithBadHeaderIsConfigError) {
    std::ofstream(dir_ / "batch.csv") << "y,d1,x1\n1,2,3\n";
    const fs::path cfg = write_config("data.yaml", "model: plm\ndgp:\n  d: 1\n  covariate_dim: 1\n"
                                                   "nuisance:\n  mode: fitted\nfit:\n  data: batch.csv\n");
    const Outcome o = run("fit --config " + cfg.string() + " --out " + (dir_ / "o").string());
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("fit.data"), std::string::npos) << o.err;
}

TEST_F(CliTest, FittedModeRejectedForNonOrthogonalLoss) {
    const fs::path cfg = write_config("n.yaml", "model: plm\northogonal: false\nnuisance:\n  mode: fitted\nfit:\n  n: 10\n");
    const Outcome o = run("fit --config " + cfg.string() + " --out " + (dir_ / "o").string());
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("nuisance.mode"), std::string::npos) << o.err;
}

TEST_F(CliTest, MissingSubcommandIsUsageError) { EXPECT_EQ(run("").code, 2); }

} // namespace
