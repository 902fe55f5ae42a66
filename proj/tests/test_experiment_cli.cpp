#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plap/experiment.hpp"

using namespace plap;
namespace fs = std::filesystem;

namespace {

const std::string source_dir = PLAP_SOURCE_DIR;
const std::string cli = PLAP_CLI_PATH;

std::string config_path(const std::string& name) { return source_dir + "/configs/" + name; }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("plap_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = "\"" + cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error_path(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

}  // namespace

TEST(ConfigParse, ErrorsNameTheField) {
    EXPECT_EQ(config_error_path(json::parse(R"({"params": {"p": "two", "n": 2, "q": 8, "r": 8}})")), "params.p");
    EXPECT_EQ(config_error_path(json::parse(R"({"params": {"p": 2, "n": 2, "r": 8}})")), "params.q");
    EXPECT_EQ(config_error_path(json::parse(R"({"grid": {"h": 0.1, "dt": 0.1, "t_end": 1, "hh": 2}})")), "grid.hh");
    EXPECT_EQ(config_error_path(json::parse(R"({"probe": {"mode": "sideways"}})")), "probe.mode");
    EXPECT_EQ(config_error_path(json::parse(R"({"probe": {"centers": [[0.1, "x"]]}})")), "probe.centers[0][1]");
    EXPECT_EQ(config_error_path(json::parse(R"({"solve": {"boundary": {"kind": "periodic"}}})")), "solve.boundary.kind");
    EXPECT_EQ(config_error_path(json::parse(R"({"colour": 1})")), "colour");
}

TEST(ConfigParse, InfinityLiteral) {
    const auto c = config_from_json(json::parse(R"({"params": {"p": 3, "n": 1, "q": "inf", "r": 5, "alpha_H": 1}})"));
    ASSERT_TRUE(c.params);
    EXPECT_TRUE(c.params->q.is_infinite());
    EXPECT_EQ(c.params->r.value(), 5.0);
    EXPECT_EQ(config_error_path(json::parse(R"({"params": {"p": 3, "n": 1, "q": "huge", "r": 5}})")), "params.q");
}

TEST(ConfigParse, ShippedConfigsRoundTrip) {
    for (const auto& entry : fs::directory_iterator(source_dir + "/configs")) {
        if (entry.path().extension() != ".json") continue;
        SCOPED_TRACE(entry.path().string());
        const auto c = load_config(entry.path().string());
        const auto j = config_to_json(c);
        const auto back = config_from_json(j);
        EXPECT_EQ(config_to_json(back), j);
        EXPECT_EQ(config_hash(back), config_hash(c));
    }
}

TEST(ConfigParse, HashTracksContent) {
    auto c = load_config(config_path("exponent_heat.json"));
    const auto before = config_hash(c);
    c.params->r = 9.0;
    EXPECT_NE(config_hash(c), before);
}

TEST(RunExperiment, ExponentScenario) {
    const auto res = run_experiment(load_config(config_path("exponent_heat.json")), "exponent");
    const auto& ex = res.summary["result"]["exponents"];
    EXPECT_DOUBLE_EQ(ex["alpha"]["value"].get<double>(), 0.5);
    EXPECT_EQ(ex["alpha"]["provenance"], "predicted");
    EXPECT_FALSE(res.solution);
    EXPECT_EQ(res.summary["config_hash"].get<std::string>().size(), 16u);
}

TEST(RunExperiment, LayersInExponentScenario) {
    const auto res = run_experiment(load_config(config_path("exponent_degenerate_layers.json")), "exponent");
    EXPECT_TRUE(res.summary["result"].contains("epsilon_layers"));
}

TEST(RunExperiment, RegionCsvSchema) {
    const auto c = load_config(config_path("region_singular.json"));
    const auto res = run_experiment(c, "region");
    ASSERT_TRUE(res.region_csv);
    std::istringstream in(*res.region_csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "q,r,n_over_q_plus_2_over_r,admissible,violation");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, static_cast<std::size_t>(c.region->resolution * c.region->resolution));
    EXPECT_TRUE(res.summary["result"]["lower_curve_present"].get<bool>());
}

TEST(RunExperiment, ConstantProbeIsUnfittable) {
    const auto res = run_experiment(load_config(config_path("probe_constant.json")), "probe");
    const auto& centers = res.summary["probe"]["centers"];
    ASSERT_EQ(centers.size(), 1u);
    EXPECT_EQ(centers[0]["fit_status"], "unfittable");
    EXPECT_DOUBLE_EQ(centers[0]["M_affine"]["value"].get<double>(), 0.0);
    ASSERT_TRUE(res.profile_csv);
    std::istringstream in(*res.profile_csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "center,k,rho,theta_k,S_k,bound_k,ratio");
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
        ASSERT_EQ(cols.size(), 7u);
        EXPECT_EQ(std::stod(cols[4]), 0.0);
    }
}

TEST(RunExperiment, MissingBlockIsConfigError) {
    auto c = load_config(config_path("exponent_heat.json"));
    EXPECT_THROW(run_experiment(c, "solve"), ConfigError);
    c.params.reset();
    EXPECT_THROW(run_experiment(c, "exponent"), ConfigError);
}

TEST(EmitReport, UnwritableDirectory) {
    const auto dir = scratch("unwritable");
    std::ofstream(dir / "blocker") << "x";
    RunResult res;
    res.summary = {{"k", 1}};
    EXPECT_THROW(emit_report(res, (dir / "blocker" / "sub").string()), IoError);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit_codes");
    EXPECT_EQ(run_cli("exponent " + config_path("exponent_heat.json") + " --out " + (dir / "ok").string(), dir / "a.log"), 0);
    EXPECT_TRUE(fs::exists(dir / "ok" / "summary.json"));

    std::ofstream(dir / "bad.json") << R"({"params": {"p": 2, "n": 2, "q": 8, "r": 8, "colour": 1}})";
    EXPECT_EQ(run_cli("exponent " + (dir / "bad.json").string() + " --out " + (dir / "bad").string(), dir / "b.log"), 2);
    EXPECT_NE(read_file(dir / "b.log").find("params.colour"), std::string::npos);

    std::ofstream(dir / "unresolved.json") << R"({
      "params": {"p": 2, "n": 1, "q": "inf", "r": "inf"},
      "grid": {"half_width": 0.5, "h": 0.0625, "dt": 0.0625, "t_end": 0.5},
      "initial": {"kind": "constant", "value": 1},
      "solve": {"boundary": {"kind": "hold_initial"}},
      "probe": {"K": 4, "centers": [[0.0, 0.5]]}})";
    EXPECT_EQ(run_cli("probe " + (dir / "unresolved.json").string() + " --out " + (dir / "u").string(), dir / "c.log"), 4);

    EXPECT_EQ(run_cli("exponent " + (dir / "missing.json").string(), dir / "d.log"), 5);
}

TEST(Cli, ValidateSuitePasses) {
    const auto dir = scratch("validate");
    EXPECT_EQ(run_cli("validate " + config_path("validate.json") + " --out " + dir.string(), dir / "log"), 0);
    const auto summary = json::parse(read_file(dir / "summary.json"));
    EXPECT_TRUE(summary["pass"].get<bool>());
}

TEST(Cli, ReportsAreByteIdentical) {
    const auto dir = scratch("determinism");
    for (const char* run : {"a", "b"}) {
        ASSERT_EQ(run_cli("probe " + config_path("probe_constant.json") + " --out " + (dir / run).string(),
                          dir / (std::string(run) + ".log")),
                  0);
    }
    for (const char* file : {"summary.json", "profile.csv", "solution.bin"}) {
        SCOPED_TRACE(file);
        const auto a = read_file(dir / "a" / file);
        EXPECT_FALSE(a.empty());
        EXPECT_EQ(a, read_file(dir / "b" / file));
    }
}

TEST(Cli, HeatWithSingularSourceEndToEnd) {
    const auto dir = scratch("heat_singular");
    ASSERT_EQ(run_cli("probe " + config_path("probe_heat_singular_source.json") + " --out " + dir.string(), dir / "log"), 0);
    const auto summary = json::parse(read_file(dir / "summary.json"));
    const auto& centre = summary["probe"]["centers"][0];
    ASSERT_TRUE(centre.contains("fitted_slope"));
    const double predicted = centre["predicted_slope"]["value"].get<double>();
    EXPECT_EQ(centre["fitted_slope"]["provenance"], "measured");
    EXPECT_GE(centre["fitted_slope"]["value"].get<double>(), predicted - 0.1);
    EXPECT_TRUE(centre["slope_pass"].get<bool>());
}
