#include "robustda/runner.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace robustda;
namespace fs = std::filesystem;

namespace {

const fs::path kData = ROBUSTDA_TEST_DATA;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("robustda_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Json design_config(const std::string& algorithm, std::size_t iterations) {
    Json j = Json::parse(R"({
      "data": {"simulate": {"n": 50, "d": 2, "p": 2, "mixing": {"family": "gamma", "a": 1, "b": 1}, "seed": 2024}},
      "missing": {"complete_rows": 40},
      "prior": {"m": 2, "a": "zero"},
      "mixing": {"family": "gamma", "a": 2, "b": 2},
      "iterations": 10, "seed": 5
    })");
    j["algorithm"] = algorithm;
    j["iterations"] = iterations;
    return j;
}

std::string draws_string(const ChainOutput& c) {
    std::ostringstream s;
    write_draws_csv(s, c);
    return s.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ROBUSTDA_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV ingestion.

TEST(IngestCsv, NoNaGivesAllTrueMask) {
    const auto in = ingest_csv((kData / "complete.csv").string());
    EXPECT_EQ(in.data.n(), 8);
    EXPECT_EQ(in.data.d(), 2);
    EXPECT_EQ(in.data.p(), 2);
    EXPECT_TRUE(in.structure.mask().all());
}

TEST(IngestCsv, FiveMissingY1RowsAreMonotonizable) {
    const auto in = ingest_csv((kData / "na_y1.csv").string());
    EXPECT_EQ((!in.structure.mask()).count(), 5);
    EXPECT_FALSE(is_monotone(in.structure));
    const auto dec = try_monotonize(in.structure);
    ASSERT_TRUE(dec);
    EXPECT_EQ(dec->column_permutation, (std::vector<Index>{0, 1}));
    EXPECT_EQ(dec->n_per_pattern, (std::vector<Index>{45, 5}));
}

TEST(IngestCsv, LowercaseNaIsANumberFormatError) {
    try {
        ingest_csv((kData / "lowercase_na.csv").string());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("'na'"), std::string::npos) << e.what();
    }
}

TEST(IngestCsv, NaInPredictorIsIngestionError) {
    EXPECT_THROW(ingest_csv((kData / "na_predictor.csv").string()), IngestionError);
}

TEST(IngestCsv, RaggedRowReportsLine) {
    try {
        ingest_csv((kData / "ragged.csv").string());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
}

TEST(IngestCsv, HeaderMustNameResponsesThenPredictors) {
    std::istringstream bad("x1,y1\n1,2\n");
    EXPECT_THROW(ingest_csv(bad), ParseError);
    std::istringstream gap("y1,y3,x1\n1,2,3\n");
    EXPECT_THROW(ingest_csv(gap), ParseError);
}

TEST(IngestCsv, DatasetRoundTrip) {
    const auto in = ingest_csv((kData / "na_y1.csv").string());
    std::ostringstream out;
    write_dataset_csv(out, in.data);
    std::istringstream back(out.str());
    const auto again = ingest_csv(back);
    EXPECT_EQ(again.structure, in.structure);
    EXPECT_EQ(again.data.y(), in.data.y());
    EXPECT_EQ(again.data.x(), in.data.x());
}

// ---------------------------------------------------------------------------
// Draws and imputations files.

TEST(DrawsCsv, HeaderLayout) {
    EXPECT_EQ(draws_header(2, 2), "iteration,B11,B12,B21,B22,S11,S21,S22");
}

TEST(DrawsCsv, RoundTripIsBitExact) {
    const RunConfig cfg = parse_config(design_config("da", 200), ".");
    const RunResult res = execute(cfg);
    const ChainOutput& c = res.chains.front();
    std::istringstream in(draws_string(c));
    const DrawsTable t = read_draws_csv(in);
    ASSERT_EQ(t.states.size(), c.states.size());
    for (std::size_t k = 0; k < t.states.size(); ++k) {
        EXPECT_EQ(t.iterations[k], k + 1);
        ASSERT_EQ(t.states[k].beta, c.states[k].beta);
        ASSERT_EQ(t.states[k].sigma, c.states[k].sigma);
    }
}

TEST(ImputationsCsv, OneBasedCellsInRowMajorOrder) {
    ChainOutput c;
    c.meta.burn_in = 3;
    c.imputed_cells = {{0, 1}, {4, 0}};
    c.imputations = std::vector<Vector>{(Vector(2) << 0.5, -1.25).finished()};
    std::ostringstream out;
    write_imputations_csv(out, c);
    EXPECT_EQ(out.str(), "iteration,row,column,value\n4,1,2,0.5\n4,5,1,-1.25\n");
}

// ---------------------------------------------------------------------------
// Configuration.

TEST(Config, UnknownKeysRejected) {
    Json j = design_config("da", 10);
    j["iteratons"] = 5;
    EXPECT_THROW(parse_config(j, "."), ConfigError);
    Json m = design_config("da", 10);
    m["mixing"]["shape"] = 1;
    EXPECT_THROW(parse_config(m, "."), ConfigError);
}

TEST(Config, FieldValidation) {
    Json j = design_config("da", 10);
    j["k_prime"] = "all_ones";
    EXPECT_THROW(parse_config(j, "."), ConfigError);
    j = design_config("gibbs", 10);
    EXPECT_THROW(parse_config(j, "."), ConfigError);
    j = design_config("da", 10);
    j["burn_in"] = 10;
    EXPECT_THROW(parse_config(j, "."), ConfigError);
    j = design_config("da", 10);
    j["missing"]["complete_rows"] = 51;
    EXPECT_THROW(parse_config(j, "."), ConfigError);
    j = design_config("da", 10);
    j["data"] = {{"csv", "does_not_exist.csv"}};
    EXPECT_THROW(parse_config(j, "."), ConfigError);
    j = design_config("dai", 10);
    j["k_prime"] = {{1, 2}};
    EXPECT_THROW(parse_config(j, "."), ConfigError);
}

TEST(Config, MixingFamiliesParse) {
    const std::vector<std::pair<Json, std::string>> cases = {
        {{{"family", "pointmass"}, {"w0", 2}}, "pointmass"},
        {{{"family", "discrete"}, {"atoms", {0.5, 2}}, {"probs", {0.3, 0.7}}}, "discrete"},
        {{{"family", "gig"}, {"a", 1}, {"b", 2}, {"q", 0.5}}, "gig"},
        {{{"family", "lognormal"}, {"mu", 0}, {"v", 1}}, "lognormal"},
        {{{"family", "frechet"}, {"alpha", 3}, {"s", 1}}, "frechet"},
        {{{"family", "beta"}, {"a", 2}, {"b", 3}}, "beta"},
    };
    for (const auto& [j, name] : cases) EXPECT_EQ(std::string(mixing_from_json(j).name()), name) << j.dump();
    EXPECT_THROW(mixing_from_json({{"family", "cauchy"}}), ConfigError);
    EXPECT_THROW(mixing_from_json({{"family", "gamma"}, {"a", -1}, {"b", 1}}), Error);
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
    const fs::path dir = scratch("relpath");
    fs::copy_file(kData / "complete.csv", dir / "complete.csv");
    Json j = design_config("da", 10);
    j["data"] = {{"csv", "complete.csv"}};
    j.erase("missing");
    j["outputs"] = {{"draws", "out/draws.csv"}};
    std::ofstream(dir / "run.json") << j.dump();
    const RunConfig cfg = load_config(dir / "run.json");
    EXPECT_EQ(*cfg.csv, dir / "complete.csv");
    EXPECT_EQ(*cfg.outputs.draws, dir / "out/draws.csv");
}

// ---------------------------------------------------------------------------
// Simulation.

TEST(Simulate, SeededAndReproducible) {
    SimulationBlock b;
    b.seed = 77;
    const Dataset a = simulate_dataset(b), c = simulate_dataset(b);
    EXPECT_EQ(a.y(), c.y());
    EXPECT_EQ(a.x(), c.x());
    EXPECT_TRUE(a.x().col(0).isOnes());
    b.seed = 78;
    EXPECT_NE(simulate_dataset(b).y(), a.y());
}

TEST(Simulate, PointMassErrorsHaveUnitScale) {
    // With w = 1 the residuals are N(0, Sigma): check the sample covariance.
    SimulationBlock b;
    b.n = 20000;
    b.mixing = family::PointMass{1.0};
    b.sigma = (Matrix(2, 2) << 2, 0.5, 0.5, 1).finished();
    const Dataset data = simulate_dataset(b);
    const Matrix r = data.y() - data.x() * b.coefficients_or_default();
    const Matrix cov = r.transpose() * r / 20000.0;
    EXPECT_TRUE(((cov - b.sigma).array().abs() < 0.06).all()) << cov;
}

TEST(Simulate, CompleteRowsStructure) {
    const MissingStructure ms = complete_rows_structure(50, 2, 45);
    EXPECT_TRUE(is_monotone(ms));
    EXPECT_EQ((!ms.mask()).count(), 5);
    EXPECT_TRUE(ms.mask().topRows(45).all());
    EXPECT_TRUE(ms.mask().col(1).all());
}

// ---------------------------------------------------------------------------
// Pipeline.

TEST(Execute, RefusesWhenH2Fails) {
    Json j = design_config("da", 10);
    j["mixing"] = {{"family", "invgamma"}, {"a", 0.5}, {"b", 1}};
    try {
        execute(parse_config(j, "."));
        FAIL();
    } catch (const MixingError& e) {
        EXPECT_NE(std::string(e.what()).find("H2"), std::string::npos);
    }
}

TEST(Execute, ReportCarriesChecksAndDiagnostics) {
    const RunResult res = execute(parse_config(design_config("da", 500), "."));
    const Json& r = res.report;
    EXPECT_TRUE(r["structure"]["monotone"].get<bool>());
    EXPECT_TRUE(r["structure"]["h1"]["pass"].get<bool>());
    EXPECT_TRUE(r["mixing"]["h2"].get<bool>());
    EXPECT_DOUBLE_EQ(r["mixing"]["c1"].get<double>(), (50 - 2 + 2 - 1) / 2.0);
    EXPECT_EQ(r["mixing"]["theorem1"], "not_established");
    EXPECT_EQ(r["warnings"].size(), 1u);
    EXPECT_GT(r["chains"][0]["diagnostics"]["joint_ess"].get<double>(), 0.0);
    EXPECT_EQ(r["chains"][0]["diagnostics"]["ess"].size(), 7u);
}

TEST(Execute, DaiOnNonMonotoneStructureReportsWitness) {
    const fs::path dir = scratch("nonmono");
    SimulationBlock b;
    b.d = 3;
    b.seed = 9;
    b.coefficients = Matrix::Ones(2, 3);
    b.sigma = Matrix::Identity(3, 3);
    Dataset full = simulate_dataset(b);
    Mask m = Mask::Constant(50, 3, true);
    for (Index i = 40; i < 45; ++i) m(i, 1) = false;
    for (Index i = 45; i < 50; ++i) m(i, 0) = false;
    {
        std::ofstream out(dir / "d.csv");
        write_dataset_csv(out, Dataset(full.y(), m, full.x()));
    }
    Json j = design_config("dai", 300);
    j["data"] = {{"csv", (dir / "d.csv").string()}};
    j.erase("missing");
    j["prior"] = {{"m", 3}, {"a", "zero"}};
    const RunResult res = execute(parse_config(j, dir));
    const Json& st = res.report["structure"];
    EXPECT_FALSE(st["monotonizable"].get<bool>());
    EXPECT_TRUE(st["proposition1_witness"]["found"].get<bool>());
    EXPECT_TRUE(st["proposition1_witness"]["strict"].get<bool>());
    EXPECT_EQ(res.chains.front().imputed_cells.size(), 10u);

    j["algorithm"] = "da";
    EXPECT_THROW(execute(parse_config(j, dir)), StructureError);
}

TEST(Execute, DaOnScatteredRowsMapsCellsBack) {
    Json j = design_config("da", 200);
    j["data"] = {{"csv", (kData / "na_y1.csv").string()}};
    j.erase("missing");
    j["posthoc_impute"] = true;
    const RunResult res = execute(parse_config(j, "."));
    const auto& cells = res.chains.front().imputed_cells;
    ASSERT_EQ(cells.size(), 5u);
    const std::vector<Index> rows = {3, 11, 24, 37, 48};
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(cells[k], (Cell{rows[k], 0}));
}

TEST(Execute, IdenticalSeedsGiveIdenticalDraws) {
    for (const char* alg : {"da", "dai"}) {
        const RunConfig cfg = parse_config(design_config(alg, 300), ".");
        EXPECT_EQ(draws_string(execute(cfg).chains.front()), draws_string(execute(cfg).chains.front())) << alg;
    }
}

TEST(Execute, ReplicationsIndependentOfThreadCount) {
    Json j = design_config("da", 200);
    j["replications"] = 4;
    const RunConfig cfg = parse_config(j, ".");
    const auto one = execute(cfg, 1), four = execute(cfg, 4);
    ASSERT_EQ(one.chains.size(), 4u);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_EQ(draws_string(one.chains[r]), draws_string(four.chains[r]));
        EXPECT_EQ(one.chains[r].meta.seed, 5u + r);
    }
    EXPECT_NE(draws_string(one.chains[0]), draws_string(one.chains[1]));
}

TEST(Outputs, ReplicationPathNaming) {
    EXPECT_EQ(replication_path("out/draws.csv", 0), fs::path("out/draws.csv"));
    EXPECT_EQ(replication_path("out/draws.csv", 3), fs::path("out/draws.rep3.csv"));
}

// ---------------------------------------------------------------------------
// Executable.

TEST(Binary, RunTwiceGivesByteIdenticalFiles) {
    const fs::path dir = scratch("binary");
    Json j = design_config("da", 400);
    j["posthoc_impute"] = true;
    j["outputs"] = {{"draws", "draws.csv"}, {"imputations", "imp.csv"}, {"report", "report.json"}};
    std::ofstream(dir / "run.json") << j.dump();
    ASSERT_EQ(run_cli("run " + (dir / "run.json").string()), 0);
    const std::string d1 = slurp(dir / "draws.csv"), i1 = slurp(dir / "imp.csv");
    ASSERT_EQ(run_cli("run " + (dir / "run.json").string()), 0);
    EXPECT_FALSE(d1.empty());
    EXPECT_EQ(d1, slurp(dir / "draws.csv"));
    EXPECT_EQ(i1, slurp(dir / "imp.csv"));
    EXPECT_FALSE(fs::exists(dir / "draws.csv.partial"));
    const Json report = Json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(report["run"]["iterations"], 400);
}

TEST(Binary, ExitCodes) {
    const fs::path dir = scratch("exit");
    Json bad = design_config("da", 10);
    bad["mixing"] = {{"family", "invgamma"}, {"a", 0.5}, {"b", 1}};
    std::ofstream(dir / "h2.json") << bad.dump();
    std::ofstream(dir / "broken.json") << "{ not json";
    EXPECT_EQ(run_cli("run " + (dir / "h2.json").string()), 2);
    EXPECT_EQ(run_cli("check " + (dir / "h2.json").string()), 3);
    EXPECT_EQ(run_cli("check " + (dir / "broken.json").string()), 2);
    EXPECT_NE(run_cli(""), 0);
}

TEST(Binary, SimulateWritesDataset) {
    const fs::path dir = scratch("simulate");
    Json j = design_config("da", 10);
    j["outputs"] = {{"dataset", "sim.csv"}};
    std::ofstream(dir / "sim.json") << j.dump();
    ASSERT_EQ(run_cli("simulate " + (dir / "sim.json").string()), 0);
    const auto in = ingest_csv((dir / "sim.csv").string());
    EXPECT_EQ(in.data.n(), 50);
    EXPECT_EQ((!in.structure.mask()).count(), 10);
}
