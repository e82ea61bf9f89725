#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "qmix/io.hpp"
#include "test_util.hpp"

using namespace qmix;
using qmix::io::Json;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* bin = std::getenv("QMIX_BIN");
    if (!bin) GTEST_SKIP() << "QMIX_BIN not set";
    bin_ = bin;
    dir_ = fs::temp_directory_path() / "qmix_cli_test";
    fs::create_directories(dir_);
  }

  CmdResult run(const std::string& args) const {
    const std::string cmd = bin_ + " " + args + " 2>" + (dir_ / "stderr.txt").string();
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed");
    CmdResult res;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.out.append(buf.data(), n);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
  }

  std::string stderr_line() const {
    std::ifstream in(dir_ / "stderr.txt");
    std::string line;
    std::getline(in, line);
    return line;
  }

  std::string write(const std::string& name, const Json& j) const {
    const std::string path = (dir_ / name).string();
    io::save_json(path, j);
    return path;
  }

  std::string write_text(const std::string& name, const std::string& text) const {
    const std::string path = (dir_ / name).string();
    std::ofstream(path) << text;
    return path;
  }

  std::string bin_;
  fs::path dir_;
};

Json h_measure_circuit() {
  std::vector<Node> nodes;
  Node h;
  h.id = 0;
  h.op = UnitaryGate{gate_matrix("H", 1), "H", 0.0, false};
  h.in_wires = {0};
  h.out_wires = {1};
  nodes.push_back(h);
  Node m;
  m.id = 1;
  m.op = MeasureGate{1, false};
  m.in_wires = {1};
  m.out_wires = {2};
  nodes.push_back(m);
  return io::circuit_record(Circuit::make(1, {}, {2}, std::move(nodes)));
}

TEST_F(CliTest, RunIdentityCircuit) {
  Json c = io::circuit_record(Circuit::make(1, {}, {0}, {}));
  CmdResult res = run("run " + write("identity.json", c) + " --input 0 --format record");
  EXPECT_EQ(res.exit_code, 0);
  Json rec = Json::parse(res.out);
  EXPECT_EQ(rec["distribution"][0].get<double>(), 1.0);
  EXPECT_EQ(rec["distribution"][1].get<double>(), 0.0);
}

TEST_F(CliTest, RunHadamardMeasure) {
  CmdResult res = run("run " + write("hm.json", h_measure_circuit()) + " --input 0 --format record");
  EXPECT_EQ(res.exit_code, 0);
  Json rec = Json::parse(res.out);
  EXPECT_NEAR(rec["distribution"][0].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(rec["distribution"][1].get<double>(), 0.5, 1e-12);
  if (const char* golden_dir = std::getenv("QMIX_GOLDEN_DIR")) {
    std::ifstream gf(fs::path(golden_dir) / "run_h_measure.json");
    ASSERT_TRUE(gf.good()) << "golden file missing";
    std::string golden((std::istreambuf_iterator<char>(gf)), std::istreambuf_iterator<char>());
    EXPECT_EQ(res.out, golden);
  }
}

TEST_F(CliTest, MalformedFileExitsTwo) {
  CmdResult res = run("run " + write_text("bad.json", "{ not json"));
  EXPECT_EQ(res.exit_code, 2);
  EXPECT_NE(stderr_line().find("qmix-error kind=parse"), std::string::npos);
}

TEST_F(CliTest, ValidationFailureExitsThree) {
  // A non-CPTP channel file: scaled Kraus.
  Json rec;
  rec["version"] = 1;
  rec["n_in"] = 1;
  rec["n_out"] = 1;
  rec["repr"] = "kraus";
  rec["data"] = Json::array({io::matrix_record(0.5 * CMatrix::Identity(2, 2))});
  CmdResult res = run("dilate " + write("badchan.json", rec));
  EXPECT_EQ(res.exit_code, 3);
  EXPECT_NE(stderr_line().find("kind=validation"), std::string::npos);
}

TEST_F(CliTest, ResourceCapExitsFour) {
  Json c = io::circuit_record(Circuit::make(5, {}, {}, {}));
  CmdResult res = run("run " + write("five.json", c) + " --input 00000 --max-qubits 4");
  EXPECT_EQ(res.exit_code, 4);
  EXPECT_NE(stderr_line().find("kind=resource-cap"), std::string::npos);
}

TEST_F(CliTest, DilateUnitaryChannel) {
  Json rec;
  rec["version"] = 1;
  rec["n_in"] = 1;
  rec["n_out"] = 1;
  rec["repr"] = "unitary";
  rec["data"] = io::matrix_record(gate_matrix("H", 1));
  CmdResult res = run("dilate " + write("h.json", rec) + " --format record");
  EXPECT_EQ(res.exit_code, 0);
  Json out = Json::parse(res.out);
  EXPECT_EQ(out["total_qubits"].get<int>(), 3);
  EXPECT_LE(out["residual"].get<double>(), 1e-12);
}

TEST_F(CliTest, CompileFairCoin) {
  std::vector<Node> nodes;
  Node h;
  h.id = 0;
  h.op = UnitaryGate{gate_matrix("H", 1), "H", 0.0, false};
  h.in_wires = {1};
  h.out_wires = {2};
  nodes.push_back(h);
  Circuit impl = Circuit::make(2, {1}, {2}, std::move(nodes));
  Json spec;
  spec["version"] = 1;
  spec["m"] = 1;
  spec["p"] = 1;
  spec["table"] = Json::array({Json::array({0.5, 0.5}), Json::array({0.5, 0.5})});
  spec["impl"] = io::circuit_record(impl);
  const std::string out_path = (dir_ / "compiled.json").string();
  CmdResult res = run("compile " + write("coin.json", spec) + " --circuit-out " + out_path +
                      " --format record");
  EXPECT_EQ(res.exit_code, 0);
  Json rec = Json::parse(res.out);
  EXPECT_LE(rec["choi_residual"].get<double>(), 1e-9);
  // The emitted circuit file parses and has only allowed node kinds.
  Circuit compiled = io::parse_circuit_record(io::load_json(out_path));
  EXPECT_GT(compiled.nodes().size(), 5u);
}

TEST_F(CliTest, DistanceTraceAndGolden) {
  const char* golden_dir = std::getenv("QMIX_GOLDEN_DIR");
  std::string a = write("zero.json", io::state_record(basis_state("0")));
  std::string b = write("one.json", io::state_record(basis_state("1")));
  CmdResult r1 = run("distance --kind trace " + a + " " + b + " --format record");
  CmdResult r2 = run("distance --kind trace " + a + " " + b + " --format record");
  EXPECT_EQ(r1.exit_code, 0);
  EXPECT_EQ(r1.out, r2.out);  // byte-identical for identical inputs
  EXPECT_NEAR(Json::parse(r1.out)["value"].get<double>(), 2.0, 1e-12);
  if (golden_dir) {
    std::ifstream gf(fs::path(golden_dir) / "trace_distance.json");
    ASSERT_TRUE(gf.good()) << "golden file missing";
    std::string golden((std::istreambuf_iterator<char>(gf)), std::istreambuf_iterator<char>());
    EXPECT_EQ(r1.out, golden);
  }
}

TEST_F(CliTest, DistanceDiamondSeedStable) {
  Json id_rec;
  id_rec["version"] = 1;
  id_rec["n_in"] = 1;
  id_rec["n_out"] = 1;
  id_rec["repr"] = "unitary";
  id_rec["data"] = io::matrix_record(CMatrix::Identity(2, 2));
  Json z_rec = id_rec;
  z_rec["data"] = io::matrix_record(gate_matrix("Z", 1));
  std::string a = write("idchan.json", id_rec);
  std::string b = write("zchan.json", z_rec);
  CmdResult r1 = run("distance --kind diamond " + a + " " + b + " --seed 5 --format record");
  CmdResult r2 = run("distance --kind diamond " + a + " " + b + " --seed 5 --format record");
  EXPECT_EQ(r1.out, r2.out);
  EXPECT_NEAR(Json::parse(r1.out)["value"].get<double>(), 2.0, 1e-4);
}

TEST_F(CliTest, DistanceUnitaryPair) {
  Json id_rec;
  id_rec["version"] = 1;
  id_rec["n_in"] = 1;
  id_rec["n_out"] = 1;
  id_rec["repr"] = "unitary";
  id_rec["data"] = io::matrix_record(CMatrix::Identity(2, 2));
  Json ph = id_rec;
  ph["data"] = io::matrix_record(gate_matrix("PHASE", 1, 1.0));
  CmdResult res = run("distance --kind unitary-pair " + write("i.json", id_rec) + " " +
                      write("ph.json", ph) + " --format record");
  EXPECT_EQ(res.exit_code, 0);
  EXPECT_NEAR(Json::parse(res.out)["value"].get<double>(), 2.0 * std::sin(0.5), 1e-12);
}

TEST_F(CliTest, AnalyzeGhz) {
  Json c = io::circuit_record(ghz_fanout_circuit(4));
  CmdResult res = run("analyze " + write("ghz4.json", c) + " --fanin 2 --format record");
  EXPECT_EQ(res.exit_code, 0);
  Json rec = Json::parse(res.out);
  EXPECT_EQ(rec["depth"].get<int>(), 3);  // H + 2 doubling layers
  EXPECT_EQ(rec["c"].get<int>(), 3);
  EXPECT_TRUE(rec["satisfied"].get<bool>());
  EXPECT_EQ(rec["edges"].size(), 6u);
}

TEST_F(CliTest, VerifySuitePassesAndNegativeControlFails) {
  CmdResult ok = run("verify gs --seed 11");
  EXPECT_EQ(ok.exit_code, 0);
  EXPECT_NE(ok.out.find("PASS gs.compact_equals_bruteforce"), std::string::npos);
  EXPECT_NE(ok.out.find("overall PASS"), std::string::npos);

  CmdResult bad = run("verify gs --seed 11 --tol 1e-18");
  EXPECT_EQ(bad.exit_code, 5);
  EXPECT_NE(bad.out.find("FAIL gs."), std::string::npos);
}

TEST_F(CliTest, RunWithStateFile) {
  // H applied to |+> gives |0>: deterministic outcome 0.
  CVector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  std::string state = write("plus.json", io::state_record(pure(plus)));
  CmdResult res =
      run("run " + write("hm2.json", h_measure_circuit()) + " --state " + state +
          " --format record");
  EXPECT_EQ(res.exit_code, 0);
  Json rec = Json::parse(res.out);
  EXPECT_NEAR(rec["distribution"][0].get<double>(), 1.0, 1e-12);
}

TEST_F(CliTest, UnknownFlagExitsTwo) {
  EXPECT_EQ(run("run --bogus").exit_code, 2);
}

TEST_F(CliTest, MaxQubitsFlagOutOfRangeExitsTwo) {
  Json c = io::circuit_record(Circuit::make(1, {}, {0}, {}));
  EXPECT_EQ(run("run " + write("id2.json", c) + " --input 0 --max-qubits 13").exit_code, 2);
}

}  // namespace
