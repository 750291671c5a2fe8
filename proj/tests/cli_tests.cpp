// End-to-end checks of the ccdet command line: each scenario runs the real
// binary as a child process against a scratch directory and judges its exit
// code, console output, and the files it leaves behind.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string g_cli;   // binary under test, from argv[1]
fs::path g_scratch;  // everything the tool writes lands under here

struct CmdResult {
  int status = -1;     // exit code, or -1 when the child did not exit normally
  std::string output;  // stdout and stderr combined
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::size_t line_count(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

// Runs `env_prefix ccdet args` under /bin/sh with both streams captured.
CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const fs::path log = g_scratch / ("cmd-" + std::to_string(counter++) + ".log");
  std::string cmd;
  if (!env_prefix.empty()) cmd += env_prefix + " ";
  cmd += g_cli + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  CmdResult r;
  if (rc != -1 && WIFEXITED(rc)) r.status = WEXITSTATUS(rc);
  r.output = slurp(log);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = g_scratch / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// Pulls A and B out of the trailing "verdict: A/B blocks covert" line.
std::pair<std::size_t, std::size_t> parse_verdict(const std::string& output) {
  const auto pos = output.rfind("verdict: ");
  REQUIRE(pos != std::string::npos);
  std::istringstream in(output.substr(pos + 9));
  std::size_t covert = 0, total = 0;
  char slash = 0;
  in >> covert >> slash >> total;
  REQUIRE(slash == '/');
  return {covert, total};
}

}  // namespace

TEST_CASE("help requests succeed and usage errors exit with code 2") {
  CHECK(run_cli("--help").status == 0);
  CHECK(contains(run_cli("--help").output, "simulate"));
  CHECK(run_cli("simulate --help").status == 0);

  CHECK(run_cli("").status == 2);                        // a subcommand is required
  CHECK(run_cli("simulate --no-such-flag").status == 2);
  CHECK(run_cli("featurize").status == 2);               // missing required options
  CHECK(run_cli("simulate --channel cpu --bits 0").status == 2);

  const auto excl = run_cli("simulate --overt --channel cpu");
  CHECK(excl.status == 2);
  CHECK(contains(excl.output, "mutually exclusive"));

  const auto dir = fresh_dir("usage");
  CHECK(run_cli("simulate --channel cpu --bits 8 --set svm.gamma --run-dir " + dir.string())
            .status == 2);
}

TEST_CASE("runtime failures exit with code 1 and an error message") {
  const auto dir = fresh_dir("runtime-errors");
  const auto bad_channel = run_cli("simulate --channel bogus --run-dir " + dir.string());
  CHECK(bad_channel.status == 1);
  CHECK(contains(bad_channel.output, "error:"));

  const auto missing = run_cli("detect --input nope.txt --model nope.txt --reference nope.txt");
  CHECK(missing.status == 1);
  CHECK(contains(missing.output, "error:"));
}

TEST_CASE("simulate writes a covert trace and reports a clean round trip") {
  const auto dir = fresh_dir("sim-covert");
  const auto res = run_cli("simulate --channel cpu --bits 64 --run-dir " + dir.string());
  REQUIRE(res.status == 0);
  // 64 bits under the default 7/10/20 s rotation span 595 one-second samples.
  CHECK(contains(res.output, "wrote 595 covert samples (cpu channel, 64 bits)"));
  CHECK(contains(res.output, "round-trip bit error rate: 0 (0/64)"));

  const fs::path trace = dir / "trace-covert-cpu.txt";
  REQUIRE(fs::exists(trace));
  CHECK(first_line(trace).rfind("# label=covert channel=cpu seed=", 0) == 0);
  CHECK(line_count(trace) == 1 + 595);
}

TEST_CASE("simulate honors global flags before or after the subcommand") {
  const auto before = fresh_dir("flags-before");
  const auto after = fresh_dir("flags-after");
  REQUIRE(run_cli("--run-dir " + before.string() + " simulate --channel cpu --bits 8").status == 0);
  REQUIRE(run_cli("simulate --channel cpu --bits 8 --run-dir " + after.string()).status == 0);
  CHECK(fs::exists(before / "trace-covert-cpu.txt"));
  CHECK(fs::exists(after / "trace-covert-cpu.txt"));
  CHECK(slurp(before / "trace-covert-cpu.txt") == slurp(after / "trace-covert-cpu.txt"));

  const auto env_dir = fresh_dir("env-run-dir");
  REQUIRE(run_cli("simulate --channel cpu --bits 8",
                  "CCDET_RUN_DIR=" + env_dir.string()).status == 0);
  CHECK(fs::exists(env_dir / "trace-covert-cpu.txt"));
}

TEST_CASE("simulate is deterministic in the master seed") {
  const auto a = fresh_dir("seed-a");
  const auto b = fresh_dir("seed-b");
  const auto c = fresh_dir("seed-c");
  REQUIRE(run_cli("simulate --channel membus --bits 32 --run-dir " + a.string()).status == 0);
  REQUIRE(run_cli("simulate --channel membus --bits 32 --run-dir " + b.string()).status == 0);
  REQUIRE(run_cli("simulate --channel membus --bits 32 --seed 43 --run-dir " + c.string())
              .status == 0);
  CHECK(slurp(a / "trace-covert-membus.txt") == slurp(b / "trace-covert-membus.txt"));
  CHECK(slurp(a / "trace-covert-membus.txt") != slurp(c / "trace-covert-membus.txt"));
}

TEST_CASE("simulate writes overt traffic with the profile in the filename") {
  const auto dir = fresh_dir("sim-overt");
  const auto res = run_cli("simulate --overt --duration 1200 --profile bursty --run-dir " +
                           dir.string());
  REQUIRE(res.status == 0);
  CHECK(contains(res.output, "overt samples (bursty, 1200 s)"));
  const fs::path trace = dir / "trace-overt-bursty.txt";
  REQUIRE(fs::exists(trace));
  CHECK(first_line(trace).rfind("# label=overt channel=- seed=", 0) == 0);
  CHECK(line_count(trace) > 1);
}

TEST_CASE("config file values apply and --set overrides them") {
  const auto dir = fresh_dir("config-precedence");
  const fs::path cfg = dir / "lab.cfg";
  std::ofstream(cfg) << "# pick the cache channel by default\n"
                     << "channel.kind = cache\n";

  REQUIRE(run_cli("simulate --bits 16 --config " + cfg.string() + " --run-dir " + dir.string())
              .status == 0);
  CHECK(fs::exists(dir / "trace-covert-cache.txt"));

  REQUIRE(run_cli("simulate --bits 16 --config " + cfg.string() +
                  " --set channel.kind=membus --run-dir " + dir.string())
              .status == 0);
  CHECK(fs::exists(dir / "trace-covert-membus.txt"));
}

TEST_CASE("the pipeline runs end to end: simulate, featurize, train, detect") {
  const auto dir = fresh_dir("pipeline");
  const std::string d = dir.string();
  const fs::path covert = dir / "trace-covert-cpu.txt";
  const fs::path reference = dir / "trace-overt-steady.txt";

  REQUIRE(run_cli("simulate --channel cpu --bits 64 --run-dir " + d).status == 0);
  REQUIRE(run_cli("simulate --overt --duration 3600 --profile steady --run-dir " + d).status == 0);

  // Featurize the covert trace alone: 595 samples give 594 intervals, which
  // split into 11 full blocks of 50 plus a kept remainder of 44.
  const auto feat = run_cli("featurize --input " + covert.string() + " --reference " +
                            reference.string() + " --block-size 50 --out " + d +
                            "/sig-covert.csv --run-dir " + d);
  REQUIRE(feat.status == 0);
  CHECK(contains(feat.output, "wrote 594 records (12 blocks of 50)"));
  CHECK(first_line(dir / "sig-covert.csv") == "alpha,beta,context,label");
  CHECK(line_count(dir / "sig-covert.csv") == 1 + 594);

  // A covert trace cannot serve as the overt reference.
  CHECK(run_cli("featurize --input " + covert.string() + " --reference " + covert.string() +
                " --block-size 50 --run-dir " + d)
            .status == 1);

  // Mixed dataset for training.
  const auto both = run_cli("featurize --input " + covert.string() + " --input " +
                            reference.string() + " --reference " + reference.string() +
                            " --block-size 50 --out " + d + "/data.csv --run-dir " + d);
  REQUIRE(both.status == 0);

  const auto train = run_cli("train --data " + d + "/data.csv --balance 400 --workers 4 --out " +
                             d + "/model.txt --run-dir " + d);
  REQUIRE(train.status == 0);
  CHECK(contains(train.output, "trained 4 workers on 400 records"));
  CHECK(first_line(dir / "model.txt").rfind("# model ", 0) == 0);
  for (int w = 1; w <= 4; ++w)
    CHECK(fs::exists(dir / ("model-worker-" + std::to_string(w) + ".txt")));
  CHECK(!fs::exists(dir / "model-worker-5.txt"));

  // Single-worker training skips the partition step and the worker files.
  const auto solo_dir = fresh_dir("pipeline-solo");
  const auto solo = run_cli("train --data " + d + "/data.csv --balance 400 --workers 1 --out " +
                            solo_dir.string() + "/model.txt --run-dir " + solo_dir.string());
  REQUIRE(solo.status == 0);
  CHECK(contains(solo.output, "trained on 400 records"));
  CHECK(!fs::exists(solo_dir / "model-worker-1.txt"));

  // Training is deterministic: the same data and seed give the same model file.
  const auto again_dir = fresh_dir("pipeline-again");
  REQUIRE(run_cli("train --data " + d + "/data.csv --balance 400 --workers 4 --out " +
                  again_dir.string() + "/model.txt --run-dir " + again_dir.string())
              .status == 0);
  CHECK(slurp(dir / "model.txt") == slurp(again_dir / "model.txt"));

  // The covert trace comes back all-covert, block by block.
  const auto hit = run_cli("detect --input " + covert.string() + " --model " + d +
                           "/model.txt --reference " + reference.string() + " --block-size 50");
  REQUIRE(hit.status == 0);
  const auto [hit_covert, hit_total] = parse_verdict(hit.output);
  CHECK(hit_total == 12);
  CHECK(hit_covert == hit_total);

  // A fresh overt trace (different seed) comes back all-overt.
  REQUIRE(run_cli("simulate --overt --duration 1800 --profile steady --seed 99 --run-dir " + d +
                  " --out " + d + "/probe-overt.txt")
              .status == 0);
  const auto miss = run_cli("detect --input " + d + "/probe-overt.txt --model " + d +
                            "/model.txt --reference " + reference.string() + " --block-size 50");
  REQUIRE(miss.status == 0);
  const auto [miss_covert, miss_total] = parse_verdict(miss.output);
  CHECK(miss_total >= 1);
  CHECK(miss_covert == 0);
}

TEST_CASE("evaluate writes the report pair and one summary line per cell") {
  const auto dir = fresh_dir("evaluate");
  const auto res = run_cli("evaluate --run-dir " + dir.string());
  REQUIRE(res.status == 0);
  for (const std::string channel : {"cpu", "cache", "membus"})
    for (const std::string block : {"5000", "200"})
      CHECK(contains(res.output, channel + " @" + block + ": sensitivity "));
  CHECK(contains(res.output, "wrote " + (dir / "report.txt").string()));

  REQUIRE(fs::exists(dir / "report.csv"));
  REQUIRE(fs::exists(dir / "report.txt"));
  CHECK(first_line(dir / "report.csv") ==
        "channel,block_size,tn,fp,fn,tp,sensitivity,specificity,noise_delta");
  CHECK(line_count(dir / "report.csv") == 1 + 6);
  CHECK(contains(slurp(dir / "report.txt"), "master seed: 42"));
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_tests <path-to-ccdet-binary> [doctest options]\n";
    return 2;
  }
  g_cli = fs::absolute(argv[1]).string();
  g_scratch = fs::temp_directory_path() / "ccdet-cli-tests";
  fs::remove_all(g_scratch);
  fs::create_directories(g_scratch);

  doctest::Context ctx;
  ctx.applyCommandLine(argc - 1, argv + 1);
  return ctx.run();
}
