#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(PVP_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pvp_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("cli: zero episodes is a configuration error") {
  const Run r = cli("collect --episodes 0 --seed 1 --out " + scratch("zero").string());
  CHECK(r.code == 2);
}

TEST_CASE("cli: unwritable output is an i/o error") {
  const Run r = cli("collect --episodes 1 --seed 1 --out /proc/pvp_no_such_dir/d");
  CHECK(r.code == 3);
  CHECK(cli("train --data /nonexistent --out x.bin --seed 1").code == 2);
}

TEST_CASE("cli: unknown flags are fatal") {
  CHECK(cli("collect --episodes 1 --seed 1 --out /tmp/x --bogus").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("ablate robustness --out /tmp/x").code == 2);  // seeds are mandatory
}

TEST_CASE("cli: every subcommand documents its flags") {
  const std::vector<std::pair<std::string, std::vector<std::string>>> cmds = {
      {"collect", {"--scene", "--episodes", "--source", "--ccg", "--tr", "--noise-aug", "--seed", "--out", "--jobs",
                   "--no-timestamps"}},
      {"train", {"--data", "--out", "--seed", "--modes", "--det", "--epochs", "--lr"}},
      {"eval", {"--params", "--rollouts", "--seed", "--out"}},
      {"ablate robustness", {"--seeds", "--out", "--episodes"}},
      {"ablate noise", {"--seeds", "--out", "--rollouts"}},
      {"ablate kinesthetic", {"--seeds", "--out", "--sizes"}},
      {"stats", {"--data", "--out"}},
  };
  for (const auto& [cmd, flags] : cmds) {
    const Run r = cli(cmd + " --help");
    CHECK(r.code == 0);
    for (const auto& f : flags) CHECK_MESSAGE(r.out.find(f) != std::string::npos, cmd << " lacks " << f);
  }
}

TEST_CASE("cli: collect and stats are byte-identical across runs") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::string common = "collect --episodes 4 --ccg --tr --noise-aug --seed 7 --jobs 1 --no-timestamps --out ";
  const Run ra = cli(common + a.string());
  const Run rb = cli(common + b.string());
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(ra.out.find("collected 4 episodes") != std::string::npos);
  for (const char* f : {"episodes.bin", "manifest.json", "telemetry.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(!slurp(a / f).empty());
  }
  REQUIRE(cli("stats --data " + a.string() + " --out " + (a / "stats.json").string()).code == 0);
  REQUIRE(cli("stats --data " + b.string() + " --out " + (b / "stats.json").string()).code == 0);
  CHECK(slurp(a / "stats.json") == slurp(b / "stats.json"));

  // A corrupted container surfaces as an integrity failure.
  {
    std::fstream f(a / "episodes.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    f.put('\x7f');
  }
  CHECK(cli("train --data " + a.string() + " --out " + (a / "p.bin").string() + " --seed 1 --epochs 1").code == 3);
  fs::remove_all(a);
  fs::remove_all(b);
}
