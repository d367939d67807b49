#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hmcd_cli_" + std::to_string(std::rand()) + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = hmcd::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

const char* kToyModel =
    "hmcd-hmm 1\nnum_states 2\nnum_items 3\nseed 0\npi\n1 0\ntrans\n0.9 0.1\n0 1\nemis\n0.9 0.1 0\n0 0.1 0.9\n";

}  // namespace

TEST_CASE("synth writes labeled sequences deterministically") {
  TempDir dir;
  auto r = cli({"synth", "--planted", "h=2", "m=100", "--count", "500", "--seed", "7", "-o", dir / "a.csv"});
  REQUIRE(r.code == 0);
  r = cli({"synth", "--planted", "h=2", "m=100", "--count", "500", "--seed", "7", "-o", dir / "b.csv"});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  std::istringstream in(slurp(dir / "a.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "user_id,item_id,position,change_point,src1,src2");
  std::set<std::string> users;
  while (std::getline(in, line)) users.insert(line.substr(0, line.find(',')));
  CHECK(users.size() == 500);
  CHECK(fs::exists(dir / "a.csv.config"));

  r = cli({"synth", "--planted", "h=2", "m=100", "--count", "3", "--seed", "7"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("user_id,item_id,position,change_point,src1,src2\n", 0) == 0);
}

TEST_CASE("usage errors exit with 2") {
  auto r = cli({"synth", "--planted", "h=2"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--count") != std::string::npos);
  CHECK(cli({"recommend", "-i", "x.csv", "--method", "fossil"}).code == 2);
  CHECK(cli({"evaluate", "-i", "x.csv", "--detector", "gru"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"synth", "--planted", "h=2", "q=1", "--count", "1"}).code == 2);
}

TEST_CASE("missing input exits with 1") {
  CHECK(cli({"fit-hmm", "-i", "/nonexistent/file.csv", "-o", "/tmp/x.hmm"}).code == 1);
}

TEST_CASE("detect on the toy model reports index 2") {
  TempDir dir;
  write(dir / "toy.hmm", kToyModel);
  write(dir / "toy.hmm.vocab", "a\nb\nc\n");
  write(dir / "toy.csv", "user_id,item_id,position\nu,a,0\nu,a,1\nu,c,2\nu,c,3\n");
  const auto r = cli({"detect", "-i", dir / "toy.csv", "--model", dir / "toy.hmm", "--tau", "0.93", "--mode",
                      "candidate-max", "-o", dir / "cp.csv"});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "cp.csv") == "user_id,index,score\nu,2,1\n");

  write(dir / "short.vocab", "a\nb\n");
  const auto bad = cli({"detect", "-i", dir / "toy.csv", "--model", dir / "toy.hmm", "--vocab", dir / "short.vocab"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("vocabulary") != std::string::npos);
}

TEST_CASE("recommend poprank lists the available items") {
  TempDir dir;
  write(dir / "toy.csv", "user_id,item_id,position\nu,a,0\nu,a,1\nu,b,2\nv,a,0\nv,b,1\nv,c,2\n");
  const auto r = cli({"recommend", "-i", dir / "toy.csv", "--method", "poprank", "-l", "5", "-o", dir / "r.csv"});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "r.csv") ==
        "user_id,rank,item_id,score\nu,1,a,3\nu,2,b,2\nu,3,c,1\nv,1,a,3\nv,2,b,2\nv,3,c,1\n");
  const auto ex = cli({"recommend", "-i", dir / "toy.csv", "--method", "poprank", "-l", "5", "--exclude-seen"});
  REQUIRE(ex.code == 0);
  CHECK(ex.out == "user_id,rank,item_id,score\nu,1,c,1\n");
}

TEST_CASE("environment variables override defaults") {
  TempDir dir;
  write(dir / "toy.hmm", kToyModel);
  write(dir / "toy.hmm.vocab", "a\nb\nc\n");
  write(dir / "toy.csv", "user_id,item_id,position\nu,a,0\nu,a,1\nu,c,2\nu,c,3\n");
  ::setenv("HMCD_TAU", "1.0", 1);
  const auto r = cli({"detect", "-i", dir / "toy.csv", "--model", dir / "toy.hmm"});
  ::unsetenv("HMCD_TAU");
  REQUIRE(r.code == 0);
  CHECK(r.out == "user_id,index,score\n");
}

TEST_CASE("pipeline stages compose and evaluate prints the metric table") {
  TempDir dir;
  REQUIRE(cli({"synth", "--planted", "h=2", "m=20", "pool=20", "length=60", "--count", "30", "--min-window", "15",
               "--max-window", "30", "--seed", "3", "-o", dir / "s.csv"})
              .code == 0);
  REQUIRE(cli({"fit-hmm", "-i", dir / "s.csv", "--seed", "1", "-o", dir / "m.hmm"}).code == 0);
  REQUIRE(cli({"detect", "-i", dir / "s.csv", "--model", dir / "m.hmm", "-o", dir / "cp.csv"}).code == 0);
  REQUIRE(cli({"recommend", "-i", dir / "s.csv", "--method", "smf", "--change-points", dir / "cp.csv", "--factors",
               "4", "--nmf-iters", "30", "-o", dir / "r.csv"})
              .code == 0);
  CHECK(slurp(dir / "r.csv").rfind("user_id,rank,item_id,score\n", 0) == 0);
  const auto e = cli({"evaluate", "-i", dir / "s.csv", "--method", "nmf,smf", "--detector", "hmcd", "--k", "1,5,10",
                      "--factors", "4", "--nmf-iters", "30", "--percent", "-o", dir / "ev.csv"});
  REQUIRE(e.code == 0);
  const auto table = slurp(dir / "ev.csv");
  CHECK(table.substr(0, table.find('\n')) == "method,P@1,P@5,P@10,R@1,R@5,R@10,nDCG@5,nDCG@10");
  CHECK(slurp(dir / "ev.csv.cp.csv").rfind("detector,mean_delta,std_delta,count\n", 0) == 0);
  CHECK(slurp(dir / "ev.csv.config").find("evaluate.method=nmf,smf") != std::string::npos);
}
