#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  std::string cmd = std::string("\"") + POLYRAY_CLI + "\" " + args + " 2>&1";
  Outcome r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  int st = pclose(pipe);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string fixture(const char* name) { return std::string("--poly ") + POLYRAY_FIXTURE_DIR + "/" + name; }

}  // namespace

TEST(Cli, PmapEvalPrintsExactRational) {
  Outcome r = run("pmap eval " + fixture("cubic.json") + " --angle 5/8");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1/3\n");
}

TEST(Cli, PotentialIsJson) {
  Outcome r = run("poly green " + fixture("cubic.json") + " --point 3,0");
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["escaped"].get<bool>());
  EXPECT_NEAR(std::stod(j["potential"].get<std::string>()), 1.2301213658591836, 1e-12);
}

TEST(Cli, ConnectedPolynomialIsRejected) {
  Outcome r = run("renorm detect " + fixture("connected.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("NotDisconnected"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("pmap eval " + fixture("cubic.json") + " --angle 0.25").code, 2);
  EXPECT_EQ(run("pmap eval " + fixture("cubic.json") + " --bogus").code, 2);
}

TEST(Cli, CorruptedBaseLevelFailsVerification) {
  Outcome r = run("verify all " + fixture("cubic.json") + " --depth 4 --b0 0.1878");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("margin"), std::string::npos);
}
