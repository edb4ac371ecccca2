#include <chrono>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tea/process.hpp"

namespace tea::process {
namespace {

using namespace std::chrono_literals;

TEST(Process, CapturesStreamsAndExitCode) {
  auto r = run({"sh", "-c", "echo out; echo err >&2; exit 3"});
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(r.stdout_text, "out\n");
  EXPECT_EQ(r.stderr_text, "err\n");
  EXPECT_FALSE(r.timed_out);
}

TEST(Process, WorkingDirectoryAndEnvironment) {
  testing::TempDir dir;
  auto r = run({"sh", "-c", "pwd; printf %s \"$TEA_PROBE\""}, dir.path(), 10s, {{"TEA_PROBE", "value"}});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.stdout_text, std::filesystem::canonical(dir.path()).string() + "\nvalue");
}

TEST(Process, LargeOutputDoesNotDeadlock) {
  auto r = run({"sh", "-c", "head -c 300000 /dev/zero | tr '\\0' a; head -c 300000 /dev/zero | tr '\\0' b >&2"});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.stdout_text.size(), 300000u);
  EXPECT_EQ(r.stderr_text.size(), 300000u);
}

TEST(Process, TimeoutKills) {
  auto start = std::chrono::steady_clock::now();
  auto r = run({"sleep", "30"}, {}, 300ms);
  EXPECT_TRUE(r.timed_out);
  EXPECT_EQ(r.exit_code, -1);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 10s);
}

TEST(Process, MissingExecutable) {
  EXPECT_THROW(run({"tea-no-such-binary-xyz"}), SpawnError);
  EXPECT_THROW(run({}), std::invalid_argument);
}

TEST(Process, Which) {
  EXPECT_FALSE(which("sh").empty());
  EXPECT_TRUE(which("sh").is_absolute());
  EXPECT_TRUE(which("tea-no-such-binary-xyz").empty());
}

}  // namespace
}  // namespace tea::process
