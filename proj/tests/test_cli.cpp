#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <sstream>
#include <sys/wait.h>

#include "iapf/io.hpp"
#include "support.hpp"

using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

std::string q(const std::string& s) { return "'" + s + "'"; }

Result cli(const std::string& args) {
  const std::string cmd = q(IAPF_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

// Demo dataset shared by the tests below.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("iapf_cli");
    ASSERT_EQ(cli("demo synth --n 3 --seed 5 --out " + q(d())).status, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string d() { return dir_->path().string(); }

  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

}  // namespace

TEST_F(CliTest, FixtureValidate) {
  const Result ok = cli("fixture validate " + q(d() + "/fixtures"));
  EXPECT_EQ(ok.status, 0);
  EXPECT_EQ(ok.out, "valid\n");

  TempDir broken;
  fs::copy(d() + "/fixtures", broken.path(), fs::copy_options::recursive);
  fs::remove_all(broken / "synth_0001" / "boxes");
  const Result bad = cli("fixture validate " + q(broken.path().string()));
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.out.find("violation(s)"), std::string::npos);
}

TEST_F(CliTest, RunBackendsAgree) {
  const std::string images = q(d() + "/images");
  EXPECT_EQ(cli("run --images " + images + " --backend synthetic --out " + q(d() + "/syn")).out, "3 ok, 0 failed\n");
  EXPECT_EQ(cli("run --images " + images + " --backend " + q("fixture:" + d() + "/fixtures") + " --out " +
                 q(d() + "/fix"))
                .status,
            0);
  const std::string server = "subprocess:" + q(IAPF_CLI_PATH) + " serve --backend synthetic";
  EXPECT_EQ(cli("run --images " + images + " --backend " + q(server) + " --jobs 2 --out " + q(d() + "/sub")).status, 0);
  for (const char* id : {"synth_0000", "synth_0001", "synth_0002"}) {
    for (const char* ext : {".png", ".inst.json", ".artifact.json"}) {
      const std::string name = std::string(id) + ext;
      const std::string ref = iapf::io::read_file(d() + "/syn/" + name);
      EXPECT_EQ(iapf::io::read_file(d() + "/fix/" + name), ref) << name;
      EXPECT_EQ(iapf::io::read_file(d() + "/sub/" + name), ref) << name;
    }
  }
}

TEST_F(CliTest, RunReportsFailuresAndExitsNonZero) {
  TempDir fx;
  fs::copy(d() + "/fixtures", fx.path(), fs::copy_options::recursive);
  fs::remove_all(fx / "synth_0002" / "segments");
  const Result r = cli("run --images " + q(d() + "/images") + " --backend " + q("fixture:" + fx.path().string()) +
                        " --out " + q(d() + "/partial"));
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.out, "2 ok, 1 failed\n");
}

TEST_F(CliTest, PromptOptions) {
  TempDir t;
  iapf::io::write_file(t / "prompts.txt", "# synonyms\nhidden animal\n\nconcealed creature\n");
  const Result r = cli("run --images " + q(d() + "/images") + " --backend synthetic --prompts " +
                        q((t / "prompts.txt").string()) + " --repeats 4 --out " + q((t / "o").string()));
  ASSERT_EQ(r.status, 0);
  const auto art = iapf::io::read_json(t / "o" / "synth_0000.artifact.json");
  ASSERT_EQ(art["runs"].size(), 4u);
  EXPECT_EQ(art["runs"][0]["prompt"], "hidden animal");
  EXPECT_EQ(art["runs"][3]["prompt"], "concealed creature");
  EXPECT_FALSE(art.contains("timings_s"));

  EXPECT_NE(cli("run --images " + q(d() + "/images") + " --backend synthetic --prompt x --prompts " +
                 q((t / "prompts.txt").string()) + " --out " + q((t / "o2").string()))
                .status,
            0);
  EXPECT_NE(cli("run --images " + q(d() + "/images") + " --backend nonsense --out " + q((t / "o3").string())).status,
            0);
}

TEST_F(CliTest, ConfigFileAndTimings) {
  TempDir t;
  iapf::io::write_file(t / "cfg.json", R"({"repeats": 2, "generator": {"sampling": {"k_fg": 2}}})");
  ASSERT_EQ(cli("run --images " + q(d() + "/images") + " --backend synthetic --config " +
                 q((t / "cfg.json").string()) + " --timings --out " + q((t / "o").string()))
                .status,
            0);
  const auto art = iapf::io::read_json(t / "o" / "synth_0001.artifact.json");
  EXPECT_EQ(art["runs"].size(), 2u);
  EXPECT_TRUE(art.contains("timings_s"));

  iapf::io::write_file(t / "bad.json", R"({"repeats": 2, "typo": 1})");
  EXPECT_NE(cli("run --images " + q(d() + "/images") + " --backend synthetic --config " +
                 q((t / "bad.json").string()) + " --out " + q((t / "o2").string()))
                .status,
            0);
}

TEST_F(CliTest, EvalTables) {
  ASSERT_EQ(cli("run --images " + q(d() + "/images") + " --backend synthetic --out " + q(d() + "/ev")).status, 0);
  const Result cos = cli("eval cos --pred " + q(d() + "/ev") + " --gt " + q(d() + "/gt"));
  EXPECT_EQ(cos.status, 0);
  EXPECT_NE(cos.out.find("MEAN\t1.000000\t1.000000\t0.000000\t1.000000\n"), std::string::npos) << cos.out;
  const Result cis = cli("eval cis --pred " + q(d() + "/ev") + " --gt " + q(d() + "/gt"));
  EXPECT_EQ(cis.out, "ap\tap50\tap75\n1.000000\t1.000000\t1.000000\n");
  const std::string out_file = d() + "/boxes.tsv";
  const Result boxes =
      cli("eval boxes --pred " + q(d() + "/ev") + " --gt " + q(d() + "/gt") + " --iou 0.75 --out " + q(out_file));
  EXPECT_EQ(boxes.out, "iou\tbox_ap\n0.75\t1.000000\n");
  EXPECT_EQ(iapf::io::read_file(out_file), boxes.out);
  EXPECT_NE(cli("eval cos --pred " + q(d() + "/nowhere") + " --gt " + q(d() + "/gt")).status, 0);
}

TEST_F(CliTest, ServeAnswersRequests) {
  const std::string img = d() + "/images/synth_0000.png";
  const std::string req1 = R"({"id":1,"method":"detect_boxes","params":{"image_path":")" + img + R"(","tag":"zzz"}})";
  const std::string req2 = R"({"id":2,"method":"nope","params":{}})";
  TempDir t;
  iapf::io::write_file(t / "req.txt", req1 + "\n" + req2 + "\nnot json\n");
  const Result r = cli("serve --backend synthetic < " + q((t / "req.txt").string()));
  EXPECT_EQ(r.status, 0);
  std::istringstream lines(r.out);
  std::string l;
  std::vector<nlohmann::json> replies;
  while (std::getline(lines, l)) replies.push_back(nlohmann::json::parse(l));
  ASSERT_EQ(replies.size(), 3u);
  EXPECT_EQ(replies[0]["id"], 1);
  EXPECT_EQ(replies[0]["error"]["code"], 2);
  EXPECT_EQ(replies[1]["error"]["code"], 1);
  EXPECT_TRUE(replies[2]["id"].is_null());
}
