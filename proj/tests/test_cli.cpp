// Copyright 2026 The CrowdNER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crowdner/checkpoint.hpp"
#include "crowdner/cli.hpp"
#include "crowdner/crowd.hpp"
#include "crowdner/synth.hpp"
#include "support.hpp"

using namespace crowdner;
using crowdner::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Runs the installed tool; stdout goes to `stdout_path` when given.
int cli(const std::string& args, const std::string& stdout_path = "") {
  const std::string cmd = std::string("AA_LOG=error ") + CROWDNER_CLI + " " + args + " > " +
                          (stdout_path.empty() ? std::string("/dev/null") : stdout_path) + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

constexpr const char* kSmall =
    " --set d_model=16 --set d_ff=32 --set d_h=8 --set d_adapter=4 --set batch_size=8";

/// A synthetic crowd corpus with three annotators written to `dir/crowd.tsv`.
std::string write_crowd(const TempDir& dir, std::size_t sentences) {
  const auto gold = generate_gold_corpus(sentences, 4);
  std::vector<AnnotatorProfile> profiles = {AnnotatorProfile::clean("ann", 3), AnnotatorProfile::clean("bo", 3),
                                            AnnotatorProfile::spammer("cy", 3)};
  profiles[1].miss_rate = 0.3;
  const auto c = synth_generate(gold, profiles, std::vector<double>(3, 0.7), 6);
  const std::string path = dir.file("crowd.tsv");
  write_corpus(c, path);
  save_tagset(c.tagset, path + ".tags");
  return path;
}

std::vector<std::string> tree(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("config files are flat key = value text") {
  std::istringstream in("# comment\n\nepochs = 3\n  seed=7  \nmode = all\n");
  const auto kv = parse_key_values(in, "run.cfg");
  REQUIRE(kv.size() == 3);
  CHECK(kv[0] == std::pair<std::string, std::string>{"epochs", "3"});
  CHECK(kv[1] == std::pair<std::string, std::string>{"seed", "7"});
  std::istringstream bad("epochs = 3\nnonsense\n");
  CHECK_THROWS_WITH_AS(parse_key_values(bad, "run.cfg"), doctest::Contains("run.cfg:2"), UsageError);
  CHECK_THROWS_AS(load_key_values("/nonexistent/run.cfg"), DataError);
}

TEST_CASE("run config rejects unknown keys and hashes its entries") {
  RunConfig cfg;
  cfg.apply({{"epochs", "4"}, {"mode", "mv"}, {"filter_k", "2"}, {"corpus", "x.tsv"}});
  CHECK(cfg.train.epochs == 4);
  CHECK(cfg.mode == "mv");
  CHECK(cfg.filter_k == 2u);
  CHECK_THROWS_AS(cfg.set("epoch", "4"), UsageError);
  CHECK_THROWS_AS(cfg.set("filter_k", "-1"), UsageError);
  const auto entries = cfg.entries();
  CHECK(std::is_sorted(entries.begin(), entries.end()));
  RunConfig again;
  again.apply(entries);
  CHECK(again.hash() == cfg.hash());
  again.set("seed", "99");
  CHECK(again.hash() != cfg.hash());
}

TEST_CASE("flags override the config file and --set overrides flags") {
  TempDir tmp("prec");
  spit(tmp.file("run.cfg"), "seed = 3\nepochs = 5\n");
  const std::string out = tmp.file("g.txt");
  REQUIRE(cli("gradcheck --config " + tmp.file("run.cfg") + " --out " + out) == 0);
  auto manifest = nlohmann::json::parse(slurp(out + ".manifest.json"));
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["config"]["epochs"] == "5");

  REQUIRE(cli("gradcheck --config " + tmp.file("run.cfg") + " --seed 7 --out " + out) == 0);
  manifest = nlohmann::json::parse(slurp(out + ".manifest.json"));
  CHECK(manifest["seed"] == 7);

  REQUIRE(cli("gradcheck --config " + tmp.file("run.cfg") + " --seed 7 --set seed=9 --out " + out) == 0);
  manifest = nlohmann::json::parse(slurp(out + ".manifest.json"));
  CHECK(manifest["seed"] == 9);
  CHECK(manifest.contains("config_hash"));
}

TEST_CASE("exit codes follow the error class") {
  TempDir tmp("codes");
  const auto crowd = write_crowd(tmp, 6);
  CHECK(cli("") == 1);
  CHECK(cli("frobnicate") == 1);
  CHECK(cli("train --help") == 0);
  CHECK(cli("train --corpus " + crowd + " --set nonsense=1") == 1);
  CHECK(cli("train --corpus " + crowd + " --mode annotator-sup") == 1);
  CHECK(cli("train --corpus " + tmp.file("missing.tsv")) == 2);
  spit(tmp.file("broken.tsv"), "a\tO\tO\nb\tO\n");
  spit(tmp.file("broken.tsv.tags"), "O\nB-PER\nI-PER\n");
  CHECK(cli("aggregate --corpus " + tmp.file("broken.tsv") + " --out " + tmp.file("agg.tsv")) == 2);
  spit(tmp.file("p.json"), "[{\"name\": ");
  CHECK(cli("synth --profiles " + tmp.file("p.json") + " --sentences 5 --out " + tmp.file("s.tsv")) == 2);
  CHECK(cli("train --corpus " + crowd + " --epochs 3 --set learning_rate=1e38" + kSmall) == 3);
}

TEST_CASE("train twice with one seed gives identical checkpoints") {
  TempDir tmp("twice");
  const auto crowd = write_crowd(tmp, 15);
  const std::string args = "train --mode annotator-unsup --corpus " + crowd + " --seed 1 --epochs 2" + kSmall;
  REQUIRE(cli(args + " --out " + tmp.file("a")) == 0);
  REQUIRE(cli(args + " --out " + tmp.file("b")) == 0);
  const auto files = tree(tmp.file("a"));
  CHECK(files == tree(tmp.file("b")));
  CHECK(std::find(files.begin(), files.end(), "final/index.tsv") != files.end());
  CHECK(std::find(files.begin(), files.end(), "epoch_002/tensors/pgn.theta.f32") != files.end());
  for (const auto& f : files) {
    if (f == "run_manifest.json") continue;
    INFO(f);
    CHECK(slurp(fs::path(tmp.file("a")) / f) == slurp(fs::path(tmp.file("b")) / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(fs::path(tmp.file("a")) / "run_manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["inputs"][0]["path"] == crowd);
}

TEST_CASE("eval on the training corpus of an overfit run scores 100") {
  TempDir tmp("overfit");
  const auto gold = generate_gold_corpus(2, 8);
  write_corpus(gold, tmp.file("gold.tsv"));
  save_tagset(gold.tagset, tmp.file("gold.tsv.tags"));
  REQUIRE(cli("train --mode gold --corpus " + tmp.file("gold.tsv") +
              " --set dropout_p=0 --epochs 150 --out " + tmp.file("run")) == 0);
  REQUIRE(cli("eval --checkpoint " + tmp.file("run/final") + " --corpus " + tmp.file("gold.tsv") + " --out " +
              tmp.file("ev"), tmp.file("stdout.txt")) == 0);
  const std::string report = slurp(tmp.file("ev/report.txt"));
  CHECK(report.find("overall") != std::string::npos);
  CHECK(report.substr(report.find("overall")).find("100.00   100.00   100.00") != std::string::npos);
  CHECK(slurp(tmp.file("stdout.txt")) == report);
}

TEST_CASE("gradcheck passes on defaults") {
  TempDir tmp("gc");
  CHECK(cli("gradcheck --out " + tmp.file("gc.txt"), tmp.file("stdout.txt")) == 0);
  CHECK(slurp(tmp.file("stdout.txt")).find("gradient check passed") != std::string::npos);
  CHECK(slurp(tmp.file("gc.txt")).find("crf.transitions") != std::string::npos);
}

TEST_CASE("aggregate then gold builds the MV instances") {
  TempDir tmp("agg");
  const auto crowd = write_crowd(tmp, 25);
  REQUIRE(cli("aggregate --corpus " + crowd + " --out " + tmp.file("agg.tsv")) == 0);
  const auto original = parse_corpus(crowd, FormatSpec{}, load_tagset(crowd + ".tags"));
  const auto agg = parse_corpus(tmp.file("agg.tsv"), FormatSpec{0, true}, load_tagset(tmp.file("agg.tsv.tags")));
  const auto mv = build_instances(original, {ModeKind::kMajorityVote, {}});
  const auto gold = build_instances(agg, {ModeKind::kGold, {}});
  REQUIRE(mv.size() == gold.size());
  for (std::size_t i = 0; i < mv.size(); ++i) {
    CHECK(original.sentences[mv[i].sentence] == agg.sentences[gold[i].sentence]);
    CHECK(mv[i].tags == gold[i].tags);
    CHECK(mv[i].annotator == gold[i].annotator);
  }
}

TEST_CASE("synth, filter, select and export-embeddings write their outputs") {
  TempDir tmp("pipeline");
  ProfileSet set;
  set.profiles = {AnnotatorProfile::clean("good", 3), AnnotatorProfile::spammer("spam", 3),
                  AnnotatorProfile::clean("fine", 3)};
  set.coverage = {1.0, 1.0, 0.5};
  save_profiles(set, tmp.file("profiles.json"));
  const std::string crowd = tmp.file("crowd.tsv");
  REQUIRE(cli("synth --profiles " + tmp.file("profiles.json") + " --sentences 30 --seed 2 --out " + crowd) == 0);
  CHECK(fs::exists(crowd + ".tags"));
  CHECK(fs::exists(crowd + ".manifest.json"));
  const auto c = parse_corpus(crowd, FormatSpec{}, load_tagset(crowd + ".tags"));
  CHECK(c.size() == 30);
  CHECK(c.num_annotators() == 3);

  REQUIRE(cli("filter --corpus " + crowd + " --filter-k 1 --out " + tmp.file("f.tsv")) == 0);
  const std::string audit = slurp(tmp.file("f.tsv.audit.txt"));
  CHECK(audit.find("removed\tspam") != std::string::npos);
  CHECK(parse_corpus(tmp.file("f.tsv"), FormatSpec{}, load_tagset(tmp.file("f.tsv.tags"))).num_annotators() == 2);
  CHECK(cli("filter --corpus " + crowd + " --filter-k 3 --out " + tmp.file("g.tsv")) == 1);

  REQUIRE(cli("select --corpus " + crowd + " --expert-fraction 0.2 --out " + tmp.file("sel.txt")) == 0);
  const std::string sel = slurp(tmp.file("sel.txt"));
  CHECK(sel.rfind("selected 6 sentences\n", 0) == 0);

  REQUIRE(cli("train --mode annotator-sup --expert-fraction 0.5 --corpus " + crowd + " --epochs 1 --out " +
              tmp.file("run") + kSmall) == 0);
  REQUIRE(cli("export-embeddings --checkpoint " + tmp.file("run/final") + " --out " + tmp.file("e.csv")) == 0);
  const std::string csv = slurp(tmp.file("e.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 + 2);
  REQUIRE(cli("export-embeddings --checkpoint " + tmp.file("run/final") + " --out " + tmp.file("e2.csv")) == 0);
  CHECK(slurp(tmp.file("e2.csv")) == csv);
  REQUIRE(cli("eval --checkpoint " + tmp.file("run/final") + " --corpus " + crowd + " --inference-expert centroid") == 0);
  CHECK(cli("eval --checkpoint " + tmp.file("run/final") + " --corpus " + crowd + " --inference-expert oracle") == 1);
}
