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

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "crowdner/bio.hpp"
#include "crowdner/crowd.hpp"
#include "crowdner/synth.hpp"
#include "support.hpp"

using namespace crowdner;
using crowdner::testing::make_corpus;
using crowdner::testing::words;

namespace {

const Tagset kTags = Tagset::from_types({"PER", "LOC", "ORG"});

/// Two sentences labeled by all three annotators, both expert-labeled.
CrowdCorpus two_by_three() {
  return make_corpus(kTags, 3,
                     {{"Ann met Bob", {{0, "B-PER O B-PER"}, {1, "B-PER O O"}, {2, "O O B-PER"}}, "B-PER O B-PER"},
                      {"in Paris now", {{0, "O B-LOC O"}, {1, "O B-ORG O"}, {2, "O O O"}}, "O B-LOC O"}});
}

std::vector<std::string> vote(const std::vector<std::string>& seqs) {
  std::vector<LabelSequence> in;
  for (std::size_t a = 0; a < seqs.size(); ++a) in.push_back({AnnotatorId{static_cast<int>(a)}, words(seqs[a])});
  return majority_vote(in, kTags);
}

std::multiset<std::pair<std::size_t, std::vector<std::string>>> content(const std::vector<TrainInstance>& xs) {
  std::multiset<std::pair<std::size_t, std::vector<std::string>>> out;
  for (const auto& x : xs) out.insert({x.sentence, x.tags});
  return out;
}

}  // namespace

TEST_CASE("training modes parse and validate") {
  CHECK(parse_mode("annotator-sup") == ModeKind::kAnnotatorSup);
  CHECK(to_string(ModeKind::kMajorityVote) == "mv");
  CHECK_THROWS_AS(parse_mode("lc"), UsageError);
  CHECK_THROWS_AS((TrainingMode{ModeKind::kAnnotatorSup, {}}).validate(), UsageError);
  CHECK_THROWS_AS((TrainingMode{ModeKind::kAnnotatorSup, 0.0}).validate(), UsageError);
  CHECK_THROWS_AS((TrainingMode{ModeKind::kAnnotatorSup, 1.5}).validate(), UsageError);
  CHECK_NOTHROW((TrainingMode{ModeKind::kAnnotatorSup, 1.0}).validate());
  CHECK_THROWS_AS((TrainingMode{ModeKind::kAnnotatorUnsup, 0.5}).validate(), UsageError);
}

TEST_CASE("build_instances counts for two sentences and three annotators") {
  const auto c = two_by_three();

  const auto all = build_instances(c, {ModeKind::kAll, {}});
  CHECK(all.size() == 6);
  std::set<AnnotatorId> ids;
  for (const auto& x : all) ids.insert(x.annotator);
  CHECK(ids.size() == 1);

  const auto unsup = build_instances(c, {ModeKind::kAnnotatorUnsup, {}});
  CHECK(unsup.size() == 6);
  ids.clear();
  for (const auto& x : unsup) ids.insert(x.annotator);
  CHECK(ids.size() == 3);

  const auto sup = build_instances(c, {ModeKind::kAnnotatorSup, 1.0});
  CHECK(sup.size() == 8);
  CHECK(std::count_if(sup.begin(), sup.end(), [](const auto& x) { return x.annotator.is_expert(); }) == 2);

  const auto mv = build_instances(c, {ModeKind::kMajorityVote, {}});
  REQUIRE(mv.size() == 2);
  CHECK(mv[0].tags == words("B-PER O B-PER"));
  CHECK(mv[1].tags == words("O O O"));

  const auto gold = build_instances(c, {ModeKind::kGold, {}});
  REQUIRE(gold.size() == 2);
  CHECK(gold[1].tags == words("O B-LOC O"));
}

TEST_CASE("build_instances requires expert labels where the mode needs them") {
  const auto c = make_corpus(kTags, 2, {{"a b", {{0, "O O"}, {1, "B-PER O"}}, ""}});
  CHECK_THROWS_AS(build_instances(c, {ModeKind::kGold, {}}), DataError);
  CHECK_THROWS_AS(build_instances(c, {ModeKind::kAnnotatorSup, 0.5}), DataError);
  CHECK(build_instances(c, {ModeKind::kAll, {}}).size() == 2);
}

TEST_CASE("supervised MV substitutes expert labels for selected sentences") {
  const auto c = two_by_three();
  const auto half = build_instances(c, {ModeKind::kMajorityVote, 0.5});
  REQUIRE(half.size() == 2);
  CHECK(half[1].tags == words("O O O"));
  const auto full = build_instances(c, {ModeKind::kMajorityVote, 1.0});
  REQUIRE(full.size() == 2);
  CHECK(full[1].tags == c.expert[1]->tags);
}

TEST_CASE("singly annotated sentences keep their annotation under MV") {
  const auto c = make_corpus(kTags, 2, {{"a b", {{1, "B-ORG I-ORG"}}, ""}});
  const auto mv = build_instances(c, {ModeKind::kMajorityVote, {}});
  REQUIRE(mv.size() == 1);
  CHECK(mv[0].tags == words("B-ORG I-ORG"));
}

TEST_CASE("majority_vote follows the tie rule") {
  CHECK(vote({"B-PER", "B-PER", "O"}) == words("B-PER"));
  CHECK(vote({"B-PER", "O"}) == words("O"));
  CHECK(vote({"B-LOC", "B-PER"}) == words("B-LOC"));
  CHECK(vote({"O I-PER", "O I-PER", "O O"}) == words("O B-PER"));
  CHECK_THROWS_AS(majority_vote({}, kTags), UsageError);
  CHECK_THROWS_AS(vote({"O O", "O"}), DataError);
}

TEST_CASE("majority_vote is permutation invariant") {
  const std::vector<std::string> pool = {"O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG"};
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng() % 6;
    const std::size_t n = 1 + rng() % 6;
    std::vector<LabelSequence> seqs;
    for (std::size_t a = 0; a < m; ++a) {
      LabelSequence s{AnnotatorId{static_cast<int>(a)}, {}};
      for (std::size_t t = 0; t < n; ++t) s.tags.push_back(pool[rng() % pool.size()]);
      seqs.push_back(s);
    }
    const auto ref = majority_vote(seqs, kTags);
    CHECK(is_valid_bio(ref));
    for (int p = 0; p < 5; ++p) {
      std::shuffle(seqs.begin(), seqs.end(), rng);
      CHECK(majority_vote(seqs, kTags) == ref);
    }
  }
}

TEST_CASE("expert_centroid averages the crowd rows") {
  Mat<double> t(2, 2);
  t << 1, 0, 0, 1;
  const Vec<double> c = expert_centroid(t, 2);
  CHECK(c(0) == 0.5);
  CHECK(c(1) == 0.5);

  Mat<double> same(3, 4);
  for (long r = 0; r < 3; ++r) same.row(r) << 0.25, -1.5, 3.0, 7.0;
  CHECK(expert_centroid(same, 3) == same.row(0).transpose());

  Mat<double> with_expert(3, 2);
  with_expert << 1, 1, 3, 3, 100, 100;
  CHECK(expert_centroid(with_expert, 2) == Vec<double>::Constant(2, 2.0));

  CHECK_THROWS_AS(expert_centroid(Mat<double>(0, 3), 0), UsageError);
}

TEST_CASE("expert_centroid is homogeneous") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = crowdner::testing::random_matrix(1 + static_cast<long>(rng() % 8), 6, rng);
    const double alpha = std::normal_distribution<double>(0.0, 3.0)(rng);
    const Mat<double> scaled = alpha * t;
    const Vec<double> lhs = expert_centroid(scaled, static_cast<int>(t.rows()));
    const Vec<double> rhs = alpha * expert_centroid(t, static_cast<int>(t.rows()));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("registry rows per mode") {
  const auto c = two_by_three();
  const auto all = AnnotatorRegistry::for_mode(c, {ModeKind::kAll, {}});
  CHECK(all.rows() == 1);
  CHECK(all.row_of(AnnotatorId{2}) == 0);
  const auto sup = AnnotatorRegistry::for_mode(c, {ModeKind::kAnnotatorSup, 0.5});
  CHECK(sup.rows() == 4);
  CHECK(sup.crowd_rows() == 3);
  CHECK(sup.row_of(AnnotatorId::expert()) == 3);
  const auto unsup = AnnotatorRegistry::for_mode(c, {ModeKind::kAnnotatorUnsup, {}});
  CHECK(unsup.row_of(AnnotatorId{1}) == 1);
  CHECK_THROWS_AS(unsup.row_of(AnnotatorId::expert()), UsageError);
}

TEST_CASE("ALL and UNSUP instances differ only in annotator ids") {
  const auto gold = generate_gold_corpus(60, 2);
  const std::vector<AnnotatorProfile> profiles = {AnnotatorProfile::clean("a", 3), AnnotatorProfile::spammer("b", 3),
                                                  AnnotatorProfile::clean("c", 3)};
  const std::vector<double> cov = {0.5, 0.7, 0.4};
  const auto c = synth_generate(gold, profiles, cov, 9);
  const auto all = build_instances(c, {ModeKind::kAll, {}});
  const auto unsup = build_instances(c, {ModeKind::kAnnotatorUnsup, {}});
  CHECK(all.size() == c.num_annotations());
  CHECK(content(all) == content(unsup));
  for (const auto& x : all) CHECK(x.annotator == AnnotatorId{0});
}

TEST_CASE("annotator_quality scores against the expert") {
  const auto c = make_corpus(kTags, 3,
                             {{"Ann met Bob", {{0, "B-PER O B-PER"}, {1, "O O O"}}, "B-PER O B-PER"},
                              {"in Paris", {{0, "O B-LOC"}, {1, "O O"}}, "O B-LOC"}});
  const auto q = annotator_quality(c);
  REQUIRE(q.size() == 2);
  CHECK(q[0].name == c.annotators[0]);
  CHECK(q[0].f1 == 100.0);
  CHECK(q[0].sentences == 2);
  CHECK(q[1].f1 == 0.0);
}

TEST_CASE("a spammer scores below every zero-noise annotator") {
  const auto gold = generate_gold_corpus(200, 4);
  const std::vector<AnnotatorProfile> profiles = {AnnotatorProfile::clean("c0", 3), AnnotatorProfile::spammer("s", 3),
                                                  AnnotatorProfile::clean("c1", 3)};
  const auto c = synth_generate(gold, profiles, std::vector<double>(3, 1.0), 1);
  const auto q = annotator_quality(c);
  REQUIRE(q.size() == 3);
  CHECK(q[1].f1 < q[0].f1);
  CHECK(q[1].f1 < q[2].f1);
}

TEST_CASE("filter_annotators with k = 0 leaves the corpus unchanged") {
  const auto c = two_by_three();
  const auto r = filter_annotators(c, 0);
  CHECK(r.corpus == c);
  CHECK(r.removed.empty());
  CHECK(r.old_to_new == std::vector<int>{0, 1, 2});
}

TEST_CASE("filter_annotators with k = M - 1 keeps the best annotator") {
  const auto c = two_by_three();
  const auto r = filter_annotators(c, 2);
  REQUIRE(r.corpus.num_annotators() == 1);
  CHECK(r.corpus.annotators[0] == c.annotators[0]);
  CHECK(r.old_to_new == std::vector<int>{0, -1, -1});
  CHECK(r.corpus.num_annotations() == 2);
  CHECK_THROWS_AS(filter_annotators(c, 3), UsageError);
  CHECK(r.audit().find("kept\t0\t->\t0") != std::string::npos);
}

TEST_CASE("filter_annotators drops emptied sentences and renumbers") {
  const auto c = make_corpus(kTags, 3,
                             {{"Ann", {{1, "O"}}, "B-PER"},
                              {"Bob", {{0, "B-PER"}, {2, "B-PER"}}, "B-PER"},
                              {"Cy", {}, "B-PER"}});
  const auto r = filter_annotators(c, 1);
  CHECK(r.dropped_sentences == 1);
  CHECK(r.corpus.size() == 2);
  CHECK(r.old_to_new == std::vector<int>{0, -1, 1});
  CHECK(r.corpus.find(0, AnnotatorId{1})->tags == words("B-PER"));
}

TEST_CASE("filter_annotators never changes surviving label sequences") {
  const auto gold = generate_gold_corpus(80, 6);
  std::vector<AnnotatorProfile> profiles;
  for (int a = 0; a < 5; ++a) {
    auto p = AnnotatorProfile::clean("p" + std::to_string(a), 3);
    p.miss_rate = 0.1 * a;
    p.spurious_rate = 0.05 * a;
    profiles.push_back(p);
  }
  const auto c = synth_generate(gold, profiles, std::vector<double>(5, 0.5), 8);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto r = filter_annotators(c, k);
    CHECK(r.corpus.num_annotators() == 5 - k);
    std::size_t j = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (j < r.corpus.size() && r.corpus.sentences[j] == c.sentences[i]) {
        for (const auto& s : r.corpus.annotations[j]) {
          const auto old = static_cast<int>(std::find(r.old_to_new.begin(), r.old_to_new.end(), s.annotator.index) -
                                            r.old_to_new.begin());
          const auto* orig = c.find(i, AnnotatorId{old});
          REQUIRE(orig != nullptr);
          CHECK(orig->tags == s.tags);
        }
        ++j;
      }
    }
    CHECK(j == r.corpus.size());
  }
}

TEST_CASE("select_informative ranks by entity count") {
  const auto c = make_corpus(kTags, 1,
                             {{"Ann met Bob", {{0, "O O O"}}, "B-PER O O"},
                              {"Ann met Bob in Rome", {{0, "O O O O O"}}, "B-PER O B-PER O B-LOC"}});
  const auto half = select_informative(c, 0.5);
  CHECK(half.sentences == std::vector<std::size_t>{1});
  CHECK(half.entity_counts == std::vector<std::size_t>{3});
  CHECK(select_informative(c, 1.0).sentences == std::vector<std::size_t>{1, 0});
  CHECK(select_informative(c, 0.01).sentences.size() == 1);
  CHECK_THROWS_AS(select_informative(c, 0.0), UsageError);
  CHECK(half.audit(c).find("1\ts1\t3\t5") != std::string::npos);
}

TEST_CASE("select_informative breaks ties by length then order and is stable") {
  const auto c = make_corpus(kTags, 1,
                             {{"a b", {}, "B-PER O"},
                              {"a b c", {}, "O B-PER O"},
                              {"a b", {}, "O B-LOC"},
                              {"x", {}, "O"}});
  const auto s = select_informative(c, 1.0);
  CHECK(s.sentences == std::vector<std::size_t>{1, 0, 2, 3});
  CHECK(select_informative(c, 1.0).sentences == s.sentences);
  const auto big = generate_gold_corpus(100, 3);
  CHECK(select_informative(big, 0.25).sentences == select_informative(big, 0.25).sentences);
  CHECK(select_informative(big, 0.25).sentences.size() == 25);
}
