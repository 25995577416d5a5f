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

#include "crowdner/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <map>
#include <random>
#include <sstream>

#include "crowdner/common.hpp"

namespace crowdner {

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

bool overlaps(const std::vector<EntitySpan>& spans, int start, int end, std::size_t skip) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (i == skip) continue;
    if (start < spans[i].end && spans[i].start < end) return true;
  }
  return false;
}

std::vector<EntitySpan> perturb(const std::vector<EntitySpan>& gold, std::size_t length,
                                const AnnotatorProfile& profile, const Tagset& tagset,
                                std::mt19937_64& rng) {
  const auto& types = tagset.types();
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<EntitySpan> spans;
  for (const auto& s : gold) {
    if (unit(rng) >= profile.miss_rate) spans.push_back(s);
  }

  for (auto& s : spans) {
    const auto from = static_cast<std::size_t>(
        std::find(types.begin(), types.end(), s.type) - types.begin());
    const auto& row = profile.confusion.at(from);
    std::discrete_distribution<std::size_t> pick(row.begin(), row.end());
    s.type = types[pick(rng)];
  }

  const int n = static_cast<int>(length);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (unit(rng) >= profile.boundary_jitter) continue;
    const bool move_start = unit(rng) < 0.5;
    const int delta = unit(rng) < 0.5 ? -1 : 1;
    int start = spans[i].start;
    int end = spans[i].end;
    (move_start ? start : end) += delta;
    if (start < 0 || end > n || start >= end) continue;
    if (overlaps(spans, start, end, i)) continue;
    spans[i].start = start;
    spans[i].end = end;
  }

  if (profile.spurious_rate > 0.0 && !types.empty()) {
    std::poisson_distribution<int> count(profile.spurious_rate);
    std::uniform_int_distribution<int> pos(0, n - 1);
    std::uniform_int_distribution<std::size_t> type(0, types.size() - 1);
    const int k = count(rng);
    for (int j = 0; j < k; ++j) {
      const int start = pos(rng);
      const int end = std::min(n, start + (unit(rng) < 0.3 ? 2 : 1));
      const std::string& t = types[type(rng)];
      if (!overlaps(spans, start, end, spans.size())) spans.push_back({start, end, t});
    }
  }
  std::sort(spans.begin(), spans.end());
  return spans;
}

}  // namespace

void AnnotatorProfile::validate(std::size_t num_types) const {
  auto check = [&](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DataError("profile '" + name + "': " + what + " must lie in [0,1]");
    }
  };
  check(miss_rate, "miss_rate");
  check(boundary_jitter, "boundary_jitter");
  if (!(spurious_rate >= 0.0) || !std::isfinite(spurious_rate)) {
    throw DataError("profile '" + name + "': spurious_rate must be non-negative");
  }
  if (confusion.size() != num_types) {
    throw DataError("profile '" + name + "': confusion needs " + std::to_string(num_types) + " rows");
  }
  for (const auto& row : confusion) {
    if (row.size() != num_types) throw DataError("profile '" + name + "': confusion is not square");
    double sum = 0.0;
    for (double p : row) {
      check(p, "confusion entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DataError("profile '" + name + "': confusion rows must sum to 1");
    }
  }
}

AnnotatorProfile AnnotatorProfile::clean(std::string name, std::size_t num_types) {
  AnnotatorProfile p;
  p.name = std::move(name);
  p.confusion.assign(num_types, std::vector<double>(num_types, 0.0));
  for (std::size_t i = 0; i < num_types; ++i) p.confusion[i][i] = 1.0;
  return p;
}

AnnotatorProfile AnnotatorProfile::spammer(std::string name, std::size_t num_types) {
  AnnotatorProfile p;
  p.name = std::move(name);
  p.miss_rate = 0.5;
  p.spurious_rate = 0.5;
  p.boundary_jitter = 0.2;
  p.confusion.assign(num_types, std::vector<double>(num_types, 1.0 / static_cast<double>(num_types)));
  return p;
}

CrowdCorpus synth_generate(const CrowdCorpus& gold, std::span<const AnnotatorProfile> profiles,
                           std::span<const double> coverage, std::uint64_t seed) {
  if (profiles.empty()) throw UsageError("synth_generate needs at least one annotator profile");
  if (coverage.size() != profiles.size()) {
    throw UsageError("synth_generate needs one coverage value per profile");
  }
  if (!gold.has_expert_labels()) {
    throw DataError("synth_generate needs expert labels on every sentence");
  }
  const std::size_t num_types = gold.tagset.types().size();
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    profiles[a].validate(num_types);
    if (!(coverage[a] > 0.0 && coverage[a] <= 1.0)) {
      throw UsageError("coverage must lie in (0,1]");
    }
  }

  CrowdCorpus out;
  out.tagset = gold.tagset;
  out.sentences = gold.sentences;
  out.expert = gold.expert;
  out.annotations.assign(gold.size(), {});
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    out.annotators.push_back(profiles[a].name.empty() ? default_annotator_name(a) : profiles[a].name);
  }

  const std::size_t n = gold.size();
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    auto rng = stream_rng(seed, a);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(coverage[a] * static_cast<double>(n))), 1, n);
    order.resize(count);
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) {
      const auto& expert = gold.expert[i]->tags;
      const auto spans = perturb(extract_spans(expert), expert.size(), profiles[a], gold.tagset, rng);
      auto tags = repair_bio(tags_from_spans(spans, expert.size()), gold.tagset);
      out.annotations[i].push_back({AnnotatorId{static_cast<int>(a)}, std::move(tags)});
    }
  }
  out.validate();
  return out;
}

namespace {

const std::array<const char*, 34> kTemplates = {
    "{PER} said on {DAY} that {ORG} would expand in {LOC} .",
    "{PER} , a spokesman for {ORG} , declined to comment .",
    "The match in {LOC} ended in a {NUM} - {NUM} draw .",
    "{ORG} shares rose {NUM} percent in {LOC} trading on {DAY} .",
    "{PER} flew to {LOC} to meet {PER} .",
    "Officials in {LOC} said talks with {LOC} had stalled .",
    "{PER} scored twice as {ORG} beat {ORG} {NUM} - {NUM} .",
    "Police in {LOC} arrested {PER} on {DAY} .",
    "{ORG} chairman {PER} resigned after {NUM} years .",
    "Rain delayed play in {LOC} for {NUM} hours .",
    "The government said prices would rise by {NUM} percent .",
    "{PER} won the title for the {NUM} th time .",
    "Analysts at {ORG} expect growth in {LOC} next year .",
    "{PER} told reporters in {LOC} that {ORG} had agreed to the deal .",
    "Shares of {ORG} fell sharply on {DAY} .",
    "The president of {LOC} met {PER} in {LOC} .",
    "{ORG} said it would cut {NUM} jobs .",
    "Striker {PER} joined {ORG} from {ORG} .",
    "Troops crossed into {LOC} early on {DAY} .",
    "Markets were closed on {DAY} .",
    "{PER} , who leads {ORG} , visited {LOC} last week .",
    "The central bank left rates unchanged at {NUM} percent .",
    "Fighting broke out near {LOC} , witnesses said .",
    "{PER} denied the report , {ORG} said .",
    "Exports from {LOC} to {LOC} rose {NUM} percent .",
    "{ORG} signed a contract with {ORG} worth {NUM} million dollars .",
    "Coach {PER} praised the team after the win in {LOC} .",
    "The storm left {NUM} people dead in {LOC} .",
    "{PER} beat {PER} {NUM} - {NUM} in the final .",
    "Investors sold bonds on {DAY} amid fears of inflation .",
    "A court in {LOC} fined {ORG} {NUM} million dollars .",
    "{PER} will lead the delegation to {LOC} , {ORG} said on {DAY} .",
    "Prime minister {PER} arrived in {LOC} on {DAY} .",
    "Sales at {ORG} grew {NUM} percent in the quarter .",
};

const std::array<const char*, 24> kOnsets = {"b", "c", "d", "f", "g", "h", "k", "l",
                                             "m", "n", "p", "r", "s", "t", "v", "z",
                                             "br", "dr", "gr", "kr", "st", "tr", "sh", "ch"};
const std::array<const char*, 8> kVowels = {"a", "e", "i", "o", "u", "ai", "ea", "ou"};
const std::array<const char*, 10> kCodas = {"", "", "n", "r", "s", "l", "k", "nd", "rt", "m"};
const std::array<const char*, 7> kDays = {"Monday", "Tuesday", "Wednesday", "Thursday",
                                          "Friday", "Saturday", "Sunday"};
const std::array<const char*, 8> kLocPrefixes = {"New", "Port", "San", "North",
                                                 "South", "East", "Fort", "Lake"};
const std::array<const char*, 10> kOrgSuffixes = {"Corp", "Bank", "United", "Group", "Motors",
                                                  "Airlines", "Holdings", "Rovers", "Telecom", "City"};

std::string make_word(std::mt19937_64& rng, int syllables) {
  auto pick = [&](const auto& arr) {
    return std::string(arr[std::uniform_int_distribution<std::size_t>(0, arr.size() - 1)(rng)]);
  };
  std::string w;
  for (int s = 0; s < syllables; ++s) w += pick(kOnsets) + pick(kVowels);
  w += pick(kCodas);
  w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

std::vector<std::string> entity_tokens(const std::string& type, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> syl(1, 3);
  auto pick = [&](const auto& arr) {
    return std::string(arr[std::uniform_int_distribution<std::size_t>(0, arr.size() - 1)(rng)]);
  };
  if (type == "PER") {
    if (unit(rng) < 0.6) return {make_word(rng, syl(rng)), make_word(rng, syl(rng))};
    return {make_word(rng, syl(rng))};
  }
  if (type == "LOC") {
    if (unit(rng) < 0.3) return {pick(kLocPrefixes), make_word(rng, syl(rng))};
    return {make_word(rng, syl(rng))};
  }
  if (unit(rng) < 0.6) return {make_word(rng, syl(rng)), pick(kOrgSuffixes)};
  if (unit(rng) < 0.5) return {make_word(rng, syl(rng)), make_word(rng, syl(rng)), pick(kOrgSuffixes)};
  return {make_word(rng, syl(rng))};
}

}  // namespace

CrowdCorpus generate_gold_corpus(std::size_t num_sentences, std::uint64_t seed) {
  CrowdCorpus corpus;
  corpus.tagset = Tagset::from_types({"PER", "LOC", "ORG"});
  auto rng = stream_rng(seed, 0x676f6c64);

  // A finite name pool per type, so frequent names recur across sentences.
  constexpr std::size_t kPoolSize = 300;
  std::map<std::string, std::vector<std::vector<std::string>>> pools;
  for (const char* type : {"PER", "LOC", "ORG"}) {
    for (std::size_t i = 0; i < kPoolSize; ++i) pools[type].push_back(entity_tokens(type, rng));
  }

  std::uniform_int_distribution<std::size_t> tmpl(0, kTemplates.size() - 1);
  std::uniform_int_distribution<std::size_t> name(0, kPoolSize - 1);
  std::uniform_int_distribution<std::size_t> day(0, kDays.size() - 1);
  std::uniform_int_distribution<int> num(1, 99);
  for (std::size_t s = 0; s < num_sentences; ++s) {
    std::vector<std::string> tokens;
    std::vector<std::string> tags;
    std::istringstream words(kTemplates[tmpl(rng)]);
    std::string w;
    while (words >> w) {
      if (w == "{PER}" || w == "{LOC}" || w == "{ORG}") {
        const std::string type = w.substr(1, 3);
        const auto& ent = pools[type][name(rng)];
        for (std::size_t k = 0; k < ent.size(); ++k) {
          tokens.push_back(ent[k]);
          tags.push_back((k == 0 ? "B-" : "I-") + type);
        }
      } else if (w == "{DAY}") {
        tokens.emplace_back(kDays[day(rng)]);
        tags.emplace_back("O");
      } else if (w == "{NUM}") {
        tokens.push_back(std::to_string(num(rng)));
        tags.emplace_back("O");
      } else {
        tokens.push_back(w);
        tags.emplace_back("O");
      }
    }
    const std::size_t idx = corpus.add_sentence({default_sentence_id(s), std::move(tokens)});
    corpus.expert[idx] = LabelSequence{AnnotatorId::expert(), std::move(tags)};
  }
  return corpus;
}

ProfileSet load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profiles file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw DataError(path + ": expected a non-empty JSON array");
  ProfileSet set;
  try {
    for (const auto& item : doc) {
      AnnotatorProfile p;
      p.name = item.value("name", default_annotator_name(set.profiles.size()));
      p.miss_rate = item.value("miss_rate", 0.0);
      p.spurious_rate = item.value("spurious_rate", 0.0);
      p.boundary_jitter = item.value("boundary_jitter", 0.0);
      p.confusion = item.at("confusion").get<std::vector<std::vector<double>>>();
      set.coverage.push_back(item.value("coverage", 1.0));
      set.profiles.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return set;
}

void save_profiles(const ProfileSet& set, const std::string& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t i = 0; i < set.profiles.size(); ++i) {
    const auto& p = set.profiles[i];
    doc.push_back({{"name", p.name},
                   {"miss_rate", p.miss_rate},
                   {"confusion", p.confusion},
                   {"spurious_rate", p.spurious_rate},
                   {"boundary_jitter", p.boundary_jitter},
                   {"coverage", i < set.coverage.size() ? set.coverage[i] : 1.0}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace crowdner
