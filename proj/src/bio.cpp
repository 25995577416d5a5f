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

#include "crowdner/bio.hpp"

#include <algorithm>
#include <fstream>

#include "crowdner/common.hpp"

namespace crowdner {

BioTag parse_bio_tag(std::string_view tag) {
  if (tag == "O") return {};
  if (tag.size() > 2 && tag[1] == '-' && (tag[0] == 'B' || tag[0] == 'I')) {
    BioTag out;
    out.prefix = tag[0] == 'B' ? BioTag::Prefix::kBegin : BioTag::Prefix::kInside;
    out.type = std::string(tag.substr(2));
    return out;
  }
  throw DataError("malformed BIO tag '" + std::string(tag) + "'");
}

Tagset::Tagset(std::vector<std::string> tags) : tags_(std::move(tags)) {
  bool has_outside = false;
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    const BioTag parsed = parse_bio_tag(tags_[i]);
    if (std::find(tags_.begin(), tags_.begin() + static_cast<long>(i), tags_[i]) !=
        tags_.begin() + static_cast<long>(i)) {
      throw DataError("duplicate tag '" + tags_[i] + "' in tagset");
    }
    if (parsed.prefix == BioTag::Prefix::kOutside) {
      has_outside = true;
      outside_ = static_cast<int>(i);
    } else if (std::find(types_.begin(), types_.end(), parsed.type) == types_.end()) {
      types_.push_back(parsed.type);
    }
  }
  if (!has_outside) throw DataError("tagset must contain O");
  for (const auto& type : types_) {
    if (!find("B-" + type) || !find("I-" + type)) {
      throw DataError("tagset declares type '" + type + "' without both B- and I- tags");
    }
  }
}

Tagset Tagset::from_types(const std::vector<std::string>& types) {
  std::vector<std::string> tags{"O"};
  for (const auto& t : types) {
    tags.push_back("B-" + t);
    tags.push_back("I-" + t);
  }
  return Tagset(std::move(tags));
}

std::optional<int> Tagset::find(std::string_view tag) const {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (tags_[i] == tag) return static_cast<int>(i);
  }
  return std::nullopt;
}

int Tagset::id(std::string_view tag) const {
  if (auto found = find(tag)) return *found;
  throw DataError("undeclared tag '" + std::string(tag) + "'");
}

bool Tagset::has_type(std::string_view type) const {
  return std::find(types_.begin(), types_.end(), type) != types_.end();
}

std::vector<int> Tagset::encode(std::span<const std::string> tags) const {
  std::vector<int> ids;
  ids.reserve(tags.size());
  for (const auto& t : tags) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Tagset::decode(std::span<const int> ids) const {
  std::vector<std::string> tags;
  tags.reserve(ids.size());
  for (int i : ids) tags.push_back(name(i));
  return tags;
}

Tagset load_tagset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tagset file " + path);
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    if (!line.empty()) tags.push_back(line);
  }
  return Tagset(std::move(tags));
}

void save_tagset(const Tagset& tagset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write tagset file " + path);
  for (const auto& t : tagset.tags()) out << t << '\n';
}

std::vector<std::string> repair_bio(std::span<const std::string> tags, const Tagset& tagset,
                                    std::size_t* repaired) {
  std::vector<std::string> out(tags.begin(), tags.end());
  std::size_t changes = 0;
  std::string prev_type;
  bool prev_in_entity = false;
  for (auto& tag : out) {
    BioTag parsed = parse_bio_tag(tag);
    if (parsed.prefix == BioTag::Prefix::kOutside) {
      prev_in_entity = false;
      continue;
    }
    if (!tagset.has_type(parsed.type)) {
      throw DataError("unknown entity type '" + parsed.type + "' in tag '" + tag + "'");
    }
    if (parsed.prefix == BioTag::Prefix::kInside && !(prev_in_entity && prev_type == parsed.type)) {
      tag = "B-" + parsed.type;
      ++changes;
    }
    prev_in_entity = true;
    prev_type = parsed.type;
  }
  if (repaired) *repaired = changes;
  return out;
}

std::vector<int> repair_bio(std::span<const int> ids, const Tagset& tagset) {
  const auto fixed = repair_bio(tagset.decode(ids), tagset);
  return tagset.encode(fixed);
}

bool is_valid_bio(std::span<const std::string> tags) {
  std::string prev_type;
  bool prev_in_entity = false;
  for (const auto& tag : tags) {
    const BioTag parsed = parse_bio_tag(tag);
    if (parsed.prefix == BioTag::Prefix::kInside && !(prev_in_entity && prev_type == parsed.type)) {
      return false;
    }
    prev_in_entity = parsed.prefix != BioTag::Prefix::kOutside;
    prev_type = parsed.type;
  }
  return true;
}

std::vector<EntitySpan> extract_spans(std::span<const std::string> tags) {
  std::vector<EntitySpan> spans;
  std::optional<EntitySpan> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const BioTag parsed = parse_bio_tag(tags[i]);
    const int pos = static_cast<int>(i);
    if (parsed.prefix == BioTag::Prefix::kInside) {
      if (!open || open->type != parsed.type) {
        throw DataError("invalid BIO at position " + std::to_string(i) + ": orphan '" +
                        tags[i] + "'");
      }
      open->end = pos + 1;
      continue;
    }
    if (open) {
      spans.push_back(*open);
      open.reset();
    }
    if (parsed.prefix == BioTag::Prefix::kBegin) open = EntitySpan{pos, pos + 1, parsed.type};
  }
  if (open) spans.push_back(*open);
  return spans;
}

std::vector<std::string> tags_from_spans(std::span<const EntitySpan> spans, std::size_t length) {
  std::vector<std::string> tags(length, "O");
  std::vector<bool> used(length, false);
  for (const auto& s : spans) {
    if (s.start < 0 || s.end <= s.start || static_cast<std::size_t>(s.end) > length) {
      throw DataError("span out of range");
    }
    for (int i = s.start; i < s.end; ++i) {
      if (used[static_cast<std::size_t>(i)]) throw DataError("overlapping spans");
      used[static_cast<std::size_t>(i)] = true;
      tags[static_cast<std::size_t>(i)] = (i == s.start ? "B-" : "I-") + s.type;
    }
  }
  return tags;
}

}  // namespace crowdner
