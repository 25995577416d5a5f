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

#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crowdner {

/// Ordered BIO tag inventory. Always contains `O`; every declared entity
/// type T contributes both `B-T` and `I-T`.
class Tagset {
 public:
  Tagset() : Tagset(std::vector<std::string>{"O"}) {}
  explicit Tagset(std::vector<std::string> tags);

  /// `O` followed by B-T, I-T for each type in order.
  static Tagset from_types(const std::vector<std::string>& types);

  std::size_t size() const { return tags_.size(); }
  const std::vector<std::string>& tags() const { return tags_; }
  const std::vector<std::string>& types() const { return types_; }
  const std::string& name(int id) const { return tags_.at(static_cast<std::size_t>(id)); }
  int outside() const { return outside_; }

  std::optional<int> find(std::string_view tag) const;
  /// Throws DataError naming the tag when it is not declared.
  int id(std::string_view tag) const;
  bool has_type(std::string_view type) const;

  std::vector<int> encode(std::span<const std::string> tags) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

  bool operator==(const Tagset& other) const { return tags_ == other.tags_; }

 private:
  std::vector<std::string> tags_;
  std::vector<std::string> types_;
  int outside_ = 0;
};

/// Reads a sidecar tagset file (one tag per line, blank lines ignored).
Tagset load_tagset(const std::string& path);
void save_tagset(const Tagset& tagset, const std::string& path);

/// Lexical view of a single BIO tag.
struct BioTag {
  enum class Prefix { kOutside, kBegin, kInside };
  Prefix prefix = Prefix::kOutside;
  std::string type;
};

/// Throws DataError if the tag is not `O`, `B-T` or `I-T`.
BioTag parse_bio_tag(std::string_view tag);

/// Orphan `I-T` (predecessor neither `B-T` nor `I-T`) becomes `B-T`; every
/// other tag is kept. `repaired`, when given, receives the number of changed
/// tags. Unknown entity types throw DataError.
std::vector<std::string> repair_bio(std::span<const std::string> tags, const Tagset& tagset,
                                    std::size_t* repaired = nullptr);

/// Index-based variant used on decoder output.
std::vector<int> repair_bio(std::span<const int> ids, const Tagset& tagset);

bool is_valid_bio(std::span<const std::string> tags);

struct EntitySpan {
  int start = 0;
  int end = 0;  // exclusive
  std::string type;

  auto operator<=>(const EntitySpan&) const = default;
  bool operator==(const EntitySpan&) const = default;
};

/// Maximal typed spans in order of start position. Throws DataError on an
/// orphan `I-T`; repair first.
std::vector<EntitySpan> extract_spans(std::span<const std::string> tags);

/// Inverse of extract_spans for non-overlapping spans inside [0, length).
std::vector<std::string> tags_from_spans(std::span<const EntitySpan> spans, std::size_t length);

}  // namespace crowdner
