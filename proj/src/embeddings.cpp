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

#include "crowdner/embeddings.hpp"

#include <fmt/format.h>

#include <fstream>

#include "crowdner/eval.hpp"

namespace crowdner {

std::string export_embeddings(const TrainedModel& model) {
  if (!model.mode.annotator_aware()) {
    throw UsageError("embedding export needs an annotator-aware model");
  }
  const auto& reg = model.registry;
  const Mat<double> table = model.net.params.annotators.cast<double>();
  const int crowd = reg.crowd_rows();
  const int d = static_cast<int>(table.cols());
  const PcaResult pca = pca_project(table.topRows(crowd), std::min(2, d));

  struct Row {
    std::string label;
    std::string kind;
    RowVec<double> values;
  };
  std::vector<Row> rows;
  for (int a = 0; a < crowd; ++a) {
    rows.push_back({reg.names[static_cast<std::size_t>(a)], "crowd", table.row(a)});
  }
  rows.push_back({"expert", "centroid", expert_centroid<double>(table, crowd).transpose()});
  if (reg.expert_row >= 0) rows.push_back({"expert", "learned", table.row(reg.expert_row)});

  std::string out = "label,kind";
  for (int j = 0; j < d; ++j) out += fmt::format(",e{}", j);
  for (long j = 0; j < pca.coords.cols(); ++j) out += fmt::format(",pc{}", j + 1);
  out += "\n";
  for (const auto& row : rows) {
    const Mat<double> coords = pca.project(row.values);
    out += row.label + "," + row.kind;
    for (long j = 0; j < row.values.size(); ++j) out += fmt::format(",{:.9g}", row.values(j));
    for (long j = 0; j < coords.cols(); ++j) out += fmt::format(",{:.9g}", coords(0, j));
    out += "\n";
  }
  return out;
}

void export_embeddings(const TrainedModel& model, const std::string& out_path) {
  const std::string csv = export_embeddings(model);
  std::ofstream out(out_path, std::ios::binary);
  out << csv;
  if (!out) throw DataError("cannot write " + out_path);
}

}  // namespace crowdner
