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

#include "crowdner/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace crowdner {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

struct IndexRow {
  long rows = 0;
  long cols = 0;
  std::size_t offset = 0;
  std::uint32_t crc = 0;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing checkpoint file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::pair<std::string, const Mat<float>*>> all_tensors(const TrainedModel& model) {
  auto out = model.net.encoder.tensors();
  const auto& names = Trainables<float>::names();
  const auto tensors = model.net.params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) out.emplace_back(names[i], tensors[i]);
  return out;
}

Trainables<float> shaped_trainables(const ModelDims& dims, std::size_t adapter_params) {
  const long h = dims.d_h;
  const long d = dims.encoder.d_model;
  const long k = dims.num_tags;
  Trainables<float> t;
  t.theta.resize(static_cast<long>(adapter_params), dims.d_ann);
  t.annotators.resize(dims.annotator_rows, dims.d_ann);
  t.fw_w.resize(4 * h, d);
  t.fw_u.resize(4 * h, h);
  t.fw_b.resize(1, 4 * h);
  t.bw_w.resize(4 * h, d);
  t.bw_u.resize(4 * h, h);
  t.bw_b.resize(1, 4 * h);
  t.crf_w.resize(k, 2 * h);
  t.crf_b.resize(1, k);
  t.crf_t.resize(k + 1, k);
  return t;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "tensors");

  json config = json::object();
  for (const auto& [k, v] : model.config.entries()) config[k] = v;
  json meta;
  meta["format"] = 1;
  meta["config"] = config;
  meta["mode"] = {{"kind", to_string(model.mode.kind)},
                  {"expert_fraction", model.mode.expert_fraction ? json(*model.mode.expert_fraction)
                                                                 : json(nullptr)}};
  meta["registry"] = {{"names", model.registry.names}, {"expert_row", model.registry.expert_row}};
  meta["tagset"] = model.tagset.tags();
  meta["vocab"] = model.vocab.tokens();
  meta["encoder_checksum"] = hex32(model.net.encoder.checksum());
  write_text(root / "metadata.json", meta.dump(1) + "\n");
  write_text(root / "manifest.tsv", model.net.manifest.to_table());

  std::string index = "name\trows\tcols\toffset\tcrc32\n";
  for (const auto& [name, m] : all_tensors(model)) {
    const fs::path file = root / "tensors" / (name + ".f32");
    const std::size_t bytes = static_cast<std::size_t>(m->size()) * sizeof(float);
    {
      std::ofstream out(file, std::ios::binary);
      out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(bytes));
      if (!out) throw DataError("cannot write " + file.string());
    }
    index += name + "\t" + std::to_string(m->rows()) + "\t" + std::to_string(m->cols()) + "\t0\t" +
             hex32(crc32_bytes(m->data(), bytes)) + "\n";
  }
  write_text(root / "index.tsv", index);
}

TrainedModel load_checkpoint(const std::string& dir) {
  const fs::path root(dir);
  json meta;
  try {
    meta = json::parse(read_text(root / "metadata.json"));
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint metadata in " + dir + ": " + e.what());
  }

  TrainedModel model;
  try {
    for (const auto& [k, v] : meta.at("config").items()) model.config.set(k, v.get<std::string>());
    model.config.validate();
    model.mode.kind = parse_mode(meta.at("mode").at("kind").get<std::string>());
    const auto& fraction = meta.at("mode").at("expert_fraction");
    if (!fraction.is_null()) model.mode.expert_fraction = fraction.get<double>();
    model.registry.mode = model.mode.kind;
    model.registry.names = meta.at("registry").at("names").get<std::vector<std::string>>();
    model.registry.expert_row = meta.at("registry").at("expert_row").get<int>();
    model.tagset = Tagset(meta.at("tagset").get<std::vector<std::string>>());
    model.vocab = Vocab::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint metadata in " + dir + ": " + e.what());
  } catch (const UsageError& e) {
    throw DataError("invalid checkpoint metadata in " + dir + ": " + e.what());
  }

  const ModelDims dims =
      model.config.model_dims(model.vocab.size(), model.tagset.size(), model.registry.rows());
  dims.validate();
  auto& net = model.net;
  net.dims = dims;
  net.encoder = FrozenEncoder<float>::empty(dims.encoder);
  net.manifest = ParamManifest(dims.encoder.n_layers, dims.num_adapted_layers, dims.encoder.d_model,
                               dims.d_adapter);
  net.params = shaped_trainables(dims, net.manifest.size());

  std::map<std::string, IndexRow> index;
  std::istringstream lines(read_text(root / "index.tsv"));
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, crc;
    IndexRow row;
    if (!(fields >> name >> row.rows >> row.cols >> row.offset >> crc)) {
      throw DataError("malformed index line in " + dir + ": " + line);
    }
    row.crc = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
    index[name] = row;
  }

  std::vector<std::pair<std::string, Mat<float>*>> targets = net.encoder.mutable_tensors();
  const auto& names = Trainables<float>::names();
  const auto params = net.params.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) targets.emplace_back(names[i], params[i]);

  for (auto& [name, m] : targets) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError("checkpoint index lacks tensor " + name);
    const IndexRow& row = it->second;
    if (row.rows != m->rows() || row.cols != m->cols()) {
      throw DataError("tensor " + name + " has shape " + std::to_string(row.rows) + "x" +
                      std::to_string(row.cols) + ", expected " + std::to_string(m->rows()) + "x" +
                      std::to_string(m->cols()));
    }
    const std::string bytes = read_text(root / "tensors" / (name + ".f32"));
    const std::size_t expected = static_cast<std::size_t>(m->size()) * sizeof(float);
    if (bytes.size() != row.offset + expected) {
      throw DataError("tensor file for " + name + " has " + std::to_string(bytes.size()) + " bytes");
    }
    if (crc32_bytes(bytes.data(), bytes.size()) != row.crc) {
      throw DataError("checksum mismatch for tensor " + name);
    }
    std::memcpy(m->data(), bytes.data() + row.offset, expected);
  }
  if (meta.contains("encoder_checksum") &&
      meta["encoder_checksum"].get<std::string>() != hex32(net.encoder.checksum())) {
    throw DataError("frozen encoder checksum mismatch in " + dir);
  }
  return model;
}

}  // namespace crowdner
