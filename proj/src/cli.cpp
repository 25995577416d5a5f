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

#include "crowdner/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "crowdner/checkpoint.hpp"
#include "crowdner/crowd.hpp"
#include "crowdner/embeddings.hpp"
#include "crowdner/gradcheck.hpp"
#include "crowdner/synth.hpp"

namespace crowdner {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw UsageError("invalid value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("invalid value '" + value + "' for " + key + " (true or false)");
}

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues out;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || trim(t.substr(0, eq)).empty()) {
      throw UsageError(fmt::format("{}:{}: expected key = value", source, number));
    }
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  return parse_key_values(in, path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "corpus") {
    corpus = value;
  } else if (key == "tagset") {
    tagset = value;
  } else if (key == "out") {
    out = value;
  } else if (key == "mode") {
    parse_mode(value);
    mode = value;
  } else if (key == "expert_fraction") {
    expert_fraction = parse_value<double>(key, value);
  } else if (key == "dev_corpus") {
    dev_corpus = value;
  } else if (key == "checkpoint") {
    checkpoint = value;
  } else if (key == "inference_expert") {
    if (!value.empty()) parse_inference_expert(value);
    inference_expert = value;
  } else if (key == "profiles") {
    profiles = value;
  } else if (key == "gold") {
    gold = value;
  } else if (key == "grammar_sentences") {
    grammar_sentences = parse_value<std::size_t>(key, value);
  } else if (key == "filter_k") {
    filter_k = parse_value<std::size_t>(key, value);
  } else if (key == "num_annotators") {
    num_annotators = parse_value<std::size_t>(key, value);
  } else if (key == "expert_column") {
    expert_column = parse_bool(key, value);
  } else if (key == "max_steps") {
    max_steps = parse_value<long>(key, value);
  } else {
    train.set(key, value);
  }
}

void RunConfig::apply(const KeyValues& values) {
  for (const auto& [k, v] : values) set(k, v);
}

KeyValues RunConfig::entries() const {
  KeyValues e = train.entries();
  auto add = [&](const char* k, std::string v) { e.emplace_back(k, std::move(v)); };
  add("checkpoint", checkpoint);
  add("corpus", corpus);
  add("dev_corpus", dev_corpus);
  add("expert_column", expert_column ? "true" : "false");
  if (expert_fraction) add("expert_fraction", fmt::format("{}", *expert_fraction));
  if (filter_k) add("filter_k", std::to_string(*filter_k));
  add("gold", gold);
  add("grammar_sentences", std::to_string(grammar_sentences));
  add("inference_expert", inference_expert);
  add("max_steps", std::to_string(max_steps));
  add("mode", mode);
  if (num_annotators) add("num_annotators", std::to_string(*num_annotators));
  add("out", out);
  add("profiles", profiles);
  add("tagset", tagset);
  std::sort(e.begin(), e.end());
  return e;
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : entries()) text += k + "=" + v + "\n";
  return hex32(crc32_bytes(text.data(), text.size()));
}

namespace {

struct Invocation {
  std::string command;
  RunConfig cfg;
  std::vector<std::string> inputs;
};

Tagset resolve_tagset(const RunConfig& cfg, const std::string& corpus, const Tagset* fallback) {
  if (!cfg.tagset.empty()) return load_tagset(cfg.tagset);
  if (fallback) return *fallback;
  const std::string sidecar = corpus + ".tags";
  if (!fs::exists(sidecar)) {
    throw DataError("no tagset for " + corpus + ": pass --tagset or provide " + sidecar);
  }
  return load_tagset(sidecar);
}

CrowdCorpus read_corpus(Invocation& inv, const std::string& path, const Tagset* fallback = nullptr) {
  if (path.empty()) throw UsageError(inv.command + " needs --corpus");
  FormatSpec format;
  format.num_annotators = inv.cfg.num_annotators;
  format.expert_column = inv.cfg.expert_column;
  inv.inputs.push_back(path);
  return parse_corpus(path, format, resolve_tagset(inv.cfg, path, fallback));
}

/// Test and dev corpora carry only tokens and expert labels unless the run
/// says otherwise.
CrowdCorpus read_labeled_corpus(Invocation& inv, const std::string& path, const Tagset* fallback) {
  if (path.empty()) throw UsageError(inv.command + " needs an evaluation corpus");
  FormatSpec format;
  format.expert_column = true;
  inv.inputs.push_back(path);
  return parse_corpus(path, format, resolve_tagset(inv.cfg, path, fallback));
}

void write_corpus_file(const CrowdCorpus& corpus, const std::string& path) {
  write_corpus(corpus, path);
  save_tagset(corpus.tagset, path + ".tags");
}

std::string input_checksum(const std::string& path) {
  if (fs::is_directory(path)) {
    const fs::path index = fs::path(path) / "index.tsv";
    return fs::exists(index) ? hex32(crc32_file(index.string())) : std::string("missing");
  }
  return fs::exists(path) ? hex32(crc32_file(path)) : std::string("missing");
}

std::string manifest_text(const Invocation& inv) {
  nlohmann::json j;
  j["command"] = inv.command;
  j["config_hash"] = inv.cfg.hash();
  j["seed"] = inv.cfg.train.seed;
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : inv.cfg.entries()) config[k] = v;
  j["config"] = config;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& path : inv.inputs) inputs.push_back({{"path", path}, {"crc32", input_checksum(path)}});
  j["inputs"] = inputs;
  return j.dump(1) + "\n";
}

/// Directory outputs get `run_manifest.json` inside; file outputs get
/// `<out>.manifest.json` beside them.
void write_manifest(const Invocation& inv, bool out_is_dir) {
  const std::string text = manifest_text(inv);
  if (inv.cfg.out.empty()) {
    spdlog::debug("run manifest:\n{}", text);
    return;
  }
  const fs::path path = out_is_dir ? fs::path(inv.cfg.out) / "run_manifest.json"
                                   : fs::path(inv.cfg.out + ".manifest.json");
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void echo_config(const Invocation& inv) {
  std::string text;
  for (const auto& [k, v] : inv.cfg.entries()) text += fmt::format("  {} = {}\n", k, v);
  spdlog::info("{} config (hash {}):\n{}", inv.command, inv.cfg.hash(), text);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path);
}

TrainingMode mode_of(const RunConfig& cfg) {
  TrainingMode mode{parse_mode(cfg.mode), cfg.expert_fraction};
  mode.validate();
  return mode;
}

int cmd_train(Invocation& inv) {
  const CrowdCorpus corpus = read_corpus(inv, inv.cfg.corpus);
  std::optional<CrowdCorpus> dev;
  if (!inv.cfg.dev_corpus.empty()) dev = read_labeled_corpus(inv, inv.cfg.dev_corpus, &corpus.tagset);
  echo_config(inv);
  TrainOptions options;
  options.dev = dev ? &*dev : nullptr;
  if (!inv.cfg.inference_expert.empty()) {
    options.dev_inference = parse_inference_expert(inv.cfg.inference_expert);
  }
  options.out_dir = inv.cfg.out;
  options.max_steps = inv.cfg.max_steps;
  const TrainResult result = train(corpus, mode_of(inv.cfg), inv.cfg.train, options);
  std::cout << fmt::format("trained {} epochs ({} steps), final loss {:.6f}, selected epoch {}\n",
                           result.log.size(), result.steps, result.log.back().loss,
                           result.selected_epoch);
  write_manifest(inv, true);
  return 0;
}

int cmd_eval(Invocation& inv) {
  if (inv.cfg.checkpoint.empty()) throw UsageError("eval needs --checkpoint");
  inv.inputs.push_back(inv.cfg.checkpoint);
  const TrainedModel model = load_checkpoint(inv.cfg.checkpoint);
  const CrowdCorpus test = read_labeled_corpus(inv, inv.cfg.corpus, &model.tagset);
  echo_config(inv);
  const InferenceExpert which = inv.cfg.inference_expert.empty()
                                    ? default_inference(model.mode)
                                    : parse_inference_expert(inv.cfg.inference_expert);
  spdlog::info("inference expert: {}", to_string(which));
  const ScoreReport report = evaluate_model(model, test, which);
  std::cout << report.to_text();
  if (!inv.cfg.out.empty()) {
    fs::create_directories(inv.cfg.out);
    write_text_file((fs::path(inv.cfg.out) / "report.txt").string(), report.to_text());
    write_text_file((fs::path(inv.cfg.out) / "report.csv").string(), report.to_csv());
  }
  write_manifest(inv, true);
  return 0;
}

int cmd_aggregate(Invocation& inv) {
  const CrowdCorpus corpus = read_corpus(inv, inv.cfg.corpus);
  if (inv.cfg.out.empty()) throw UsageError("aggregate needs --out");
  echo_config(inv);
  CrowdCorpus agg;
  agg.tagset = corpus.tagset;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.annotations[i].empty()) {
      ++skipped;
      continue;
    }
    const std::size_t idx = agg.add_sentence(corpus.sentences[i]);
    agg.expert[idx] = LabelSequence{AnnotatorId::expert(), majority_vote(corpus.annotations[i], corpus.tagset)};
  }
  if (skipped > 0) spdlog::warn("aggregate: {} sentences without annotations dropped", skipped);
  write_corpus_file(agg, inv.cfg.out);
  std::cout << fmt::format("aggregated {} sentences into {}\n", agg.size(), inv.cfg.out);
  write_manifest(inv, false);
  return 0;
}

int cmd_synth(Invocation& inv) {
  if (inv.cfg.profiles.empty()) throw UsageError("synth needs --profiles");
  if (inv.cfg.out.empty()) throw UsageError("synth needs --out");
  inv.inputs.push_back(inv.cfg.profiles);
  const ProfileSet set = load_profiles(inv.cfg.profiles);
  CrowdCorpus gold;
  if (!inv.cfg.gold.empty()) {
    FormatSpec format;
    format.num_annotators = 0;
    inv.inputs.push_back(inv.cfg.gold);
    gold = parse_corpus(inv.cfg.gold, format, resolve_tagset(inv.cfg, inv.cfg.gold, nullptr));
  } else if (inv.cfg.grammar_sentences > 0) {
    gold = generate_gold_corpus(inv.cfg.grammar_sentences, inv.cfg.train.seed);
  } else {
    throw UsageError("synth needs --gold or --sentences");
  }
  echo_config(inv);
  const CrowdCorpus out = synth_generate(gold, set.profiles, set.coverage, inv.cfg.train.seed);
  write_corpus_file(out, inv.cfg.out);
  std::cout << fmt::format("wrote {} sentences with {} annotations to {}\n", out.size(),
                           out.num_annotations(), inv.cfg.out);
  write_manifest(inv, false);
  return 0;
}

int cmd_filter(Invocation& inv) {
  const CrowdCorpus corpus = read_corpus(inv, inv.cfg.corpus);
  if (!inv.cfg.filter_k) throw UsageError("filter needs --filter-k");
  if (inv.cfg.out.empty()) throw UsageError("filter needs --out");
  echo_config(inv);
  const FilterResult result = filter_annotators(corpus, *inv.cfg.filter_k);
  write_corpus_file(result.corpus, inv.cfg.out);
  write_text_file(inv.cfg.out + ".audit.txt", result.audit());
  std::cout << result.audit();
  write_manifest(inv, false);
  return 0;
}

int cmd_select(Invocation& inv) {
  const CrowdCorpus corpus = read_corpus(inv, inv.cfg.corpus);
  if (!inv.cfg.expert_fraction) throw UsageError("select needs --expert-fraction");
  echo_config(inv);
  const Selection sel = select_informative(corpus, *inv.cfg.expert_fraction);
  const std::string text = sel.audit(corpus);
  if (!inv.cfg.out.empty()) write_text_file(inv.cfg.out, text);
  std::cout << text;
  write_manifest(inv, false);
  return 0;
}

int cmd_export(Invocation& inv) {
  if (inv.cfg.checkpoint.empty()) throw UsageError("export-embeddings needs --checkpoint");
  if (inv.cfg.out.empty()) throw UsageError("export-embeddings needs --out");
  inv.inputs.push_back(inv.cfg.checkpoint);
  echo_config(inv);
  export_embeddings(load_checkpoint(inv.cfg.checkpoint), inv.cfg.out);
  std::cout << "wrote " << inv.cfg.out << "\n";
  write_manifest(inv, false);
  return 0;
}

int cmd_gradcheck(Invocation& inv) {
  echo_config(inv);
  const GradCheckReport report = gradient_check(inv.cfg.train.seed);
  std::cout << report.to_text();
  if (!inv.cfg.out.empty()) write_text_file(inv.cfg.out, report.to_text());
  write_manifest(inv, false);
  if (!(report.max_rel_error() < 1e-3)) {
    throw NumericalError(fmt::format("gradient check failed: max relative error {:.3e}",
                                     report.max_rel_error()));
  }
  std::cout << "gradient check passed\n";
  return 0;
}

void configure_logging() {
  auto logger = std::make_shared<spdlog::logger>("crowdner", std::make_shared<spdlog::sinks::stderr_sink_st>());
  logger->set_pattern("[%l] %v");
  const char* env = std::getenv("AA_LOG");
  logger->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
  spdlog::set_default_logger(logger);
}

}  // namespace

int run(int argc, const char* const* argv) {
  configure_logging();
  CLI::App app{"Annotator-aware NER from crowdsourced labels", "crowdner"};
  app.require_subcommand(1);

  // Flag name -> config key. Values are applied after the config file.
  struct Flag {
    const char* flag;
    const char* key;
    const char* help;
  };
  const std::vector<Flag> common = {{"--seed", "seed", "random seed"},
                                    {"--out", "out", "output path"}};
  const std::map<std::string, std::vector<Flag>> flags = {
      {"train",
       {{"--corpus", "corpus", "training corpus (TSV)"},
        {"--tagset", "tagset", "tagset file (default <corpus>.tags)"},
        {"--mode", "mode", "all, mv, gold, annotator-unsup or annotator-sup"},
        {"--expert-fraction", "expert_fraction", "fraction of expert sentences to add"},
        {"--dev", "dev_corpus", "dev corpus with expert labels"},
        {"--inference-expert", "inference_expert", "centroid or learned (dev scoring)"},
        {"--epochs", "epochs", "number of epochs"},
        {"--num-annotators", "num_annotators", "crowd columns in the corpus"},
        {"--max-steps", "max_steps", "stop after this many optimizer steps"}}},
      {"eval",
       {{"--checkpoint", "checkpoint", "checkpoint directory"},
        {"--corpus", "corpus", "test corpus with expert labels"},
        {"--tagset", "tagset", "tagset file (default: the checkpoint's)"},
        {"--inference-expert", "inference_expert", "centroid or learned"}}},
      {"aggregate",
       {{"--corpus", "corpus", "crowd corpus"},
        {"--tagset", "tagset", "tagset file"},
        {"--num-annotators", "num_annotators", "crowd columns in the corpus"}}},
      {"synth",
       {{"--profiles", "profiles", "annotator profiles (JSON)"},
        {"--gold", "gold", "gold corpus (tokens and expert labels)"},
        {"--tagset", "tagset", "tagset of the gold corpus"},
        {"--sentences", "grammar_sentences", "generate a gold corpus of this size"}}},
      {"filter",
       {{"--corpus", "corpus", "crowd corpus with expert labels"},
        {"--tagset", "tagset", "tagset file"},
        {"--filter-k", "filter_k", "number of annotators to remove"},
        {"--num-annotators", "num_annotators", "crowd columns in the corpus"}}},
      {"select",
       {{"--corpus", "corpus", "corpus with expert labels"},
        {"--tagset", "tagset", "tagset file"},
        {"--expert-fraction", "expert_fraction", "fraction of expert sentences to keep"},
        {"--num-annotators", "num_annotators", "crowd columns in the corpus"}}},
      {"export-embeddings", {{"--checkpoint", "checkpoint", "checkpoint directory"}}},
      {"gradcheck", {}}};
  const std::map<std::string, const char*> descriptions = {
      {"train", "train a tagger on a crowd corpus"},
      {"eval", "score a checkpoint on a labeled corpus"},
      {"aggregate", "majority-vote a crowd corpus into single labels"},
      {"synth", "simulate crowd annotators over gold labels"},
      {"filter", "drop the k least reliable annotators"},
      {"select", "rank expert sentences by informativeness"},
      {"export-embeddings", "write annotator embeddings and PCA coordinates"},
      {"gradcheck", "finite-difference check of every gradient"}};

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;
  std::vector<std::string> overrides;
  for (const auto& [name, list] : flags) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--set", overrides, "KEY=VALUE override (repeatable)");
    auto add = [&](const Flag& f) {
      const std::string id = name + f.key;
      options[id] = sub->add_option(f.flag, values[id], f.help);
    };
    for (const auto& f : common) add(f);
    for (const auto& f : list) add(f);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Invocation inv;
  try {
    const CLI::App* sub = app.get_subcommands().front();
    inv.command = sub->get_name();
    if (!config_path.empty()) inv.cfg.apply(load_key_values(config_path));
    for (const auto& [id, opt] : options) {
      if (id.rfind(inv.command, 0) == 0 && opt->count() > 0) {
        inv.cfg.set(id.substr(inv.command.size()), values[id]);
      }
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects KEY=VALUE, got '" + o + "'");
      inv.cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    inv.cfg.train.validate();
    if (inv.command == "train") return cmd_train(inv);
    if (inv.command == "eval") return cmd_eval(inv);
    if (inv.command == "aggregate") return cmd_aggregate(inv);
    if (inv.command == "synth") return cmd_synth(inv);
    if (inv.command == "filter") return cmd_filter(inv);
    if (inv.command == "select") return cmd_select(inv);
    if (inv.command == "export-embeddings") return cmd_export(inv);
    return cmd_gradcheck(inv);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed JSON: {}", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace crowdner
