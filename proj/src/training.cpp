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

#include "crowdner/training.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "crowdner/checkpoint.hpp"
#include "crowdner/crf.hpp"

namespace crowdner {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw UsageError("invalid value '" + value + "' for " + key);
  }
  return out;
}

}  // namespace

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.d_model = 768;
  c.n_layers = 12;
  c.n_heads = 12;
  c.d_ff = 3072;
  c.max_len = 512;
  c.d_adapter = 128;
  c.d_ann = 8;
  c.d_h = 400;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (batch_size <= 0) throw UsageError("batch_size must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw UsageError("dropout_p must lie in [0,1)");
  if (!(clip_norm > 0.0)) throw UsageError("clip_norm must be positive");
  if (epochs <= 0) throw UsageError("epochs must be positive");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_len <= 0 ||
      d_adapter <= 0 || d_ann <= 0 || d_h <= 0) {
    throw UsageError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw UsageError("d_model must be divisible by n_heads");
  if (num_adapted_layers < 0 || num_adapted_layers > n_layers) {
    throw UsageError("num_adapted_layers must lie in [0, n_layers]");
  }
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = {
      "learning_rate", "batch_size", "dropout_p", "clip_norm", "epochs", "seed",
      "encoder_seed",  "d_model",    "n_layers",  "n_heads",   "d_ff",   "max_len",
      "d_adapter",     "d_ann",      "d_h",       "num_adapted_layers"};
  return k;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "dropout_p") dropout_p = parse_number<double>(key, value);
  else if (key == "clip_norm") clip_norm = parse_number<double>(key, value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "encoder_seed") encoder_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "d_model") d_model = parse_number<int>(key, value);
  else if (key == "n_layers") n_layers = parse_number<int>(key, value);
  else if (key == "n_heads") n_heads = parse_number<int>(key, value);
  else if (key == "d_ff") d_ff = parse_number<int>(key, value);
  else if (key == "max_len") max_len = parse_number<int>(key, value);
  else if (key == "d_adapter") d_adapter = parse_number<int>(key, value);
  else if (key == "d_ann") d_ann = parse_number<int>(key, value);
  else if (key == "d_h") d_h = parse_number<int>(key, value);
  else if (key == "num_adapted_layers") num_adapted_layers = parse_number<int>(key, value);
  else throw UsageError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  return {{"learning_rate", fmt::format("{}", learning_rate)},
          {"batch_size", fmt::format("{}", batch_size)},
          {"dropout_p", fmt::format("{}", dropout_p)},
          {"clip_norm", fmt::format("{}", clip_norm)},
          {"epochs", fmt::format("{}", epochs)},
          {"seed", fmt::format("{}", seed)},
          {"encoder_seed", fmt::format("{}", encoder_seed)},
          {"d_model", fmt::format("{}", d_model)},
          {"n_layers", fmt::format("{}", n_layers)},
          {"n_heads", fmt::format("{}", n_heads)},
          {"d_ff", fmt::format("{}", d_ff)},
          {"max_len", fmt::format("{}", max_len)},
          {"d_adapter", fmt::format("{}", d_adapter)},
          {"d_ann", fmt::format("{}", d_ann)},
          {"d_h", fmt::format("{}", d_h)},
          {"num_adapted_layers", fmt::format("{}", num_adapted_layers)}};
}

ModelDims TrainConfig::model_dims(std::size_t vocab_size, std::size_t num_tags,
                                  int annotator_rows) const {
  ModelDims dims;
  dims.encoder.vocab_size = static_cast<int>(vocab_size);
  dims.encoder.d_model = d_model;
  dims.encoder.n_layers = n_layers;
  dims.encoder.n_heads = n_heads;
  dims.encoder.d_ff = d_ff;
  dims.encoder.max_len = max_len;
  dims.d_adapter = d_adapter;
  dims.d_ann = d_ann;
  dims.d_h = d_h;
  dims.num_adapted_layers = num_adapted_layers == 0 ? n_layers : num_adapted_layers;
  dims.num_tags = static_cast<int>(num_tags);
  dims.annotator_rows = annotator_rows;
  return dims;
}

std::vector<EncodedInstance> encode_instances(const CrowdCorpus& corpus,
                                              std::span<const TrainInstance> instances,
                                              const Vocab& vocab, const AnnotatorRegistry& registry) {
  std::vector<EncodedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    const Sentence& s = corpus.sentences.at(inst.sentence);
    const std::string who = inst.annotator.is_expert()
                                ? std::string("expert")
                                : corpus.annotators.empty()
                                      ? std::string("shared")
                                      : corpus.annotators.at(static_cast<std::size_t>(inst.annotator.index));
    out.push_back({s.id + "@" + who, vocab.encode(s.tokens), corpus.tagset.encode(inst.tags),
                   registry.row_of(inst.annotator)});
  }
  return out;
}

DropoutMask dropout_mask(std::size_t n, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw UsageError("dropout probability must lie in [0,1)");
  DropoutMask mask;
  if (p == 0.0) return mask;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mask.keep.resize(n);
  for (auto& k : mask.keep) k = u(rng) >= p ? 1 : 0;
  mask.scale = 1.0 / (1.0 - p);
  return mask;
}

template <typename S>
Mat<S> timestep_dropout(const Mat<S>& reps, double p, std::mt19937_64& rng) {
  const DropoutMask mask = dropout_mask(static_cast<std::size_t>(reps.rows()), p, rng);
  if (mask.keep.empty()) return reps;
  Mat<S> out = reps;
  for (long i = 0; i < out.rows(); ++i) {
    out.row(i) *= mask.keep[static_cast<std::size_t>(i)] ? static_cast<S>(mask.scale) : S(0);
  }
  return out;
}

template <typename S>
S compute_gradients(const Network<S>& net, std::span<const EncodedInstance> batch,
                    std::span<const DropoutMask> masks, Trainables<S>& grads) {
  if (batch.empty()) throw UsageError("empty batch");
  if (!masks.empty() && masks.size() != batch.size()) throw UsageError("one dropout mask per instance");
  if (grads.theta.size() != net.params.theta.size()) {
    grads = net.params.zeros_like();
  } else {
    grads.set_zero();
  }
  const S weight = S(1) / static_cast<S>(batch.size());
  const DropoutMask none;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const S loss = instance_loss<S>(net, batch[i], masks.empty() ? none : masks[i], &grads, weight);
    if (!std::isfinite(static_cast<double>(loss))) {
      throw NumericalError("non-finite loss on instance " + batch[i].id);
    }
    total += static_cast<double>(loss);
  }
  return static_cast<S>(total / static_cast<double>(batch.size()));
}

template <typename S>
double clip_gradients(std::span<Mat<S>* const> tensors, double max_norm) {
  double sq = 0.0;
  for (const auto* t : tensors) sq += t->template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (auto* t : tensors) *t *= scale;
  }
  return norm;
}

template <typename S>
double clip_gradients(Trainables<S>& grads, double max_norm) {
  const auto tensors = grads.tensors();
  return clip_gradients<S>(std::span<Mat<S>* const>(tensors.data(), tensors.size()), max_norm);
}

template <typename S>
void adam_step(Mat<S>& param, const Mat<S>& grad, Mat<S>& m, Mat<S>& v, long t,
               const AdamSettings& settings) {
  if (t < 1) throw UsageError("adam step count must be >= 1");
  const S b1 = static_cast<S>(settings.beta1);
  const S b2 = static_cast<S>(settings.beta2);
  m.array() = b1 * m.array() + (S(1) - b1) * grad.array();
  v.array() = b2 * v.array() + (S(1) - b2) * grad.array().square();
  const double c1 = 1.0 - std::pow(settings.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(settings.beta2, static_cast<double>(t));
  const S lr = static_cast<S>(settings.lr / c1);
  const S inv_c2 = static_cast<S>(1.0 / c2);
  const S eps = static_cast<S>(settings.eps);
  param.array() -= lr * m.array() / ((v.array() * inv_c2).sqrt() + eps);
}

template <typename S>
Adam<S>::Adam(const Trainables<S>& params, AdamSettings settings)
    : settings_(settings), m_(params.zeros_like()), v_(params.zeros_like()) {}

template <typename S>
void Adam<S>::step(Trainables<S>& params, const Trainables<S>& grads) {
  ++t_;
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t i = 0; i < Trainables<S>::kCount; ++i) {
    adam_step<S>(*p[i], *g[i], *m[i], *v[i], t_, settings_);
  }
}

std::string metrics_csv(std::span<const EpochMetrics> log) {
  std::string out = "epoch,loss,dev_p,dev_r,dev_f1\n";
  for (const auto& e : log) {
    if (e.dev) {
      out += fmt::format("{},{:.6f},{:.2f},{:.2f},{:.2f}\n", e.epoch, e.loss, e.dev->precision(),
                         e.dev->recall(), e.dev->f1());
    } else {
      out += fmt::format("{},{:.6f},,,\n", e.epoch, e.loss);
    }
  }
  return out;
}

InferenceExpert parse_inference_expert(const std::string& name) {
  if (name == "centroid") return InferenceExpert::kCentroid;
  if (name == "learned") return InferenceExpert::kLearned;
  throw UsageError("unknown inference expert '" + name + "' (centroid or learned)");
}

std::string to_string(InferenceExpert which) {
  return which == InferenceExpert::kCentroid ? "centroid" : "learned";
}

InferenceExpert default_inference(const TrainingMode& mode) {
  return mode.kind == ModeKind::kAnnotatorSup ? InferenceExpert::kLearned : InferenceExpert::kCentroid;
}

Vec<float> inference_embedding(const TrainedModel& model, InferenceExpert which) {
  const auto& reg = model.registry;
  if (!model.mode.annotator_aware()) return model.net.annotator_embedding(0);
  if (which == InferenceExpert::kLearned) {
    if (reg.expert_row < 0) throw UsageError("model has no learned expert embedding; use centroid");
    return model.net.annotator_embedding(reg.expert_row);
  }
  return expert_centroid<float>(model.net.params.annotators, reg.crowd_rows());
}

std::vector<std::vector<std::string>> predict(const TrainedModel& model, const CrowdCorpus& corpus,
                                              InferenceExpert which) {
  if (!(corpus.tagset == model.tagset)) throw DataError("corpus tagset differs from the model's");
  const Vec<float> adapters =
      pgn_generate<float>(inference_embedding(model, which), model.net.params.theta);
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences) {
    const auto ids = model.vocab.encode(s.tokens);
    const auto tags = decode<float>(model.net, ids, adapters);
    out.push_back(model.tagset.decode(repair_bio(tags, model.tagset)));
  }
  return out;
}

ScoreReport evaluate_model(const TrainedModel& model, const CrowdCorpus& corpus,
                           InferenceExpert which) {
  if (!corpus.has_expert_labels()) throw DataError("evaluation corpus needs expert labels");
  const auto pred = predict(model, corpus, which);
  std::vector<std::vector<std::string>> gold;
  gold.reserve(corpus.size());
  for (const auto& e : corpus.expert) gold.push_back(e->tags);
  return evaluate(pred, gold);
}

TrainResult train(const CrowdCorpus& corpus, const TrainingMode& mode, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  mode.validate();
  corpus.validate();
  if (options.dev && !options.dev->has_expert_labels()) {
    throw DataError("dev corpus needs expert labels");
  }
  const auto instances = build_instances(corpus, mode);
  if (instances.empty()) throw DataError("no training instances for mode " + to_string(mode.kind));

  TrainResult result;
  TrainedModel& model = result.model;
  model.config = config;
  model.mode = mode;
  model.vocab = Vocab::build(corpus);
  model.tagset = corpus.tagset;
  model.registry = AnnotatorRegistry::for_mode(corpus, mode);
  const ModelDims dims =
      config.model_dims(model.vocab.size(), model.tagset.size(), model.registry.rows());
  model.net = Network<float>::init(dims, config.encoder_seed, config.seed);
  const auto encoded = encode_instances(corpus, instances, model.vocab, model.registry);
  for (const auto& e : encoded) {
    if (e.tokens.size() > static_cast<std::size_t>(config.max_len)) {
      throw DataError("sentence " + e.id + " exceeds max_len " + std::to_string(config.max_len));
    }
  }
  spdlog::info("training {} on {} instances, {} annotator rows, {} adapter parameters",
               to_string(mode.kind), encoded.size(), model.registry.rows(), model.net.manifest.size());

  namespace fs = std::filesystem;
  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);

  Adam<float> adam(model.net.params, AdamSettings{config.learning_rate});
  Trainables<float> grads = model.net.params.zeros_like();
  std::optional<Trainables<float>> best;
  double best_f1 = -1.0;
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::seed_seq shuffle_seed{config.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{0}};
    std::seed_seq dropout_seed{config.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{1}};
    std::mt19937_64 shuffle_rng(shuffle_seed);
    std::mt19937_64 dropout_rng(dropout_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    bool stop = false;
    std::vector<EncodedInstance> items;
    std::vector<DropoutMask> masks;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      items.clear();
      masks.clear();
      for (std::size_t i = start; i < end; ++i) {
        items.push_back(encoded[order[i]]);
        masks.push_back(dropout_mask(items.back().tokens.size(), config.dropout_p, dropout_rng));
      }
      const float loss = compute_gradients<float>(model.net, items, masks, grads);
      loss_sum += static_cast<double>(loss) * static_cast<double>(items.size());
      seen += items.size();
      clip_gradients<float>(grads, config.clip_norm);
      adam.step(model.net.params, grads);
      ++result.steps;
      if (options.max_steps > 0 && result.steps >= options.max_steps) {
        stop = true;
        break;
      }
    }

    EpochMetrics metrics{epoch, loss_sum / static_cast<double>(seen), std::nullopt};
    if (options.dev) metrics.dev = evaluate_model(model, *options.dev, options.dev_inference.value_or(default_inference(mode))).total;
    spdlog::info("epoch {} loss {:.4f}{}", epoch, metrics.loss,
                 metrics.dev ? fmt::format(" dev f1 {:.2f}", metrics.dev->f1()) : std::string());
    result.log.push_back(metrics);
    if (options.on_epoch) options.on_epoch(metrics);
    if (!options.out_dir.empty()) {
      save_checkpoint(model, (fs::path(options.out_dir) / fmt::format("epoch_{:03d}", epoch)).string());
    }
    if (metrics.dev) {
      if (metrics.dev->f1() > best_f1) {
        best_f1 = metrics.dev->f1();
        best = model.net.params;
        result.selected_epoch = epoch;
      }
    } else {
      result.selected_epoch = epoch;
    }
    if (stop) break;
  }

  if (best) model.net.params = *best;
  if (!options.out_dir.empty()) {
    save_checkpoint(model, (fs::path(options.out_dir) / "final").string());
    std::ofstream out(fs::path(options.out_dir) / "metrics.csv", std::ios::binary);
    out << metrics_csv(result.log);
    if (!out) throw DataError("cannot write metrics to " + options.out_dir);
  }
  return result;
}

#define CROWDNER_INSTANTIATE(S)                                                                    \
  template Mat<S> timestep_dropout<S>(const Mat<S>&, double, std::mt19937_64&);                    \
  template S compute_gradients<S>(const Network<S>&, std::span<const EncodedInstance>,             \
                                  std::span<const DropoutMask>, Trainables<S>&);                   \
  template double clip_gradients<S>(std::span<Mat<S>* const>, double);                             \
  template double clip_gradients<S>(Trainables<S>&, double);                                       \
  template void adam_step<S>(Mat<S>&, const Mat<S>&, Mat<S>&, Mat<S>&, long, const AdamSettings&); \
  template class Adam<S>;

CROWDNER_INSTANTIATE(float)
CROWDNER_INSTANTIATE(double)

}  // namespace crowdner
