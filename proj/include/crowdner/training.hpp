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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "crowdner/bio.hpp"
#include "crowdner/corpus.hpp"
#include "crowdner/crowd.hpp"
#include "crowdner/eval.hpp"
#include "crowdner/network.hpp"
#include "crowdner/vocab.hpp"

namespace crowdner {

/// Optimization and model-size settings. Defaults are the desk profile.
struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  double dropout_p = 0.2;
  double clip_norm = 5.0;
  int epochs = 30;
  std::uint64_t seed = 1;
  std::uint64_t encoder_seed = 1234;

  int d_model = 64;
  int n_layers = 2;
  int n_heads = 2;
  int d_ff = 128;
  int max_len = 128;
  int d_adapter = 16;
  int d_ann = 8;
  int d_h = 64;
  int num_adapted_layers = 0;  // 0 adapts every layer

  static TrainConfig desk() { return {}; }
  /// BERT-base sized encoder, d_adapter 128 and LSTM hidden 400.
  static TrainConfig full_scale();

  void validate() const;

  /// Assigns one `key=value` setting; throws UsageError for unknown keys or
  /// malformed values.
  void set(const std::string& key, const std::string& value);
  static const std::vector<std::string>& keys();
  /// Every setting in `keys()` order, formatted for `set`.
  std::vector<std::pair<std::string, std::string>> entries() const;

  ModelDims model_dims(std::size_t vocab_size, std::size_t num_tags, int annotator_rows) const;

  bool operator==(const TrainConfig&) const = default;
};

/// Instances in index space plus a printable id for diagnostics.
std::vector<EncodedInstance> encode_instances(const CrowdCorpus& corpus,
                                              std::span<const TrainInstance> instances,
                                              const Vocab& vocab, const AnnotatorRegistry& registry);

/// Keep mask for `n` positions: each is dropped with probability p.
DropoutMask dropout_mask(std::size_t n, double p, std::mt19937_64& rng);

/// Zeroes whole rows with probability p and scales survivors by 1/(1-p).
template <typename S>
Mat<S> timestep_dropout(const Mat<S>& reps, double p, std::mt19937_64& rng);

/// Gradients of the mean loss over `batch` (accumulated into a zeroed
/// `grads`). `masks` is empty or holds one mask per instance. Returns the
/// mean loss; a non-finite instance loss throws NumericalError naming it.
template <typename S>
S compute_gradients(const Network<S>& net, std::span<const EncodedInstance> batch,
                    std::span<const DropoutMask> masks, Trainables<S>& grads);

/// Rescales the tensors so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename S>
double clip_gradients(std::span<Mat<S>* const> tensors, double max_norm);
template <typename S>
double clip_gradients(Trainables<S>& grads, double max_norm);

struct AdamSettings {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of one tensor at step t >= 1.
template <typename S>
void adam_step(Mat<S>& param, const Mat<S>& grad, Mat<S>& m, Mat<S>& v, long t,
               const AdamSettings& settings = {});

template <typename S>
class Adam {
 public:
  Adam(const Trainables<S>& params, AdamSettings settings);
  void step(Trainables<S>& params, const Trainables<S>& grads);
  long steps() const { return t_; }

 private:
  AdamSettings settings_;
  Trainables<S> m_, v_;
  long t_ = 0;
};

/// Everything needed to run inference; what a checkpoint stores.
struct TrainedModel {
  TrainConfig config;
  TrainingMode mode;
  Vocab vocab;
  Tagset tagset;
  AnnotatorRegistry registry;
  Network<float> net;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  std::optional<SpanCounts> dev;
};

std::string metrics_csv(std::span<const EpochMetrics> log);

enum class InferenceExpert { kCentroid, kLearned };

InferenceExpert parse_inference_expert(const std::string& name);
std::string to_string(InferenceExpert which);
/// Learned expert row for supervised models, centroid otherwise.
InferenceExpert default_inference(const TrainingMode& mode);

struct TrainOptions {
  const CrowdCorpus* dev = nullptr;  // needs expert labels
  std::optional<InferenceExpert> dev_inference;  // unset: default_inference
  std::string out_dir;               // empty keeps everything in memory
  /// Stop after this many optimizer steps (0 = run every epoch).
  long max_steps = 0;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochMetrics> log;
  int selected_epoch = 0;
  long steps = 0;
};

/// Seeded per-epoch shuffle, batches, time-step dropout, mean NLL, clipping
/// and Adam. With a dev corpus the epoch with the best dev F1 is kept,
/// otherwise the last. With an out_dir, writes epoch_NNN/ and final/
/// checkpoints and metrics.csv.
TrainResult train(const CrowdCorpus& corpus, const TrainingMode& mode, const TrainConfig& config,
                  const TrainOptions& options = {});

/// The annotator embedding used at test time. Shared-row modes use row 0;
/// annotator-aware models use the crowd centroid unless `which` asks for the
/// learned expert row of a supervised model.
Vec<float> inference_embedding(const TrainedModel& model, InferenceExpert which);

/// BIO-repaired predictions for every sentence.
std::vector<std::vector<std::string>> predict(const TrainedModel& model, const CrowdCorpus& corpus,
                                              InferenceExpert which);

/// Scores predictions against the corpus' expert labels.
ScoreReport evaluate_model(const TrainedModel& model, const CrowdCorpus& corpus,
                           InferenceExpert which);

}  // namespace crowdner
