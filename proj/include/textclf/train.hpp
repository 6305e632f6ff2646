#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "textclf/dataset.hpp"
#include "textclf/models.hpp"
#include "textclf/tensor.hpp"
#include "textclf/text.hpp"

namespace textclf {

enum class EvalMode { short_text, long_text };
EvalMode parse_mode(const std::string& s);  // "short" or "long"
std::string mode_str(EvalMode mode);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  uint64_t seed = 1;
  EvalMode mode = EvalMode::short_text;
  // Data-parallel workers per batch. Results depend deterministically on the
  // thread count (fixed sample partition, fixed reduction order), so it is
  // part of the configuration rather than an ambient setting.
  int threads = 4;

  void validate() const;
};

// "Improved" means the dev loss dropped by more than this.
inline constexpr double kMinImprovement = 1e-6;

struct Sample {
  int subject = 0;  // index into the SampleSet subject arrays
  EncodedSequence seq;
  int label = 0;
};

struct SampleSet {
  std::vector<Sample> samples;
  std::vector<std::string> subject_ids;
  std::vector<int> subject_labels;

  bool empty() const { return samples.empty(); }
};

// Builds model inputs per evaluation mode. short_text: one sample per text;
// a document holding a single long text (conversation shape) is cut into
// k-sized chunks first. long_text: one sample per subject over all texts
// concatenated, truncated at long_cap tokens. min_len pads very short
// sequences up to the model's minimum usable length.
SampleSet make_samples(const std::vector<Document>& docs,
                       const Vocabulary& vocab, EvalMode mode, int k,
                       int long_cap = 3000, int min_len = 1,
                       int chunk_min_remainder = 10);

double sparse_cross_entropy(const Tensor& probs, int label);

// Adam with bias correction:
//   m_hat = m / (1 - beta1^t),  v_hat = v / (1 - beta2^t)
//   theta -= lr * m_hat / (sqrt(v_hat) + eps)
// Construct with trainable parameters only; frozen tensors must not appear,
// and the state map never holds entries for them.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<NamedTensor> params, const TrainConfig& config);

  // Applies one update from each parameter's grad buffer; t advances once.
  void step();
  void zero_grads();
  int64_t timestep() const { return timestep_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  bool has_state_for(const std::string& name) const;

 private:
  std::vector<NamedTensor> params_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  double lr_, beta1_, beta2_, eps_;
  int64_t timestep_ = 0;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int stopped_epoch = 0;
  int best_epoch = 0;
};

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean loss / argmax accuracy over a sample set (no gradients).
EvalStats evaluate_loss(TextClassifier& model, EmbeddingLayer& embedding,
                        const SampleSet& set, int threads);

// Per-sample class probabilities, in sample order.
std::vector<std::vector<double>> predict_all(TextClassifier& model,
                                             EmbeddingLayer& embedding,
                                             const SampleSet& set, int threads);

// Mini-batch training with early stopping: stops once the dev loss has not
// improved for `patience` consecutive epochs, then restores the best-epoch
// snapshot. The embedding participates only while embedding.trainable.
TrainHistory train(TextClassifier& model, EmbeddingLayer& embedding,
                   const SampleSet& train_set, const SampleSet& dev_set,
                   const TrainConfig& config);

}  // namespace textclf
