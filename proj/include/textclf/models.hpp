#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "textclf/rng.hpp"
#include "textclf/tensor.hpp"
#include "textclf/text.hpp"

namespace textclf {

// Learned word embeddings [V x d]. Row 0 is the PAD row and stays all-zero
// while pad_row_masked; gradients never flow into it. trainable=false is the
// transfer-learning freeze.
struct EmbeddingLayer {
  Tensor weights;
  bool trainable = true;
  bool pad_row_masked = true;

  EmbeddingLayer() = default;
  EmbeddingLayer(int vocab_size, int dim) : weights(Shape{vocab_size, dim}) {}

  int vocab_size() const { return weights.dim(0); }
  int dim() const { return weights.dim(1); }
  void init(Rng& rng);
};

struct ModelConfig {
  std::string family = "cnn";  // "bilstm" | "cnn"
  int embedding_dim = 100;     // d
  int hidden_size = 64;        // H, bilstm only
  std::vector<int> filter_orders = {2, 3, 4};  // cnn only, kept ascending
  int filters_per_order = 64;  // F, cnn only
  int sequence_length = 60;    // k
  int num_classes = 2;

  void validate() const;
  int max_filter_order() const;
};

using NamedTensor = std::pair<std::string, Tensor*>;

class TextClassifier {
 public:
  virtual ~TextClassifier() = default;

  virtual const ModelConfig& config() const = 0;
  // Class-probability node built from the [k x d] embedding node. PAD
  // positions at or beyond true_length never enter an LSTM recurrence; the
  // CNN convolves the full padded length.
  virtual Tape::NodeId forward(Tape& tape, Tape::NodeId embedded,
                               int true_length) = 0;
  // Parameters in a fixed order (excludes the embedding layer).
  virtual std::vector<NamedTensor> named_params() = 0;
  virtual void init(Rng& rng) = 0;

  int64_t parameter_count();
};

std::unique_ptr<TextClassifier> make_model(const ModelConfig& config);

// Single LSTM cell update:
//   i = sigmoid(x W_i + h U_i + b_i)    f = sigmoid(x W_f + h U_f + b_f)
//   o = sigmoid(x W_o + h U_o + b_o)    g = tanh   (x W_g + h U_g + b_g)
//   c = f * c_prev + i * g              h = o * tanh(c)
// Gate order in the arrays is i, f, o, g.
struct LstmCellNodes {
  Tape::NodeId w[4];  // {d x H}
  Tape::NodeId u[4];  // {H x H}
  Tape::NodeId b[4];  // {H}
};
std::pair<Tape::NodeId, Tape::NodeId> lstm_cell_step(Tape& tape,
                                                     Tape::NodeId x,
                                                     Tape::NodeId h_prev,
                                                     Tape::NodeId c_prev,
                                                     const LstmCellNodes& cell);

// Binds the embedding weights, looks up the sequence, and runs the model.
Tape::NodeId classify(Tape& tape, TextClassifier& model,
                      EmbeddingLayer& embedding, const EncodedSequence& seq);

}  // namespace textclf
