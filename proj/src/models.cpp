#include "textclf/models.hpp"

#include <algorithm>
#include <cmath>

#include "textclf/errors.hpp"

namespace textclf {

namespace {

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (int64_t i = 0; i < t.size(); ++i)
    t.data()[i] = rng.uniform(-bound, bound);
}

double glorot_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

constexpr const char* kGateNames[4] = {"i", "f", "o", "g"};
constexpr int kForgetGate = 1;

}  // namespace

void EmbeddingLayer::init(Rng& rng) {
  fill_uniform(weights, rng, 0.05);
  if (pad_row_masked)
    for (int j = 0; j < dim(); ++j) weights(0, j) = 0.0;
}

void ModelConfig::validate() const {
  if (family != "bilstm" && family != "cnn")
    throw DataError("model family must be \"bilstm\" or \"cnn\", got \"" +
                    family + "\"");
  if (embedding_dim < 1 || sequence_length < 1 || num_classes < 2)
    throw DataError("model dimensions must be positive (>= 2 classes)");
  if (family == "bilstm" && hidden_size < 1)
    throw DataError("bilstm hidden size must be positive");
  if (family == "cnn") {
    if (filter_orders.empty() || filters_per_order < 1)
      throw DataError("cnn needs at least one filter order and one filter");
    for (size_t i = 0; i < filter_orders.size(); ++i) {
      if (filter_orders[i] < 1)
        throw DataError("cnn filter orders must be positive");
      if (i > 0 && filter_orders[i] <= filter_orders[i - 1])
        throw DataError("cnn filter orders must be strictly ascending");
    }
  }
}

int ModelConfig::max_filter_order() const {
  return *std::max_element(filter_orders.begin(), filter_orders.end());
}

int64_t TextClassifier::parameter_count() {
  int64_t total = 0;
  for (const auto& [name, tensor] : named_params()) total += tensor->size();
  return total;
}

std::pair<Tape::NodeId, Tape::NodeId> lstm_cell_step(Tape& tape,
                                                     Tape::NodeId x,
                                                     Tape::NodeId h_prev,
                                                     Tape::NodeId c_prev,
                                                     const LstmCellNodes& cell) {
  Tape::NodeId pre[4];
  for (int g = 0; g < 4; ++g)
    pre[g] = tape.add(tape.add(tape.vecmat(x, cell.w[g]),
                               tape.vecmat(h_prev, cell.u[g])),
                      cell.b[g]);
  const Tape::NodeId gate_i = tape.sigmoid(pre[0]);
  const Tape::NodeId gate_f = tape.sigmoid(pre[1]);
  const Tape::NodeId gate_o = tape.sigmoid(pre[2]);
  const Tape::NodeId gate_g = tape.tanh(pre[3]);
  const Tape::NodeId c =
      tape.add(tape.hadamard(gate_f, c_prev), tape.hadamard(gate_i, gate_g));
  const Tape::NodeId h = tape.hadamard(gate_o, tape.tanh(c));
  return {h, c};
}

// ---------------------------------------------------------------------------
// Bi-LSTM
// ---------------------------------------------------------------------------

namespace {

struct LstmDirection {
  Tensor w[4];  // {d, H}
  Tensor u[4];  // {H, H}
  Tensor b[4];  // {H}
};

class BiLstmModel final : public TextClassifier {
 public:
  explicit BiLstmModel(const ModelConfig& config) : config_(config) {
    const int d = config_.embedding_dim, h = config_.hidden_size;
    for (LstmDirection* dir : {&fwd_, &bwd_}) {
      for (int g = 0; g < 4; ++g) {
        dir->w[g] = Tensor({d, h});
        dir->u[g] = Tensor({h, h});
        dir->b[g] = Tensor({h});
      }
    }
    out_weight_ = Tensor({2 * h, config_.num_classes});
    out_bias_ = Tensor({config_.num_classes});
  }

  const ModelConfig& config() const override { return config_; }

  void init(Rng& rng) override {
    const int d = config_.embedding_dim, h = config_.hidden_size;
    for (LstmDirection* dir : {&fwd_, &bwd_}) {
      for (int g = 0; g < 4; ++g) {
        fill_uniform(dir->w[g], rng, glorot_bound(d, h));
        fill_uniform(dir->u[g], rng, glorot_bound(h, h));
        dir->b[g] = g == kForgetGate ? Tensor::full({h}, 1.0) : Tensor({h});
      }
    }
    fill_uniform(out_weight_, rng, 0.05);
    out_bias_ = Tensor({config_.num_classes});
  }

  std::vector<NamedTensor> named_params() override {
    std::vector<NamedTensor> params;
    const char* dir_names[2] = {"fwd", "bwd"};
    LstmDirection* dirs[2] = {&fwd_, &bwd_};
    for (int dI = 0; dI < 2; ++dI) {
      for (int g = 0; g < 4; ++g)
        params.emplace_back(std::string("lstm.") + dir_names[dI] + ".w_" +
                                kGateNames[g],
                            &dirs[dI]->w[g]);
      for (int g = 0; g < 4; ++g)
        params.emplace_back(std::string("lstm.") + dir_names[dI] + ".u_" +
                                kGateNames[g],
                            &dirs[dI]->u[g]);
      for (int g = 0; g < 4; ++g)
        params.emplace_back(std::string("lstm.") + dir_names[dI] + ".b_" +
                                kGateNames[g],
                            &dirs[dI]->b[g]);
    }
    params.emplace_back("output.weight", &out_weight_);
    params.emplace_back("output.bias", &out_bias_);
    return params;
  }

  Tape::NodeId forward(Tape& tape, Tape::NodeId embedded,
                       int true_length) override {
    const Tensor& emb = tape.value(embedded);
    const int k = emb.dim(0);
    if (true_length < 1)
      throw DataError("bilstm forward needs at least one real token");
    if (true_length > k)
      throw std::invalid_argument("true_length " + std::to_string(true_length) +
                                  " exceeds sequence length " +
                                  std::to_string(k));

    const Tape::NodeId h_fwd = run_direction(tape, embedded, true_length, fwd_, false);
    const Tape::NodeId h_bwd = run_direction(tape, embedded, true_length, bwd_, true);
    const Tape::NodeId merged = tape.concat({h_fwd, h_bwd});
    const Tape::NodeId logits =
        tape.add(tape.vecmat(merged, tape.param(out_weight_)),
                 tape.param(out_bias_));
    return tape.softmax(logits);
  }

 private:
  Tape::NodeId run_direction(Tape& tape, Tape::NodeId embedded, int length,
                             LstmDirection& dir, bool reversed) {
    const int h = config_.hidden_size;
    // One matmul per gate projects every position at once; the recurrence
    // then just picks rows.
    Tape::NodeId pre[4];
    Tape::NodeId u_nodes[4];
    for (int g = 0; g < 4; ++g) {
      pre[g] = tape.add_row_bias(tape.matmul(embedded, tape.param(dir.w[g])),
                                 tape.param(dir.b[g]));
      u_nodes[g] = tape.param(dir.u[g]);
    }
    Tape::NodeId h_state = tape.constant(Tensor({h}));
    Tape::NodeId c_state = tape.constant(Tensor({h}));
    for (int step = 0; step < length; ++step) {
      const int t = reversed ? length - 1 - step : step;
      Tape::NodeId gates[4];
      for (int g = 0; g < 4; ++g)
        gates[g] = tape.add(tape.row(pre[g], t), tape.vecmat(h_state, u_nodes[g]));
      const Tape::NodeId gate_i = tape.sigmoid(gates[0]);
      const Tape::NodeId gate_f = tape.sigmoid(gates[1]);
      const Tape::NodeId gate_o = tape.sigmoid(gates[2]);
      const Tape::NodeId gate_g = tape.tanh(gates[3]);
      c_state = tape.add(tape.hadamard(gate_f, c_state),
                         tape.hadamard(gate_i, gate_g));
      h_state = tape.hadamard(gate_o, tape.tanh(c_state));
    }
    return h_state;
  }

  ModelConfig config_;
  LstmDirection fwd_, bwd_;
  Tensor out_weight_;
  Tensor out_bias_;
};

// ---------------------------------------------------------------------------
// Parallel temporal CNN
// ---------------------------------------------------------------------------

class CnnModel final : public TextClassifier {
 public:
  explicit CnnModel(const ModelConfig& config) : config_(config) {
    const int d = config_.embedding_dim, f = config_.filters_per_order;
    for (int order : config_.filter_orders) {
      filters_.emplace_back(Shape{f, order, d});
      filter_bias_.emplace_back(Shape{f});
    }
    const int pooled = f * static_cast<int>(config_.filter_orders.size());
    out_weight_ = Tensor({pooled, config_.num_classes});
    out_bias_ = Tensor({config_.num_classes});
  }

  const ModelConfig& config() const override { return config_; }

  void init(Rng& rng) override {
    const int d = config_.embedding_dim, f = config_.filters_per_order;
    for (size_t i = 0; i < filters_.size(); ++i) {
      fill_uniform(filters_[i], rng,
                   glorot_bound(config_.filter_orders[i] * d, f));
      filter_bias_[i] = Tensor({f});
    }
    fill_uniform(out_weight_, rng, 0.05);
    out_bias_ = Tensor({config_.num_classes});
  }

  std::vector<NamedTensor> named_params() override {
    std::vector<NamedTensor> params;
    for (size_t i = 0; i < filters_.size(); ++i) {
      const std::string base =
          "conv" + std::to_string(config_.filter_orders[i]);
      params.emplace_back(base + ".filters", &filters_[i]);
      params.emplace_back(base + ".bias", &filter_bias_[i]);
    }
    params.emplace_back("output.weight", &out_weight_);
    params.emplace_back("output.bias", &out_bias_);
    return params;
  }

  Tape::NodeId forward(Tape& tape, Tape::NodeId embedded,
                       int true_length) override {
    (void)true_length;  // max-over-time pooling spans the padded length
    const Tensor& emb = tape.value(embedded);
    const int k = emb.dim(0);
    if (k < config_.max_filter_order())
      throw std::invalid_argument(
          "cnn forward: sequence length " + std::to_string(k) +
          " is shorter than the largest filter order " +
          std::to_string(config_.max_filter_order()));
    std::vector<Tape::NodeId> pooled;
    for (size_t i = 0; i < filters_.size(); ++i) {
      const Tape::NodeId fmap = tape.conv1d_temporal(
          embedded, tape.param(filters_[i]), tape.param(filter_bias_[i]));
      pooled.push_back(tape.max_over_time(fmap));
    }
    const Tape::NodeId merged = tape.concat(pooled);
    const Tape::NodeId logits =
        tape.add(tape.vecmat(merged, tape.param(out_weight_)),
                 tape.param(out_bias_));
    return tape.softmax(logits);
  }

 private:
  ModelConfig config_;
  std::vector<Tensor> filters_;
  std::vector<Tensor> filter_bias_;
  Tensor out_weight_;
  Tensor out_bias_;
};

}  // namespace

std::unique_ptr<TextClassifier> make_model(const ModelConfig& config) {
  config.validate();
  if (config.family == "bilstm") return std::make_unique<BiLstmModel>(config);
  return std::make_unique<CnnModel>(config);
}

Tape::NodeId classify(Tape& tape, TextClassifier& model,
                      EmbeddingLayer& embedding, const EncodedSequence& seq) {
  const Tape::NodeId weights = tape.param(embedding.weights);
  const Tape::NodeId embedded =
      tape.embedding_lookup(weights, seq.indices, embedding.pad_row_masked);
  return model.forward(tape, embedded, seq.true_length);
}

}  // namespace textclf
