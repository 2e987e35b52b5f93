#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "uap/tensor.hpp"

namespace uap {

using ScoreMatrix = std::vector<std::vector<double>>;

/// Black-box classifier boundary. Callers see probability vectors only;
/// weights, logits, and gradients never cross this interface.
class ScoreOracle {
 public:
  virtual ~ScoreOracle() = default;

  virtual Shape3 input_shape() const = 0;
  virtual int num_classes() const = 0;

  /// Maximum images per underlying request; 0 means unbounded.
  virtual int batch_cap() const { return 0; }

  /// One probability row per image, each summing to 1. Adds the batch size
  /// to the query counter. Submissions above batch_cap() are chunked.
  ScoreMatrix scores(std::span<const ImageTensor> batch);

  std::uint64_t query_count() const { return queries_.load(); }

 protected:
  ScoreOracle() = default;
  // The atomic counter is not copyable; carry its value across instead.
  ScoreOracle(const ScoreOracle& other) : queries_(other.queries_.load()) {}
  ScoreOracle& operator=(const ScoreOracle& other) {
    queries_.store(other.queries_.load());
    return *this;
  }

  virtual ScoreMatrix score_batch(std::span<const ImageTensor> batch) = 0;

 private:
  std::atomic<std::uint64_t> queries_{0};
};

/// Argmax with ties broken toward the lowest class index.
int argmax_row(std::span<const double> row);

/// Label of the highest-confidence class; costs one query.
int predict_label(ScoreOracle& oracle, const ImageTensor& x);

/// softmax(W x + b). Parameters are held at f32 precision so model files
/// round-trip exactly; accumulation is in double.
class LinearSoftmaxOracle final : public ScoreOracle {
 public:
  LinearSoftmaxOracle(Shape3 input, int classes, std::vector<float> weights,
                      std::vector<float> bias);

  static LinearSoftmaxOracle random(Shape3 input, int classes,
                                    std::uint64_t seed,
                                    double weight_scale = 1.0);

  Shape3 input_shape() const override { return input_; }
  int num_classes() const override { return classes_; }

  const std::vector<float>& weights() const { return weights_; }
  const std::vector<float>& bias() const { return bias_; }

 protected:
  ScoreMatrix score_batch(std::span<const ImageTensor> batch) override;

 private:
  Shape3 input_;
  int classes_;
  std::vector<float> weights_;  // classes x (h*w*c), row-major
  std::vector<float> bias_;     // classes
};

/// One ReLU hidden layer followed by a softmax output layer.
class MlpOracle final : public ScoreOracle {
 public:
  MlpOracle(Shape3 input, int classes, int hidden, std::vector<float> w1,
            std::vector<float> b1, std::vector<float> w2,
            std::vector<float> b2);

  static MlpOracle random(Shape3 input, int classes, int hidden,
                          std::uint64_t seed);

  Shape3 input_shape() const override { return input_; }
  int num_classes() const override { return classes_; }
  int hidden_width() const { return hidden_; }

  const std::vector<float>& w1() const { return w1_; }
  const std::vector<float>& b1() const { return b1_; }
  const std::vector<float>& w2() const { return w2_; }
  const std::vector<float>& b2() const { return b2_; }

 protected:
  ScoreMatrix score_batch(std::span<const ImageTensor> batch) override;

 private:
  Shape3 input_;
  int classes_;
  int hidden_;
  std::vector<float> w1_;  // hidden x (h*w*c), row-major
  std::vector<float> b1_;  // hidden
  std::vector<float> w2_;  // classes x hidden, row-major
  std::vector<float> b2_;  // classes
};

// Model file: magic "UAPMODEL1\n", one JSON header line
// {"kind":"linear"|"mlp","h":..,"w":..,"c":..,"classes":..,"hidden":..},
// then little-endian f32 weight blocks, layer-major and row-major within a
// layer: linear = W, bias; mlp = W1, b1, W2, b2.
void save_model(const std::filesystem::path& path,
                const LinearSoftmaxOracle& oracle);
void save_model(const std::filesystem::path& path, const MlpOracle& oracle);
std::unique_ptr<ScoreOracle> load_model(const std::filesystem::path& path);

}  // namespace uap
