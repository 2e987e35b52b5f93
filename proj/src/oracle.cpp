#include "uap/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "uap/rng.hpp"

namespace uap {

namespace {

void softmax_in_place(std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

constexpr char kModelMagic[] = "UAPMODEL1\n";  // 10 bytes on disk

void write_f32_block(std::ofstream& out, const std::vector<float>& block) {
  for (float f : block) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(bits & 0xff),
        static_cast<unsigned char>((bits >> 8) & 0xff),
        static_cast<unsigned char>((bits >> 16) & 0xff),
        static_cast<unsigned char>((bits >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

std::vector<float> read_f32_block(std::ifstream& in, std::size_t count,
                                  std::size_t& offset) {
  std::vector<float> block(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
      throw std::runtime_error("invalid model file: truncated at byte " +
                               std::to_string(offset));
    }
    offset += 4;
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
    block[i] = std::bit_cast<float>(bits);
  }
  return block;
}

std::vector<float> gaussian_block(Rng& rng, std::size_t count, double scale) {
  std::vector<float> block(count);
  for (auto& v : block) v = static_cast<float>(scale * rng.gaussian());
  return block;
}

}  // namespace

ScoreMatrix ScoreOracle::scores(std::span<const ImageTensor> batch) {
  const Shape3 expected = input_shape();
  for (const auto& x : batch) {
    if (!(x.shape == expected) ||
        x.data.size() != static_cast<std::size_t>(expected.count())) {
      throw std::invalid_argument("shape mismatch");
    }
  }
  ScoreMatrix out;
  out.reserve(batch.size());
  const std::size_t cap =
      batch_cap() > 0 ? static_cast<std::size_t>(batch_cap()) : batch.size();
  for (std::size_t i = 0; i < batch.size();) {
    const std::size_t n = std::min(cap, batch.size() - i);
    ScoreMatrix rows = score_batch(batch.subspan(i, n));
    if (rows.size() != n) {
      throw std::runtime_error("oracle returned wrong row count");
    }
    queries_ += n;
    for (auto& row : rows) out.push_back(std::move(row));
    i += n;
  }
  return out;
}

int argmax_row(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("empty score row");
  int best = 0;
  for (int i = 1; i < static_cast<int>(row.size()); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

int predict_label(ScoreOracle& oracle, const ImageTensor& x) {
  const ScoreMatrix m = oracle.scores(std::span<const ImageTensor>(&x, 1));
  return argmax_row(m[0]);
}

LinearSoftmaxOracle::LinearSoftmaxOracle(Shape3 input, int classes,
                                         std::vector<float> weights,
                                         std::vector<float> bias)
    : input_(input),
      classes_(classes),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
  const std::size_t dim = static_cast<std::size_t>(input.count());
  if (classes_ < 2 || weights_.size() != dim * classes_ ||
      bias_.size() != static_cast<std::size_t>(classes_)) {
    throw std::invalid_argument("inconsistent model dimensions");
  }
}

LinearSoftmaxOracle LinearSoftmaxOracle::random(Shape3 input, int classes,
                                                std::uint64_t seed,
                                                double weight_scale) {
  Rng rng(seed);
  const std::size_t dim = static_cast<std::size_t>(input.count());
  auto weights = gaussian_block(rng, dim * classes, weight_scale);
  auto bias = gaussian_block(rng, classes, 0.1 * weight_scale);
  return LinearSoftmaxOracle(input, classes, std::move(weights),
                             std::move(bias));
}

ScoreMatrix LinearSoftmaxOracle::score_batch(
    std::span<const ImageTensor> batch) {
  const std::size_t dim = static_cast<std::size_t>(input_.count());
  ScoreMatrix out;
  out.reserve(batch.size());
  for (const auto& x : batch) {
    std::vector<double> logits(classes_);
    for (int k = 0; k < classes_; ++k) {
      double acc = bias_[k];
      const float* row = weights_.data() + static_cast<std::size_t>(k) * dim;
      for (std::size_t j = 0; j < dim; ++j) {
        acc += static_cast<double>(row[j]) * x.data[j];
      }
      logits[k] = acc;
    }
    softmax_in_place(logits);
    out.push_back(std::move(logits));
  }
  return out;
}

MlpOracle::MlpOracle(Shape3 input, int classes, int hidden,
                     std::vector<float> w1, std::vector<float> b1,
                     std::vector<float> w2, std::vector<float> b2)
    : input_(input),
      classes_(classes),
      hidden_(hidden),
      w1_(std::move(w1)),
      b1_(std::move(b1)),
      w2_(std::move(w2)),
      b2_(std::move(b2)) {
  const std::size_t dim = static_cast<std::size_t>(input.count());
  if (classes_ < 2 || hidden_ < 1 ||
      w1_.size() != dim * static_cast<std::size_t>(hidden_) ||
      b1_.size() != static_cast<std::size_t>(hidden_) ||
      w2_.size() != static_cast<std::size_t>(hidden_) * classes_ ||
      b2_.size() != static_cast<std::size_t>(classes_)) {
    throw std::invalid_argument("inconsistent model dimensions");
  }
}

MlpOracle MlpOracle::random(Shape3 input, int classes, int hidden,
                            std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t dim = static_cast<std::size_t>(input.count());
  auto w1 = gaussian_block(rng, dim * hidden, std::sqrt(2.0 / dim));
  auto b1 = gaussian_block(rng, hidden, 0.1);
  auto w2 = gaussian_block(rng, static_cast<std::size_t>(hidden) * classes,
                           std::sqrt(2.0 / hidden));
  auto b2 = gaussian_block(rng, classes, 0.1);
  return MlpOracle(input, classes, hidden, std::move(w1), std::move(b1),
                   std::move(w2), std::move(b2));
}

ScoreMatrix MlpOracle::score_batch(std::span<const ImageTensor> batch) {
  const std::size_t dim = static_cast<std::size_t>(input_.count());
  ScoreMatrix out;
  out.reserve(batch.size());
  std::vector<double> hidden(hidden_);
  for (const auto& x : batch) {
    for (int h = 0; h < hidden_; ++h) {
      double acc = b1_[h];
      const float* row = w1_.data() + static_cast<std::size_t>(h) * dim;
      for (std::size_t j = 0; j < dim; ++j) {
        acc += static_cast<double>(row[j]) * x.data[j];
      }
      hidden[h] = std::max(acc, 0.0);
    }
    std::vector<double> logits(classes_);
    for (int k = 0; k < classes_; ++k) {
      double acc = b2_[k];
      const float* row = w2_.data() + static_cast<std::size_t>(k) * hidden_;
      for (int h = 0; h < hidden_; ++h) {
        acc += static_cast<double>(row[h]) * hidden[h];
      }
      logits[k] = acc;
    }
    softmax_in_place(logits);
    out.push_back(std::move(logits));
  }
  return out;
}

namespace {

void write_model_header(std::ofstream& out, const nlohmann::json& header) {
  out.write(kModelMagic, sizeof(kModelMagic) - 1);
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
}

}  // namespace

void save_model(const std::filesystem::path& path,
                const LinearSoftmaxOracle& oracle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  const Shape3 s = oracle.input_shape();
  write_model_header(out, {{"kind", "linear"},
                           {"h", s.height},
                           {"w", s.width},
                           {"c", s.channels},
                           {"classes", oracle.num_classes()}});
  write_f32_block(out, oracle.weights());
  write_f32_block(out, oracle.bias());
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
}

void save_model(const std::filesystem::path& path, const MlpOracle& oracle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  const Shape3 s = oracle.input_shape();
  write_model_header(out, {{"kind", "mlp"},
                           {"h", s.height},
                           {"w", s.width},
                           {"c", s.channels},
                           {"classes", oracle.num_classes()},
                           {"hidden", oracle.hidden_width()}});
  write_f32_block(out, oracle.w1());
  write_f32_block(out, oracle.b1());
  write_f32_block(out, oracle.w2());
  write_f32_block(out, oracle.b2());
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
}

std::unique_ptr<ScoreOracle> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path.string());

  char magic[sizeof(kModelMagic) - 1];
  if (!in.read(magic, sizeof(magic))) {
    throw std::runtime_error("invalid model file: truncated at byte 0");
  }
  if (std::memcmp(magic, "UAPMODEL", 8) != 0) {
    throw std::runtime_error("invalid model file: bad magic at byte 0");
  }
  if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("unsupported model version");
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("invalid model file: missing header at byte 10");
  }
  std::size_t offset = sizeof(magic) + line.size() + 1;
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() ||
      !header.contains("kind") || !header.contains("h") ||
      !header.contains("w") || !header.contains("c") ||
      !header.contains("classes")) {
    throw std::runtime_error("invalid model file: bad header at byte 10");
  }
  const Shape3 shape{header["h"].get<int>(), header["w"].get<int>(),
                     header["c"].get<int>()};
  const int classes = header["classes"].get<int>();
  if (shape.height < 1 || shape.width < 1 || shape.channels < 1 ||
      classes < 2) {
    throw std::runtime_error("invalid model file: bad header at byte 10");
  }
  const std::size_t dim = static_cast<std::size_t>(shape.count());

  std::unique_ptr<ScoreOracle> oracle;
  const std::string kind = header["kind"].get<std::string>();
  if (kind == "linear") {
    auto weights = read_f32_block(in, dim * classes, offset);
    auto bias = read_f32_block(in, classes, offset);
    oracle = std::make_unique<LinearSoftmaxOracle>(
        shape, classes, std::move(weights), std::move(bias));
  } else if (kind == "mlp") {
    if (!header.contains("hidden")) {
      throw std::runtime_error("invalid model file: bad header at byte 10");
    }
    const int hidden = header["hidden"].get<int>();
    if (hidden < 1) {
      throw std::runtime_error("invalid model file: bad header at byte 10");
    }
    auto w1 = read_f32_block(in, dim * hidden, offset);
    auto b1 = read_f32_block(in, hidden, offset);
    auto w2 = read_f32_block(in, static_cast<std::size_t>(hidden) * classes,
                             offset);
    auto b2 = read_f32_block(in, classes, offset);
    oracle = std::make_unique<MlpOracle>(shape, classes, hidden, std::move(w1),
                                         std::move(b1), std::move(w2),
                                         std::move(b2));
  } else {
    throw std::runtime_error("invalid model file: unknown kind");
  }

  char extra;
  if (in.read(&extra, 1)) {
    throw std::runtime_error("invalid model file: trailing data at byte " +
                             std::to_string(offset));
  }
  return oracle;
}

}  // namespace uap
