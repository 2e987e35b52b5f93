#include "uap/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace uap {

namespace {

constexpr std::size_t kMagicLen = 16;
constexpr char kMagic[] = "UAPTENSOR";  // 9 chars + NUL, zero-padded to 16

void check_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite tensor");
  }
}

}  // namespace

Norm norm_from_string(const std::string& s) {
  if (s == "1") return Norm::L1;
  if (s == "2") return Norm::L2;
  if (s == "inf") return Norm::LInf;
  throw std::invalid_argument("unknown norm: " + s);
}

std::string norm_to_string(Norm p) {
  switch (p) {
    case Norm::L1: return "1";
    case Norm::L2: return "2";
    case Norm::LInf: return "inf";
  }
  throw std::logic_error("bad norm enum");
}

std::string to_string(const Shape3& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

ImageTensor ImageTensor::zeros(Shape3 s) {
  return ImageTensor{s, std::vector<double>(static_cast<std::size_t>(s.count()), 0.0)};
}

Perturbation Perturbation::zeros(Shape3 s, Norm p, double xi) {
  return Perturbation{s, std::vector<double>(static_cast<std::size_t>(s.count()), 0.0),
                      p, xi};
}

double lp_norm(std::span<const double> v, Norm p) {
  check_finite(v);
  switch (p) {
    case Norm::L1: {
      double sum = 0.0;
      for (double x : v) sum += std::fabs(x);
      return sum;
    }
    case Norm::L2: {
      double sum = 0.0;
      for (double x : v) sum += x * x;
      return std::sqrt(sum);
    }
    case Norm::LInf: {
      double m = 0.0;
      for (double x : v) m = std::max(m, std::fabs(x));
      return m;
    }
  }
  throw std::logic_error("bad norm enum");
}

ImageTensor apply_perturbation(const ImageTensor& x, const Perturbation& delta,
                               bool clip) {
  if (!(x.shape == delta.shape) || x.data.size() != delta.data.size()) {
    throw std::invalid_argument("shape mismatch");
  }
  ImageTensor out{x.shape, std::vector<double>(x.data.size())};
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double v = x.data[i] + delta.data[i];
    out.data[i] = clip ? std::clamp(v, 0.0, 1.0) : v;
  }
  return out;
}

double mean_dataset_norm(const std::vector<ImageTensor>& xs, Norm p) {
  if (xs.empty()) throw std::invalid_argument("empty dataset");
  double sum = 0.0;
  for (const auto& x : xs) sum += lp_norm(x.data, p);
  return sum / static_cast<double>(xs.size());
}

double xi_from_zeta(double zeta, const std::vector<ImageTensor>& xs, Norm p) {
  if (!(zeta > 0.0)) throw std::invalid_argument("invalid zeta");
  return zeta * mean_dataset_norm(xs, p);
}

void write_utf(const std::filesystem::path& path, Shape3 shape,
               std::span<const double> data, const nlohmann::json& extra_header) {
  if (static_cast<std::size_t>(shape.count()) != data.size()) {
    throw std::invalid_argument("shape mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());

  char magic[kMagicLen] = {};
  std::memcpy(magic, kMagic, sizeof(kMagic) - 1);
  out.write(magic, kMagicLen);

  nlohmann::json header = extra_header.is_object() ? extra_header
                                                   : nlohmann::json::object();
  header["h"] = shape.height;
  header["w"] = shape.width;
  header["c"] = shape.channels;
  header["dtype"] = "f32";
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));

  for (double d : data) {
    const float f = static_cast<float>(d);
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(bits & 0xff),
        static_cast<unsigned char>((bits >> 8) & 0xff),
        static_cast<unsigned char>((bits >> 16) & 0xff),
        static_cast<unsigned char>((bits >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
}

UtfFile read_utf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path.string());

  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen)) {
    throw std::runtime_error("invalid tensor file: truncated magic");
  }
  if (std::memcmp(magic, kMagic, sizeof(kMagic) - 1) != 0) {
    throw std::runtime_error("invalid tensor file: bad magic");
  }
  for (std::size_t i = sizeof(kMagic) - 1; i < kMagicLen; ++i) {
    if (magic[i] != '\0') throw std::runtime_error("invalid tensor file: bad magic");
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("invalid tensor file: missing header");
  }
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw std::runtime_error("invalid tensor file: bad header");
  }
  if (!header.contains("h") || !header.contains("w") || !header.contains("c") ||
      !header.contains("dtype")) {
    throw std::runtime_error("invalid tensor file: incomplete header");
  }
  if (header["dtype"] != "f32") {
    throw std::runtime_error("invalid tensor file: unsupported dtype");
  }
  Shape3 shape{header["h"].get<int>(), header["w"].get<int>(),
               header["c"].get<int>()};
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
    throw std::runtime_error("invalid tensor file: bad shape");
  }

  const std::size_t n = static_cast<std::size_t>(shape.count());
  const std::size_t data_start = kMagicLen + line.size() + 1;
  UtfFile file{shape, std::vector<double>(n), std::move(header)};
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
      throw std::runtime_error("invalid tensor file: truncated at byte " +
                               std::to_string(data_start + i * 4));
    }
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
    file.data[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw std::runtime_error("invalid tensor file: trailing data");
  }
  return file;
}

}  // namespace uap
