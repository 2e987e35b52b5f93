#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace uap {

enum class Norm { L1, L2, LInf };

Norm norm_from_string(const std::string& s);       // "1" | "2" | "inf"
std::string norm_to_string(Norm p);

struct Shape3 {
  int height = 0;
  int width = 0;
  int channels = 0;

  int count() const { return height * width * channels; }
  bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);

/// H x W x C image, row-major by (row, col, channel).
/// Ingested pixel values live in [0, 1]; arithmetic accumulates in double.
struct ImageTensor {
  Shape3 shape;
  std::vector<double> data;

  static ImageTensor zeros(Shape3 s);
};

/// Additive perturbation under an Lp budget. Values may be negative; the
/// budget constrains the perturbation itself, never the clipped composite.
struct Perturbation {
  Shape3 shape;
  std::vector<double> data;
  Norm norm_type = Norm::L2;
  double budget_xi = 0.0;

  static Perturbation zeros(Shape3 s, Norm p, double xi);
};

double lp_norm(std::span<const double> v, Norm p);

/// Elementwise x + delta; clamps each value to [0, 1] when clip is set.
ImageTensor apply_perturbation(const ImageTensor& x, const Perturbation& delta,
                               bool clip);

/// Arithmetic mean of lp_norm over the dataset.
double mean_dataset_norm(const std::vector<ImageTensor>& xs, Norm p);

/// Budget from a norm ratio: zeta * mean_dataset_norm(xs, p).
double xi_from_zeta(double zeta, const std::vector<ImageTensor>& xs, Norm p);

// UTF tensor container: 16-byte magic ("UAPTENSOR" zero-padded), one JSON
// header line {"h":..,"w":..,"c":..,"dtype":"f32"} terminated by '\n', then
// h*w*c little-endian f32 values row-major by (row, col, channel).
struct UtfFile {
  Shape3 shape;
  std::vector<double> data;
  nlohmann::json header;
};

void write_utf(const std::filesystem::path& path, Shape3 shape,
               std::span<const double> data,
               const nlohmann::json& extra_header = nlohmann::json::object());
UtfFile read_utf(const std::filesystem::path& path);

}  // namespace uap
