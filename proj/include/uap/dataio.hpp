#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uap/attack.hpp"
#include "uap/tensor.hpp"

namespace uap {

/// Decode an 8-bit PNG to [0,1] values; grayscale gives c=1, RGB gives c=3.
/// Palette images are expanded, 16-bit depth is reduced, alpha is stripped.
ImageTensor read_png(const std::filesystem::path& path);

/// Encode c=1 as grayscale or c=3 as RGB, rounding clamped values to 8 bits.
void write_png(const std::filesystem::path& path, const ImageTensor& image);

struct Dataset {
  Shape3 shape;
  std::vector<ImageTensor> images;       // manifest order
  std::vector<int> labels;               // dense indices 0..K-1
  std::vector<std::string> class_names;  // index order = first appearance
  std::vector<std::string> paths;
};

/// Load a CSV manifest with header "path,label". Image paths resolve
/// relative to the manifest's directory; the first image fixes the dataset
/// shape and every later image must match it. Manifest order is the
/// canonical dataset order that all seeded sampling refers to.
Dataset load_dataset(const std::filesystem::path& manifest_path);

struct SampleSplit {
  std::vector<int> sample;     // ascending dataset indices
  std::vector<int> remainder;  // ascending, disjoint from sample
};

/// Seeded, reproducible split. Exactly one of per_class / total selects the
/// mode: a fixed count from every class, or a fixed count overall.
SampleSplit stratified_sample(const Dataset& dataset,
                              std::optional<int> per_class,
                              std::optional<int> total, std::uint64_t seed);

struct UapMeta {
  Norm p = Norm::L2;
  double xi = 0.0;
  AttackMode mode = AttackMode::NonTargeted;
  int target = -1;  // -1 when non-targeted
  std::uint64_t seed = 0;
  std::uint64_t queries = 0;
};

/// UTF tensor file whose header also carries the attack metadata
/// {"p","xi","mode","target","seed","queries"}. The f32 payload round-trips
/// bit-exactly.
void save_uap(const std::filesystem::path& path, const Perturbation& delta,
              const UapMeta& meta);
std::pair<Perturbation, UapMeta> load_uap(const std::filesystem::path& path);

std::vector<ImageTensor> select_images(const std::vector<ImageTensor>& images,
                                       std::span<const int> indices);
std::vector<int> select_labels(std::span<const int> labels,
                               std::span<const int> indices);

}  // namespace uap
