#include "uap/dataio.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "uap/rng.hpp"

namespace uap {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("missing file: " + manifest_path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line) != "path,label") {
    throw std::runtime_error("invalid manifest: " + manifest_path.string());
  }

  const std::filesystem::path base = manifest_path.parent_path();
  Dataset ds;
  std::vector<std::string> rel_paths;
  std::vector<std::string> label_strings;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("invalid manifest: " + manifest_path.string());
    }
    const std::string path_field = trim(line.substr(0, comma));
    const std::string label_field = trim(line.substr(comma + 1));
    if (path_field.empty()) {
      throw std::runtime_error("invalid manifest: " + manifest_path.string());
    }
    if (label_field.empty()) throw std::runtime_error("unknown label");
    rel_paths.push_back(path_field);
    label_strings.push_back(label_field);
  }

  for (std::size_t i = 0; i < rel_paths.size(); ++i) {
    std::filesystem::path p(rel_paths[i]);
    if (p.is_relative()) p = base / p;
    ImageTensor img = read_png(p);
    if (ds.images.empty()) {
      ds.shape = img.shape;
    } else if (!(img.shape == ds.shape)) {
      throw std::runtime_error("shape mismatch: " + p.string());
    }

    const auto it = std::find(ds.class_names.begin(), ds.class_names.end(),
                              label_strings[i]);
    int label;
    if (it == ds.class_names.end()) {
      label = static_cast<int>(ds.class_names.size());
      ds.class_names.push_back(label_strings[i]);
    } else {
      label = static_cast<int>(it - ds.class_names.begin());
    }

    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
    ds.paths.push_back(p.string());
  }
  return ds;
}

SampleSplit stratified_sample(const Dataset& dataset,
                              std::optional<int> per_class,
                              std::optional<int> total, std::uint64_t seed) {
  if (per_class.has_value() == total.has_value()) {
    throw std::invalid_argument(
        "exactly one of per_class and total must be given");
  }
  const int n = static_cast<int>(dataset.images.size());
  Rng rng(seed);
  std::vector<int> picked;

  if (per_class) {
    if (*per_class <= 0) throw std::invalid_argument("invalid sample count");
    const int num_classes = static_cast<int>(dataset.class_names.size());
    for (int c = 0; c < num_classes; ++c) {
      std::vector<int> members;
      for (int i = 0; i < n; ++i) {
        if (dataset.labels[i] == c) members.push_back(i);
      }
      if (static_cast<int>(members.size()) < *per_class) {
        throw std::runtime_error("insufficient images for class " +
                                 dataset.class_names[c]);
      }
      rng.shuffle(members);
      picked.insert(picked.end(), members.begin(), members.begin() + *per_class);
    }
  } else {
    if (*total <= 0) throw std::invalid_argument("invalid sample count");
    if (*total > n) throw std::runtime_error("insufficient images");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    picked.assign(order.begin(), order.begin() + *total);
  }

  std::sort(picked.begin(), picked.end());
  SampleSplit split;
  split.sample = picked;
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    if (k < picked.size() && picked[k] == i) {
      ++k;
    } else {
      split.remainder.push_back(i);
    }
  }
  return split;
}

void save_uap(const std::filesystem::path& path, const Perturbation& delta,
              const UapMeta& meta) {
  nlohmann::json extra;
  extra["p"] = norm_to_string(meta.p);
  extra["xi"] = meta.xi;
  extra["mode"] = attack_mode_to_string(meta.mode);
  extra["target"] = meta.target;
  extra["seed"] = meta.seed;
  extra["queries"] = meta.queries;
  write_utf(path, delta.shape, delta.data, extra);
}

std::pair<Perturbation, UapMeta> load_uap(const std::filesystem::path& path) {
  UtfFile file = read_utf(path);
  const nlohmann::json& h = file.header;
  for (const char* key : {"p", "xi", "mode", "target", "seed", "queries"}) {
    if (!h.contains(key)) throw std::runtime_error("invalid UAP file");
  }
  UapMeta meta;
  try {
    meta.p = norm_from_string(h.at("p").get<std::string>());
    meta.xi = h.at("xi").get<double>();
    meta.mode = attack_mode_from_string(h.at("mode").get<std::string>());
    meta.target = h.at("target").get<int>();
    meta.seed = h.at("seed").get<std::uint64_t>();
    meta.queries = h.at("queries").get<std::uint64_t>();
  } catch (const std::exception&) {
    throw std::runtime_error("invalid UAP file");
  }
  Perturbation delta;
  delta.shape = file.shape;
  delta.data = std::move(file.data);
  delta.norm_type = meta.p;
  delta.budget_xi = meta.xi;
  return {std::move(delta), meta};
}

std::vector<ImageTensor> select_images(const std::vector<ImageTensor>& images,
                                       std::span<const int> indices) {
  std::vector<ImageTensor> out;
  out.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= static_cast<int>(images.size())) {
      throw std::out_of_range("index out of range");
    }
    out.push_back(images[i]);
  }
  return out;
}

std::vector<int> select_labels(std::span<const int> labels,
                               std::span<const int> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= static_cast<int>(labels.size())) {
      throw std::out_of_range("index out of range");
    }
    out.push_back(labels[i]);
  }
  return out;
}

}  // namespace uap
