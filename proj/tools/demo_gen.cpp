// Generates a self-contained toy experiment: a seeded model file plus a PNG
// dataset whose labels are the model's own clean predictions, so the zero
// perturbation scores R_f = 0 and an identity confusion matrix.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uap/dataio.hpp"
#include "uap/oracle.hpp"
#include "uap/rng.hpp"
#include "uap/tensor.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Generate a toy model and labeled PNG dataset"};
  std::string out_dir;
  int classes = 2;
  int per_class = 40;
  int height = 16;
  int width = 16;
  int channels = 1;
  std::uint64_t seed = 7;
  std::string kind = "linear";
  int hidden = 32;
  double weight_scale = 1.0;
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--classes", classes)->capture_default_str();
  app.add_option("--per-class", per_class)->capture_default_str();
  app.add_option("--height", height)->capture_default_str();
  app.add_option("--width", width)->capture_default_str();
  app.add_option("--channels", channels, "1 (grayscale) or 3 (RGB)")
      ->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--kind", kind, "linear or mlp")->capture_default_str();
  app.add_option("--hidden", hidden, "Hidden width for mlp")
      ->capture_default_str();
  app.add_option("--weight-scale", weight_scale, "Linear weight scale")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  if (classes < 2 || per_class < 1 || height < 1 || width < 1 ||
      (channels != 1 && channels != 3) || (kind != "linear" && kind != "mlp")) {
    std::cerr << "error: invalid generator parameters\n";
    return 2;
  }

  const uap::Shape3 shape{height, width, channels};
  std::unique_ptr<uap::ScoreOracle> oracle;
  if (kind == "linear") {
    oracle = std::make_unique<uap::LinearSoftmaxOracle>(
        uap::LinearSoftmaxOracle::random(shape, classes, seed, weight_scale));
  } else {
    oracle = std::make_unique<uap::MlpOracle>(
        uap::MlpOracle::random(shape, classes, hidden, seed));
  }

  try {
    fs::create_directories(fs::path(out_dir) / "images");
    const fs::path model_path = fs::path(out_dir) / "model.uapmodel";
    if (kind == "linear") {
      uap::save_model(model_path,
                      static_cast<uap::LinearSoftmaxOracle&>(*oracle));
    } else {
      uap::save_model(model_path, static_cast<uap::MlpOracle&>(*oracle));
    }

    // Rejection-sample quantized noise images until every class is filled.
    // Labels come from the oracle itself, taken after 8-bit quantization so
    // the PNG round trip cannot move a prediction.
    uap::Rng rng(uap::Rng::derive(seed, 0x1111));
    std::vector<int> filled(classes, 0);
    int remaining = classes * per_class;
    const long attempt_cap = 2000L * remaining;
    long attempts = 0;
    while (remaining > 0 && attempts < attempt_cap) {
      ++attempts;
      uap::ImageTensor img = uap::ImageTensor::zeros(shape);
      for (double& v : img.data) {
        v = std::round(rng.uniform01() * 255.0) / 255.0;
      }
      const int label = uap::argmax_row(oracle->scores({&img, 1}).at(0));
      if (filled[label] >= per_class) continue;
      const std::string name = "images/img_" + std::to_string(label) + "_" +
                               std::to_string(filled[label]) + ".png";
      uap::write_png(fs::path(out_dir) / name, img);
      ++filled[label];
      --remaining;
    }
    if (remaining > 0) {
      std::cerr << "error: could not fill every class from noise draws; "
                   "try another seed or fewer classes\n";
      return 2;
    }

    // Rows grouped by class so first-appearance label indexing in the
    // manifest matches the model's class indices.
    std::ofstream manifest(fs::path(out_dir) / "manifest.csv");
    if (!manifest) throw std::runtime_error("cannot write manifest");
    manifest << "path,label\n";
    for (int c = 0; c < classes; ++c) {
      for (int n = 0; n < per_class; ++n) {
        manifest << "images/img_" << c << "_" << n << ".png,class" << c
                 << "\n";
      }
    }
    manifest.close();
    if (!manifest) throw std::runtime_error("cannot write manifest");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }

  std::cerr << "wrote " << classes * per_class << " images, manifest.csv and "
            << "model.uapmodel under " << out_dir << "\n";
  return 0;
}
