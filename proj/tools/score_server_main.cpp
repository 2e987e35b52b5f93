// Serves a local model file over the v1 scoring protocol so attacks can be
// driven through the remote-oracle path.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "uap/oracle.hpp"
#include "uap/remote.hpp"

namespace {
std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score server exposing a local model over HTTP"};
  std::string model_path;
  std::string host = "127.0.0.1";
  int port = 0;
  app.add_option("--model", model_path, "Model file to serve")->required();
  app.add_option("--host", host, "Bind address")->capture_default_str();
  app.add_option("--port", port, "Port (0 picks a free one)")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<uap::ScoreOracle> oracle;
  try {
    oracle = uap::load_model(model_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }

  uap::ScoreServer server(*oracle);
  int bound;
  try {
    bound = server.start(host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  // The port line goes to stdout so callers can scrape it.
  std::cout << bound << std::endl;
  std::cerr << "serving " << model_path << " on " << host << ":" << bound
            << " (POST /v1/scores)\n";

  while (!g_stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.stop();
  return 0;
}
