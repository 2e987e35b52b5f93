#pragma once

#include <memory>
#include <string>

#include "uap/oracle.hpp"

namespace uap {

struct RemoteOptions {
  double timeout_seconds = 10.0;
  int retries = 2;  // extra attempts after the first failure
  int batch_cap = 64;
};

/// HTTP client for the v1 scoring protocol: POST {endpoint}/v1/scores with
/// {"shape":[h,w,c],"images":[[...],...]} and response {"scores":[[...],...]}.
/// The class count is learned from one probe request at construction; the
/// probe does not enter the query counter. Non-200 responses and score rows
/// that are not probability vectors are transport failures; after the retry
/// budget is spent they surface as "oracle unavailable".
class RemoteOracle final : public ScoreOracle {
 public:
  RemoteOracle(const std::string& endpoint, Shape3 input,
               RemoteOptions options = {});
  ~RemoteOracle() override;

  RemoteOracle(const RemoteOracle&) = delete;
  RemoteOracle& operator=(const RemoteOracle&) = delete;

  Shape3 input_shape() const override;
  int num_classes() const override;
  int batch_cap() const override;

 protected:
  ScoreMatrix score_batch(std::span<const ImageTensor> batch) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Loopback HTTP server that exposes a local oracle over the v1 wire
/// protocol. Serves on a background thread.
class ScoreServer {
 public:
  explicit ScoreServer(ScoreOracle& oracle);
  ~ScoreServer();

  ScoreServer(const ScoreServer&) = delete;
  ScoreServer& operator=(const ScoreServer&) = delete;

  /// Binds and starts serving; port 0 picks a free port. Returns the port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace uap
