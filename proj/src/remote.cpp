#include "uap/remote.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

namespace uap {

namespace {

// Split "http://host:port/prefix" into the client base and the path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw std::invalid_argument("invalid endpoint URL: " + url);
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

nlohmann::json build_request(Shape3 shape,
                             std::span<const ImageTensor> batch) {
  nlohmann::json body;
  body["shape"] = {shape.height, shape.width, shape.channels};
  nlohmann::json images = nlohmann::json::array();
  for (const ImageTensor& img : batch) images.push_back(img.data);
  body["images"] = std::move(images);
  return body;
}

bool valid_probability_row(const std::vector<double>& row) {
  double sum = 0.0;
  for (double v : row) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= 1e-5;
}

// Parses and validates a response body; returns false on any defect.
bool parse_scores(const std::string& body, std::size_t expected_rows,
                  int expected_classes, ScoreMatrix& out) {
  nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object() ||
      !parsed.contains("scores") || !parsed["scores"].is_array()) {
    return false;
  }
  const nlohmann::json& rows = parsed["scores"];
  if (rows.size() != expected_rows) return false;
  ScoreMatrix result;
  result.reserve(rows.size());
  for (const nlohmann::json& row : rows) {
    if (!row.is_array()) return false;
    std::vector<double> values;
    values.reserve(row.size());
    for (const nlohmann::json& v : row) {
      if (!v.is_number()) return false;
      values.push_back(v.get<double>());
    }
    if (expected_classes > 0 &&
        static_cast<int>(values.size()) != expected_classes) {
      return false;
    }
    if (values.empty() || !valid_probability_row(values)) return false;
    result.push_back(std::move(values));
  }
  out = std::move(result);
  return true;
}

}  // namespace

struct RemoteOracle::Impl {
  httplib::Client client;
  std::string path;
  Shape3 input;
  int classes = 0;
  RemoteOptions options;

  Impl(const std::string& base, std::string score_path, Shape3 shape,
       RemoteOptions opts)
      : client(base), path(std::move(score_path)), input(shape),
        options(opts) {
    const auto whole = static_cast<time_t>(opts.timeout_seconds);
    const auto usec = static_cast<time_t>(
        (opts.timeout_seconds - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, usec);
    client.set_read_timeout(whole, usec);
    client.set_write_timeout(whole, usec);
  }

  ScoreMatrix post_scores(std::span<const ImageTensor> batch) {
    const std::string body = build_request(input, batch).dump();
    const int attempts = 1 + std::max(0, options.retries);
    for (int attempt = 0; attempt < attempts; ++attempt) {
      httplib::Result res = client.Post(path, body, "application/json");
      if (res && res->status == 200) {
        ScoreMatrix scores;
        if (parse_scores(res->body, batch.size(), classes, scores)) {
          return scores;
        }
      }
    }
    throw std::runtime_error("oracle unavailable");
  }
};

RemoteOracle::RemoteOracle(const std::string& endpoint, Shape3 input,
                           RemoteOptions options) {
  if (input.height <= 0 || input.width <= 0 || input.channels <= 0) {
    throw std::invalid_argument("invalid input shape: " + to_string(input));
  }
  auto [base, prefix] = split_endpoint(endpoint);
  impl_ = std::make_unique<Impl>(base, prefix + "/v1/scores", input, options);

  // Learn the class count with one probe image; metadata discovery, so it
  // stays out of the query counter.
  const ImageTensor probe = ImageTensor::zeros(input);
  const ScoreMatrix rows = impl_->post_scores({&probe, 1});
  impl_->classes = static_cast<int>(rows.at(0).size());
}

RemoteOracle::~RemoteOracle() = default;

Shape3 RemoteOracle::input_shape() const { return impl_->input; }

int RemoteOracle::num_classes() const { return impl_->classes; }

int RemoteOracle::batch_cap() const {
  return std::max(1, impl_->options.batch_cap);
}

ScoreMatrix RemoteOracle::score_batch(std::span<const ImageTensor> batch) {
  return impl_->post_scores(batch);
}

struct ScoreServer::Impl {
  ScoreOracle& oracle;
  httplib::Server server;
  std::thread thread;
  int bound_port = -1;

  explicit Impl(ScoreOracle& o) : oracle(o) {
    server.Post("/v1/scores", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      handle(req, res);
    });
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("shape") ||
        !body.contains("images") || !body["shape"].is_array() ||
        body["shape"].size() != 3 || !body["images"].is_array()) {
      res.status = 400;
      res.set_content("{\"error\":\"malformed request\"}", "application/json");
      return;
    }
    const Shape3 expected = oracle.input_shape();
    const Shape3 got{body["shape"][0].get<int>(), body["shape"][1].get<int>(),
                     body["shape"][2].get<int>()};
    if (!(got == expected)) {
      res.status = 400;
      res.set_content("{\"error\":\"shape mismatch\"}", "application/json");
      return;
    }
    std::vector<ImageTensor> batch;
    batch.reserve(body["images"].size());
    for (const nlohmann::json& row : body["images"]) {
      if (!row.is_array() ||
          row.size() != static_cast<std::size_t>(expected.count())) {
        res.status = 400;
        res.set_content("{\"error\":\"shape mismatch\"}", "application/json");
        return;
      }
      ImageTensor img{expected, row.get<std::vector<double>>()};
      batch.push_back(std::move(img));
    }
    try {
      const ScoreMatrix scores = oracle.scores(batch);
      nlohmann::json out;
      out["scores"] = scores;
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      nlohmann::json out;
      out["error"] = e.what();
      res.set_content(out.dump(), "application/json");
    }
  }
};

ScoreServer::ScoreServer(ScoreOracle& oracle)
    : impl_(std::make_unique<Impl>(oracle)) {}

ScoreServer::~ScoreServer() { stop(); }

int ScoreServer::start(const std::string& host, int port) {
  if (impl_->thread.joinable()) {
    throw std::logic_error("server already running");
  }
  int bound;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw std::runtime_error("cannot bind server port");
  } else {
    if (!impl_->server.bind_to_port(host, port)) {
      throw std::runtime_error("cannot bind server port");
    }
    bound = port;
  }
  impl_->bound_port = bound;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ScoreServer::stop() {
  if (!impl_) return;
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int ScoreServer::port() const { return impl_->bound_port; }

}  // namespace uap
