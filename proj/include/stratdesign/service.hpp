#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stratdesign/strata.hpp"
#include "stratdesign/table.hpp"

namespace stratdesign {

/// Wire form of a split: {"strata", "targets", "split_var", "type",
/// "split_at", "categories", "trunc"}. `strata` falls back to `default_strata`.
SplitSpec split_spec_from_json(const nlohmann::json& j, const std::optional<std::string>& default_strata);
nlohmann::json split_spec_to_json(const SplitSpec& spec);

/// CLI words of `split` for this spec, reading and writing `${DATA}`.
std::vector<std::string> split_command(const SplitSpec& spec);
std::vector<std::string> merge_command(std::string_view strata_col, const std::vector<std::string>& merge,
                                       std::string_view name);

struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

struct ServiceOptions {
  std::size_t max_body_bytes = 64u << 20;
  std::string cors_origin = "*";
};

/// In-memory design sessions. Each session holds an uploaded unit table, the
/// current strata column and the script lines of every confirmed action.
/// Confirms on one session are serialized; previews share the session lock.
class DesignService {
 public:
  explicit DesignService(ServiceOptions options = {});

  const ServiceOptions& options() const noexcept { return options_; }

  ServiceResponse create_session(std::string_view csv_body,
                                 const std::optional<std::string>& strata_col = std::nullopt);
  ServiceResponse preview(const std::string& id, std::string_view body) const;
  ServiceResponse confirm(const std::string& id, std::string_view body);
  ServiceResponse script(const std::string& id) const;
  ServiceResponse state(const std::string& id) const;
  /// Current dataset as canonical CSV.
  ServiceResponse data(const std::string& id) const;

 private:
  struct Session {
    Table dataset;
    std::optional<std::string> strata_col;
    std::vector<std::string> action_log;
    std::int64_t created_at = 0;
    mutable std::shared_mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& id) const;

  ServiceOptions options_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_ = 0;
};

/// HTTP/1.1 front end for a DesignService.
class HttpServer {
 public:
  explicit HttpServer(DesignService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stratdesign
