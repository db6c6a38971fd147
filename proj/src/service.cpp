#include "stratdesign/service.hpp"

#include <chrono>
#include <random>
#include <thread>

#include <httplib.h>

#include "stratdesign/allocation.hpp"
#include "stratdesign/cli.hpp"
#include "stratdesign/csv.hpp"
#include "stratdesign/error.hpp"

namespace stratdesign {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::string command_line(const std::vector<std::string>& words) {
  std::vector<std::string> quoted;
  for (const auto& w : words) quoted.push_back(cli::quote(w));
  return join(quoted, ' ');
}

json cell_json(const Cell& cell) {
  if (is_missing(cell)) return nullptr;
  if (auto i = std::get_if<std::int64_t>(&cell)) return *i;
  if (auto d = std::get_if<double>(&cell)) return *d;
  return std::get<std::string>(cell);
}

json rows_json(const Table& table) {
  json rows = json::array();
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    json row = json::object();
    for (const auto& c : table.columns()) row[c.name] = cell_json(c.cells[r]);
    rows.push_back(std::move(row));
  }
  return rows;
}

json columns_json(const Table& table) {
  json cols = json::array();
  for (const auto& c : table.columns()) {
    cols.push_back({{"name", c.name}, {"type", std::string(type_name(infer_type(c)))}});
  }
  return cols;
}

json counts_json(const Table& table, const std::optional<std::string>& strata_col) {
  json counts = json::object();
  if (!strata_col) return counts;
  for (const auto& [label, n] : stratum_counts(table, *strata_col)) counts[label] = n;
  return counts;
}

ServiceResponse json_response(int status, const json& body) {
  return {status, "application/json", body.dump()};
}

ServiceResponse error_response(const Error& e) {
  const int status = error_category(e.kind()) == ErrorCategory::Infeasible ? 422 : 400;
  return json_response(status, {{"error", std::string(error_name(e.kind()))}, {"message", e.detail()}});
}

ServiceResponse not_found(const std::string& id) {
  return json_response(404, {{"error", "UnknownSession"}, {"message", "no session '" + id + "'"}});
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("request body: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const char* what) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::InvalidArgument, std::string("field '") + key + "' must be " + what);
  }
}

bool has(const json& j, const char* key) { return j.contains(key) && !j[key].is_null(); }

bool is_identity(const SplitSpec& spec) {
  return spec.type == SplitType::Categorical ? spec.categories.empty() : spec.split_at.empty();
}

struct Merge {
  std::string strata_col;
  std::vector<std::string> labels;
  std::string name;
};

Merge merge_from_json(const json& j, const std::optional<std::string>& default_strata) {
  Merge m;
  if (has(j, "strata")) m.strata_col = field<std::string>(j, "strata", "text");
  else if (default_strata) m.strata_col = *default_strata;
  else throw Error(ErrorKind::MissingArgument, "merge needs a strata column");
  m.labels = field<std::vector<std::string>>(j, "labels", "a list of stratum labels");
  m.name = field<std::string>(j, "name", "text");
  return m;
}

// The hypothetical or confirmed table after one action, plus its strata column.
struct Outcome {
  Table table;
  std::optional<std::string> strata_col;
  std::vector<std::string> command;
};

Outcome apply_action(const Table& data, const std::optional<std::string>& strata_col, const json& body,
                     bool require_change) {
  if (has(body, "merge")) {
    const auto m = merge_from_json(body["merge"], strata_col);
    return {merge_strata(data, m.strata_col, m.labels, m.name), std::string(kNewStrataColumn),
            merge_command(m.strata_col, m.labels, m.name)};
  }
  const json* spec_json = has(body, "split") ? &body["split"] : nullptr;
  if (!spec_json && require_change && body.contains("split_var")) spec_json = &body;
  if (!spec_json) {
    if (require_change) throw Error(ErrorKind::MissingArgument, "confirm needs a split or merge");
    return {data, strata_col, {}};
  }
  const auto spec = split_spec_from_json(*spec_json, strata_col);
  if (is_identity(spec)) {
    if (require_change) throw Error(ErrorKind::InvalidSplit, "split has no cut points or categories");
    if (!data.has_column(spec.strata_col)) {
      throw Error(ErrorKind::ColumnNotFound, "no column named '" + spec.strata_col + "'");
    }
    return {data, spec.strata_col, {}};
  }
  return {split_strata(data, spec), std::string(kNewStrataColumn), split_command(spec)};
}

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

SplitSpec split_spec_from_json(const json& j, const std::optional<std::string>& default_strata) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "split must be an object");
  SplitSpec spec;
  if (has(j, "strata")) spec.strata_col = field<std::string>(j, "strata", "text");
  else if (default_strata) spec.strata_col = *default_strata;
  else throw Error(ErrorKind::MissingArgument, "split needs a strata column");
  if (has(j, "targets")) spec.targets = field<std::vector<std::string>>(j, "targets", "a list of labels");
  spec.split_var = field<std::string>(j, "split_var", "text");
  if (has(j, "type")) spec.type = parse_split_type(field<std::string>(j, "type", "text"));
  if (has(j, "split_at")) spec.split_at = field<std::vector<double>>(j, "split_at", "a list of numbers");
  if (has(j, "categories")) {
    spec.categories = field<std::vector<std::vector<std::string>>>(j, "categories", "a list of label lists");
  }
  if (has(j, "trunc")) {
    const auto& t = j["trunc"];
    if (t.is_string()) spec.trunc = Trunc{t.get<std::string>()};
    else if (t.is_number_unsigned()) spec.trunc = Trunc{t.get<std::size_t>()};
    else throw Error(ErrorKind::InvalidArgument, "field 'trunc' must be text or a count");
  }
  return spec;
}

json split_spec_to_json(const SplitSpec& spec) {
  json j = {{"strata", spec.strata_col},
            {"split_var", spec.split_var},
            {"type", std::string(split_type_name(spec.type))},
            {"split_at", spec.split_at},
            {"categories", spec.categories}};
  j["targets"] = spec.targets ? json(*spec.targets) : json(nullptr);
  if (!spec.trunc) j["trunc"] = nullptr;
  else if (auto s = std::get_if<std::string>(&*spec.trunc)) j["trunc"] = *s;
  else j["trunc"] = std::get<std::size_t>(*spec.trunc);
  return j;
}

std::vector<std::string> split_command(const SplitSpec& spec) {
  std::vector<std::string> w = {"split", "--input", "${DATA}", "--out", "${DATA}", "--strata", spec.strata_col};
  if (spec.targets) {
    for (const auto& t : *spec.targets) {
      w.push_back("--target");
      w.push_back(t);
    }
  }
  w.push_back("--split-var");
  w.push_back(spec.split_var);
  w.push_back("--type");
  w.push_back(std::string(split_type_name(spec.type)));
  if (!spec.split_at.empty()) {
    std::vector<std::string> cuts;
    for (double c : spec.split_at) cuts.push_back(format_real(c));
    w.push_back("--split-at=" + join(cuts, ','));
  }
  for (const auto& group : spec.categories) {
    for (const auto& c : group) {
      if (c.find(',') != std::string::npos) {
        throw Error(ErrorKind::InvalidArgument, "category '" + c + "' contains a comma and can not be scripted");
      }
    }
    w.push_back("--group");
    w.push_back(join(group, ','));
  }
  if (spec.trunc) {
    if (auto s = std::get_if<std::string>(&*spec.trunc)) {
      w.push_back("--trunc");
      w.push_back(*s);
    } else {
      w.push_back("--trunc-count");
      w.push_back(std::to_string(std::get<std::size_t>(*spec.trunc)));
    }
  }
  return w;
}

std::vector<std::string> merge_command(std::string_view strata_col, const std::vector<std::string>& merge,
                                       std::string_view name) {
  std::vector<std::string> w = {"merge", "--input", "${DATA}", "--out", "${DATA}", "--strata", std::string(strata_col)};
  for (const auto& m : merge) {
    w.push_back("--merge");
    w.push_back(m);
  }
  w.push_back("--name");
  w.push_back(std::string(name));
  return w;
}

DesignService::DesignService(ServiceOptions options) : options_(std::move(options)) {
  std::random_device rd;
  salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::shared_ptr<DesignService::Session> DesignService::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

ServiceResponse DesignService::create_session(std::string_view csv_body,
                                              const std::optional<std::string>& strata_col) {
  if (csv_body.size() > options_.max_body_bytes) {
    return json_response(413, {{"error", "PayloadTooLarge"},
                               {"message", "body exceeds " + std::to_string(options_.max_body_bytes) + " bytes"}});
  }
  try {
    auto table = csv::parse(csv_body);
    if (table.row_count() == 0) throw Error(ErrorKind::EmptyInput, "the uploaded table has no rows");
    if (strata_col && !table.has_column(*strata_col)) {
      throw Error(ErrorKind::ColumnNotFound, "no column named '" + *strata_col + "'");
    }
    auto session = std::make_shared<Session>();
    session->dataset = std::move(table);
    session->strata_col = strata_col;
    session->created_at = std::chrono::duration_cast<std::chrono::seconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();
    std::string id;
    {
      std::lock_guard lock(sessions_mutex_);
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix(salt_ ^ ++counter_)));
      id = buf;
      sessions_[id] = session;
    }
    return json_response(200, {{"session_id", id},
                               {"columns", columns_json(session->dataset)},
                               {"row_count", session->dataset.row_count()},
                               {"strata_column", strata_col ? json(*strata_col) : json(nullptr)},
                               {"created_at", session->created_at}});
  } catch (const Error& e) {
    return error_response(e);
  }
}

ServiceResponse DesignService::preview(const std::string& id, std::string_view body) const {
  auto session = find(id);
  if (!session) return not_found(id);
  try {
    const auto request = parse_body(body);
    std::shared_lock lock(session->mutex);
    const auto outcome = apply_action(session->dataset, session->strata_col, request, false);
    json response = {{"strata_column", outcome.strata_col ? json(*outcome.strata_col) : json(nullptr)},
                     {"stratum_counts", counts_json(outcome.table, outcome.strata_col)},
                     {"design", nullptr}};
    if (has(request, "allocation")) {
      const auto& a = request["allocation"];
      if (!outcome.strata_col) throw Error(ErrorKind::MissingArgument, "allocation needs a strata column");
      const auto y = field<std::string>(a, "y", "text");
      if (has(a, "already_sampled")) {
        const auto wave = allocate_wave(outcome.table, *outcome.strata_col, y,
                                        field<std::string>(a, "already_sampled", "text"),
                                        field<std::int64_t>(a, "nsample", "an integer"),
                                        has(a, "detailed") && field<bool>(a, "detailed", "a flag"));
        response["design"] = rows_json(wave.to_table());
      } else {
        OptimumAllocationArgs args;
        args.strata_col = *outcome.strata_col;
        args.y_col = y;
        if (has(a, "method")) args.method = parse_method(field<std::string>(a, "method", "text"));
        if (has(a, "nsample")) args.nsample = field<std::int64_t>(a, "nsample", "an integer");
        if (has(a, "allow_small")) args.allow_small = field<bool>(a, "allow_small", "a flag");
        const auto design = optimum_allocation(outcome.table, args);
        response["design"] = rows_json(design.to_table());
        response["zero_size_strata"] = design.zero_size_strata();
      }
    }
    return json_response(200, response);
  } catch (const Error& e) {
    return error_response(e);
  }
}

ServiceResponse DesignService::confirm(const std::string& id, std::string_view body) {
  auto session = find(id);
  if (!session) return not_found(id);
  try {
    const auto request = parse_body(body);
    std::unique_lock lock(session->mutex);
    auto outcome = apply_action(session->dataset, session->strata_col, request, true);
    const auto line = command_line(outcome.command);
    session->dataset = std::move(outcome.table);
    session->strata_col = outcome.strata_col;
    session->action_log.push_back(line);
    return json_response(200, {{"emitted_line", line},
                               {"strata_column", *session->strata_col},
                               {"stratum_counts", counts_json(session->dataset, session->strata_col)},
                               {"actions", session->action_log.size()}});
  } catch (const Error& e) {
    return error_response(e);
  }
}

ServiceResponse DesignService::script(const std::string& id) const {
  auto session = find(id);
  if (!session) return not_found(id);
  std::shared_lock lock(session->mutex);
  std::string text;
  for (const auto& line : session->action_log) text += line + "\n";
  return {200, "text/plain", text};
}

ServiceResponse DesignService::state(const std::string& id) const {
  auto session = find(id);
  if (!session) return not_found(id);
  std::shared_lock lock(session->mutex);
  return json_response(200, {{"strata_column", session->strata_col ? json(*session->strata_col) : json(nullptr)},
                             {"stratum_counts", counts_json(session->dataset, session->strata_col)},
                             {"columns", columns_json(session->dataset)},
                             {"row_count", session->dataset.row_count()},
                             {"actions", session->action_log.size()},
                             {"created_at", session->created_at}});
}

ServiceResponse DesignService::data(const std::string& id) const {
  auto session = find(id);
  if (!session) return not_found(id);
  std::shared_lock lock(session->mutex);
  return {200, "text/csv", csv::format(session->dataset)};
}

struct HttpServer::Impl {
  DesignService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(DesignService& s) : service(s) {
    const auto origin = service.options().cors_origin;
    server.set_payload_max_length(service.options().max_body_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string name = res.status == 413 ? "PayloadTooLarge" : res.status == 404 ? "NotFound" : "HttpError";
      res.set_content(json{{"error", name}, {"message", httplib::status_message(res.status)}}.dump(),
                      "application/json");
    });
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    auto reply = [](httplib::Response& res, const ServiceResponse& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Post("/sessions", [this, reply](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> strata;
      if (req.has_param("strata")) strata = req.get_param_value("strata");
      reply(res, service.create_session(req.body, strata));
    });
    server.Post(R"(/sessions/([^/]+)/preview)", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.preview(req.matches[1], req.body));
    });
    server.Post(R"(/sessions/([^/]+)/confirm)", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.confirm(req.matches[1], req.body));
    });
    server.Get(R"(/sessions/([^/]+)/script)", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.script(req.matches[1]));
    });
    server.Get(R"(/sessions/([^/]+)/state)", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.state(req.matches[1]));
    });
    server.Get(R"(/sessions/([^/]+)/data)", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.data(req.matches[1]));
    });
  }
};

HttpServer::HttpServer(DesignService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorKind::IoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace stratdesign
