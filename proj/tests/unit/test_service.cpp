#include <httplib.h>

#include <atomic>
#include <random>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "stratdesign/cli.hpp"
#include "stratdesign/service.hpp"
#include "test_util.hpp"

using namespace stratdesign;
using nlohmann::json;

namespace {

std::string iris_text() { return fixtures::slurp(fixtures::iris_path()); }

std::string new_session(DesignService& s, const std::string& strata = "Species") {
  const auto r = s.create_session(iris_text(), strata);
  REQUIRE(r.status == 200);
  return r.json()["session_id"];
}

json rows_of(const Table& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    json row = json::object();
    for (const auto& c : t.columns()) {
      const auto& cell = c.cells[r];
      if (is_missing(cell)) row[c.name] = nullptr;
      else if (auto i = std::get_if<std::int64_t>(&cell)) row[c.name] = *i;
      else if (auto d = std::get_if<double>(&cell)) row[c.name] = *d;
      else row[c.name] = std::get<std::string>(cell);
    }
    rows.push_back(row);
  }
  return rows;
}

struct CliResult {
  int code = 0;
  std::string out;
};

CliResult cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str()};
}

const char* kNumeric[] = {"Sepal.Length", "Sepal.Width", "Petal.Length", "Petal.Width"};
const char* kSpecies[] = {"setosa", "versicolor", "virginica"};

}  // namespace

TEST_CASE("session lifecycle") {
  DesignService s;
  const auto created = s.create_session(iris_text(), std::string("Species"));
  REQUIRE(created.status == 200);
  const auto body = created.json();
  CHECK(body["row_count"] == 150);
  CHECK(body["columns"].size() == 6);
  CHECK(body["columns"][4] == json{{"name", "Species"}, {"type", "text"}});
  CHECK(body["columns"][0]["type"] == "real");
  const std::string id = body["session_id"];
  CHECK(id.size() == 16);

  const json split = {{"split_var", "Sepal.Width"}, {"targets", {"setosa", "virginica"}}, {"split_at", {0.5}}};
  const auto preview = s.preview(id, json{{"split", split}}.dump());
  REQUIRE(preview.status == 200);
  CHECK(preview.json()["stratum_counts"] == json{{"setosa.Sepal.Width_(3.4,4.4]", 22},
                                                 {"setosa.Sepal.Width_[2.3,3.4]", 28},
                                                 {"versicolor", 50},
                                                 {"virginica.Sepal.Width_(3,3.8]", 17},
                                                 {"virginica.Sepal.Width_[2.2,3]", 33}});
  const auto confirmed = s.confirm(id, json{{"split", split}}.dump());
  REQUIRE(confirmed.status == 200);
  CHECK(confirmed.json()["emitted_line"] ==
        "split --input ${DATA} --out ${DATA} --strata Species --target setosa --target virginica "
        "--split-var Sepal.Width --type local_quantile --split-at=0.5");
  CHECK(confirmed.json()["strata_column"] == "new_strata");

  const auto merged = s.confirm(id, json{{"merge", {{"labels", {"versicolor", "virginica.Sepal.Width_(3,3.8]"}},
                                                    {"name", "vv"}}}}
                                        .dump());
  REQUIRE(merged.status == 200);
  CHECK(merged.json()["stratum_counts"]["vv"] == 67);
  const auto script = s.script(id);
  CHECK(script.content_type == "text/plain");
  CHECK(script.body ==
        "split --input ${DATA} --out ${DATA} --strata Species --target setosa --target virginica "
        "--split-var Sepal.Width --type local_quantile --split-at=0.5\n"
        "merge --input ${DATA} --out ${DATA} --strata new_strata --merge versicolor --merge "
        "'virginica.Sepal.Width_(3,3.8]' --name vv\n");
  const auto state = s.state(id).json();
  CHECK(state["actions"] == 2);
  CHECK(state["strata_column"] == "new_strata");
  CHECK(state["row_count"] == 150);
}

TEST_CASE("service errors") {
  DesignService s;
  CHECK(s.create_session("").status == 400);
  CHECK(s.create_session("a,b\n").json()["error"] == "EmptyInput");
  CHECK(s.create_session("a,b\n1,2\n", std::string("c")).json()["error"] == "ColumnNotFound");
  CHECK(s.create_session("a\n\"x\n").status == 400);
  CHECK(s.preview("nope", "{}").status == 404);
  CHECK(s.preview("nope", "{}").json()["error"] == "UnknownSession");
  CHECK(s.confirm("nope", "{}").status == 404);
  CHECK(s.script("nope").status == 404);

  const auto id = new_session(s);
  CHECK(s.preview(id, "not json").status == 400);
  CHECK(s.preview(id, "[1]").status == 400);
  CHECK(s.confirm(id, "{}").json()["error"] == "MissingArgument");
  CHECK(s.confirm(id, json{{"split", {{"split_var", "Sepal.Width"}}}}.dump()).json()["error"] == "InvalidSplit");
  const auto infeasible = s.preview(id, json{{"allocation", {{"y", "Sepal.Width"}, {"nsample", 151}}}}.dump());
  CHECK(infeasible.status == 422);
  CHECK(infeasible.json()["error"] == "BudgetExceedsPopulation");
  CHECK(s.preview(id, json{{"split", {{"split_var", "Species"}, {"split_at", {0.5}}}}}.dump()).status == 400);
  CHECK(s.state(id).json()["actions"] == 0);

  DesignService tiny(ServiceOptions{16, "*"});
  CHECK(tiny.create_session(iris_text()).status == 413);
}

TEST_CASE("previews never change the session") {
  DesignService s;
  const auto id = new_session(s);
  const auto before_state = s.state(id).body;
  const auto before_data = s.data(id).body;
  const auto before_script = s.script(id).body;
  std::mt19937_64 gen(31);
  for (int i = 0; i < 25; ++i) {
    json req = {{"split", {{"split_var", kNumeric[gen() % 4]}, {"split_at", {0.2 + 0.6 * (gen() % 100) / 100.0}}}},
                {"allocation", {{"y", kNumeric[gen() % 4]}, {"nsample", 20 + gen() % 30}}}};
    s.preview(id, req.dump());
    s.preview(id, json{{"merge", {{"labels", {"setosa", "virginica"}}, {"name", "m"}}}}.dump());
  }
  CHECK(s.state(id).body == before_state);
  CHECK(s.data(id).body == before_data);
  CHECK(s.script(id).body == before_script);
}

TEST_CASE("randomized previews equal the CLI pipeline") {
  fixtures::TempDir dir("svc");
  const auto iris = fixtures::iris_path().string();
  const auto split_path = (dir / "split.csv").string();
  DesignService s;
  const auto id = new_session(s);
  std::mt19937_64 gen(2718);
  int compared = 0;
  for (int trial = 0; trial < 20; ++trial) {
    json split = {{"split_var", kNumeric[gen() % 4]},
                  {"type", gen() % 2 ? "local_quantile" : "global_quantile"}};
    std::vector<std::string> targets;
    for (const char* sp : kSpecies) {
      if (gen() % 2) targets.push_back(sp);
    }
    if (targets.empty()) targets.push_back(kSpecies[gen() % 3]);
    split["targets"] = targets;
    std::vector<double> cuts = {0.1 + 0.05 * static_cast<double>(gen() % 7)};
    if (gen() % 2) cuts.push_back(cuts[0] + 0.3 + 0.05 * static_cast<double>(gen() % 5));
    split["split_at"] = cuts;
    const std::string y = kNumeric[gen() % 4];
    const char* methods[] = {"neyman", "wright1", "wright2"};
    const std::string method = methods[gen() % 3];
    const std::int64_t nsample = 20 + static_cast<std::int64_t>(gen() % 41);

    const json req = {{"split", split}, {"allocation", {{"y", y}, {"nsample", nsample}, {"method", method}}}};
    const auto response = s.preview(id, req.dump());

    std::vector<std::string> words = {"split", "-i", iris, "--out", split_path, "--strata", "Species",
                                      "--split-var", split["split_var"], "--type", split["type"]};
    for (const auto& t : targets) {
      words.push_back("--target");
      words.push_back(t);
    }
    std::string at;
    for (double c : cuts) at += (at.empty() ? "" : ",") + format_real(c);
    words.push_back("--split-at=" + at);
    const auto split_run = cli_run(words);
    if (split_run.code != 0) {
      CHECK_MESSAGE(response.status != 200, req.dump());
      continue;
    }
    const auto alloc = cli_run({"allocate", "-i", split_path, "--strata", "new_strata", "--y", y, "--method", method,
                                "--nsample", std::to_string(nsample), "--precision", "full"});
    if (alloc.code != 0) {
      CHECK(response.status == (alloc.code == 4 ? 422 : 400));
      continue;
    }
    REQUIRE_MESSAGE(response.status == 200, response.body);
    const auto body = response.json();
    const auto cli_split = csv::read_file(split_path);
    json counts = json::object();
    for (const auto& [label, n] : stratum_counts(cli_split, "new_strata")) counts[label] = n;
    CHECK(body["stratum_counts"] == counts);
    CHECK(body["design"] == rows_of(csv::parse(alloc.out)));
    ++compared;
  }
  CHECK(compared >= 12);
}

TEST_CASE("replaying the emitted script reproduces the session state") {
  DesignService s;
  const auto id = new_session(s);
  REQUIRE(s.confirm(id, json{{"split_var", "Petal.Length"}, {"type", "value"}, {"split_at", {5}},
                             {"targets", {"virginica"}}, {"trunc", "PL"}}
                            .dump())
              .status == 200);
  REQUIRE(s.confirm(id, json{{"split", {{"split_var", "Sepal.Width"}, {"type", "global_quantile"},
                                        {"split_at", {0.5}}, {"targets", {"setosa", "versicolor"}},
                                        {"trunc", 2}}}}
                            .dump())
              .status == 200);
  REQUIRE(s.confirm(id, json{{"merge", {{"labels", {"versicolor.Se_[2,3.05]", "versicolor.Se_(3.05,3.4]"}},
                                        {"name", "versicolor (all)"}}}}
                            .dump())
              .status == 200);

  fixtures::TempDir dir("svc_replay");
  const auto data = (dir / "data.csv").string();
  fixtures::spit(data, iris_text());
  std::ostringstream out, err;
  REQUIRE_MESSAGE(cli::replay(s.script(id).body, {{"DATA", data}}, out, err) == 0, err.str());
  CHECK(fixtures::slurp(data) == s.data(id).body);
  const auto replayed = csv::read_file(data);
  json counts = json::object();
  for (const auto& [label, n] : stratum_counts(replayed, "new_strata")) counts[label] = n;
  CHECK(counts == s.state(id).json()["stratum_counts"]);
  CHECK(counts.contains("versicolor (all)"));
}

TEST_CASE("concurrent confirms on one session are serialized") {
  DesignService s;
  const auto id = new_session(s);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int k = 0; k < 5; ++k) {
        const json req = {{"merge", {{"strata", "Species"}, {"labels", {"setosa"}}, {"name", "s" + std::to_string(t)}}}};
        if (s.confirm(id, req.dump()).status == 200) ++ok;
        s.preview(id, "{}");
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(ok == 40);
  CHECK(s.state(id).json()["actions"] == 40);
  std::istringstream lines(s.script(id).body);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) n += line.rfind("merge ", 0) == 0;
  CHECK(n == 40);
}

TEST_CASE("HTTP front end") {
  DesignService service(ServiceOptions{1u << 20, "http://localhost:5173"});
  HttpServer server(service);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  auto created = client.Post("/sessions?strata=Species", iris_text(), "text/csv");
  REQUIRE(created);
  CHECK(created->status == 200);
  CHECK(created->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  const std::string id = json::parse(created->body)["session_id"];

  const json split = {{"split", {{"split_var", "Sepal.Width"}, {"targets", {"setosa"}}, {"split_at", {0.5}}}},
                      {"allocation", {{"y", "Sepal.Width"}, {"nsample", 40}}}};
  auto preview = client.Post("/sessions/" + id + "/preview", split.dump(), "application/json");
  REQUIRE(preview);
  CHECK(preview->status == 200);
  CHECK(json::parse(preview->body)["design"].size() == 4);
  CHECK(json::parse(preview->body) == service.preview(id, split.dump()).json());

  auto confirm = client.Post("/sessions/" + id + "/confirm", split.dump(), "application/json");
  REQUIRE(confirm);
  CHECK(confirm->status == 200);
  auto script = client.Get("/sessions/" + id + "/script");
  REQUIRE(script);
  CHECK(script->get_header_value("Content-Type").rfind("text/plain", 0) == 0);
  CHECK(script->body.rfind("split ", 0) == 0);
  auto state = client.Get("/sessions/" + id + "/state");
  REQUIRE(state);
  CHECK(json::parse(state->body)["actions"] == 1);
  auto data = client.Get("/sessions/" + id + "/data");
  REQUIRE(data);
  CHECK(data->body == service.data(id).body);

  auto missing = client.Get("/sessions/ffff/state");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"] == "UnknownSession");
  auto no_route = client.Get("/elsewhere");
  REQUIRE(no_route);
  CHECK(no_route->status == 404);
  CHECK(json::parse(no_route->body)["error"] == "NotFound");

  auto infeasible = client.Post("/sessions/" + id + "/preview",
                                json{{"allocation", {{"y", "Sepal.Width"}, {"nsample", 500}}}}.dump(), "application/json");
  REQUIRE(infeasible);
  CHECK(infeasible->status == 422);

  auto too_big = client.Post("/sessions", std::string((1u << 20) + 10, 'a'), "text/csv");
  REQUIRE(too_big);
  CHECK(too_big->status == 413);

  auto options = client.Options("/sessions");
  REQUIRE(options);
  CHECK(options->status == 204);
  CHECK(options->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  server.stop();
}
