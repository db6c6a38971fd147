#include <set>
#include <thread>

#include "dot_parser.hpp"
#include "fixtures.hpp"
#include "stratdesign/workflow.hpp"
#include "study.hpp"
#include "test_util.hpp"

using namespace stratdesign;

namespace {

WorkflowDoc iris_doc() {
  auto doc = new_multiwave(2, {1, 3});
  doc.metadata["title"] = "Sepal Width Survey";
  doc = set_slot(doc, {1, std::nullopt}, Slot::Data, fixtures::iris());
  doc = set_slot(doc, {2, std::nullopt}, Slot::Metadata,
                 Metadata{{"strata", "Species"}, {"nsample", 30}, {"id", "id"}, {"sampled_ind", "sampled_phase2"}});
  return doc;
}

Table expensive_for(const std::vector<std::string>& ids) {
  Column id{"id", {}}, v{"expensive", {}};
  for (const auto& s : ids) {
    id.cells.emplace_back(static_cast<std::int64_t>(std::stoll(s)));
    v.cells.emplace_back(static_cast<double>(std::stoll(s)) / 10.0);
  }
  return Table({id, v});
}

}  // namespace

TEST_CASE("new_multiwave shapes") {
  const auto doc = new_multiwave(2, {1, 3});
  REQUIRE(doc.phases.size() == 2);
  CHECK(doc.phases[0].waves.size() == 1);
  CHECK(doc.phases[1].waves.size() == 3);
  CHECK(doc.phases[1].waves[2].design.empty());
  CHECK(doc.phases[1].waves[2].samples.empty());
  CHECK(new_multiwave(1, {1}).phases.size() == 1);
  CHECK_ERROR_KIND(new_multiwave(2, {1}), ErrorKind::ShapeMismatch);
  CHECK_ERROR_KIND(new_multiwave(2, {2, 3}), ErrorKind::ShapeMismatch);
  CHECK_ERROR_KIND(new_multiwave(2, {1, 0}), ErrorKind::InvalidArgument);
}

TEST_CASE("slot access") {
  auto doc = new_multiwave(2, {1, 3});
  CHECK(std::get<Metadata>(get_slot(doc, {}, Slot::Metadata)).empty());
  const auto design = std::get<Table>(get_slot(doc, {2, 2}, Slot::Design));
  CHECK(design.column_count() == 0);
  CHECK(design.row_count() == 0);

  doc = set_slot(doc, {}, Slot::Metadata, Metadata{{"title", "Sepal Width Survey"}});
  CHECK(std::get<Metadata>(get_slot(doc, {}, Slot::Metadata))["title"] == "Sepal Width Survey");

  doc = set_slot(doc, {1, std::nullopt}, Slot::Data, fixtures::iris());
  CHECK(std::get<Table>(get_slot(doc, {1, 1}, Slot::Data)).row_count() == 150);

  CHECK_ERROR_KIND(get_slot(doc, {2, std::nullopt}, Slot::Design), ErrorKind::WaveRequired);
  CHECK_ERROR_KIND(get_slot(doc, {3, 1}, Slot::Design), ErrorKind::UnknownLocation);
  CHECK_ERROR_KIND(get_slot(doc, {2, 4}, Slot::Design), ErrorKind::UnknownLocation);
  CHECK_ERROR_KIND(get_slot(doc, {}, Slot::Data), ErrorKind::UnknownLocation);
  CHECK_ERROR_KIND(set_slot(doc, {2, 1}, Slot::Design, Metadata{{"x", 1}}), ErrorKind::SlotTypeMismatch);
  CHECK_ERROR_KIND(set_slot(doc, {2, 1}, Slot::Samples, fixtures::iris()), ErrorKind::SlotTypeMismatch);
  CHECK_ERROR_KIND(set_slot(doc, {}, Slot::Metadata, Metadata(5)), ErrorKind::SlotTypeMismatch);
  CHECK(parse_slot("sampled_data") == Slot::SampledData);
  CHECK_ERROR_KIND(parse_slot("foo"), ErrorKind::InvalidArgument);
}

TEST_CASE("writing one slot leaves every other slot unchanged") {
  const auto base = iris_doc();
  const auto before = serialize(base);
  auto changed = set_slot(base, {2, 2}, Slot::Samples, std::vector<std::string>{"1", "2"});
  auto restored = set_slot(changed, {2, 2}, Slot::Samples, std::vector<std::string>{});
  CHECK(serialize(restored) == before);
  CHECK(serialize(changed) != before);
  CHECK(changed.phases[1].waves[0] == base.phases[1].waves[0]);
  CHECK(changed.phases[0] == base.phases[0]);
}

TEST_CASE("argument cascade: explicit, wave, phase, overall") {
  auto doc = new_multiwave(2, {1, 3});
  const Location at{2, 1};
  CHECK_ERROR_KIND(resolve_arg(doc, at, "strata"), ErrorKind::MissingArgument);
  doc.metadata["strata"] = "overall";
  CHECK(resolve_arg(doc, at, "strata") == "overall");
  doc.phases[1].metadata["strata"] = "phase";
  CHECK(resolve_arg(doc, at, "strata") == "phase");
  doc.phases[1].waves[0].metadata["strata"] = "wave";
  CHECK(resolve_arg(doc, at, "strata") == "wave");
  CHECK(resolve_arg(doc, at, "strata", nlohmann::json("explicit")) == "explicit");
  CHECK(resolve_arg(doc, {2, 2}, "strata") == "phase");
  CHECK(resolve_arg(doc, {1, 1}, "strata") == "overall");
}

TEST_CASE("apply_multiwave on iris: allocation then sampling") {
  auto doc = iris_doc();
  doc = apply_multiwave(doc, 2, 1, WorkflowFunction::OptimumAllocation,
                        {{"y", "Sepal.Length"}, {"method", "wright2"}});
  const auto& design = doc.phases[1].waves[0].design;
  const auto sizes = numeric_column(design, "stratum_size");
  CHECK(*sizes[0] == 7);
  CHECK(*sizes[1] == 10);
  CHECK(*sizes[2] == 13);

  doc = apply_multiwave(doc, 2, 1, WorkflowFunction::SampleStrata,
                        {{"design_strata", "strata"}, {"n_allocated", "stratum_size"}, {"seed", 1}});
  const auto samples = doc.phases[1].waves[0].samples;
  CHECK(samples.size() == 30);
  CHECK(std::set<std::string>(samples.begin(), samples.end()).size() == 30);

  doc = set_slot(doc, {2, 1}, Slot::SampledData, expensive_for(samples));
  doc = merge_samples(doc, 2, 1);
  const auto& data = doc.phases[1].waves[0].data;
  CHECK(data.row_count() == 150);
  const auto flags = numeric_column(data, "sampled_phase2");
  const auto expensive = numeric_column(data, "expensive");
  const auto ids = text_column(data, "id");
  const std::set<std::string> chosen(samples.begin(), samples.end());
  int flagged = 0;
  for (std::size_t r = 0; r < 150; ++r) {
    CHECK(expensive[r].has_value() == static_cast<bool>(chosen.count(ids[r])));
    flagged += static_cast<int>(*flags[r]);
  }
  CHECK(flagged == 30);

  doc = apply_multiwave(doc, 2, 2, WorkflowFunction::AllocateWave,
                        {{"y", "expensive"}, {"already_sampled", "sampled_phase2"}, {"nsample", 20}});
  const auto& wave2 = doc.phases[1].waves[1].design;
  CHECK(wave2.has_column("n_to_sample"));
  CHECK(wave2.has_column("nsample_optimal"));
  std::int64_t total = 0;
  for (const auto& v : numeric_column(wave2, "n_to_sample")) total += static_cast<std::int64_t>(*v);
  CHECK(total == 20);
}

TEST_CASE("apply_multiwave errors name the location") {
  auto doc = iris_doc();
  try {
    apply_multiwave(doc, 2, 1, WorkflowFunction::OptimumAllocation, {});
    FAIL("expected MissingArgument");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingArgument);
    CHECK(std::string(e.what()).find("phase 2, wave 1") != std::string::npos);
  }
  CHECK_ERROR_KIND(apply_multiwave(doc, 2, 1, WorkflowFunction::SampleStrata, {{"seed", 1}}),
                   ErrorKind::MissingArgument);
  CHECK_ERROR_KIND(apply_multiwave(new_multiwave(2, {1, 1}), 2, 1, WorkflowFunction::OptimumAllocation, {}),
                   ErrorKind::UnknownLocation);
}

TEST_CASE("merge_samples conflicts and unknown ids") {
  auto doc = iris_doc();
  doc = set_slot(doc, {2, 1}, Slot::Samples, std::vector<std::string>{"1", "2"});
  Table sampled({Column{"id", {Cell{std::int64_t{1}}, Cell{std::int64_t{2}}}},
                 Column{"Sepal.Width", {Cell{9.9}, Cell{std::monostate{}}}}});
  doc = set_slot(doc, {2, 1}, Slot::SampledData, sampled);
  doc = merge_samples(doc, 2, 1);
  const auto& wave = doc.phases[1].waves[0];
  REQUIRE(wave.metadata.contains("merge_warnings"));
  CHECK(wave.metadata["merge_warnings"].size() == 1);
  const auto widths = numeric_column(wave.data, "Sepal.Width");
  CHECK(*widths[0] == 9.9);
  CHECK(*widths[1] == 3.0);

  Table stranger({Column{"id", {Cell{std::int64_t{999}}}}});
  doc = set_slot(doc, {2, 2}, Slot::SampledData, stranger);
  CHECK_ERROR_KIND(merge_samples(doc, 2, 2), ErrorKind::UnknownId);
}

TEST_CASE("previous data scans back to the latest filled wave") {
  auto doc = iris_doc();
  CHECK(previous_data(doc, 2, 3).row_count() == 150);
  doc = set_slot(doc, {2, 1}, Slot::Data, fixtures::iris().select_rows(std::vector<std::size_t>{0, 1}));
  CHECK(previous_data(doc, 2, 3).row_count() == 2);
  CHECK(previous_data(doc, 2, 1).row_count() == 150);
  CHECK_ERROR_KIND(previous_data(doc, 1, 1), ErrorKind::UnknownLocation);
}

TEST_CASE("summaries list every slot and the DOT form parses") {
  const auto fresh = new_multiwave(2, {1, 3});
  const auto text = workflow_summary(fresh);
  CHECK(text.find("[x]") == std::string::npos);
  CHECK(text.find("Phase 2 (3 waves)") != std::string::npos);

  auto doc = iris_doc();
  doc = set_slot(doc, {2, 1}, Slot::Samples, std::vector<std::string>{"1", "2", "3"});
  const auto filled = workflow_summary(doc);
  CHECK(filled.rfind("Sepal Width Survey\n", 0) == 0);
  CHECK(filled.find("[x] data: 150 rows x 6 columns") != std::string::npos);
  CHECK(filled.find("[x] samples: 3 ids") != std::string::npos);

  const auto g = dot::parse(workflow_summary(doc, SummaryFormat::Dot));
  CHECK(g.directed);
  CHECK(g.nodes.at("phase1_wave1_data").at("fillcolor") == "lightblue");
  CHECK(g.nodes.at("phase2_wave3_design").at("fillcolor") == "white");
  CHECK(g.nodes.at("overall").at("label").find("Sepal Width Survey") != std::string::npos);
  CHECK(g.nodes.size() == 1 + 2 + 4 * 6);
  CHECK(g.edges.size() == 2 + 4 * 6);

  auto odd = fresh;
  odd.metadata["title"] = "quote \" and \\ back";
  CHECK_NOTHROW(dot::parse(workflow_summary(odd, SummaryFormat::Dot)));
}

TEST_CASE("save and load round-trip, with and without side-car tables") {
  fixtures::TempDir dir("wf");
  const auto fresh = new_multiwave(2, {1, 3});
  save_workflow(fresh, dir / "fresh.json");
  CHECK(load_workflow(dir / "fresh.json") == fresh);
  const auto bytes = fixtures::slurp(dir / "fresh.json");
  save_workflow(load_workflow(dir / "fresh.json"), dir / "fresh.json");
  CHECK(fixtures::slurp(dir / "fresh.json") == bytes);

  auto doc = iris_doc();
  doc = set_slot(doc, {2, 1}, Slot::Samples, std::vector<std::string>{"1", "2"});
  CHECK(deserialize(serialize(doc)) == doc);
  save_workflow(doc, dir / "big.json", SaveOptions{100});
  CHECK(std::filesystem::exists(dir / "big.phase1.wave1.data.csv"));
  CHECK(load_workflow(dir / "big.json") == doc);
  CHECK_ERROR_KIND(deserialize("{\"format\": \"other\"}"), ErrorKind::ParseError);
  CHECK_ERROR_KIND(deserialize("not json"), ErrorKind::ParseError);
}

TEST_CASE("a second writer is refused while the lock is held") {
  fixtures::TempDir dir("lock");
  const auto path = dir / "w.json";
  {
    WorkflowLock first(path);
    CHECK_ERROR_KIND(WorkflowLock(path), ErrorKind::LockFailed);
  }
  CHECK_NOTHROW(WorkflowLock{path});
}

TEST_CASE("three-wave synthetic study keeps rows and accumulates the indicator") {
  const auto r = study::run();
  CHECK(r.rows == std::vector<std::size_t>{10335, 10335, 10335});
  CHECK(r.sample_lengths == std::vector<std::size_t>{250, 250, 250});
  CHECK(r.sampled == std::vector<std::int64_t>{250, 500, 750});
  CHECK(r.unsampled == std::vector<std::int64_t>{10085, 9835, 9585});
  std::set<std::string> all;
  for (const auto& w : r.doc.phases[1].waves) all.insert(w.samples.begin(), w.samples.end());
  CHECK(all.size() == 750);
}
