#include "stratdesign/workflow.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "stratdesign/allocation.hpp"
#include "stratdesign/csv.hpp"
#include "stratdesign/error.hpp"
#include "stratdesign/sampler.hpp"

namespace stratdesign {

using nlohmann::json;

namespace {

std::string where_text(const Location& w) {
  if (!w.phase) return "overall";
  std::string s = "phase " + std::to_string(*w.phase);
  if (w.wave) s += ", wave " + std::to_string(*w.wave);
  return s;
}

Phase& phase_at(WorkflowDoc& doc, std::size_t phase) {
  if (phase < 1 || phase > doc.phases.size()) {
    throw Error(ErrorKind::UnknownLocation, "phase " + std::to_string(phase) + " does not exist (" +
                                                std::to_string(doc.phases.size()) + " phases)");
  }
  return doc.phases[phase - 1];
}

const Phase& phase_at(const WorkflowDoc& doc, std::size_t phase) {
  return phase_at(const_cast<WorkflowDoc&>(doc), phase);
}

Wave& wave_at(WorkflowDoc& doc, std::size_t phase, std::size_t wave) {
  auto& p = phase_at(doc, phase);
  if (wave < 1 || wave > p.waves.size()) {
    throw Error(ErrorKind::UnknownLocation,
                "phase " + std::to_string(phase) + " has no wave " + std::to_string(wave));
  }
  return p.waves[wave - 1];
}

const Wave& wave_at(const WorkflowDoc& doc, std::size_t phase, std::size_t wave) {
  return wave_at(const_cast<WorkflowDoc&>(doc), phase, wave);
}

// Resolves a location to the metadata object or wave it names.
struct Target {
  Metadata* metadata = nullptr;
  Wave* wave = nullptr;
};

Target locate(WorkflowDoc& doc, const Location& where, Slot slot) {
  if (!where.phase) {
    if (where.wave) throw Error(ErrorKind::UnknownLocation, "a wave needs a phase");
    if (slot != Slot::Metadata) {
      throw Error(ErrorKind::UnknownLocation,
                  "the overall document only has a metadata slot, not " + std::string(slot_name(slot)));
    }
    return {&doc.metadata, nullptr};
  }
  auto& phase = phase_at(doc, *where.phase);
  if (!where.wave) {
    if (slot == Slot::Metadata) return {&phase.metadata, nullptr};
    if (*where.phase == 1 && phase.waves.size() == 1) return {nullptr, &phase.waves.front()};
    throw Error(ErrorKind::WaveRequired, "slot " + std::string(slot_name(slot)) + " of phase " +
                                             std::to_string(*where.phase) + " needs a wave");
  }
  auto& wave = wave_at(doc, *where.phase, *where.wave);
  return {slot == Slot::Metadata ? &wave.metadata : nullptr, &wave};
}

Table& table_slot(Wave& wave, Slot slot) {
  switch (slot) {
    case Slot::Design: return wave.design;
    case Slot::SampledData: return wave.sampled_data;
    default: return wave.data;
  }
}

std::string arg_string(const json& v, std::string_view name) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw Error(ErrorKind::InvalidArgument, "argument '" + std::string(name) + "' must be text");
}

std::int64_t arg_int(const json& v, std::string_view name) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<std::int64_t>(v.get<double>()))) {
    return static_cast<std::int64_t>(v.get<double>());
  }
  if (v.is_string()) {
    auto cell = parse_cell(v.get<std::string>());
    if (auto i = std::get_if<std::int64_t>(&cell)) return *i;
  }
  throw Error(ErrorKind::InvalidArgument, "argument '" + std::string(name) + "' must be an integer");
}

std::uint64_t arg_seed(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    std::size_t used = 0;
    try {
      auto seed = std::stoull(s, &used);
      if (used == s.size()) return seed;
    } catch (const std::exception&) {
    }
  }
  return static_cast<std::uint64_t>(arg_int(v, "seed"));
}

bool arg_bool(const json& v, std::string_view name) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) return v.get<std::int64_t>() != 0;
  if (v.is_string()) {
    auto s = v.get<std::string>();
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
  }
  throw Error(ErrorKind::InvalidArgument, "argument '" + std::string(name) + "' must be a flag");
}

std::string describe_table(const Table& t) {
  return std::to_string(t.row_count()) + " rows x " + std::to_string(t.column_count()) + " columns";
}

std::string describe_metadata(const Metadata& m) {
  if (m.empty()) return "empty";
  std::string keys;
  for (auto it = m.begin(); it != m.end(); ++it) {
    if (!keys.empty()) keys += ", ";
    keys += it.key();
  }
  return std::to_string(m.size()) + (m.size() == 1 ? " entry (" : " entries (") + keys + ")";
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

Slot parse_slot(std::string_view text) {
  if (text == "metadata") return Slot::Metadata;
  if (text == "design") return Slot::Design;
  if (text == "samples") return Slot::Samples;
  if (text == "sampled_data") return Slot::SampledData;
  if (text == "data") return Slot::Data;
  throw Error(ErrorKind::InvalidArgument,
              "unknown slot '" + std::string(text) + "' (metadata, design, samples, sampled_data, data)");
}

std::string_view slot_name(Slot slot) noexcept {
  switch (slot) {
    case Slot::Metadata: return "metadata";
    case Slot::Design: return "design";
    case Slot::Samples: return "samples";
    case Slot::SampledData: return "sampled_data";
    case Slot::Data: return "data";
  }
  return "data";
}

WorkflowDoc new_multiwave(std::size_t phases, const std::vector<std::size_t>& waves) {
  if (waves.size() != phases) {
    throw Error(ErrorKind::ShapeMismatch, "length of the waves argument (" + std::to_string(waves.size()) +
                                              ") must match the number of phases (" +
                                              std::to_string(phases) + ")");
  }
  if (phases < 1) throw Error(ErrorKind::InvalidArgument, "a workflow needs at least one phase");
  if (waves.front() != 1) throw Error(ErrorKind::ShapeMismatch, "phase 1 must have exactly one wave");
  WorkflowDoc doc;
  for (auto count : waves) {
    if (count < 1) throw Error(ErrorKind::InvalidArgument, "every phase needs at least one wave");
    Phase p;
    p.waves.resize(count);
    doc.phases.push_back(std::move(p));
  }
  return doc;
}

SlotValue get_slot(const WorkflowDoc& doc, const Location& where, Slot slot) {
  auto target = locate(const_cast<WorkflowDoc&>(doc), where, slot);
  if (target.metadata) return *target.metadata;
  if (slot == Slot::Samples) return target.wave->samples;
  return table_slot(*target.wave, slot);
}

WorkflowDoc set_slot(WorkflowDoc doc, const Location& where, Slot slot, SlotValue value) {
  auto target = locate(doc, where, slot);
  const auto mismatch = [&](std::string_view expected) {
    return Error(ErrorKind::SlotTypeMismatch, std::string(slot_name(slot)) + " slot at " +
                                                  where_text(where) + " takes " + std::string(expected));
  };
  if (target.metadata) {
    auto* m = std::get_if<Metadata>(&value);
    if (!m || !m->is_object()) throw mismatch("a key/value object");
    *target.metadata = std::move(*m);
  } else if (slot == Slot::Samples) {
    auto* ids = std::get_if<std::vector<std::string>>(&value);
    if (!ids) throw mismatch("a list of ids");
    target.wave->samples = std::move(*ids);
  } else {
    auto* t = std::get_if<Table>(&value);
    if (!t) throw mismatch("a table");
    table_slot(*target.wave, slot) = std::move(*t);
  }
  return doc;
}

std::optional<json> find_arg(const WorkflowDoc& doc, const Location& where, std::string_view name,
                             const std::optional<json>& explicit_value) {
  if (explicit_value && !explicit_value->is_null()) return explicit_value;
  const std::string key(name);
  auto lookup = [&](const Metadata& m) -> std::optional<json> {
    if (m.is_object() && m.contains(key) && !m[key].is_null()) return m[key];
    return std::nullopt;
  };
  if (where.phase) {
    const auto& phase = phase_at(doc, *where.phase);
    if (where.wave) {
      if (auto v = lookup(wave_at(doc, *where.phase, *where.wave).metadata)) return v;
    }
    if (auto v = lookup(phase.metadata)) return v;
  }
  return lookup(doc.metadata);
}

json resolve_arg(const WorkflowDoc& doc, const Location& where, std::string_view name,
                 const std::optional<json>& explicit_value) {
  if (auto v = find_arg(doc, where, name, explicit_value)) return *v;
  throw Error(ErrorKind::MissingArgument,
              "argument '" + std::string(name) +
                  "' was not given and is not in the wave, phase or overall metadata at " +
                  where_text(where));
}

const Table& previous_data(const WorkflowDoc& doc, std::size_t phase, std::size_t wave) {
  wave_at(doc, phase, wave);
  std::size_t p = phase;
  std::size_t w = wave;
  for (;;) {
    if (w > 1) {
      --w;
    } else if (p > 1) {
      --p;
      w = doc.phases[p - 1].waves.size();
    } else {
      break;
    }
    const auto& data = doc.phases[p - 1].waves[w - 1].data;
    if (!data.empty()) return data;
  }
  throw Error(ErrorKind::UnknownLocation, "no data slot before phase " + std::to_string(phase) +
                                              ", wave " + std::to_string(wave) + " holds data");
}

WorkflowFunction parse_function(std::string_view text) {
  if (text == "optimum_allocation") return WorkflowFunction::OptimumAllocation;
  if (text == "allocate_wave") return WorkflowFunction::AllocateWave;
  if (text == "sample_strata") return WorkflowFunction::SampleStrata;
  throw Error(ErrorKind::InvalidArgument, "unknown workflow function '" + std::string(text) +
                                              "' (optimum_allocation, allocate_wave, sample_strata)");
}

std::string_view function_name(WorkflowFunction fun) noexcept {
  switch (fun) {
    case WorkflowFunction::OptimumAllocation: return "optimum_allocation";
    case WorkflowFunction::AllocateWave: return "allocate_wave";
    case WorkflowFunction::SampleStrata: return "sample_strata";
  }
  return "optimum_allocation";
}

WorkflowDoc apply_multiwave(WorkflowDoc doc, std::size_t phase, std::size_t wave,
                            WorkflowFunction fun, const Args& args) {
  const Location where{phase, wave};
  auto given = [&](const std::string& name) -> std::optional<json> {
    auto it = args.find(name);
    if (it == args.end()) return std::nullopt;
    return it->second;
  };
  auto required = [&](const std::string& name) { return resolve_arg(doc, where, name, given(name)); };
  auto optional = [&](const std::string& name) { return find_arg(doc, where, name, given(name)); };

  try {
    wave_at(doc, phase, wave);
    const Table& input = previous_data(doc, phase, wave);
    switch (fun) {
      case WorkflowFunction::OptimumAllocation: {
        OptimumAllocationArgs a;
        a.strata_col = arg_string(required("strata"), "strata");
        a.y_col = arg_string(required("y"), "y");
        if (auto m = optional("method")) a.method = parse_method(arg_string(*m, "method"));
        if (auto n = optional("nsample")) a.nsample = arg_int(*n, "nsample");
        if (auto s = optional("allow_small")) a.allow_small = arg_bool(*s, "allow_small");
        auto design = optimum_allocation(input, a).to_table();
        wave_at(doc, phase, wave).design = std::move(design);
        break;
      }
      case WorkflowFunction::AllocateWave: {
        const auto strata = arg_string(required("strata"), "strata");
        const auto y = arg_string(required("y"), "y");
        const auto already = arg_string(required("already_sampled"), "already_sampled");
        const auto nsample = arg_int(required("nsample"), "nsample");
        bool detailed = false;
        if (auto d = optional("detailed")) detailed = arg_bool(*d, "detailed");
        auto design = allocate_wave(input, strata, y, already, nsample, detailed).to_table();
        wave_at(doc, phase, wave).design = std::move(design);
        break;
      }
      case WorkflowFunction::SampleStrata: {
        const auto& design = wave_at(doc, phase, wave).design;
        if (design.empty()) {
          throw Error(ErrorKind::MissingArgument, "the design slot is empty; allocate first");
        }
        SampleRequest request;
        request.strata_col = arg_string(required("strata"), "strata");
        request.id_col = arg_string(required("id"), "id");
        const auto design_strata = arg_string(required("design_strata"), "design_strata");
        const auto n_allocated = arg_string(required("n_allocated"), "n_allocated");
        request.design = quotas_from_table(design, design_strata, n_allocated);
        if (auto a = optional("already_sampled")) request.already_sampled = arg_string(*a, "already_sampled");
        request.seed = arg_seed(required("seed"));
        auto sampled = sample_strata(input, request);
        wave_at(doc, phase, wave).samples = extract_sampled_ids(sampled, request.id_col);
        break;
      }
    }
  } catch (const Error& e) {
    throw Error(e.kind(), where_text(where) + ", " + std::string(function_name(fun)) + ": " + e.detail());
  }
  return doc;
}

WorkflowDoc merge_samples(WorkflowDoc doc, std::size_t phase, std::size_t wave,
                          const std::optional<std::string>& id,
                          const std::optional<std::string>& sampled_ind) {
  const Location where{phase, wave};
  try {
    const auto id_col = arg_string(
        resolve_arg(doc, where, "id", id ? std::optional<json>(*id) : std::nullopt), "id");
    const auto ind_col = arg_string(
        resolve_arg(doc, where, "sampled_ind", sampled_ind ? std::optional<json>(*sampled_ind) : std::nullopt),
        "sampled_ind");

    auto& target = wave_at(doc, phase, wave);
    if (target.sampled_data.empty()) {
      throw Error(ErrorKind::MissingArgument, "the sampled_data slot is empty");
    }
    Table merged = previous_data(doc, phase, wave);
    csv::check_unique_ids(merged, id_col);
    csv::check_unique_ids(target.sampled_data, id_col);

    std::unordered_map<std::string, std::size_t> row_of;
    const auto ids = text_column(merged, id_col);
    for (std::size_t r = 0; r < ids.size(); ++r) row_of.emplace(ids[r], r);

    const auto new_ids = text_column(target.sampled_data, id_col);
    std::vector<std::size_t> rows;
    rows.reserve(new_ids.size());
    for (const auto& sid : new_ids) {
      auto it = row_of.find(sid);
      if (it == row_of.end()) {
        throw Error(ErrorKind::UnknownId, "sampled id '" + sid + "' is not in the accumulated data");
      }
      rows.push_back(it->second);
    }

    json warnings = json::array();
    for (const auto& col : target.sampled_data.columns()) {
      if (col.name == id_col) continue;
      if (!merged.has_column(col.name)) {
        merged.add_column(Column{col.name, std::vector<Cell>(merged.row_count())});
      }
      auto& dest = merged.column(col.name).cells;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& incoming = col.cells[i];
        if (is_missing(incoming)) continue;
        auto& current = dest[rows[i]];
        if (!is_missing(current) && current != incoming) {
          warnings.push_back("id " + new_ids[i] + ": '" + col.name + "' changed from " +
                             cell_text(current) + " to " + cell_text(incoming));
        }
        current = incoming;
      }
    }

    // Cumulative phase indicator over every wave so far.
    std::vector<std::int64_t> flag(merged.row_count(), 0);
    const auto& waves = phase_at(doc, phase).waves;
    for (std::size_t w = 0; w < wave; ++w) {
      for (const auto& sid : waves[w].samples) {
        auto it = row_of.find(sid);
        if (it == row_of.end()) {
          throw Error(ErrorKind::UnknownId, "sample id '" + sid + "' of wave " + std::to_string(w + 1) +
                                                " is not in the accumulated data");
        }
        flag[it->second] = 1;
      }
    }
    Column indicator{ind_col, {}};
    for (auto f : flag) indicator.cells.emplace_back(f);
    merged.set_column(std::move(indicator));

    target.data = std::move(merged);
    if (!warnings.empty()) target.metadata["merge_warnings"] = std::move(warnings);
  } catch (const Error& e) {
    throw Error(e.kind(), where_text(where) + ", merge_samples: " + e.detail());
  }
  return doc;
}

std::string workflow_summary(const WorkflowDoc& doc, SummaryFormat format) {
  const std::string title = doc.metadata.is_object() && doc.metadata.contains("title") &&
                                    doc.metadata["title"].is_string()
                                ? doc.metadata["title"].get<std::string>()
                                : "Untitled survey";

  struct SlotLine {
    std::string name;
    bool filled;
    std::string description;
  };
  auto wave_slots = [](const Wave& w) {
    std::vector<SlotLine> out;
    out.push_back({"metadata", !w.metadata.empty(), describe_metadata(w.metadata)});
    out.push_back({"design", !w.design.empty(), w.design.empty() ? "empty" : describe_table(w.design)});
    out.push_back({"samples", !w.samples.empty(),
                   w.samples.empty() ? "empty" : std::to_string(w.samples.size()) + " ids"});
    out.push_back({"sampled_data", !w.sampled_data.empty(),
                   w.sampled_data.empty() ? "empty" : describe_table(w.sampled_data)});
    out.push_back({"data", !w.data.empty(), w.data.empty() ? "empty" : describe_table(w.data)});
    return out;
  };

  std::ostringstream out;
  if (format == SummaryFormat::Text) {
    out << title << "\n";
    out << "metadata: " << describe_metadata(doc.metadata) << "\n";
    for (std::size_t p = 0; p < doc.phases.size(); ++p) {
      const auto& phase = doc.phases[p];
      out << "Phase " << p + 1 << " (" << phase.waves.size()
          << (phase.waves.size() == 1 ? " wave)" : " waves)") << "\n";
      out << "  metadata: " << describe_metadata(phase.metadata) << "\n";
      for (std::size_t w = 0; w < phase.waves.size(); ++w) {
        out << "  Wave " << w + 1 << "\n";
        for (const auto& s : wave_slots(phase.waves[w])) {
          out << "    [" << (s.filled ? "x" : " ") << "] " << s.name << ": " << s.description << "\n";
        }
      }
    }
    return out.str();
  }

  constexpr const char* kFilled = "lightblue";
  constexpr const char* kEmpty = "white";
  out << "digraph multiwave {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=box, style=filled];\n";
  out << "  overall [label=\"" << dot_escape(title + "\nmetadata: " + describe_metadata(doc.metadata))
      << "\", fillcolor=\"" << (doc.metadata.empty() ? kEmpty : kFilled) << "\"];\n";
  for (std::size_t p = 0; p < doc.phases.size(); ++p) {
    const auto& phase = doc.phases[p];
    const auto pid = "phase" + std::to_string(p + 1);
    out << "  " << pid << " [label=\""
        << dot_escape("Phase " + std::to_string(p + 1) + "\nmetadata: " + describe_metadata(phase.metadata))
        << "\", fillcolor=\"" << (phase.metadata.empty() ? kEmpty : kFilled) << "\"];\n";
    out << "  overall -> " << pid << ";\n";
    for (std::size_t w = 0; w < phase.waves.size(); ++w) {
      const auto wid = pid + "_wave" + std::to_string(w + 1);
      out << "  " << wid << " [label=\"Wave " << w + 1 << "\", fillcolor=\"" << kEmpty << "\"];\n";
      out << "  " << pid << " -> " << wid << ";\n";
      for (const auto& s : wave_slots(phase.waves[w])) {
        const auto sid = wid + "_" + s.name;
        out << "  " << sid << " [label=\"" << dot_escape(s.name + "\n" + s.description)
            << "\", fillcolor=\"" << (s.filled ? kFilled : kEmpty) << "\"];\n";
        out << "  " << wid << " -> " << sid << ";\n";
      }
    }
  }
  out << "}\n";
  return out.str();
}

json table_to_json(const Table& table) {
  json cols = json::array();
  for (const auto& c : table.columns()) {
    json values = json::array();
    for (const auto& cell : c.cells) {
      if (is_missing(cell)) values.push_back(nullptr);
      else if (auto i = std::get_if<std::int64_t>(&cell)) values.push_back(*i);
      else if (auto d = std::get_if<double>(&cell)) values.push_back(*d);
      else values.push_back(std::get<std::string>(cell));
    }
    cols.push_back({{"name", c.name}, {"values", std::move(values)}});
  }
  return {{"columns", std::move(cols)}};
}

Table table_from_json(const json& j) {
  if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array()) {
    throw Error(ErrorKind::ParseError, "table must be an object with a columns array");
  }
  std::vector<Column> cols;
  for (const auto& c : j["columns"]) {
    Column col{c.at("name").get<std::string>(), {}};
    for (const auto& v : c.at("values")) {
      if (v.is_null()) col.cells.emplace_back(std::monostate{});
      else if (v.is_number_integer()) col.cells.emplace_back(v.get<std::int64_t>());
      else if (v.is_number_float()) col.cells.emplace_back(v.get<double>());
      else if (v.is_string()) col.cells.emplace_back(v.get<std::string>());
      else throw Error(ErrorKind::ParseError, "unsupported cell in column '" + col.name + "'");
    }
    cols.push_back(std::move(col));
  }
  return Table(std::move(cols));
}

namespace {

json doc_to_json(const WorkflowDoc& doc, const std::function<void(json&, const Table&, std::size_t,
                                                                  std::size_t, std::string_view)>& put) {
  json phases = json::array();
  for (std::size_t p = 0; p < doc.phases.size(); ++p) {
    json waves = json::array();
    for (std::size_t w = 0; w < doc.phases[p].waves.size(); ++w) {
      const auto& wave = doc.phases[p].waves[w];
      json jw;
      jw["metadata"] = wave.metadata;
      jw["design"] = table_to_json(wave.design);
      jw["samples"] = wave.samples;
      put(jw, wave.sampled_data, p + 1, w + 1, "sampled_data");
      put(jw, wave.data, p + 1, w + 1, "data");
      waves.push_back(std::move(jw));
    }
    phases.push_back({{"metadata", doc.phases[p].metadata}, {"waves", std::move(waves)}});
  }
  return {{"format", "stratdesign-workflow"},
          {"version", kWorkflowVersion},
          {"metadata", doc.metadata},
          {"phases", std::move(phases)}};
}

WorkflowDoc doc_from_json(const json& j, const std::filesystem::path& base) {
  if (!j.is_object() || j.value("format", "") != "stratdesign-workflow") {
    throw Error(ErrorKind::ParseError, "not a stratdesign workflow document");
  }
  if (j.value("version", 0) != kWorkflowVersion) {
    throw Error(ErrorKind::ParseError, "unsupported workflow version");
  }
  auto table_of = [&](const json& w, const std::string& slot) {
    if (w.contains(slot + "_ref")) return csv::read_file(base / w[slot + "_ref"].get<std::string>());
    return table_from_json(w.at(slot));
  };
  WorkflowDoc doc;
  doc.metadata = j.at("metadata");
  for (const auto& jp : j.at("phases")) {
    Phase phase;
    phase.metadata = jp.at("metadata");
    for (const auto& jw : jp.at("waves")) {
      Wave wave;
      wave.metadata = jw.at("metadata");
      wave.design = table_from_json(jw.at("design"));
      wave.samples = jw.at("samples").get<std::vector<std::string>>();
      wave.sampled_data = table_of(jw, "sampled_data");
      wave.data = table_of(jw, "data");
      phase.waves.push_back(std::move(wave));
    }
    doc.phases.push_back(std::move(phase));
  }
  if (doc.phases.empty()) throw Error(ErrorKind::ParseError, "workflow has no phases");
  return doc;
}

}  // namespace

std::string serialize(const WorkflowDoc& doc) {
  auto put = [](json& jw, const Table& t, std::size_t, std::size_t, std::string_view slot) {
    jw[std::string(slot)] = table_to_json(t);
  };
  return doc_to_json(doc, put).dump(2) + "\n";
}

WorkflowDoc deserialize(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("workflow document: ") + e.what());
  }
  try {
    return doc_from_json(j, ".");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("workflow document: ") + e.what());
  }
}

void save_workflow(const WorkflowDoc& doc, const std::filesystem::path& path,
                   const SaveOptions& options) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const auto stem = path.stem().string();
  auto put = [&](json& jw, const Table& t, std::size_t p, std::size_t w, std::string_view slot) {
    if (t.row_count() >= options.sidecar_rows && !t.empty()) {
      const auto name = stem + ".phase" + std::to_string(p) + ".wave" + std::to_string(w) + "." +
                        std::string(slot) + ".csv";
      csv::write_file(t, dir / name);
      jw[std::string(slot) + "_ref"] = name;
    } else {
      jw[std::string(slot)] = table_to_json(t);
    }
  };
  const auto text = doc_to_json(doc, put).dump(2) + "\n";
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + tmp.string() + "'");
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

WorkflowDoc load_workflow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open workflow '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "workflow '" + path.string() + "': " + e.what());
  }
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  try {
    return doc_from_json(j, base);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "workflow '" + path.string() + "': " + e.what());
  }
}

WorkflowLock::WorkflowLock(const std::filesystem::path& workflow) {
  auto lock_path = workflow;
  lock_path += ".lock";
  fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorKind::LockFailed, "cannot open lock file '" + lock_path.string() + "'");
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorKind::LockFailed, "workflow '" + workflow.string() + "' is locked by another writer");
  }
}

WorkflowLock::~WorkflowLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace stratdesign
