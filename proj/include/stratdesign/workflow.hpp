#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stratdesign/table.hpp"

namespace stratdesign {

/// Free-form named entries: titles, descriptions, data dictionaries and
/// default arguments for workflow functions. Always a JSON object.
using Metadata = nlohmann::json;

struct Wave {
  Metadata metadata = Metadata::object();
  Table design;
  std::vector<std::string> samples;
  Table sampled_data;
  Table data;

  bool operator==(const Wave&) const = default;
};

struct Phase {
  Metadata metadata = Metadata::object();
  std::vector<Wave> waves;

  bool operator==(const Phase&) const = default;
};

/// A multi-phase, multi-wave survey: overall metadata plus phases of waves.
struct WorkflowDoc {
  Metadata metadata = Metadata::object();
  std::vector<Phase> phases;

  bool operator==(const WorkflowDoc&) const = default;
};

enum class Slot { Metadata, Design, Samples, SampledData, Data };

Slot parse_slot(std::string_view text);
std::string_view slot_name(Slot slot) noexcept;

/// 1-based phase and wave. No phase addresses the overall document; no wave
/// addresses the phase itself (or wave 1 for phase 1, which only has one).
struct Location {
  std::optional<std::size_t> phase;
  std::optional<std::size_t> wave;
};

using SlotValue = std::variant<Metadata, Table, std::vector<std::string>>;

/// `waves[k]` is the wave count of phase k+1; phase 1 must have one wave.
WorkflowDoc new_multiwave(std::size_t phases, const std::vector<std::size_t>& waves);

SlotValue get_slot(const WorkflowDoc& doc, const Location& where, Slot slot);
WorkflowDoc set_slot(WorkflowDoc doc, const Location& where, Slot slot, SlotValue value);

/// explicit value, else wave, phase and overall metadata in that order.
nlohmann::json resolve_arg(const WorkflowDoc& doc, const Location& where, std::string_view name,
                           const std::optional<nlohmann::json>& explicit_value = std::nullopt);
std::optional<nlohmann::json> find_arg(const WorkflowDoc& doc, const Location& where,
                                       std::string_view name,
                                       const std::optional<nlohmann::json>& explicit_value = std::nullopt);

/// The most recent non-empty data slot before (phase, wave).
const Table& previous_data(const WorkflowDoc& doc, std::size_t phase, std::size_t wave);

enum class WorkflowFunction { OptimumAllocation, AllocateWave, SampleStrata };

WorkflowFunction parse_function(std::string_view text);
std::string_view function_name(WorkflowFunction fun) noexcept;

using Args = std::map<std::string, nlohmann::json>;

/// Runs a core function on the previous wave's data with arguments resolved
/// through the metadata cascade. Allocations land in the design slot of
/// (phase, wave); sample_strata fills its samples slot.
WorkflowDoc apply_multiwave(WorkflowDoc doc, std::size_t phase, std::size_t wave,
                            WorkflowFunction fun, const Args& args);

/// Left-joins the wave's sampled data onto the previous accumulated data by
/// id and refreshes the phase's cumulative sampled indicator.
WorkflowDoc merge_samples(WorkflowDoc doc, std::size_t phase, std::size_t wave,
                          const std::optional<std::string>& id = std::nullopt,
                          const std::optional<std::string>& sampled_ind = std::nullopt);

enum class SummaryFormat { Text, Dot };

std::string workflow_summary(const WorkflowDoc& doc, SummaryFormat format = SummaryFormat::Text);

// Persistence

inline constexpr int kWorkflowVersion = 1;

struct SaveOptions {
  /// Tables with at least this many rows go to a side-car CSV.
  std::size_t sidecar_rows = 100000;
};

nlohmann::json table_to_json(const Table& table);
Table table_from_json(const nlohmann::json& j);

/// Everything inline; the canonical form used for equality checks.
std::string serialize(const WorkflowDoc& doc);
WorkflowDoc deserialize(std::string_view text);

/// Writes through a temporary file and renames it into place.
void save_workflow(const WorkflowDoc& doc, const std::filesystem::path& path,
                   const SaveOptions& options = {});
WorkflowDoc load_workflow(const std::filesystem::path& path);

/// Exclusive advisory lock on `<path>.lock`, held for the object's lifetime.
/// Fails immediately with LockFailed if another writer holds it.
class WorkflowLock {
 public:
  explicit WorkflowLock(const std::filesystem::path& workflow);
  ~WorkflowLock();
  WorkflowLock(const WorkflowLock&) = delete;
  WorkflowLock& operator=(const WorkflowLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace stratdesign
