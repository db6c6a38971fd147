#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stratdesign/table.hpp"

namespace stratdesign {

inline constexpr std::string_view kNewStrataColumn = "new_strata";

enum class SplitType { GlobalQuantile, LocalQuantile, Value, Categorical };

/// Accepts "global_quantile", "global quantile", "local_quantile", "value",
/// "categorical".
SplitType parse_split_type(std::string_view text);
std::string_view split_type_name(SplitType type) noexcept;

/// Label shortening: a string replaces the split variable's name, a count
/// keeps that many leading characters of it.
using Trunc = std::variant<std::string, std::size_t>;

struct SplitSpec {
  std::string strata_col;
  /// Strata to split; nullopt splits every stratum.
  std::optional<std::vector<std::string>> targets;
  std::string split_var;
  SplitType type = SplitType::LocalQuantile;
  /// Probabilities in (0, 1) for quantile splits, cut values for value splits.
  std::vector<double> split_at;
  /// Category groups for categorical splits; each group becomes one stratum.
  std::vector<std::vector<std::string>> categories;
  std::optional<Trunc> trunc;
};

/// Type-7 sample quantile (linear interpolation between order statistics).
double quantile(std::span<const double> values, double p);

/// Bound as shown in stratum labels: rounded to 2 decimals, trailing zeros
/// dropped ("3", "3.4", "15.06").
std::string format_bound(double value);

/// Returns `units` with a `new_strata` column (added or overwritten).
/// Target strata are cut into [min, c1], (c1, c2], ..., (ck, max] pieces
/// labelled `<old>.<var>_<interval>`; other strata keep their label.
Table split_strata(const Table& units, const SplitSpec& spec);

/// Returns `units` with a `new_strata` column where every stratum listed in
/// `merge` is renamed to `name`.
Table merge_strata(const Table& units, std::string_view strata_col,
                   std::span<const std::string> merge, std::string_view name);

/// Row count per stratum label, ordered by label.
std::map<std::string, std::size_t> stratum_counts(const Table& units, std::string_view strata_col);

}  // namespace stratdesign
