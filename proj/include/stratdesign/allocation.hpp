#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stratdesign/table.hpp"

namespace stratdesign {

/// Population count and design-variable standard deviation of one stratum.
struct StratumSummary {
  std::string label;
  std::int64_t npop = 0;
  double sd = 0.0;

  bool operator==(const StratumSummary&) const = default;
};

enum class AllocationMethod { Neyman, WrightI, WrightII };

std::string_view method_name(AllocationMethod method) noexcept;
/// Accepts "neyman", "wright1"/"wrighti", "wright2"/"wrightii" (case-insensitive).
AllocationMethod parse_method(std::string_view text);

struct AllocationProblem {
  std::vector<StratumSummary> summaries;
  std::int64_t nsample = 0;
  int min_per_stratum = 2;
};

struct DesignRow {
  std::string strata;
  std::int64_t npop = 0;
  double sd = 0.0;
  double n_sd = 0.0;
  double stratum_fraction = 0.0;
  std::optional<std::int64_t> stratum_size;

  bool operator==(const DesignRow&) const = default;
};

/// One row per stratum, in the order of the summaries it was built from.
struct DesignTable {
  std::vector<DesignRow> rows;

  bool has_sizes() const noexcept;
  /// Strata that received a size of zero (possible under Neyman only).
  std::vector<std::string> zero_size_strata() const;
  Table to_table() const;

  bool operator==(const DesignTable&) const = default;
};

struct WaveDesignRow {
  std::string strata;
  std::int64_t npop = 0;
  std::int64_t nsample_optimal = 0;
  std::int64_t nsample_actual = 0;
  std::int64_t nsample_prior = 0;
  std::int64_t n_to_sample = 0;
  std::optional<double> sd;

  bool operator==(const WaveDesignRow&) const = default;
};

struct WaveDesign {
  std::vector<WaveDesignRow> rows;
  bool detailed = false;

  Table to_table() const;

  bool operator==(const WaveDesign&) const = default;
};

struct VarianceReport {
  double variance = 0.0;
  /// sum of N_h^2 S_h^2 / n_h
  double sampling_term = 0.0;
  /// sum of N_h^2 S_h^2 / N_h, subtracted from the sampling term
  double finite_population_term = 0.0;
};

/// Per-stratum npop (all rows) and sample sd (n-1 denominator, non-missing
/// y only). Strata come out sorted bytewise by label.
std::vector<StratumSummary> summarize_strata(const Table& units, std::string_view strata_col,
                                             std::string_view y_col);

DesignTable neyman_allocation(std::span<const StratumSummary> summaries,
                              std::optional<std::int64_t> nsample = std::nullopt);

/// Wright's exact integer allocation: every stratum starts at the floor and
/// the remaining budget goes to the largest priority values
/// N_h S_h / sqrt(k (k + 1)), never exceeding N_h.
DesignTable wright_allocation(const AllocationProblem& problem);

/// Greedy priority-value allocation with an individual floor per stratum.
/// A floor of 0 makes the first unit of that stratum infinitely urgent.
/// Requires floors[h] <= npop[h] and sum(floors) <= nsample <= sum(npop).
std::vector<std::int64_t> priority_allocation(std::span<const StratumSummary> summaries,
                                              std::int64_t nsample,
                                              std::span<const std::int64_t> floors);

VarianceReport estimator_variance(std::span<const StratumSummary> summaries,
                                  std::span<const std::int64_t> allocation);

/// Allocates one wave given what each stratum already holds. Strata whose
/// prior count exceeds their optimum are frozen and the rest re-allocated
/// until no stratum is oversampled.
WaveDesign allocate_wave(std::span<const StratumSummary> summaries,
                         std::span<const std::int64_t> prior, std::int64_t nsample,
                         bool detailed = false);

/// Unit-level form: prior counts and sds come from rows whose
/// `already_sampled` indicator is 1.
WaveDesign allocate_wave(const Table& units, std::string_view strata_col, std::string_view y_col,
                         std::string_view already_sampled_col, std::int64_t nsample,
                         bool detailed = false);

struct OptimumAllocationArgs {
  std::string strata_col;
  /// unit-level input
  std::optional<std::string> y_col;
  /// summary-level input: one row per stratum
  std::optional<std::string> sd_col;
  std::optional<std::string> n_col;
  AllocationMethod method = AllocationMethod::WrightII;
  std::optional<std::int64_t> nsample;
  bool allow_small = false;
};

DesignTable optimum_allocation(const Table& data, const OptimumAllocationArgs& args);
DesignTable optimum_allocation(std::span<const StratumSummary> summaries, AllocationMethod method,
                               std::optional<std::int64_t> nsample, bool allow_small = false);

/// Reads a summary-level table (label, N_h, S_h columns) into summaries.
std::vector<StratumSummary> summaries_from_table(const Table& table, std::string_view strata_col,
                                                 std::string_view sd_col, std::string_view n_col);

}  // namespace stratdesign
