#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stratdesign/table.hpp"

namespace stratdesign {

inline constexpr std::string_view kSampleIndicatorColumn = "sample_indicator";

/// Desired number of draws for one stratum.
struct StratumQuota {
  std::string strata;
  std::int64_t n = 0;
};

/// Reads quotas from any design-shaped table (one row per stratum).
std::vector<StratumQuota> quotas_from_table(const Table& design, std::string_view strata_col,
                                            std::string_view n_col);

struct SampleRequest {
  std::string strata_col;
  std::string id_col;
  std::vector<StratumQuota> design;
  /// 0/1 column; rows holding 1 can not be drawn again.
  std::optional<std::string> already_sampled;
  std::uint64_t seed = 0;
};

/// Draw engine: std::mt19937_64, whose output sequence is fixed by the C++
/// standard, with a rejection-sampled bounded draw so results do not depend
/// on the standard library's distribution implementations.
class SamplerRng {
 public:
  explicit SamplerRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

/// Seed for one stratum's stream: splitmix64 of the request seed mixed with
/// the FNV-1a hash of the label, so each stratum's draw is independent of
/// which other strata the design lists.
std::uint64_t stratum_seed(std::uint64_t seed, std::string_view label);

/// Simple random sampling without replacement within each design stratum.
/// Returns `units` with a 0/1 `sample_indicator` column.
Table sample_strata(const Table& units, const SampleRequest& request);

/// Ids of rows whose sample_indicator is 1, in table order.
std::vector<std::string> extract_sampled_ids(const Table& units, std::string_view id_col);

}  // namespace stratdesign
