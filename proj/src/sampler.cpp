#include "stratdesign/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "stratdesign/csv.hpp"
#include "stratdesign/error.hpp"

namespace stratdesign {

std::uint64_t SamplerRng::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

std::uint64_t stratum_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : label) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  std::uint64_t z = seed ^ hash;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<StratumQuota> quotas_from_table(const Table& design, std::string_view strata_col,
                                            std::string_view n_col) {
  const auto labels = text_column(design, strata_col);
  const auto ns = numeric_column(design, n_col);
  std::vector<StratumQuota> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (!ns[r]) throw Error(ErrorKind::MissingValues, "design row '" + labels[r] + "' has no allocation");
    if (*ns[r] < 0 || *ns[r] != std::floor(*ns[r])) {
      throw Error(ErrorKind::InvalidArgument,
                  "design row '" + labels[r] + "' allocation is not a non-negative count");
    }
    if (!seen.insert(labels[r]).second) {
      throw Error(ErrorKind::InvalidArgument, "design lists stratum '" + labels[r] + "' twice");
    }
    out.push_back({labels[r], static_cast<std::int64_t>(*ns[r])});
  }
  return out;
}

Table sample_strata(const Table& units, const SampleRequest& request) {
  csv::check_unique_ids(units, request.id_col);
  const auto labels = text_column(units, request.strata_col);
  const auto ids = text_column(units, request.id_col);
  std::vector<std::optional<double>> excluded;
  if (request.already_sampled) excluded = numeric_column(units, *request.already_sampled);

  std::map<std::string, std::vector<std::size_t>> eligible;
  std::set<std::string> present;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    present.insert(labels[r]);
    const bool taken = !excluded.empty() && excluded[r] && *excluded[r] == 1.0;
    if (!taken) eligible[labels[r]].push_back(r);
  }

  std::vector<std::int64_t> indicator(units.row_count(), 0);
  std::set<std::string> listed;
  for (const auto& quota : request.design) {
    if (!listed.insert(quota.strata).second) {
      throw Error(ErrorKind::InvalidArgument, "design lists stratum '" + quota.strata + "' twice");
    }
    if (!present.count(quota.strata)) {
      throw Error(ErrorKind::UnknownStratum, "design stratum '" + quota.strata +
                                                 "' does not occur in column '" +
                                                 request.strata_col + "'");
    }
    if (quota.n < 0) {
      throw Error(ErrorKind::InvalidArgument, "negative allocation for '" + quota.strata + "'");
    }
    auto pool = eligible[quota.strata];
    const auto need = static_cast<std::size_t>(quota.n);
    if (need > pool.size()) {
      throw Error(ErrorKind::InsufficientUnits,
                  "stratum '" + quota.strata + "' needs " + std::to_string(need) + " units but only " +
                      std::to_string(pool.size()) + " are available");
    }
    // Canonical order first so the draw ignores input row order.
    std::sort(pool.begin(), pool.end(),
              [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    SamplerRng rng(stratum_seed(request.seed, quota.strata));
    for (std::size_t i = 0; i < need; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      indicator[pool[i]] = 1;
    }
  }

  Column column{std::string(kSampleIndicatorColumn), {}};
  column.cells.reserve(indicator.size());
  for (auto v : indicator) column.cells.emplace_back(v);
  Table result = units;
  result.set_column(std::move(column));
  return result;
}

std::vector<std::string> extract_sampled_ids(const Table& units, std::string_view id_col) {
  const auto flags = numeric_column(units, kSampleIndicatorColumn);
  const auto ids = text_column(units, id_col);
  std::vector<std::string> out;
  for (std::size_t r = 0; r < flags.size(); ++r) {
    if (flags[r] && *flags[r] == 1.0) out.push_back(ids[r]);
  }
  return out;
}

}  // namespace stratdesign
