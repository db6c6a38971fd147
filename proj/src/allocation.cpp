#include "stratdesign/allocation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "stratdesign/error.hpp"

namespace stratdesign {

namespace {

constexpr double kTieTolerance = 1e-12;

void validate(std::span<const StratumSummary> summaries) {
  if (summaries.empty()) throw Error(ErrorKind::EmptyInput, "no strata supplied");
  std::set<std::string_view> labels;
  for (const auto& s : summaries) {
    if (s.npop < 1) {
      throw Error(ErrorKind::InvalidArgument, "stratum '" + s.label + "' has npop < 1");
    }
    if (!std::isfinite(s.sd) || s.sd < 0) {
      throw Error(ErrorKind::InvalidArgument, "stratum '" + s.label + "' has an invalid sd");
    }
    if (!labels.insert(s.label).second) {
      throw Error(ErrorKind::InvalidArgument, "stratum label '" + s.label + "' is repeated");
    }
  }
}

std::int64_t total_population(std::span<const StratumSummary> summaries) {
  std::int64_t total = 0;
  for (const auto& s : summaries) total += s.npop;
  return total;
}

bool nearly_equal(double a, double b) {
  if (a == b) return true;
  if (std::isinf(a) || std::isinf(b)) return false;
  return std::abs(a - b) <= kTieTolerance * std::max(std::abs(a), std::abs(b));
}

// True if stratum a should win over stratum b at priority values pa, pb.
bool outranks(double pa, double pb, const StratumSummary& a, const StratumSummary& b) {
  if (!nearly_equal(pa, pb)) return pa > pb;
  const double wa = static_cast<double>(a.npop) * a.sd;
  const double wb = static_cast<double>(b.npop) * b.sd;
  if (!nearly_equal(wa, wb)) return wa > wb;
  return a.label < b.label;
}

double priority(const StratumSummary& s, std::int64_t current) {
  if (current == 0) return std::numeric_limits<double>::infinity();
  const double k = static_cast<double>(current);
  return static_cast<double>(s.npop) * s.sd / std::sqrt(k * (k + 1.0));
}

std::vector<std::int64_t> floors_for(std::span<const StratumSummary> summaries, std::int64_t floor) {
  std::vector<std::int64_t> floors;
  floors.reserve(summaries.size());
  for (const auto& s : summaries) floors.push_back(std::min(floor, s.npop));
  return floors;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view method_name(AllocationMethod method) noexcept {
  switch (method) {
    case AllocationMethod::Neyman: return "Neyman";
    case AllocationMethod::WrightI: return "WrightI";
    case AllocationMethod::WrightII: return "WrightII";
  }
  return "WrightII";
}

AllocationMethod parse_method(std::string_view text) {
  const auto m = lowercase(text);
  if (m == "neyman") return AllocationMethod::Neyman;
  if (m == "wright1" || m == "wrighti") return AllocationMethod::WrightI;
  if (m == "wright2" || m == "wrightii") return AllocationMethod::WrightII;
  throw Error(ErrorKind::InvalidArgument,
              "unknown allocation method '" + std::string(text) + "' (neyman, wright1, wright2)");
}

bool DesignTable::has_sizes() const noexcept {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(),
                                      [](const DesignRow& r) { return r.stratum_size.has_value(); });
}

std::vector<std::string> DesignTable::zero_size_strata() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (r.stratum_size && *r.stratum_size == 0) out.push_back(r.strata);
  }
  return out;
}

Table DesignTable::to_table() const {
  Column strata{"strata", {}}, npop{"npop", {}}, sd{"sd", {}}, n_sd{"n_sd", {}},
      fraction{"stratum_fraction", {}}, size{"stratum_size", {}};
  for (const auto& r : rows) {
    strata.cells.emplace_back(r.strata);
    npop.cells.emplace_back(r.npop);
    sd.cells.emplace_back(r.sd);
    n_sd.cells.emplace_back(r.n_sd);
    fraction.cells.emplace_back(r.stratum_fraction);
    if (r.stratum_size) size.cells.emplace_back(*r.stratum_size);
  }
  std::vector<Column> cols{std::move(strata), std::move(npop), std::move(sd), std::move(n_sd),
                           std::move(fraction)};
  if (has_sizes()) cols.push_back(std::move(size));
  return Table(std::move(cols));
}

Table WaveDesign::to_table() const {
  Column strata{"strata", {}}, npop{"npop", {}}, opt{"nsample_optimal", {}},
      actual{"nsample_actual", {}}, prior{"nsample_prior", {}}, todo{"n_to_sample", {}},
      sd{"sd", {}};
  for (const auto& r : rows) {
    strata.cells.emplace_back(r.strata);
    npop.cells.emplace_back(r.npop);
    opt.cells.emplace_back(r.nsample_optimal);
    actual.cells.emplace_back(r.nsample_actual);
    prior.cells.emplace_back(r.nsample_prior);
    todo.cells.emplace_back(r.n_to_sample);
    sd.cells.push_back(r.sd ? Cell{*r.sd} : Cell{});
  }
  std::vector<Column> cols{std::move(strata), std::move(npop), std::move(opt),   std::move(actual),
                           std::move(prior),  std::move(todo)};
  if (detailed) cols.push_back(std::move(sd));
  return Table(std::move(cols));
}

std::vector<StratumSummary> summarize_strata(const Table& units, std::string_view strata_col,
                                             std::string_view y_col) {
  const auto labels = text_column(units, strata_col);
  const auto values = numeric_column(units, y_col);

  struct Acc {
    std::int64_t npop = 0;
    std::vector<double> ys;
  };
  std::map<std::string, Acc> groups;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    auto& g = groups[labels[r]];
    ++g.npop;
    if (values[r]) g.ys.push_back(*values[r]);
  }

  std::vector<StratumSummary> out;
  out.reserve(groups.size());
  for (const auto& [label, g] : groups) {
    if (g.ys.size() < 2) {
      throw Error(ErrorKind::InsufficientData,
                  "stratum '" + label + "' has " + std::to_string(g.ys.size()) +
                      " non-missing values of '" + std::string(y_col) + "', need at least 2");
    }
    const double n = static_cast<double>(g.ys.size());
    const double mean = std::accumulate(g.ys.begin(), g.ys.end(), 0.0) / n;
    double ss = 0.0;
    for (double y : g.ys) ss += (y - mean) * (y - mean);
    out.push_back({label, g.npop, std::sqrt(ss / (n - 1.0))});
  }
  return out;
}

DesignTable neyman_allocation(std::span<const StratumSummary> summaries,
                              std::optional<std::int64_t> nsample) {
  validate(summaries);
  double total_weight = 0.0;
  for (const auto& s : summaries) total_weight += static_cast<double>(s.npop) * s.sd;
  if (!(total_weight > 0.0)) {
    throw Error(ErrorKind::DegenerateVariance, "every stratum has sd = 0");
  }
  if (nsample) {
    if (*nsample < 0) throw Error(ErrorKind::InvalidArgument, "nsample must be non-negative");
    if (*nsample > total_population(summaries)) {
      throw Error(ErrorKind::BudgetExceedsPopulation,
                  "nsample " + std::to_string(*nsample) + " exceeds the population of " +
                      std::to_string(total_population(summaries)));
    }
  }

  DesignTable design;
  for (const auto& s : summaries) {
    const double weight = static_cast<double>(s.npop) * s.sd;
    design.rows.push_back({s.label, s.npop, s.sd, weight, weight / total_weight, std::nullopt});
  }
  if (!nsample) return design;

  // Largest remainder: floor each quota, then hand the leftover units to the
  // biggest fractional parts.
  const auto n = static_cast<double>(*nsample);
  std::vector<double> remainders;
  std::int64_t assigned = 0;
  for (auto& row : design.rows) {
    const double quota = n * row.stratum_fraction;
    const auto base = static_cast<std::int64_t>(std::floor(quota));
    row.stratum_size = base;
    assigned += base;
    remainders.push_back(quota - static_cast<double>(base));
  }
  std::vector<std::size_t> order(design.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return outranks(remainders[a], remainders[b], summaries[a], summaries[b]);
  });
  for (std::size_t i = 0; assigned < *nsample; ++i, ++assigned) {
    auto& size = design.rows[order[i % order.size()]].stratum_size;
    *size += 1;
  }
  return design;
}

std::vector<std::int64_t> priority_allocation(std::span<const StratumSummary> summaries,
                                              std::int64_t nsample,
                                              std::span<const std::int64_t> floors) {
  if (floors.size() != summaries.size()) {
    throw Error(ErrorKind::ShapeMismatch, "one floor per stratum required");
  }
  std::vector<std::int64_t> alloc(floors.begin(), floors.end());
  std::int64_t remaining = nsample - std::accumulate(alloc.begin(), alloc.end(), std::int64_t{0});
  if (remaining < 0) {
    throw Error(ErrorKind::BudgetBelowFloor, "nsample " + std::to_string(nsample) +
                                                 " is below the per-stratum floor total");
  }
  if (nsample > total_population(summaries)) {
    throw Error(ErrorKind::BudgetExceedsPopulation,
                "nsample " + std::to_string(nsample) + " exceeds the population of " +
                    std::to_string(total_population(summaries)));
  }

  const std::size_t h_count = summaries.size();
  for (; remaining > 0; --remaining) {
    std::size_t best = h_count;
    double best_priority = 0.0;
    for (std::size_t h = 0; h < h_count; ++h) {
      if (alloc[h] >= summaries[h].npop) continue;
      const double p = priority(summaries[h], alloc[h]);
      if (best == h_count || outranks(p, best_priority, summaries[h], summaries[best])) {
        best = h;
        best_priority = p;
      }
    }
    ++alloc[best];
  }
  return alloc;
}

DesignTable wright_allocation(const AllocationProblem& problem) {
  const auto& summaries = problem.summaries;
  validate(summaries);
  if (problem.min_per_stratum != 1 && problem.min_per_stratum != 2) {
    throw Error(ErrorKind::InvalidArgument, "min_per_stratum must be 1 or 2");
  }
  const auto h_count = static_cast<std::int64_t>(summaries.size());
  if (problem.nsample < problem.min_per_stratum * h_count) {
    throw Error(ErrorKind::BudgetBelowFloor,
                "nsample " + std::to_string(problem.nsample) + " is below " +
                    std::to_string(problem.min_per_stratum) + " x " + std::to_string(h_count) +
                    " strata");
  }
  for (const auto& s : summaries) {
    if (s.npop < problem.min_per_stratum) {
      throw Error(ErrorKind::StratumTooSmall,
                  "stratum '" + s.label + "' has npop " + std::to_string(s.npop) +
                      " below the floor of " + std::to_string(problem.min_per_stratum));
    }
  }
  const auto floors = floors_for(summaries, problem.min_per_stratum);
  const auto sizes = priority_allocation(summaries, problem.nsample, floors);

  DesignTable design;
  const auto n = static_cast<double>(problem.nsample);
  for (std::size_t h = 0; h < summaries.size(); ++h) {
    const auto& s = summaries[h];
    design.rows.push_back({s.label, s.npop, s.sd, static_cast<double>(s.npop) * s.sd,
                           static_cast<double>(sizes[h]) / n, sizes[h]});
  }
  return design;
}

VarianceReport estimator_variance(std::span<const StratumSummary> summaries,
                                  std::span<const std::int64_t> allocation) {
  if (allocation.size() != summaries.size()) {
    throw Error(ErrorKind::ShapeMismatch, "one allocation per stratum required");
  }
  VarianceReport report;
  for (std::size_t h = 0; h < summaries.size(); ++h) {
    const auto& s = summaries[h];
    if (allocation[h] <= 0) {
      throw Error(ErrorKind::ZeroAllocation, "stratum '" + s.label + "' has no allocated units");
    }
    if (allocation[h] > s.npop) {
      throw Error(ErrorKind::InvalidArgument,
                  "stratum '" + s.label + "' allocation exceeds its population");
    }
    const double w2 = static_cast<double>(s.npop) * static_cast<double>(s.npop) * s.sd * s.sd;
    report.sampling_term += w2 / static_cast<double>(allocation[h]);
    report.finite_population_term += w2 / static_cast<double>(s.npop);
  }
  report.variance = report.sampling_term - report.finite_population_term;
  return report;
}

namespace {

// Floor 2 where the budget allows it, falling back to 1 and then 0.
std::vector<std::int64_t> wave_floors(std::span<const StratumSummary> summaries,
                                      std::int64_t budget) {
  for (std::int64_t floor : {2, 1}) {
    auto floors = floors_for(summaries, floor);
    if (std::accumulate(floors.begin(), floors.end(), std::int64_t{0}) <= budget) return floors;
  }
  return std::vector<std::int64_t>(summaries.size(), 0);
}

}  // namespace

WaveDesign allocate_wave(std::span<const StratumSummary> summaries,
                         std::span<const std::int64_t> prior, std::int64_t nsample,
                         bool detailed) {
  validate(summaries);
  if (prior.size() != summaries.size()) {
    throw Error(ErrorKind::ShapeMismatch, "one prior count per stratum required");
  }
  if (nsample < 1) throw Error(ErrorKind::InvalidArgument, "wave nsample must be at least 1");
  std::int64_t prior_total = 0;
  for (std::size_t h = 0; h < summaries.size(); ++h) {
    if (prior[h] < 0 || prior[h] > summaries[h].npop) {
      throw Error(ErrorKind::InvalidArgument,
                  "stratum '" + summaries[h].label + "' prior count is outside [0, npop]");
    }
    prior_total += prior[h];
  }
  const std::int64_t total = prior_total + nsample;
  if (total > total_population(summaries)) {
    throw Error(ErrorKind::BudgetExceedsPopulation,
                "wave of " + std::to_string(nsample) + " exceeds the " +
                    std::to_string(total_population(summaries) - prior_total) +
                    " units not yet sampled");
  }

  const auto optimal = priority_allocation(summaries, total, wave_floors(summaries, total));
  auto actual = optimal;

  std::vector<bool> frozen(summaries.size(), false);
  for (;;) {
    bool any = false;
    for (std::size_t h = 0; h < summaries.size(); ++h) {
      if (!frozen[h] && prior[h] > actual[h]) {
        frozen[h] = true;
        actual[h] = prior[h];
        any = true;
      }
    }
    if (!any) break;

    std::vector<StratumSummary> active;
    std::vector<std::size_t> index;
    std::int64_t budget = total;
    for (std::size_t h = 0; h < summaries.size(); ++h) {
      if (frozen[h]) {
        budget -= prior[h];
      } else {
        active.push_back(summaries[h]);
        index.push_back(h);
      }
    }
    if (active.empty()) break;
    const auto sizes = priority_allocation(active, budget, wave_floors(active, budget));
    for (std::size_t i = 0; i < index.size(); ++i) actual[index[i]] = sizes[i];
  }

  WaveDesign design;
  design.detailed = detailed;
  for (std::size_t h = 0; h < summaries.size(); ++h) {
    WaveDesignRow row;
    row.strata = summaries[h].label;
    row.npop = summaries[h].npop;
    row.nsample_optimal = optimal[h];
    row.nsample_actual = actual[h];
    row.nsample_prior = prior[h];
    row.n_to_sample = actual[h] - prior[h];
    if (detailed) row.sd = summaries[h].sd;
    design.rows.push_back(std::move(row));
  }
  return design;
}

WaveDesign allocate_wave(const Table& units, std::string_view strata_col, std::string_view y_col,
                         std::string_view already_sampled_col, std::int64_t nsample,
                         bool detailed) {
  const auto labels = text_column(units, strata_col);
  const auto flags = numeric_column(units, already_sampled_col);
  const auto values = numeric_column(units, y_col);

  // Keep every row for npop, but blank y outside the already-sampled set.
  std::map<std::string, std::int64_t> prior_by_label;
  Column masked{std::string(y_col), {}};
  masked.cells.reserve(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const bool sampled = flags[r] && *flags[r] == 1.0;
    prior_by_label[labels[r]] += sampled ? 1 : 0;
    masked.cells.push_back(sampled && values[r] ? Cell{*values[r]} : Cell{});
  }
  Column strata{std::string(strata_col), {}};
  for (const auto& l : labels) strata.cells.emplace_back(l);
  // The masked table only needs the two columns summarize_strata reads.
  std::vector<Column> cols;
  cols.push_back(std::move(strata));
  if (y_col != strata_col) cols.push_back(std::move(masked));
  const auto summaries = summarize_strata(Table(std::move(cols)), strata_col, y_col);

  std::vector<std::int64_t> prior;
  prior.reserve(summaries.size());
  for (const auto& s : summaries) prior.push_back(prior_by_label[s.label]);
  return allocate_wave(summaries, prior, nsample, detailed);
}

std::vector<StratumSummary> summaries_from_table(const Table& table, std::string_view strata_col,
                                                 std::string_view sd_col, std::string_view n_col) {
  const auto labels = text_column(table, strata_col);
  const auto sds = numeric_column(table, sd_col);
  const auto ns = numeric_column(table, n_col);
  std::vector<StratumSummary> out;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (!sds[r] || !ns[r]) {
      throw Error(ErrorKind::MissingValues, "summary row for '" + labels[r] + "' has a missing value");
    }
    if (*ns[r] != std::floor(*ns[r])) {
      throw Error(ErrorKind::TypeMismatch, "population size for '" + labels[r] + "' is not a count");
    }
    out.push_back({labels[r], static_cast<std::int64_t>(*ns[r]), *sds[r]});
  }
  std::sort(out.begin(), out.end(),
            [](const StratumSummary& a, const StratumSummary& b) { return a.label < b.label; });
  return out;
}

DesignTable optimum_allocation(std::span<const StratumSummary> summaries, AllocationMethod method,
                               std::optional<std::int64_t> nsample, bool allow_small) {
  if (method == AllocationMethod::Neyman) return neyman_allocation(summaries, nsample);
  if (!nsample) {
    throw Error(ErrorKind::MissingArgument,
                std::string(method_name(method)) + " allocation requires nsample");
  }
  validate(summaries);
  const int floor = method == AllocationMethod::WrightI ? 1 : 2;
  bool small = false;
  for (const auto& s : summaries) {
    if (s.npop < floor) {
      if (!allow_small) {
        throw Error(ErrorKind::StratumTooSmall,
                    "stratum '" + s.label + "' has npop " + std::to_string(s.npop) +
                        " below the WrightII floor of 2; pass allow_small to take it fully");
      }
      small = true;
    }
  }
  if (!small) return wright_allocation({{summaries.begin(), summaries.end()}, *nsample, floor});

  // allow_small: tiny strata are censused and the floor is clamped to npop.
  const auto floors = floors_for(summaries, floor);
  const auto sizes = priority_allocation(summaries, *nsample, floors);
  DesignTable design;
  for (std::size_t h = 0; h < summaries.size(); ++h) {
    const auto& s = summaries[h];
    design.rows.push_back({s.label, s.npop, s.sd, static_cast<double>(s.npop) * s.sd,
                           static_cast<double>(sizes[h]) / static_cast<double>(*nsample), sizes[h]});
  }
  return design;
}

DesignTable optimum_allocation(const Table& data, const OptimumAllocationArgs& args) {
  const bool unit_level = args.y_col.has_value();
  const bool summary_level = args.sd_col.has_value() || args.n_col.has_value();
  if (unit_level == summary_level) {
    throw Error(ErrorKind::AmbiguousInput,
                "supply either y (unit-level data) or sd_col and n_col (stratum summaries)");
  }
  if (summary_level && !(args.sd_col && args.n_col)) {
    throw Error(ErrorKind::AmbiguousInput, "summary-level input needs both sd_col and n_col");
  }
  const auto summaries = unit_level
                             ? summarize_strata(data, args.strata_col, *args.y_col)
                             : summaries_from_table(data, args.strata_col, *args.sd_col, *args.n_col);
  return optimum_allocation(summaries, args.method, args.nsample, args.allow_small);
}

}  // namespace stratdesign
