#include "stratdesign/strata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "stratdesign/error.hpp"

namespace stratdesign {

namespace {

std::string normalize(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '-') out.push_back('_');
    else out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

void check_increasing(const std::vector<double>& cuts, bool probabilities) {
  if (cuts.empty()) throw Error(ErrorKind::InvalidSplit, "split_at is empty");
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (!std::isfinite(cuts[i])) throw Error(ErrorKind::InvalidSplit, "split_at has a non-finite value");
    if (probabilities && !(cuts[i] > 0.0 && cuts[i] < 1.0)) {
      throw Error(ErrorKind::InvalidSplit,
                  "quantile split_at values must lie strictly between 0 and 1");
    }
    if (i > 0 && !(cuts[i] > cuts[i - 1])) {
      throw Error(ErrorKind::InvalidSplit, "split_at values must be strictly increasing");
    }
  }
}

std::string truncated_name(const SplitSpec& spec) {
  if (!spec.trunc) return spec.split_var;
  if (auto s = std::get_if<std::string>(&*spec.trunc)) return *s;
  return spec.split_var.substr(0, std::get<std::size_t>(*spec.trunc));
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string interval_label(std::size_t piece, double lo, double hi) {
  return (piece == 0 ? "[" : "(") + format_bound(lo) + "," + format_bound(hi) + "]";
}

}  // namespace

SplitType parse_split_type(std::string_view text) {
  const auto t = normalize(text);
  if (t == "global_quantile") return SplitType::GlobalQuantile;
  if (t == "local_quantile") return SplitType::LocalQuantile;
  if (t == "value") return SplitType::Value;
  if (t == "categorical") return SplitType::Categorical;
  throw Error(ErrorKind::InvalidArgument,
              "unknown split type '" + std::string(text) +
                  "' (global_quantile, local_quantile, value, categorical)");
}

std::string_view split_type_name(SplitType type) noexcept {
  switch (type) {
    case SplitType::GlobalQuantile: return "global_quantile";
    case SplitType::LocalQuantile: return "local_quantile";
    case SplitType::Value: return "value";
    case SplitType::Categorical: return "categorical";
  }
  return "value";
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "p must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "quantile input is not finite");
  }
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, p);
}

std::string format_bound(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  std::string s(buf);
  if (auto dot = s.find('.'); dot != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

std::map<std::string, std::size_t> stratum_counts(const Table& units, std::string_view strata_col) {
  std::map<std::string, std::size_t> counts;
  for (const auto& c : units.column(strata_col).cells) ++counts[cell_text(c)];
  return counts;
}

Table split_strata(const Table& units, const SplitSpec& spec) {
  const auto labels = text_column(units, spec.strata_col);
  units.column_index(spec.split_var);

  const std::set<std::string> present(labels.begin(), labels.end());
  std::set<std::string> targets;
  if (spec.targets) {
    for (const auto& t : *spec.targets) {
      if (!present.count(t)) {
        throw Error(ErrorKind::UnknownStratum,
                    "stratum '" + t + "' not found in column '" + spec.strata_col + "'");
      }
      targets.insert(t);
    }
  } else {
    targets = present;
  }

  // rows of each target stratum, in table order
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (targets.count(labels[r])) members[labels[r]].push_back(r);
  }

  std::vector<std::string> out = labels;
  const auto var = truncated_name(spec);

  if (spec.type == SplitType::Categorical) {
    if (spec.categories.empty()) throw Error(ErrorKind::InvalidSplit, "no category groups given");
    std::unordered_map<std::string, std::size_t> group_of;
    for (std::size_t g = 0; g < spec.categories.size(); ++g) {
      if (spec.categories[g].empty()) throw Error(ErrorKind::InvalidSplit, "empty category group");
      for (const auto& cat : spec.categories[g]) {
        if (!group_of.emplace(cat, g).second) {
          throw Error(ErrorKind::InvalidSplit, "category '" + cat + "' is listed in two groups");
        }
      }
    }
    const auto cats = text_column(units, spec.split_var);
    for (const auto& [label, rows] : members) {
      for (auto r : rows) {
        if (is_missing(units.column(spec.split_var).cells[r])) {
          throw Error(ErrorKind::MissingValues, "row " + std::to_string(r + 1) + " of stratum '" +
                                                    label + "' has no '" + spec.split_var + "'");
        }
        auto it = group_of.find(cats[r]);
        if (it == group_of.end()) {
          throw Error(ErrorKind::InvalidSplit,
                      "category '" + cats[r] + "' of '" + spec.split_var + "' is not in any group");
        }
        out[r] = label + "." + var + "_" + join(spec.categories[it->second], ",");
      }
    }
  } else {
    const bool probabilities = spec.type != SplitType::Value;
    check_increasing(spec.split_at, probabilities);
    const auto values = numeric_column(units, spec.split_var);

    std::vector<std::size_t> missing;
    for (const auto& [label, rows] : members) {
      for (auto r : rows) {
        if (!values[r]) missing.push_back(r + 1);
      }
    }
    if (!missing.empty()) {
      std::vector<std::string> shown;
      for (std::size_t i = 0; i < missing.size() && i < 10; ++i) shown.push_back(std::to_string(missing[i]));
      throw Error(ErrorKind::MissingValues,
                  "'" + spec.split_var + "' is missing in target rows " + join(shown, ", ") +
                      (missing.size() > 10 ? ", ..." : ""));
    }

    auto collect = [&](const std::vector<std::size_t>& rows) {
      std::vector<double> v;
      v.reserve(rows.size());
      for (auto r : rows) v.push_back(*values[r]);
      std::sort(v.begin(), v.end());
      return v;
    };

    std::vector<double> global_cuts;
    if (spec.type == SplitType::GlobalQuantile) {
      std::vector<std::size_t> all;
      for (const auto& [label, rows] : members) all.insert(all.end(), rows.begin(), rows.end());
      const auto sorted = collect(all);
      for (double p : spec.split_at) global_cuts.push_back(quantile_sorted(sorted, p));
    } else if (spec.type == SplitType::Value) {
      global_cuts = spec.split_at;
    }

    for (const auto& [label, rows] : members) {
      const auto sorted = collect(rows);
      std::vector<double> cuts = global_cuts;
      if (spec.type == SplitType::LocalQuantile) {
        for (double p : spec.split_at) cuts.push_back(quantile_sorted(sorted, p));
      }
      const double lo = sorted.front();
      const double hi = sorted.back();

      std::vector<std::size_t> piece_of(rows.size());
      std::vector<std::size_t> count(cuts.size() + 1, 0);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double v = *values[rows[i]];
        const auto piece = static_cast<std::size_t>(
            std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
        piece_of[i] = piece;
        ++count[piece];
      }
      std::vector<std::string> names;
      for (std::size_t k = 0; k <= cuts.size(); ++k) {
        const double a = k == 0 ? lo : cuts[k - 1];
        const double b = k == cuts.size() ? hi : cuts[k];
        names.push_back(label + "." + var + "_" + interval_label(k, a, b));
        if (count[k] == 0) {
          throw Error(ErrorKind::EmptyStratumPiece,
                      "piece " + names.back() + " of stratum '" + label + "' would hold no units");
        }
      }
      for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = names[piece_of[i]];
    }
  }

  // A new label must not coincide with another stratum's label.
  std::map<std::string, std::string> origin;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    auto [it, inserted] = origin.emplace(out[r], labels[r]);
    if (!inserted && it->second != labels[r]) {
      throw Error(ErrorKind::LabelCollision, "label '" + out[r] + "' would name two strata");
    }
  }

  Column column{std::string(kNewStrataColumn), {}};
  column.cells.reserve(out.size());
  for (auto& s : out) column.cells.emplace_back(std::move(s));
  Table result = units;
  result.set_column(std::move(column));
  return result;
}

Table merge_strata(const Table& units, std::string_view strata_col,
                   std::span<const std::string> merge, std::string_view name) {
  const auto labels = text_column(units, strata_col);
  const std::set<std::string> present(labels.begin(), labels.end());
  const std::set<std::string> merged(merge.begin(), merge.end());
  if (merged.empty()) throw Error(ErrorKind::InvalidArgument, "nothing to merge");
  for (const auto& m : merged) {
    if (!present.count(m)) {
      throw Error(ErrorKind::UnknownStratum,
                  "stratum '" + m + "' not found in column '" + std::string(strata_col) + "'");
    }
  }
  const std::string target(name);
  if (present.count(target) && !merged.count(target)) {
    throw Error(ErrorKind::LabelCollision,
                "merged name '" + target + "' is already used by another stratum");
  }
  Column column{std::string(kNewStrataColumn), {}};
  column.cells.reserve(labels.size());
  for (const auto& l : labels) column.cells.emplace_back(merged.count(l) ? target : l);
  Table result = units;
  result.set_column(std::move(column));
  return result;
}

}  // namespace stratdesign
