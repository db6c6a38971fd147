#pragma once

// Scripted three-wave validation study on synthetic maternal-weight data:
// phase 1 holds the error-prone estimate for every unit, phase 2 collects the
// true value in waves of 250.

#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "stratdesign/strata.hpp"
#include "stratdesign/workflow.hpp"

namespace study {

using namespace stratdesign;

struct Result {
  WorkflowDoc doc;
  /// units flagged 1 after each wave
  std::vector<std::int64_t> sampled;
  std::vector<std::int64_t> unsampled;
  std::vector<std::size_t> rows;
  std::vector<std::size_t> sample_lengths;
};

inline std::int64_t count_flag(const Table& t, const std::string& col, double value) {
  std::int64_t n = 0;
  for (const auto& v : numeric_column(t, col)) n += v && *v == value;
  return n;
}

/// Collected values for the sampled ids: id plus the true weight.
inline Table collect(const Table& truth, const std::vector<std::string>& ids) {
  const std::set<std::string> want(ids.begin(), ids.end());
  const auto all_ids = text_column(truth, "id");
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < all_ids.size(); ++r) {
    if (want.count(all_ids[r])) rows.push_back(r);
  }
  const auto picked = truth.select_rows(rows);
  return Table({picked.column("id"), picked.column("mat_weight_true")});
}

inline Result run(std::size_t rows = 10335, std::int64_t per_wave = 250) {
  const auto truth = fixtures::weight_study(rows);
  SplitSpec spec;
  spec.strata_col = "race";
  spec.split_var = "mat_weight_est";
  spec.type = SplitType::GlobalQuantile;
  spec.split_at = {0.25, 0.75};
  spec.trunc = Trunc{std::string("MWC_est")};
  auto phase1 = split_strata(truth, spec);
  phase1.remove_column("mat_weight_true");

  auto doc = new_multiwave(2, {1, 3});
  doc.metadata["title"] = "Maternal weight validation";
  doc = set_slot(doc, {1, std::nullopt}, Slot::Data, phase1);
  doc = set_slot(doc, {2, std::nullopt}, Slot::Metadata,
                 Metadata{{"strata", "new_strata"}, {"id", "id"}, {"sampled_ind", "sampled_phase2"},
                          {"design_strata", "strata"}, {"nsample", per_wave}});

  Result result;
  for (std::size_t w = 1; w <= 3; ++w) {
    if (w == 1) {
      doc = apply_multiwave(doc, 2, w, WorkflowFunction::OptimumAllocation, {{"y", "mat_weight_est"}});
      doc = apply_multiwave(doc, 2, w, WorkflowFunction::SampleStrata,
                            {{"n_allocated", "stratum_size"}, {"seed", 100 + w}});
    } else {
      doc = set_slot(doc, {2, w}, Slot::Metadata, Metadata{{"already_sampled", "sampled_phase2"}});
      doc = apply_multiwave(doc, 2, w, WorkflowFunction::AllocateWave, {{"y", "mat_weight_true"}});
      doc = apply_multiwave(doc, 2, w, WorkflowFunction::SampleStrata,
                            {{"n_allocated", "n_to_sample"}, {"seed", 100 + w}});
    }
    const auto& samples = doc.phases[1].waves[w - 1].samples;
    result.sample_lengths.push_back(samples.size());
    doc = set_slot(doc, {2, w}, Slot::SampledData, collect(truth, samples));
    doc = merge_samples(doc, 2, w);
    const auto& data = doc.phases[1].waves[w - 1].data;
    result.rows.push_back(data.row_count());
    result.sampled.push_back(count_flag(data, "sampled_phase2", 1));
    result.unsampled.push_back(count_flag(data, "sampled_phase2", 0));
  }
  result.doc = std::move(doc);
  return result;
}

}  // namespace study
