// Python bindings. Tables cross the boundary as dicts of column lists, with
// None for missing cells.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

#include "stratdesign/allocation.hpp"
#include "stratdesign/cli.hpp"
#include "stratdesign/csv.hpp"
#include "stratdesign/error.hpp"
#include "stratdesign/influence.hpp"
#include "stratdesign/sampler.hpp"
#include "stratdesign/strata.hpp"

namespace py = pybind11;
using namespace stratdesign;

namespace {

Cell to_cell(const py::handle& v) {
  if (v.is_none()) return std::monostate{};
  if (py::isinstance<py::bool_>(v)) return static_cast<std::int64_t>(v.cast<bool>());
  if (py::isinstance<py::int_>(v)) return v.cast<std::int64_t>();
  if (py::isinstance<py::float_>(v)) {
    const double d = v.cast<double>();
    if (std::isnan(d)) return std::monostate{};
    return d;
  }
  if (py::isinstance<py::str>(v)) return v.cast<std::string>();
  throw Error(ErrorKind::TypeMismatch, "cells must be None, int, float or str");
}

Table to_table(const py::dict& d) {
  std::vector<Column> cols;
  for (const auto& [key, values] : d) {
    Column c{key.cast<std::string>(), {}};
    for (const auto& v : values) c.cells.push_back(to_cell(v));
    cols.push_back(std::move(c));
  }
  return Table(std::move(cols));
}

py::object from_cell(const Cell& cell) {
  if (is_missing(cell)) return py::none();
  if (auto i = std::get_if<std::int64_t>(&cell)) return py::int_(*i);
  if (auto r = std::get_if<double>(&cell)) return py::float_(*r);
  return py::str(std::get<std::string>(cell));
}

py::dict from_table(const Table& t) {
  py::dict d;
  for (const auto& c : t.columns()) {
    py::list values;
    for (const auto& cell : c.cells) values.append(from_cell(cell));
    d[py::str(c.name)] = values;
  }
  return d;
}

std::vector<StratumSummary> to_summaries(const py::iterable& items) {
  std::vector<StratumSummary> out;
  for (const auto& item : items) {
    if (py::isinstance<py::dict>(item)) {
      const auto d = item.cast<py::dict>();
      out.push_back({d["label"].cast<std::string>(), d["npop"].cast<std::int64_t>(), d["sd"].cast<double>()});
    } else {
      const auto t = item.cast<py::tuple>();
      out.push_back({t[0].cast<std::string>(), t[1].cast<std::int64_t>(), t[2].cast<double>()});
    }
  }
  return out;
}

PYBIND11_CONSTINIT py::gil_safe_call_once_and_store<py::object> error_type;

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stratified survey design core";

  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "StratDesignError", PyExc_ValueError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const auto& type = error_type.get_stored();
      py::object inst = type(e.what());
      inst.attr("kind") = py::str(std::string(error_name(e.kind())));
      inst.attr("detail") = py::str(e.detail());
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  m.def("parse_csv", [](const std::string& text) { return from_table(csv::parse(text)); }, py::arg("text"));
  m.def("format_csv", [](const py::dict& t) { return csv::format(to_table(t)); }, py::arg("table"));
  m.def("read_csv", [](const std::string& path) { return from_table(csv::read_file(path)); }, py::arg("path"));

  m.def(
      "summarize_strata",
      [](const py::dict& t, const std::string& strata, const std::string& y) {
        py::list out;
        for (const auto& s : summarize_strata(to_table(t), strata, y)) {
          out.append(py::dict(py::arg("label") = s.label, py::arg("npop") = s.npop, py::arg("sd") = s.sd));
        }
        return out;
      },
      py::arg("table"), py::arg("strata"), py::arg("y"));

  m.def(
      "optimum_allocation",
      [](const py::dict& t, const std::string& strata, std::optional<std::string> y, std::optional<std::string> sd,
         std::optional<std::string> npop, const std::string& method, std::optional<std::int64_t> nsample,
         bool allow_small) {
        OptimumAllocationArgs a;
        a.strata_col = strata;
        a.y_col = std::move(y);
        a.sd_col = std::move(sd);
        a.n_col = std::move(npop);
        a.method = parse_method(method);
        a.nsample = nsample;
        a.allow_small = allow_small;
        return from_table(optimum_allocation(to_table(t), a).to_table());
      },
      py::arg("table"), py::arg("strata"), py::arg("y") = py::none(), py::arg("sd") = py::none(),
      py::arg("npop") = py::none(), py::arg("method") = "wright2", py::arg("nsample") = py::none(),
      py::arg("allow_small") = false);

  m.def(
      "wright_allocation",
      [](const py::iterable& summaries, std::int64_t nsample, int min_per_stratum) {
        return from_table(wright_allocation({to_summaries(summaries), nsample, min_per_stratum}).to_table());
      },
      py::arg("summaries"), py::arg("nsample"), py::arg("min_per_stratum") = 2);

  m.def(
      "estimator_variance",
      [](const py::iterable& summaries, const std::vector<std::int64_t>& allocation) {
        return estimator_variance(to_summaries(summaries), allocation).variance;
      },
      py::arg("summaries"), py::arg("allocation"));

  m.def(
      "allocate_wave",
      [](const py::dict& t, const std::string& strata, const std::string& y, const std::string& already_sampled,
         std::int64_t nsample, bool detailed) {
        return from_table(allocate_wave(to_table(t), strata, y, already_sampled, nsample, detailed).to_table());
      },
      py::arg("table"), py::arg("strata"), py::arg("y"), py::arg("already_sampled"), py::arg("nsample"),
      py::arg("detailed") = false);

  m.def(
      "split_strata",
      [](const py::dict& t, const std::string& strata, const std::string& split_var,
         const std::vector<double>& split_at, const std::string& type,
         std::optional<std::vector<std::string>> targets, const std::vector<std::vector<std::string>>& categories,
         const py::object& trunc) {
        SplitSpec spec;
        spec.strata_col = strata;
        spec.targets = std::move(targets);
        spec.split_var = split_var;
        spec.type = parse_split_type(type);
        spec.split_at = split_at;
        spec.categories = categories;
        if (py::isinstance<py::str>(trunc)) spec.trunc = Trunc{trunc.cast<std::string>()};
        else if (py::isinstance<py::int_>(trunc)) spec.trunc = Trunc{trunc.cast<std::size_t>()};
        return from_table(split_strata(to_table(t), spec));
      },
      py::arg("table"), py::arg("strata"), py::arg("split_var"), py::arg("split_at") = std::vector<double>{},
      py::arg("type") = "local_quantile", py::arg("targets") = py::none(),
      py::arg("categories") = std::vector<std::vector<std::string>>{}, py::arg("trunc") = py::none());

  m.def(
      "merge_strata",
      [](const py::dict& t, const std::string& strata, const std::vector<std::string>& labels,
         const std::string& name) { return from_table(merge_strata(to_table(t), strata, labels, name)); },
      py::arg("table"), py::arg("strata"), py::arg("labels"), py::arg("name"));

  m.def(
      "stratum_counts",
      [](const py::dict& t, const std::string& strata) { return stratum_counts(to_table(t), strata); },
      py::arg("table"), py::arg("strata"));

  m.def(
      "sample_strata",
      [](const py::dict& t, const std::string& strata, const std::string& id,
         const std::map<std::string, std::int64_t>& design, std::uint64_t seed,
         std::optional<std::string> already_sampled) {
        SampleRequest r;
        r.strata_col = strata;
        r.id_col = id;
        for (const auto& [label, n] : design) r.design.push_back({label, n});
        r.already_sampled = std::move(already_sampled);
        r.seed = seed;
        return from_table(sample_strata(to_table(t), r));
      },
      py::arg("table"), py::arg("strata"), py::arg("id"), py::arg("design"), py::arg("seed"),
      py::arg("already_sampled") = py::none());

  m.def(
      "extract_sampled_ids",
      [](const py::dict& t, const std::string& id) { return extract_sampled_ids(to_table(t), id); },
      py::arg("table"), py::arg("id"));

  m.def(
      "add_influence_column",
      [](const py::dict& t, const std::string& outcome, const std::vector<std::string>& covariates,
         const std::string& coef, const std::string& column, bool intercept) {
        return from_table(add_influence_column(to_table(t), outcome, covariates, coef, column, intercept));
      },
      py::arg("table"), py::arg("outcome"), py::arg("covariates"), py::arg("coef"),
      py::arg("column") = "influence", py::arg("intercept") = true);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one stratdesign command line; returns (exit code, stdout, stderr).");
}
