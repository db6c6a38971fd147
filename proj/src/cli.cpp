#include "stratdesign/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stratdesign/allocation.hpp"
#include "stratdesign/csv.hpp"
#include "stratdesign/error.hpp"
#include "stratdesign/influence.hpp"
#include "stratdesign/sampler.hpp"
#include "stratdesign/service.hpp"
#include "stratdesign/strata.hpp"
#include "stratdesign/workflow.hpp"

namespace stratdesign::cli {

using nlohmann::json;

namespace {

constexpr const char* kSeedEnv = "STRATDESIGN_SEED";

int exit_code_for(ErrorKind kind) {
  switch (error_category(kind)) {
    case ErrorCategory::Usage: return kUsage;
    case ErrorCategory::Infeasible: return kInfeasible;
    case ErrorCategory::Data: return kDataError;
  }
  return kDataError;
}

void emit_table(const Table& table, const std::optional<std::string>& path, std::ostream& out) {
  if (path) csv::write_file(table, *path);
  else out << csv::format(table);
}

void emit_text(const std::string& text, const std::optional<std::string>& path, std::ostream& out) {
  if (!path) {
    out << text;
    return;
  }
  std::ofstream file(*path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::IoError, "cannot write '" + *path + "'");
  file << text;
}

// Rounds the real-valued reporting columns to 2 decimals for human output.
Table display_precision(Table table) {
  for (const auto* name : {"sd", "n_sd", "stratum_fraction"}) {
    if (!table.has_column(name)) continue;
    for (auto& cell : table.column(name).cells) {
      if (auto d = std::get_if<double>(&cell)) *d = std::round(*d * 100.0) / 100.0;
    }
  }
  return table;
}

bool use_full_precision(const std::string& precision, const std::optional<std::string>& out_path) {
  if (precision == "full") return true;
  if (precision == "display") return false;
  return out_path.has_value();
}

std::uint64_t resolve_seed(const std::optional<std::string>& flag) {
  std::string text;
  if (flag) {
    text = *flag;
  } else if (const char* env = std::getenv(kSeedEnv); env && *env) {
    text = env;
  } else {
    throw Error(ErrorKind::MissingArgument,
                std::string("a seed is required: pass --seed or set ") + kSeedEnv);
  }
  std::size_t used = 0;
  std::uint64_t seed = 0;
  try {
    seed = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || text.front() == '-') {
    throw Error(ErrorKind::InvalidArgument, "seed '" + text + "' is not an unsigned 64-bit integer");
  }
  return seed;
}

json json_or_string(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

std::pair<std::string, std::string> split_assignment(const std::string& kv, std::string_view flag) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::InvalidArgument,
                std::string(flag) + " expects KEY=VALUE, got '" + kv + "'");
  }
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

Location location_of(const std::optional<std::size_t>& phase, const std::optional<std::size_t>& wave) {
  return Location{phase, wave};
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loads, transforms and saves a workflow while holding its writer lock.
template <typename F>
void update_workflow(const std::string& path, F&& change) {
  WorkflowLock lock(path);
  auto doc = load_workflow(path);
  save_workflow(change(std::move(doc)), path);
}

struct Command {
  CLI::App* app = nullptr;
  std::function<void()> run;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stratified survey design: strata, optimum allocation, sampling and multi-wave workflows",
               "stratdesign"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  std::vector<Command> commands;

  // Shared option storage; only the chosen subcommand's fields are filled.
  std::string input, strata, y, split_var, type = "local_quantile", name, method = "wright2";
  std::string precision = "auto", id, design_path, n_col = "stratum_size", design_strata = "strata";
  std::string outcome, coefficient, column = "influence", workflow_path, slot_text, function;
  std::string format = "text", host = "127.0.0.1", cors_origin = "*", script_path, json_text, trunc;
  std::optional<std::string> out_path, already_sampled, seed_flag, sd_col, n_col_summary, ids_out;
  std::optional<std::string> title, id_opt, sampled_ind;
  std::optional<std::int64_t> nsample;
  std::optional<std::size_t> trunc_count, phase, wave;
  std::vector<std::string> targets, groups, merge_labels, covariates, kvs, ids, vars;
  std::vector<double> split_at;
  std::vector<std::size_t> waves;
  std::size_t phases = 0, max_body = 64u << 20;
  int port = 8080;
  bool allow_small = false, detailed = false, no_intercept = false, force = false;

  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--input,-i", input, "Unit-level CSV file")->required();
  };
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out,-o", out_path, "Output file (default standard output)");
  };

  // split
  {
    auto* sub = app.add_subcommand("split", "Split strata into quantile, value or category pieces");
    add_input(sub);
    add_out(sub);
    sub->add_option("--strata", strata, "Stratum column")->required();
    sub->add_option("--target", targets, "Stratum to split (repeatable; default all)")->allow_extra_args(false);
    sub->add_option("--split-var", split_var, "Variable to split on")->required();
    sub->add_option("--type", type, "global_quantile, local_quantile, value or categorical")
        ->capture_default_str();
    sub->add_option("--split-at", split_at, "Probabilities or cut values")->delimiter(',');
    sub->add_option("--group", groups, "Comma-separated categories forming one piece (repeatable)")
        ->allow_extra_args(false);
    auto* t = sub->add_option("--trunc", trunc, "Replacement for the variable name in labels");
    sub->add_option("--trunc-count", trunc_count, "Keep this many leading characters of the variable name")
        ->excludes(t);
    commands.push_back({sub, [&] {
                          SplitSpec spec;
                          spec.strata_col = strata;
                          if (!targets.empty()) spec.targets = targets;
                          spec.split_var = split_var;
                          spec.type = parse_split_type(type);
                          spec.split_at = split_at;
                          for (const auto& g : groups) spec.categories.push_back(split_commas(g));
                          if (!trunc.empty()) spec.trunc = Trunc{trunc};
                          if (trunc_count) spec.trunc = Trunc{*trunc_count};
                          emit_table(split_strata(csv::read_file(input), spec), out_path, out);
                        }});
  }

  // merge
  {
    auto* sub = app.add_subcommand("merge", "Merge strata under one label");
    add_input(sub);
    add_out(sub);
    sub->add_option("--strata", strata, "Stratum column")->required();
    sub->add_option("--merge", merge_labels, "Stratum to merge (repeatable)")
        ->required()
        ->allow_extra_args(false);
    sub->add_option("--name", name, "Label of the merged stratum")->required();
    commands.push_back({sub, [&] {
                          emit_table(merge_strata(csv::read_file(input), strata, merge_labels, name),
                                     out_path, out);
                        }});
  }

  // allocate
  {
    auto* sub = app.add_subcommand("allocate", "Optimum allocation from unit data or stratum summaries");
    add_input(sub);
    add_out(sub);
    sub->add_option("--strata", strata, "Stratum column")->required();
    auto* yo = sub->add_option("--y", y, "Design variable (unit-level input)");
    auto* so = sub->add_option("--sd-col", sd_col, "Standard deviation column (summary input)");
    auto* no = sub->add_option("--n-col", n_col_summary, "Population count column (summary input)");
    so->excludes(yo);
    no->excludes(yo);
    sub->add_option("--method", method, "neyman, wright1 or wright2")->capture_default_str();
    sub->add_option("--nsample", nsample, "Total sample size");
    sub->add_flag("--allow-small", allow_small, "Clamp the floor for strata smaller than it");
    sub->add_option("--precision", precision, "display (2 decimals) or full; default full with --out")
        ->check(CLI::IsMember({"auto", "display", "full"}));
    commands.push_back({sub, [&] {
                          OptimumAllocationArgs a;
                          a.strata_col = strata;
                          if (!y.empty()) a.y_col = y;
                          a.sd_col = sd_col;
                          a.n_col = n_col_summary;
                          a.method = parse_method(method);
                          a.nsample = nsample;
                          a.allow_small = allow_small;
                          const auto design = optimum_allocation(csv::read_file(input), a);
                          for (const auto& s : design.zero_size_strata()) {
                            err << "warning: stratum '" << s << "' was allocated 0 units\n";
                          }
                          auto table = design.to_table();
                          if (!use_full_precision(precision, out_path)) table = display_precision(table);
                          emit_table(table, out_path, out);
                        }});
  }

  // wave-allocate
  {
    auto* sub = app.add_subcommand("wave-allocate", "Allocate one wave given already-sampled units");
    add_input(sub);
    add_out(sub);
    sub->add_option("--strata", strata, "Stratum column")->required();
    sub->add_option("--y", y, "Design variable, observed on already-sampled units")->required();
    sub->add_option("--already-sampled", already_sampled, "0/1 column of units sampled so far")->required();
    sub->add_option("--nsample", nsample, "Sample size of this wave")->required();
    sub->add_flag("--detailed", detailed, "Include the sd column");
    sub->add_option("--precision", precision, "display (2 decimals) or full; default full with --out")
        ->check(CLI::IsMember({"auto", "display", "full"}));
    commands.push_back({sub, [&] {
                          auto table = allocate_wave(csv::read_file(input), strata, y, *already_sampled,
                                                     *nsample, detailed)
                                           .to_table();
                          if (!use_full_precision(precision, out_path)) table = display_precision(table);
                          emit_table(table, out_path, out);
                        }});
  }

  // sample
  {
    auto* sub = app.add_subcommand("sample", "Simple random sampling within strata");
    add_input(sub);
    add_out(sub);
    sub->add_option("--strata", strata, "Stratum column of the units")->required();
    sub->add_option("--id", id, "Unit id column")->required();
    sub->add_option("--design", design_path, "Design CSV")->required();
    sub->add_option("--design-strata", design_strata, "Stratum column of the design")->capture_default_str();
    sub->add_option("--n-col", n_col, "Allocation column of the design")->capture_default_str();
    sub->add_option("--already-sampled", already_sampled, "0/1 column of units that can not be drawn");
    sub->add_option("--seed", seed_flag, std::string("Unsigned 64-bit seed (default $") + kSeedEnv + ")");
    sub->add_option("--ids-out", ids_out, "Also write the sampled ids, one per line");
    commands.push_back({sub, [&] {
                          SampleRequest request;
                          request.strata_col = strata;
                          request.id_col = id;
                          request.design = quotas_from_table(csv::read_file(design_path), design_strata, n_col);
                          request.already_sampled = already_sampled;
                          request.seed = resolve_seed(seed_flag);
                          const auto sampled = sample_strata(csv::read_file(input), request);
                          if (ids_out) {
                            std::string text;
                            for (const auto& s : extract_sampled_ids(sampled, id)) text += s + "\n";
                            emit_text(text, ids_out, out);
                          }
                          emit_table(sampled, out_path, out);
                        }});
  }

  // influence
  {
    auto* sub = app.add_subcommand("influence", "Append logistic-regression influence functions");
    add_input(sub);
    add_out(sub);
    sub->add_option("--outcome", outcome, "0/1 outcome column")->required();
    sub->add_option("--covariate", covariates, "Covariate columns")->required()->delimiter(',');
    sub->add_option("--coef", coefficient, "Coefficient whose influence is kept, e.g. x or (Intercept)")
        ->required();
    sub->add_option("--column", column, "Name of the new column")->capture_default_str();
    sub->add_flag("--no-intercept", no_intercept, "Do not prepend an intercept");
    commands.push_back({sub, [&] {
                          emit_table(add_influence_column(csv::read_file(input), outcome, covariates,
                                                          coefficient, column, !no_intercept),
                                     out_path, out);
                        }});
  }

  // workflow
  auto* wf = app.add_subcommand("workflow", "Multi-phase, multi-wave workflow documents");
  wf->require_subcommand(1);
  auto add_workflow = [&](CLI::App* sub) {
    sub->add_option("--workflow,-w", workflow_path, "Workflow file")->required();
  };
  auto add_location = [&](CLI::App* sub, bool required) {
    auto* p = sub->add_option("--phase", phase, "Phase number (omit for the overall document)");
    auto* w = sub->add_option("--wave", wave, "Wave number");
    if (required) {
      p->required();
      w->required();
    }
  };
  {
    auto* sub = wf->add_subcommand("init", "Create an empty workflow");
    add_workflow(sub);
    sub->add_option("--phases", phases, "Number of phases")->required();
    sub->add_option("--waves", waves, "Waves per phase, comma separated")->required()->delimiter(',');
    sub->add_option("--title", title, "Survey title for the overall metadata");
    sub->add_flag("--force", force, "Overwrite an existing file");
    commands.push_back({sub, [&] {
                          if (!force && std::filesystem::exists(workflow_path)) {
                            throw Error(ErrorKind::IoError,
                                        "'" + workflow_path + "' exists; pass --force to overwrite");
                          }
                          auto doc = new_multiwave(phases, waves);
                          if (title) doc.metadata["title"] = *title;
                          WorkflowLock lock(workflow_path);
                          save_workflow(doc, workflow_path);
                        }});
  }
  {
    auto* sub = wf->add_subcommand("set", "Fill one slot");
    add_workflow(sub);
    add_location(sub, false);
    sub->add_option("--slot", slot_text, "metadata, design, samples, sampled_data or data")->required();
    auto* in = sub->add_option("--input,-i", input, "CSV for table slots, or ids for samples (see --id)");
    auto* io = sub->add_option("--ids", ids, "Sample ids, comma separated")->delimiter(',');
    auto* jo = sub->add_option("--json", json_text, "Metadata object replacing the slot");
    auto* so = sub->add_option("--set", kvs, "Metadata KEY=VALUE merged into the slot (repeatable)")
                   ->allow_extra_args(false);
    sub->add_option("--id", id_opt, "Id column of --input when filling samples");
    in->excludes(io)->excludes(jo)->excludes(so);
    io->excludes(jo)->excludes(so);
    jo->excludes(so);
    commands.push_back({sub, [&] {
                          const auto slot = parse_slot(slot_text);
                          const auto where = location_of(phase, wave);
                          update_workflow(workflow_path, [&](WorkflowDoc doc) {
                            SlotValue value;
                            if (!kvs.empty()) {
                              auto meta = std::get<Metadata>(get_slot(doc, where, Slot::Metadata));
                              if (slot != Slot::Metadata) {
                                throw Error(ErrorKind::SlotTypeMismatch, "--set only fills metadata");
                              }
                              for (const auto& kv : kvs) {
                                auto [k, v] = split_assignment(kv, "--set");
                                meta[k] = json_or_string(v);
                              }
                              value = meta;
                            } else if (!json_text.empty()) {
                              try {
                                value = json::parse(json_text);
                              } catch (const json::exception& e) {
                                throw Error(ErrorKind::ParseError, std::string("--json: ") + e.what());
                              }
                            } else if (!ids.empty()) {
                              value = ids;
                            } else if (!input.empty()) {
                              auto table = csv::read_file(input);
                              if (slot == Slot::Samples) {
                                if (!id_opt && table.column_count() != 1) {
                                  throw Error(ErrorKind::MissingArgument,
                                              "--id names the id column of a multi-column samples file");
                                }
                                value = text_column(table, id_opt ? *id_opt : table.column_names().front());
                              } else {
                                value = std::move(table);
                              }
                            } else {
                              throw Error(ErrorKind::MissingArgument,
                                          "give one of --input, --ids, --json or --set");
                            }
                            return set_slot(std::move(doc), where, slot, std::move(value));
                          });
                        }});
  }
  {
    auto* sub = wf->add_subcommand("get", "Print one slot");
    add_workflow(sub);
    add_location(sub, false);
    add_out(sub);
    sub->add_option("--slot", slot_text, "metadata, design, samples, sampled_data or data")->required();
    commands.push_back({sub, [&] {
                          const auto doc = load_workflow(workflow_path);
                          const auto value = get_slot(doc, location_of(phase, wave), parse_slot(slot_text));
                          if (auto m = std::get_if<Metadata>(&value)) {
                            emit_text(m->dump(2) + "\n", out_path, out);
                          } else if (auto t = std::get_if<Table>(&value)) {
                            emit_table(*t, out_path, out);
                          } else {
                            std::string text;
                            for (const auto& s : std::get<std::vector<std::string>>(value)) text += s + "\n";
                            emit_text(text, out_path, out);
                          }
                        }});
  }
  {
    auto* sub = wf->add_subcommand("apply", "Run an allocation or sampling step into a wave");
    add_workflow(sub);
    add_location(sub, true);
    sub->add_option("--function", function, "optimum_allocation, allocate_wave or sample_strata")->required();
    sub->add_option("--arg", kvs, "Argument KEY=VALUE (repeatable)")->allow_extra_args(false);
    sub->add_option("--strata", strata, "strata argument");
    sub->add_option("--y", y, "y argument");
    sub->add_option("--nsample", nsample, "nsample argument");
    sub->add_option("--method", method, "method argument");
    sub->add_option("--already-sampled", already_sampled, "already_sampled argument");
    sub->add_option("--id", id_opt, "id argument");
    sub->add_option("--design-strata", design_strata, "design_strata argument");
    sub->add_option("--n-allocated", n_col, "n_allocated argument");
    sub->add_option("--seed", seed_flag, "seed argument");
    sub->add_flag("--detailed", detailed, "detailed argument");
    sub->add_flag("--allow-small", allow_small, "allow_small argument");
    commands.push_back({sub, [&, sub] {
                          Args a;
                          for (const auto& kv : kvs) {
                            auto [k, v] = split_assignment(kv, "--arg");
                            a[k] = json_or_string(v);
                          }
                          auto given = [&](const char* flag) { return sub->count(flag) > 0; };
                          if (given("--strata")) a["strata"] = strata;
                          if (given("--y")) a["y"] = y;
                          if (nsample) a["nsample"] = *nsample;
                          if (given("--method")) a["method"] = method;
                          if (already_sampled) a["already_sampled"] = *already_sampled;
                          if (id_opt) a["id"] = *id_opt;
                          if (given("--design-strata")) a["design_strata"] = design_strata;
                          if (given("--n-allocated")) a["n_allocated"] = n_col;
                          if (seed_flag) a["seed"] = std::to_string(resolve_seed(seed_flag));
                          if (detailed) a["detailed"] = true;
                          if (allow_small) a["allow_small"] = true;
                          const auto fun = parse_function(function);
                          // The seed may also come from the environment if nothing else supplies it.
                          update_workflow(workflow_path, [&](WorkflowDoc doc) {
                            if (fun == WorkflowFunction::SampleStrata && !a.count("seed") &&
                                !find_arg(doc, Location{phase, wave}, "seed")) {
                              a["seed"] = std::to_string(resolve_seed(std::nullopt));
                            }
                            return apply_multiwave(std::move(doc), *phase, *wave, fun, a);
                          });
                        }});
  }
  {
    auto* sub = wf->add_subcommand("merge-samples", "Join a wave's sampled data onto the accumulated data");
    add_workflow(sub);
    add_location(sub, true);
    sub->add_option("--id", id_opt, "Id column (default from metadata)");
    sub->add_option("--sampled-ind", sampled_ind, "Phase sampled-indicator column (default from metadata)");
    commands.push_back({sub, [&] {
                          update_workflow(workflow_path, [&](WorkflowDoc doc) {
                            auto merged = merge_samples(std::move(doc), *phase, *wave, id_opt, sampled_ind);
                            const auto& meta = merged.phases[*phase - 1].waves[*wave - 1].metadata;
                            if (meta.contains("merge_warnings")) {
                              for (const auto& w : meta["merge_warnings"]) {
                                err << "warning: " << w.get<std::string>() << "\n";
                              }
                            }
                            return merged;
                          });
                        }});
  }
  {
    auto* sub = wf->add_subcommand("status", "Summarize the workflow");
    add_workflow(sub);
    add_out(sub);
    sub->add_option("--format", format, "text or dot")->check(CLI::IsMember({"text", "dot"}));
    commands.push_back({sub, [&] {
                          const auto doc = load_workflow(workflow_path);
                          emit_text(workflow_summary(doc, format == "dot" ? SummaryFormat::Dot : SummaryFormat::Text),
                                    out_path, out);
                        }});
  }

  // replay
  {
    auto* sub = app.add_subcommand("replay", "Run a script of subcommand lines");
    sub->add_option("script", script_path, "Script file")->required();
    sub->add_option("--workflow,-w", workflow_path, "Workflow file, available as ${WORKFLOW}");
    sub->add_option("--var", vars, "Substitution KEY=VALUE for ${KEY} (repeatable)")->allow_extra_args(false);
    commands.push_back({sub, [&] {
                          std::map<std::string, std::string> values;
                          if (!workflow_path.empty()) values["WORKFLOW"] = workflow_path;
                          for (const auto& kv : vars) {
                            auto [k, v] = split_assignment(kv, "--var");
                            values[k] = v;
                          }
                          const int code = replay(read_file_text(script_path), values, out, err);
                          if (code != kOk) throw code;
                        }});
  }

  // serve
  {
    auto* sub = app.add_subcommand("serve", "Serve the interactive design API over HTTP");
    sub->add_option("--host", host, "Bind address")->capture_default_str();
    sub->add_option("--port", port, "Port")->capture_default_str();
    sub->add_option("--max-body", max_body, "Largest accepted request body in bytes")->capture_default_str();
    sub->add_option("--cors-origin", cors_origin, "Allowed CORS origin")->capture_default_str();
    commands.push_back({sub, [&] {
                          DesignService service(ServiceOptions{max_body, cors_origin});
                          HttpServer server(service);
                          err << "listening on http://" << host << ":" << port << "\n";
                          err.flush();
                          if (!server.listen(host, port)) {
                            throw Error(ErrorKind::IoError, "cannot listen on " + host + ":" + std::to_string(port));
                          }
                        }});
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    for (const auto& c : commands) {
      if (c.app->parsed()) {
        c.run();
        break;
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (int code) {
    return code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> words;
  std::string cur;
  bool in_word = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '#' && !in_word) break;
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      if (in_word) words.push_back(std::exchange(cur, {}));
      in_word = false;
      continue;
    }
    in_word = true;
    if (c == '\'') {
      const auto end = line.find('\'', i + 1);
      if (end == std::string_view::npos) throw Error(ErrorKind::InvalidArgument, "unterminated ' quote");
      cur.append(line.substr(i + 1, end - i - 1));
      i = end;
    } else if (c == '"') {
      for (++i;; ++i) {
        if (i >= line.size()) throw Error(ErrorKind::InvalidArgument, "unterminated \" quote");
        if (line[i] == '"') break;
        if (line[i] == '\\' && i + 1 < line.size() &&
            (line[i + 1] == '"' || line[i + 1] == '\\' || line[i + 1] == '$')) {
          ++i;
        }
        cur.push_back(line[i]);
      }
    } else if (c == '\\' && i + 1 < line.size()) {
      cur.push_back(line[++i]);
    } else {
      cur.push_back(c);
    }
  }
  if (in_word) words.push_back(cur);
  return words;
}

std::string substitute(std::string_view word, const std::map<std::string, std::string>& vars) {
  std::string out;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (word[i] == '$' && i + 1 < word.size() && word[i + 1] == '{') {
      const auto end = word.find('}', i + 2);
      if (end == std::string_view::npos) throw Error(ErrorKind::InvalidArgument, "unterminated ${ in '" + std::string(word) + "'");
      const std::string key(word.substr(i + 2, end - i - 2));
      auto it = vars.find(key);
      if (it == vars.end()) {
        throw Error(ErrorKind::MissingArgument, "script variable ${" + key + "} has no value (use --var " + key + "=...)");
      }
      out += it->second;
      i = end;
    } else {
      out.push_back(word[i]);
    }
  }
  return out;
}

std::string quote(std::string_view word) {
  const bool plain = !word.empty() && std::all_of(word.begin(), word.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("_-.,/:=+@%${}").find(c) != std::string_view::npos;
  });
  if (plain) return std::string(word);
  std::string out = "'";
  for (char c : word) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  return out + "'";
}

int replay(std::string_view script, const std::map<std::string, std::string>& vars, std::ostream& out,
           std::ostream& err) {
  std::istringstream lines{std::string(script)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    std::vector<std::string> words;
    try {
      for (const auto& w : tokenize(line)) words.push_back(substitute(w, vars));
    } catch (const Error& e) {
      err << "error: line " << number << ": " << e.what() << "\n";
      return exit_code_for(e.kind());
    }
    if (words.empty()) continue;
    if (words.front() == "replay" || words.front() == "serve") {
      err << "error: line " << number << ": '" << words.front() << "' can not run inside a script\n";
      return kUsage;
    }
    const int code = run(words, out, err);
    if (code != kOk) {
      err << "error: replay stopped at line " << number << "\n";
      return code;
    }
  }
  return kOk;
}

}  // namespace stratdesign::cli
