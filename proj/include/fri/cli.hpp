#pragma once
// Command-line front end.  Subcommands pick the experiment kind; global
// flags override scalars from the config file.  Exit codes: 0 success,
// 1 operational error (bad arguments, I/O, invalid config), 2 when the run
// finished but a named check failed.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fri/cluster.hpp"
#include "fri/config.hpp"
#include "fri/experiments.hpp"
#include "fri/parallel.hpp"
#include "fri/records.hpp"

namespace fri {

namespace detail {

inline int run_sample(const ExperimentConfig& cfg,
                      const std::filesystem::path& dir) {
  const Box window{Site{}, cfg.window_radius};
  const int margin = resolved_margin(cfg, cfg.fri, cfg.window_radius);
  const ScanLimits limits{cfg.max_expected_steps};
  const auto started = std::chrono::system_clock::now();
  const BondConfig bc =
      sample_bonds(cfg.fri, window, margin, cfg.seed, limits);
  const ComponentScan cs = scan_components(bc, window.center);
  std::ostringstream edges;
  export_edge_list(bc, edges);
  const auto finished = std::chrono::system_clock::now();

  json agg;
  agg["kind"] = "sample";
  json cj;
  cj["d"] = cfg.fri.d;
  cj["u"] = cfg.fri.u;
  cj["T"] = cfg.fri.T;
  cj["N"] = cfg.window_radius;
  cj["margin"] = margin;
  cj["seed"] = cfg.seed;
  agg["config"] = std::move(cj);
  agg["grid_cells"] = bc.grid().size;
  agg["occupied_sites"] = bc.occupied_count();
  agg["bonds"] = bc.bond_count();
  agg["bond_density"] =
      static_cast<double>(bc.bond_count()) /
      (static_cast<double>(cfg.fri.d) * static_cast<double>(bc.grid().size));
  agg["component_count"] = cs.component_count;
  agg["largest_component"] = cs.max_size;
  agg["origin_occupied"] = cs.origin_occupied;
  agg["origin_in_giant"] = cs.origin_is_giant;

  json manifest;
  manifest["version"] = kToolVersion;
  manifest["kind"] = "sample";
  manifest["master_seed"] = cfg.seed;
  manifest["threads"] = 1;
  const std::string config_text = write_config(cfg);
  manifest["config_digest"] = "sha256:" + sha256_hex(config_text);
  manifest["config_text"] = config_text;
  manifest["started_utc"] = utc_timestamp(started);
  manifest["finished_utc"] = utc_timestamp(finished);
  manifest["row_count"] = 0;
  manifest["status"] = "ok";
  manifest["failed_checks"] = json::array();
  json outputs;
  outputs["edges"] = "edges.txt";
  outputs["aggregates"] = "aggregates.json";
  manifest["outputs"] = std::move(outputs);

  std::filesystem::create_directories(dir);
  write_text_file(dir / "edges.txt", edges.str());
  write_text_file(dir / "aggregates.json", agg.dump(2) + "\n");
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
  return 0;
}

inline int run_plotdata(const std::string& in_path,
                        const std::string& kind_expect,
                        const std::string& out_dir) {
  std::filesystem::path p(in_path);
  if (std::filesystem::is_directory(p)) p /= "aggregates.json";
  const json agg = json::parse(read_text_file(p));
  if (!kind_expect.empty()) {
    const std::string canon = kind_name(kind_from_name(kind_expect));
    const std::string actual =
        agg.contains("kind") ? agg.at("kind").get<std::string>() : "";
    if (canon != actual)
      throw std::invalid_argument("plot data: record kind '" + actual +
                                  "' does not match requested '" + canon +
                                  "'");
  }
  const std::filesystem::path dir =
      out_dir.empty() ? p.parent_path() : std::filesystem::path(out_dir);
  if (!dir.empty()) std::filesystem::create_directories(dir);
  for (const auto& [name, content] : emit_plot_data(agg)) {
    const std::filesystem::path fp = dir / name;
    write_text_file(fp, content);
    std::cout << "wrote " << fp.string() << "\n";
  }
  return 0;
}

inline int run_kind(ExperimentConfig cfg, const std::filesystem::path& dir) {
  RunManifestInfo info;
  info.threads_resolved = resolve_thread_count(cfg.threads);
  info.started = std::chrono::system_clock::now();
  const ExperimentResult result = run_experiment(cfg);
  info.finished = std::chrono::system_clock::now();
  const RunOutput out = write_run(dir, cfg, result, info);
  std::cout << "wrote " << out.manifest_path.string() << "\n";
  if (!result.failed_checks.empty()) {
    for (const std::string& name : result.failed_checks)
      std::cerr << "check failed: " << name << "\n";
    return 2;
  }
  return 0;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Finitary random interlacements laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> dim;
  std::optional<double> u_level;
  std::optional<double> t_length;
  std::optional<int32_t> box;
  app.add_option("--config", config_path, "Experiment config file");
  app.add_option("--seed", seed, "Master seed (overrides config)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads,
                 "Worker threads (0 = FRI_LAB_THREADS env, then hardware)");
  app.add_option("--dim", dim, "Lattice dimension d (overrides config)");
  app.add_option("--u", u_level, "Intensity u (overrides config)");
  app.add_option("--T", t_length, "Expected walk length T (overrides config)");
  app.add_option("--box", box, "Window radius N (overrides config)");

  static const char* kKinds[] = {"validate", "chemdist", "shape",
                                 "uniqueness", "crossing", "qip", "tsweep"};
  for (const char* k : kKinds)
    app.add_subcommand(k, std::string("Run the ") + k + " experiment")
        ->fallthrough();
  app.add_subcommand("sample",
                     "Draw one sample and export its bond edge list")
      ->fallthrough();
  std::string plot_in, plot_kind;
  CLI::App* plot = app.add_subcommand(
      "plotdata", "Emit CSV plot series from an aggregates record");
  plot->fallthrough();
  plot->add_option("--in", plot_in,
                   "Run directory or aggregates.json path")
      ->required();
  plot->add_option("--kind", plot_kind,
                   "Expected record kind (errors on mismatch)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "plotdata")
      return detail::run_plotdata(plot_in, plot_kind, out_dir);

    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = parse_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (dim) cfg.fri.d = *dim;
    if (u_level) cfg.fri.u = *u_level;
    if (t_length) cfg.fri.T = *t_length;
    if (box) cfg.window_radius = *box;

    if (sub == "sample") {
      cfg.fri.validate();
      if (cfg.window_radius < 1)
        throw std::invalid_argument("sample: window radius must be >= 1");
      const std::filesystem::path dir =
          out_dir.empty()
              ? std::filesystem::path("run_sample_s" +
                                      std::to_string(cfg.seed))
              : std::filesystem::path(out_dir);
      return detail::run_sample(cfg, dir);
    }

    cfg.kind = kind_from_name(sub);
    cfg.validate();
    const std::filesystem::path dir =
        out_dir.empty()
            ? std::filesystem::path(std::string("run_") +
                                    kind_name(cfg.kind) + "_s" +
                                    std::to_string(cfg.seed))
            : std::filesystem::path(out_dir);
    return detail::run_kind(std::move(cfg), dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fri
